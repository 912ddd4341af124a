use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use blockscope_core::bankstrat::{categorize, daily_net_balance, transition_matrix, Categorization};
use blockscope_core::baselines::{
    asymmetric_continuous, discrete_cp_degree_sort, expected_z_bias, symmetric_continuous, tiering_cp,
    BaselineError, CorePeripheryParams, CorenessVectors,
};
use blockscope_core::classify::{align_roles, structure_census, ResultRecord};
use blockscope_core::inference::{select_model, InferenceConfig};
use blockscope_core::knockout::{score_ordered_validation, structural_score, NetworkPair};
use blockscope_core::netcore::{
    aggregate_schedule, binarize, discretize_weights, ingest as read_txs, read_edge_list, symmetrize,
    write_edge_list, AggregatedNetwork, BankId, Span, Transaction,
};
use blockscope_core::synth::{
    build_knockout_suite, generate_scenario, removal_experiment, PlantedScenario, ScenarioSpec, SuiteConfig,
};

use crate::manifest::{sorted_entries, RunManifest};
use crate::{
    create_dir, write_json, AggregateArgs, BiasArgs, CensusArgs, CliError, DetectArgs, GenerateArgs, InferArgs,
    IngestArgs, KnockoutArgs, Method, NetArgs, RemovalArgs, ScenarioArgs, StrategyArgs, SuiteArgs,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Period {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

impl Period {
    fn contains(&self, d: NaiveDate) -> bool {
        self.first <= d && d <= self.last
    }
}

pub fn parse_period(s: &str) -> Result<Period, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected FIRST..LAST, got `{s}`"))?;
    let first: NaiveDate = a.parse().map_err(|e| format!("bad date `{a}`: {e}"))?;
    let last: NaiveDate = b.parse().map_err(|e| format!("bad date `{b}`: {e}"))?;
    if last < first {
        return Err(format!("period `{s}` ends before it starts"));
    }
    Ok(Period { first, last })
}

fn is_ext(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e == ext)
}

fn is_manifest(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n == "manifest.json" || n.ends_with(".manifest.json"))
}

fn read_net(path: &Path) -> Result<AggregatedNetwork, CliError> {
    read_edge_list(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_txs(path: &Path, all: bool) -> Result<Vec<Transaction>, CliError> {
    read_txs(path, !all).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Inference input: binary by default; `--weighted` keeps integer weights
/// and log-discretizes any others.
fn prepare_for_inference(net: &AggregatedNetwork, opts: &NetArgs) -> Result<AggregatedNetwork, CliError> {
    let net = if opts.weighted {
        if net.has_integer_weights() {
            net.clone()
        } else {
            discretize_weights(net)?
        }
    } else {
        binarize(net)
    };
    Ok(if opts.symmetrize { symmetrize(&net) } else { net })
}

#[derive(Serialize)]
struct NetSettings {
    binary: bool,
    weighted: bool,
    symmetrize: bool,
}

impl From<&NetArgs> for NetSettings {
    fn from(a: &NetArgs) -> Self {
        NetSettings {
            binary: a.binary,
            weighted: a.weighted,
            symmetrize: a.symmetrize,
        }
    }
}

#[derive(Serialize)]
struct IngestSummary {
    transactions: usize,
    banks: usize,
    first_date: Option<String>,
    last_date: Option<String>,
    active_days: usize,
    total_volume_eur: f64,
    domestic_only: bool,
}

pub fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let txs = load_txs(&a.txs, a.all)?;
    let banks: BTreeSet<&BankId> = txs.iter().flat_map(|t| [&t.lender, &t.borrower]).collect();
    let days: BTreeSet<NaiveDate> = txs.iter().map(|t| t.date).collect();
    let summary = IngestSummary {
        transactions: txs.len(),
        banks: banks.len(),
        first_date: days.first().map(|d| d.to_string()),
        last_date: days.last().map(|d| d.to_string()),
        active_days: days.len(),
        total_volume_eur: txs.iter().map(|t| t.volume).sum(),
        domestic_only: !a.all,
    };
    write_json(&a.out, &summary)?;
    let mut m = RunManifest::new("ingest", None, serde_json::json!({ "domestic_only": !a.all }))?;
    m.input(&a.txs)?;
    m.output(&a.out);
    m.write(&a.out, false)?;
    Ok(())
}

pub fn aggregate(a: AggregateArgs) -> Result<(), CliError> {
    let txs = load_txs(&a.txs, a.all)?;
    let nets = aggregate_schedule(&txs, a.scale)?;
    create_dir(&a.out)?;
    let mut m = RunManifest::new(
        "aggregate",
        None,
        serde_json::json!({
            "scale": a.scale,
            "domestic_only": !a.all,
            "network": NetSettings::from(&a.net),
        }),
    )?;
    m.input(&a.txs)?;
    for net in &nets {
        let window = net.window().expect("aggregated windows");
        let mut net = if a.net.binary { binarize(net) } else { net.clone() };
        if a.net.symmetrize {
            net = symmetrize(&net);
        }
        let path = a.out.join(format!("{}_{}.edges", window.start, window.span));
        write_edge_list(&net, &path)?;
        m.output(&path);
    }
    m.write(&a.out, true)?;
    Ok(())
}

fn infer_record(net: &AggregatedNetwork, cfg: &InferenceConfig) -> Result<ResultRecord, CliError> {
    let mut result = select_model(net, cfg)?;
    if result.m() == 2 {
        let (g, p) = align_roles(net, &result.assignment, &result.affinity)?;
        result.assignment = g;
        result.affinity = p;
    }
    Ok(ResultRecord::new(&result, net)?)
}

pub fn infer(a: InferArgs) -> Result<(), CliError> {
    let cfg = a.inference.resolve(a.seed.seed)?;
    let mut m = RunManifest::new(
        "infer",
        Some(cfg.seed),
        serde_json::json!({ "inference": &cfg, "network": NetSettings::from(&a.net_opts) }),
    )?;
    m.input(&a.net)?;
    if a.net.is_dir() {
        let inputs: Vec<PathBuf> = sorted_entries(&a.net)?.into_iter().filter(|p| is_ext(p, "edges")).collect();
        create_dir(&a.out)?;
        // windows without activity have fewer than two banks
        let records: Vec<(PathBuf, Option<ResultRecord>)> = inputs
            .par_iter()
            .map(|path| {
                let net = prepare_for_inference(&read_net(path)?, &a.net_opts)?;
                let stem = path.file_stem().expect("file name").to_string_lossy().into_owned();
                let record = if net.n() < 2 { None } else { Some(infer_record(&net, &cfg)?) };
                Ok((a.out.join(format!("{stem}.json")), record))
            })
            .collect::<Result<_, CliError>>()?;
        for ((path, record), input) in records.iter().zip(&inputs) {
            match record {
                Some(record) => {
                    write_json(path, record)?;
                    m.output(path);
                }
                None => m.skipped.push(format!("{}: fewer than 2 banks", input.display())),
            }
        }
        m.write(&a.out, true)?;
    } else {
        let net = prepare_for_inference(&read_net(&a.net)?, &a.net_opts)?;
        write_json(&a.out, &infer_record(&net, &cfg)?)?;
        m.output(&a.out);
        m.write(&a.out, false)?;
    }
    Ok(())
}

pub fn census(a: CensusArgs) -> Result<(), CliError> {
    if !a.results.is_dir() {
        return Err(CliError::Usage(format!("{} is not a directory", a.results.display())));
    }
    let files: Vec<PathBuf> = sorted_entries(&a.results)?
        .into_iter()
        .filter(|p| is_ext(p, "json") && !is_manifest(p))
        .collect();
    let mut labeled = Vec::new();
    let mut m = RunManifest::new("census", None, serde_json::json!({}))?;
    for path in &files {
        let text = fs::read_to_string(path)?;
        let record: ResultRecord =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let window = record
            .window
            .ok_or_else(|| CliError::Data(format!("{}: result has no aggregation window", path.display())))?;
        labeled.push((window, record.label));
        m.input(path)?;
    }
    let table = structure_census(&labeled);
    table.write_csv(fs::File::create(&a.out)?)?;
    m.output(&a.out);
    m.write(&a.out, false)?;
    Ok(())
}

#[derive(Serialize)]
struct DiscreteOutput<'a> {
    method: Method,
    nodes: &'a [BankId],
    core: Vec<&'a BankId>,
    score: f64,
}

#[derive(Serialize)]
struct ContinuousOutput<'a> {
    method: Method,
    nodes: &'a [BankId],
    converged: bool,
    #[serde(flatten)]
    coreness: CorenessVectors,
}

pub fn detect(a: DetectArgs) -> Result<(), CliError> {
    let raw = read_net(&a.net)?;
    let directed = binarize(&raw);
    let net = match a.method {
        Method::DegreeSort | Method::Symmetric => symmetrize(&directed),
        Method::Asymmetric | Method::Tiering => directed,
    };
    let nodes = net.nodes();
    let discrete = |core: Vec<usize>, score: f64| DiscreteOutput {
        method: a.method,
        nodes,
        core: core.iter().map(|&i| &nodes[i]).collect(),
        score,
    };
    let continuous = |fit: Result<CorenessVectors, BaselineError>| -> Result<ContinuousOutput, CliError> {
        let (converged, coreness) = match fit {
            Ok(c) => (true, c),
            Err(BaselineError::Convergence { best, .. }) => (false, best),
            Err(e) => return Err(e.into()),
        };
        Ok(ContinuousOutput {
            method: a.method,
            nodes,
            converged,
            coreness,
        })
    };
    match a.method {
        Method::DegreeSort => {
            let c = discrete_cp_degree_sort(&net)?;
            write_json(&a.out, &discrete(c.core, c.score))?
        }
        Method::Tiering => {
            let c = tiering_cp(&net)?;
            write_json(&a.out, &discrete(c.core, c.score))?
        }
        Method::Symmetric => write_json(&a.out, &continuous(symmetric_continuous(&net))?)?,
        Method::Asymmetric => write_json(&a.out, &continuous(asymmetric_continuous(&net))?)?,
    }
    let mut m = RunManifest::new("baselines detect", None, serde_json::json!({ "method": a.method }))?;
    m.input(&a.net)?;
    m.output(&a.out);
    m.write(&a.out, false)?;
    Ok(())
}

pub fn bias(a: BiasArgs) -> Result<(), CliError> {
    let seed = a.seed.seed.unwrap_or(0);
    let params = CorePeripheryParams {
        n: a.n,
        core_size: a.core,
        p_core: a.p_core,
        p_cross: a.p_cross,
        p_periphery: a.p_periphery,
    };
    let curve = expected_z_bias(params, a.samples, seed)?;
    curve.write_csv(fs::File::create(&a.out)?)?;
    let mut m = RunManifest::new("baselines bias", Some(seed), &a)?;
    m.output(&a.out);
    m.write(&a.out, false)?;
    Ok(())
}

#[derive(Serialize)]
struct DayResidual {
    date: NaiveDate,
    residual: f64,
}

#[derive(Serialize)]
struct Conservation {
    max_abs_residual: f64,
    days: Vec<DayResidual>,
}

#[derive(Serialize)]
struct Categories<'a> {
    before: &'a Categorization,
    after: &'a Categorization,
}

pub fn strategy(a: StrategyArgs) -> Result<(), CliError> {
    let txs = load_txs(&a.txs, a.all)?;
    let roster: Vec<BankId> = txs
        .iter()
        .flat_map(|t| [t.lender.clone(), t.borrower.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let days = aggregate_schedule(&txs, Span::Day)?;
    let start = |d: &AggregatedNetwork| d.window().expect("aggregated windows").start;
    let period =
        |p: &Period| -> Vec<AggregatedNetwork> { days.iter().filter(|d| p.contains(start(d))).cloned().collect() };
    let before = categorize(&period(&a.before), &roster);
    let after = categorize(&period(&a.after), &roster);
    let transitions = transition_matrix(&before, &after);

    let residuals: Vec<DayResidual> = days
        .iter()
        .map(|d| DayResidual {
            date: start(d),
            residual: d.nodes().iter().map(|b| daily_net_balance(d, b)).sum(),
        })
        .collect();
    let conservation = Conservation {
        max_abs_residual: residuals.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
        days: residuals,
    };

    create_dir(&a.out)?;
    let transition_path = a.out.join("transition.csv");
    transitions.write_csv(fs::File::create(&transition_path)?)?;
    let categories_path = a.out.join("categories.json");
    write_json(
        &categories_path,
        &Categories {
            before: &before,
            after: &after,
        },
    )?;
    let conservation_path = a.out.join("conservation.json");
    write_json(&conservation_path, &conservation)?;

    let mut m = RunManifest::new(
        "strategy",
        None,
        serde_json::json!({ "before": a.before, "after": a.after, "domestic_only": !a.all }),
    )?;
    m.input(&a.txs)?;
    for p in [&transition_path, &categories_path, &conservation_path] {
        m.output(p);
    }
    m.write(&a.out, true)?;
    Ok(())
}

#[derive(Deserialize)]
struct PairFiles {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Deserialize)]
struct PairList {
    pairs: Vec<PairFiles>,
}

pub fn knockout(a: KnockoutArgs) -> Result<(), CliError> {
    let cfg = a.inference.resolve(a.seed.seed)?;
    let text = fs::read_to_string(&a.pairs).map_err(|e| CliError::Data(format!("{}: {e}", a.pairs.display())))?;
    let list: PairList =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", a.pairs.display())))?;
    let base = a.pairs.parent().unwrap_or(Path::new("."));
    let mut m = RunManifest::new("knockout", Some(cfg.seed), &cfg)?;
    m.input(&a.pairs)?;
    let mut pairs = Vec::with_capacity(list.pairs.len());
    for p in &list.pairs {
        let (pa, pb) = (base.join(&p.a), base.join(&p.b));
        m.input(&pa)?;
        m.input(&pb)?;
        pairs.push(NetworkPair::new(binarize(&read_net(&pa)?), binarize(&read_net(&pb)?)));
    }
    let report = structural_score(&pairs, &cfg)?;
    let validation = score_ordered_validation(&pairs, &report, &cfg)?;

    create_dir(&a.out)?;
    let report_path = a.out.join("report.json");
    write_json(&report_path, &report)?;
    let histogram_path = a.out.join("histogram.csv");
    report.write_histogram_csv(fs::File::create(&histogram_path)?)?;
    let validation_path = a.out.join("validation.json");
    write_json(&validation_path, &validation)?;
    for p in [&report_path, &histogram_path, &validation_path] {
        m.output(p);
    }
    m.write(&a.out, true)?;
    Ok(())
}

fn resolve_scenario(a: &ScenarioArgs) -> Result<PlantedScenario, CliError> {
    if let Some(path) = &a.scenario {
        let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let spec: ScenarioSpec =
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        return Ok(PlantedScenario::new(spec)?);
    }
    let base = PlantedScenario::average_2010(0, 0);
    match a.n {
        None => Ok(base),
        Some(n) => {
            let borrowers = (n as f64 * 45.0 / 75.0).round() as usize;
            if borrowers == 0 || borrowers >= n {
                return Err(CliError::Usage(format!("cannot split {n} banks into two groups")));
            }
            let mut spec = base.spec();
            spec.sizes = vec![borrowers, n - borrowers];
            Ok(PlantedScenario::new(spec)?)
        }
    }
}

pub fn generate(a: GenerateArgs) -> Result<(), CliError> {
    let mut spec = resolve_scenario(&a.scenario)?.spec();
    spec.n_networks = a.networks;
    spec.seed = a.seed.seed.unwrap_or(spec.seed);
    let scenario = PlantedScenario::new(spec.clone())?;
    let nets = generate_scenario(&scenario)?;

    create_dir(&a.out)?;
    let mut m = RunManifest::new("synth generate", Some(spec.seed), &spec)?;
    if let Some(p) = &a.scenario.scenario {
        m.input(p)?;
    }
    let spec_path = a.out.join("scenario.json");
    write_json(&spec_path, &spec)?;
    m.output(&spec_path);
    for (k, net) in nets.iter().enumerate() {
        let path = a.out.join(format!("net_{k:04}.edges"));
        write_edge_list(net, &path)?;
        m.output(&path);
    }
    m.write(&a.out, true)?;
    Ok(())
}

pub fn removal(a: RemovalArgs) -> Result<(), CliError> {
    let scenario = resolve_scenario(&a.scenario)?;
    let seed = a.seed.seed.unwrap_or(0);
    let cfg = a.inference.resolve(Some(seed))?;
    if a.target > scenario.n() {
        return Err(CliError::Usage(format!("--target {} exceeds {} banks", a.target, scenario.n())));
    }
    let report = removal_experiment(&scenario, a.target, a.reps, seed, &cfg)?;
    write_json(&a.out, &report)?;
    let mut m = RunManifest::new(
        "synth removal",
        Some(seed),
        serde_json::json!({ "scenario": scenario.spec(), "inference": cfg }),
    )?;
    if let Some(p) = &a.scenario.scenario {
        m.input(p)?;
    }
    m.output(&a.out);
    m.write(&a.out, false)?;
    Ok(())
}

pub fn suite(a: SuiteArgs) -> Result<(), CliError> {
    let seed = a.seed.seed.unwrap_or(0);
    let config = SuiteConfig {
        n_banks: a.banks,
        inference: a.inference.resolve(Some(seed))?,
        ..SuiteConfig::default()
    };
    if a.critical == 0 || a.critical > a.banks {
        return Err(CliError::Usage(format!("--critical must lie in 1..={}", a.banks)));
    }
    let suite = build_knockout_suite(a.pairs, a.critical, seed, &config)?;

    create_dir(&a.out)?;
    let mut m = RunManifest::new("synth suite", Some(seed), &config)?;
    let mut files = Vec::new();
    for (k, pair) in suite.pairs.iter().enumerate() {
        let names = (format!("pair_{k:03}_a.edges"), format!("pair_{k:03}_b.edges"));
        for (net, name) in [(&pair.a, &names.0), (&pair.b, &names.1)] {
            let path = a.out.join(name);
            write_edge_list(net, &path)?;
            m.output(&path);
        }
        files.push(names);
    }
    let suite_path = a.out.join("suite.json");
    write_json(&suite_path, &suite.manifest(seed, &config, &files))?;
    m.output(&suite_path);
    m.write(&a.out, true)?;
    Ok(())
}
