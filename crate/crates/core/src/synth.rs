//! Planted-structure generators with known ground truth.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{label_affinity, ClassifyError, Structure, StructureLabel};
use crate::inference::{InferenceConfig, InferenceError};
use crate::knockout::{infer_label, restrict_common, KnockoutError, NetworkPair};
use crate::netcore::{AggregatedNetwork, BankId, NetworkKind};
use crate::sbm::{sample, AffinityMatrix, BlockAssignment, SbmError};
use crate::seed;

pub const SUITE_MAX_ATTEMPTS: u64 = 50;

#[derive(Error, Debug)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("suite construction failed: {0}")]
    Suite(String),
    #[error(transparent)]
    Sbm(#[from] SbmError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Knockout(#[from] KnockoutError),
}

/// Serialized form of a [`PlantedScenario`]. Nodes `0..sizes[0]` form block
/// 0, the next `sizes[1]` block 1, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub sizes: Vec<usize>,
    pub affinity: AffinityMatrix,
    pub n_networks: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedScenario {
    pub assignment: BlockAssignment,
    pub affinity: AffinityMatrix,
    pub n_networks: usize,
    pub seed: u64,
    pub truth_label: StructureLabel,
}

impl PlantedScenario {
    pub fn new(spec: ScenarioSpec) -> Result<Self, SynthError> {
        if spec.sizes.len() != spec.affinity.m() {
            return Err(SynthError::Config(format!(
                "{} block sizes for a {}-block affinity",
                spec.sizes.len(),
                spec.affinity.m()
            )));
        }
        if spec.sizes.contains(&0) {
            return Err(SynthError::Config("empty block".into()));
        }
        let labels: Vec<usize> = spec
            .sizes
            .iter()
            .enumerate()
            .flat_map(|(r, &n)| std::iter::repeat_n(r, n))
            .collect();
        let truth_label = if spec.affinity.m() == 2 {
            label_affinity(&spec.affinity)?
        } else if spec.affinity.m() == 1 {
            StructureLabel::random()
        } else {
            return Err(SynthError::Config("scenarios have one or two blocks".into()));
        };
        Ok(PlantedScenario {
            assignment: BlockAssignment::new(labels, spec.sizes.len())?,
            affinity: spec.affinity,
            n_networks: spec.n_networks,
            seed: spec.seed,
            truth_label,
        })
    }

    /// Average 2010 affinity: 45 borrowers (block 0) and 30 lenders (block 1).
    pub fn average_2010(n_networks: usize, seed: u64) -> Self {
        Self::new(ScenarioSpec {
            sizes: vec![45, 30],
            affinity: AffinityMatrix::bernoulli(vec![vec![0.0116, 0.0020], vec![0.23, 0.037]])
                .expect("valid probabilities"),
            n_networks,
            seed,
        })
        .expect("valid scenario")
    }

    pub fn spec(&self) -> ScenarioSpec {
        ScenarioSpec {
            sizes: self.assignment.sizes(),
            affinity: self.affinity.clone(),
            n_networks: self.n_networks,
            seed: self.seed,
        }
    }

    pub fn n(&self) -> usize {
        self.assignment.n()
    }
}

/// Network `k` is drawn with seed `derive(s.seed, k)`.
pub fn generate_scenario(s: &PlantedScenario) -> Result<Vec<AggregatedNetwork>, SynthError> {
    (0..s.n_networks)
        .into_par_iter()
        .map(|k| Ok(sample(&s.assignment, &s.affinity, seed::derive(s.seed, k as u64))?))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemovalReport {
    pub n: usize,
    pub target_n: usize,
    pub replications: usize,
    pub seed: u64,
    pub truth: Structure,
    pub successes: usize,
    pub fraction: f64,
    /// Replications per inferred label, in `Structure::ALL` order.
    pub labels: [usize; 4],
}

/// Replication `r` samples with `derive(seed, r)`, removes banks with stream
/// 1 of that seed and infers with a seed derived from it.
pub fn removal_experiment(
    s: &PlantedScenario,
    target_n: usize,
    replications: usize,
    seed: u64,
    cfg: &InferenceConfig,
) -> Result<RemovalReport, SynthError> {
    let n = s.n();
    if target_n > n || target_n == 0 {
        return Err(SynthError::Config(format!("target {target_n} outside 1..={n}")));
    }
    if replications == 0 {
        return Err(SynthError::Config("no replications".into()));
    }
    cfg.validate()?;
    let labels: Vec<Structure> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = seed::derive(seed, r as u64);
            let net = sample(&s.assignment, &s.affinity, rep_seed)?;
            let mut keep = index::sample(&mut seed::stream(rep_seed, 1), n, target_n).into_vec();
            keep.sort_unstable();
            let kept = net.induced(&keep);
            let rep_cfg = cfg.clone().with_seed(seed::derive(rep_seed, 1));
            Ok(infer_label(&kept, &rep_cfg)?.value)
        })
        .collect::<Result<_, SynthError>>()?;
    let mut counts = [0; 4];
    for l in &labels {
        counts[Structure::ALL.iter().position(|x| x == l).expect("listed")] += 1;
    }
    let successes = labels.iter().filter(|&&l| l == s.truth_label.value).count();
    Ok(RemovalReport {
        n,
        target_n,
        replications,
        seed,
        truth: s.truth_label.value,
        successes,
        fraction: successes as f64 / replications as f64,
        labels: counts,
    })
}

/// Parameters of the planted pairs behind [`build_knockout_suite`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub n_banks: usize,
    /// Lender to borrower link probability in the first network.
    pub p_lend: f64,
    /// Probability of every other ordered pair except lender to lender.
    pub p_background: f64,
    /// Share of remaining pairs resampled in the second network.
    pub noise: f64,
    pub inference: InferenceConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            n_banks: 30,
            p_lend: 0.8,
            p_background: 0.05,
            noise: 0.02,
            inference: InferenceConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnockoutSuite {
    pub pairs: Vec<NetworkPair>,
    /// Banks whose links differ by construction between `a` and `b`.
    pub critical: Vec<BankId>,
    /// Lender block of every `a`.
    pub lenders: Vec<BankId>,
    /// Draws used per pair, at least 1.
    pub attempts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuitePairEntry {
    pub index: usize,
    pub a: String,
    pub b: String,
    pub attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteManifest {
    pub seed: u64,
    pub n_critical: usize,
    pub critical: Vec<BankId>,
    pub lenders: Vec<BankId>,
    pub config: SuiteConfig,
    pub pairs: Vec<SuitePairEntry>,
}

impl KnockoutSuite {
    /// `files[k]` names the edge lists of pair `k`.
    pub fn manifest(&self, seed: u64, config: &SuiteConfig, files: &[(String, String)]) -> SuiteManifest {
        SuiteManifest {
            seed,
            n_critical: self.critical.len(),
            critical: self.critical.clone(),
            lenders: self.lenders.clone(),
            config: config.clone(),
            pairs: files
                .iter()
                .zip(&self.attempts)
                .enumerate()
                .map(|(index, ((a, b), &attempts))| SuitePairEntry {
                    index,
                    a: a.clone(),
                    b: b.clone(),
                    attempts,
                })
                .collect(),
        }
    }
}

fn bernoulli(rng: &mut seed::Rng, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// Pairs whose first network is planted bipartite with the critical banks
/// (or a random half of them, when they exceed half the roster) as lenders,
/// and whose second network resamples every link touching a critical bank,
/// plus a `noise` share of the others, at the first network's density.
/// Each pair is redrawn until its restricted networks label bipartite and
/// random respectively.
pub fn build_knockout_suite(
    n_pairs: usize,
    n_critical: usize,
    seed: u64,
    cfg: &SuiteConfig,
) -> Result<KnockoutSuite, SynthError> {
    let n = cfg.n_banks;
    if n_critical == 0 || n_critical > n {
        return Err(SynthError::Config(format!("n_critical {n_critical} outside 1..={n}")));
    }
    for (name, p) in [("p_lend", cfg.p_lend), ("p_background", cfg.p_background), ("noise", cfg.noise)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(SynthError::Config(format!("{name} = {p} is not a probability")));
        }
    }
    cfg.inference.validate()?;

    let mut roster_rng = seed::stream(seed, 0);
    let mut critical = index::sample(&mut roster_rng, n, n_critical).into_vec();
    critical.sort_unstable();
    let mut lenders = if n_critical <= n / 2 {
        critical.clone()
    } else {
        let half = index::sample(&mut roster_rng, n_critical, n / 2).into_vec();
        half.into_iter().map(|k| critical[k]).collect()
    };
    lenders.sort_unstable();

    let mut labels = vec![0; n];
    for &l in &lenders {
        labels[l] = 1;
    }
    let g = BlockAssignment::new(labels, 2)?;
    let p = AffinityMatrix::bernoulli(vec![
        vec![cfg.p_background, cfg.p_background],
        vec![cfg.p_lend, 0.0],
    ])?;
    let mut is_critical = vec![false; n];
    for &c in &critical {
        is_critical[c] = true;
    }

    let draws: Vec<(NetworkPair, u64)> = (0..n_pairs)
        .into_par_iter()
        .map(|k| {
            let pair_seed = seed::derive(seed, k as u64 + 1);
            for attempt in 0..SUITE_MAX_ATTEMPTS {
                let draw_seed = seed::derive(pair_seed, attempt);
                let a = sample(&g, &p, draw_seed)?;
                let rho = a.link_count() as f64 / (n * (n - 1)) as f64;
                let mut rng = seed::stream(draw_seed, 1);
                let mut w = a.weights().to_vec();
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let touched = is_critical[i] || is_critical[j];
                        // one draw per pair keeps the stream aligned
                        let u = rng.random::<f64>();
                        if touched || u < cfg.noise {
                            w[i * n + j] = bernoulli(&mut rng, rho);
                        }
                    }
                }
                let b = AggregatedNetwork::from_dense(a.nodes().to_vec(), w, NetworkKind::DirectedBinary)
                    .expect("binary weights");
                let pair = NetworkPair::new(a, b);
                let ids = pair.a.nodes();
                let covered = critical.iter().all(|&c| pair.common().contains(&ids[c]));
                if covered && pair_is_valid(&pair, &cfg.inference)? {
                    return Ok((pair, attempt + 1));
                }
            }
            Err(SynthError::Suite(format!(
                "pair {k} failed its preconditions {SUITE_MAX_ATTEMPTS} times"
            )))
        })
        .collect::<Result<_, SynthError>>()?;

    let ids = AggregatedNetwork::synthetic_ids(n);
    let (pairs, attempts) = draws.into_iter().unzip();
    Ok(KnockoutSuite {
        pairs,
        critical: critical.iter().map(|&i| ids[i].clone()).collect(),
        lenders: lenders.iter().map(|&i| ids[i].clone()).collect(),
        attempts,
    })
}

fn pair_is_valid(pair: &NetworkPair, cfg: &InferenceConfig) -> Result<bool, SynthError> {
    let c = restrict_common(pair)?;
    if infer_label(&c, cfg)?.value != Structure::Bipartite {
        return Ok(false);
    }
    let d = pair.b.induced_by_ids(pair.common()).map_err(KnockoutError::from)?;
    Ok(infer_label(&d, cfg)?.value == Structure::Random)
}
