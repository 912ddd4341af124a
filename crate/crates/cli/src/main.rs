//! `blockscope` command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

mod commands;
mod manifest;

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use blockscope_core::inference::InferenceConfig;
use blockscope_core::netcore::Span;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

/// Errors raised by the analysis library are data errors.
macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(
    std::io::Error,
    csv::Error,
    serde_json::Error,
    blockscope_core::netcore::NetError,
    blockscope_core::sbm::SbmError,
    blockscope_core::inference::InferenceError,
    blockscope_core::classify::ClassifyError,
    blockscope_core::baselines::BaselineError,
    blockscope_core::knockout::KnockoutError,
    blockscope_core::synth::SynthError
);

#[derive(Parser, Debug)]
#[command(name = "blockscope", version, about = "Block-structure analysis of interbank lending networks")]
struct Cli {
    /// Worker threads (default: available cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a transactions CSV and summarize it.
    Ingest(IngestArgs),
    /// Aggregate transactions into one edge list per window.
    Aggregate(AggregateArgs),
    /// Fit the block model to one network or a directory of networks.
    Infer(InferArgs),
    /// Tabulate structure labels of inference results by year and scale.
    Census(CensusArgs),
    /// Classical core-periphery detectors.
    #[command(subcommand)]
    Baselines(BaselinesCommand),
    /// Bank strategy categories before and after two periods.
    Strategy(StrategyArgs),
    /// Degree-mutation knockout over network pairs.
    Knockout(KnockoutArgs),
    /// Planted-structure generators and experiments.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Args, Debug, Clone)]
pub struct SeedArg {
    /// Random seed.
    #[arg(long, env = "BLOCKSCOPE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct InferenceArgs {
    /// Inference settings as JSON; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub max_blocks: Option<usize>,
}

impl InferenceArgs {
    pub fn resolve(&self, seed: Option<u64>) -> Result<InferenceConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?
            }
            None => InferenceConfig::default(),
        };
        if let Some(r) = self.restarts {
            cfg.restarts = r;
        }
        if let Some(s) = self.sweeps {
            cfg.sweeps_per_restart = s;
        }
        if let Some(m) = self.max_blocks {
            cfg.max_blocks = m;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Args, Debug, Clone)]
pub struct NetArgs {
    /// Use link presence only.
    #[arg(long, conflicts_with = "weighted")]
    pub binary: bool,
    /// Keep weights (log-discretized when not integer).
    #[arg(long)]
    pub weighted: bool,
    /// Ignore link direction.
    #[arg(long)]
    pub symmetrize: bool,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub txs: PathBuf,
    /// Keep foreign transactions.
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct AggregateArgs {
    #[arg(long)]
    pub txs: PathBuf,
    #[arg(long, value_parser = parse_span)]
    pub scale: Span,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub all: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    /// Edge list, or a directory of `.edges` files.
    #[arg(long)]
    pub net: PathBuf,
    #[command(flatten)]
    pub net_opts: NetArgs,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// JSON file, or a directory when `--net` is one.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CensusArgs {
    /// Directory of inference result files.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DegreeSort,
    Symmetric,
    Asymmetric,
    Tiering,
}

#[derive(Subcommand, Debug)]
pub enum BaselinesCommand {
    /// Run one detector on a network.
    Detect(DetectArgs),
    /// Mean discrete score over nested candidate cores of a planted ensemble.
    Bias(BiasArgs),
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct BiasArgs {
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 30)]
    pub core: usize,
    #[arg(long, default_value_t = 0.8)]
    pub p_core: f64,
    #[arg(long, default_value_t = 0.3)]
    pub p_cross: f64,
    #[arg(long, default_value_t = 0.05)]
    pub p_periphery: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub seed: SeedArg,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct StrategyArgs {
    #[arg(long)]
    pub txs: PathBuf,
    /// Inclusive date range `FIRST..LAST`.
    #[arg(long, value_parser = commands::parse_period)]
    pub before: commands::Period,
    #[arg(long, value_parser = commands::parse_period)]
    pub after: commands::Period,
    #[arg(long)]
    pub all: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct KnockoutArgs {
    /// Suite manifest listing pair edge lists.
    #[arg(long)]
    pub pairs: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum SynthCommand {
    /// Draw networks from a planted scenario.
    Generate(GenerateArgs),
    /// Random bank removal followed by classification.
    Removal(RemovalArgs),
    /// Network pairs with planted critical banks.
    Suite(SuiteArgs),
}

#[derive(Args, Debug)]
pub struct ScenarioArgs {
    /// Scenario JSON; defaults to the 45 + 30 bank bipartite average.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Resize the default scenario to this many banks, keeping block shares.
    #[arg(long, conflicts_with = "scenario")]
    pub n: Option<usize>,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 10)]
    pub networks: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RemovalArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 60)]
    pub target: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub inference: InferenceArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SuiteArgs {
    #[arg(long, default_value_t = 60)]
    pub pairs: usize,
    #[arg(long, default_value_t = 2)]
    pub critical: usize,
    #[arg(long, default_value_t = 30)]
    pub banks: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_span(s: &str) -> Result<Span, String> {
    s.parse()
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Aggregate(a) => commands::aggregate(a),
        Command::Infer(a) => commands::infer(a),
        Command::Census(a) => commands::census(a),
        Command::Baselines(BaselinesCommand::Detect(a)) => commands::detect(a),
        Command::Baselines(BaselinesCommand::Bias(a)) => commands::bias(a),
        Command::Strategy(a) => commands::strategy(a),
        Command::Knockout(a) => commands::knockout(a),
        Command::Synth(SynthCommand::Generate(a)) => commands::generate(a),
        Command::Synth(SynthCommand::Removal(a)) => commands::removal(a),
        Command::Synth(SynthCommand::Suite(a)) => commands::suite(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(CliError::Usage(e.to_string())),
        },
        None => run(cli.command),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("blockscope: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 1,
                CliError::Data(_) => 2,
            })
        }
    }
}
