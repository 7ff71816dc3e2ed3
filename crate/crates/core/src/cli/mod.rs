//! Command-line front end: option resolution, run dispatch and exit codes.
//!
//! Every option can come from a flag, from a `key=value` config file named
//! by `--config` (keys are the flag names without dashes), or from a
//! built-in default, in that order of precedence. The seed additionally
//! falls back to `GRULSTM_SEED` before its default. Each run writes the
//! fully resolved options to `<out>/<command>.conf`, which `--config`
//! accepts as-is.

mod config;
mod run;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use config::{parse_config, parse_config_text};
pub use run::{dispatch, Outcome};

use crate::baselines::Criterion;
use crate::dataio::SequenceMode;
use crate::evaluation::{HistoryFormat, SweepParameter};
use crate::recurrent::Architecture;
use crate::training::{LossKind, OptimizerKind};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{message}")]
    Runtime { code: &'static str, message: String },
}

impl CliError {
    pub(crate) fn runtime(code: &'static str, e: impl fmt::Display) -> Self {
        CliError::Runtime {
            code,
            message: e.to_string(),
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Runtime { code, .. } => code,
        }
    }

    pub fn exit_status(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime { .. } => 1,
        }
    }

    /// `error[<code>]: <message>` on a single line.
    pub fn line(&self) -> String {
        let msg = self.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error[{}]: {msg}", self.code())
    }
}

macro_rules! runtime_from {
    ($($t:ty => $code:literal),* $(,)?) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::runtime($code, e)
            }
        }
    )*};
}

runtime_from! {
    crate::dataio::DataError => "data",
    crate::training::TrainError => "train",
    crate::training::PersistError => "model",
    crate::evaluation::EvalError => "eval",
    crate::baselines::BaselineError => "baseline",
    crate::recurrent::RecurrentError => "model",
    std::io::Error => "io",
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Evaluate,
    Predict,
    Baseline,
    Sweep,
    Gradcheck,
    Subsample,
    Synth,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Predict => "predict",
            Command::Baseline => "baseline",
            Command::Sweep => "sweep",
            Command::Gradcheck => "gradcheck",
            Command::Subsample => "subsample",
            Command::Synth => "synth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Recurrent(Architecture),
    Tree,
    Forest,
    GradientBoost,
    Xgb,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Recurrent(a) => a.name(),
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::GradientBoost => "gb",
            ModelKind::Xgb => "xgb",
        }
    }

    pub fn architecture(self) -> Option<Architecture> {
        match self {
            ModelKind::Recurrent(a) => Some(a),
            _ => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tree" => Ok(ModelKind::Tree),
            "forest" => Ok(ModelKind::Forest),
            "gb" => Ok(ModelKind::GradientBoost),
            "xgb" => Ok(ModelKind::Xgb),
            other => other
                .parse::<Architecture>()
                .map(ModelKind::Recurrent)
                .map_err(|_| format!("unknown model `{other}` (gru|lstm|grulstm|tree|forest|gb|xgb)")),
        }
    }
}

/// Fully resolved options of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub data: Option<PathBuf>,
    pub model: ModelKind,
    /// Model file read by `evaluate`/`predict`; defaults to `<out>/model.json`.
    pub load: Option<PathBuf>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub optimizer: OptimizerKind,
    pub loss: LossKind,
    pub truncation: Option<usize>,
    /// Width of every recurrent and hidden dense layer.
    pub units: usize,
    pub seed: u64,
    pub mode: SequenceMode,
    pub test_fraction: f64,
    pub stratified: bool,
    pub out: PathBuf,
    pub sweep: Option<SweepParameter>,
    pub values: Option<Vec<f64>>,
    pub n: Option<usize>,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub trees: usize,
    pub rounds: usize,
    pub format: HistoryFormat,
}

impl RunConfig {
    /// Path of the model file this run reads.
    pub fn model_path(&self) -> PathBuf {
        self.load.clone().unwrap_or_else(|| self.out.join("model.json"))
    }
}

/// Raw string-valued options, as typed on the command line.
#[derive(Debug, Clone, Default, Args)]
pub struct RawOptions {
    /// Input CSV with columns x,y,z,intensity,r,g,b,class
    #[arg(long)]
    pub data: Option<String>,
    /// gru | lstm | grulstm | tree | forest | gb | xgb
    #[arg(long)]
    pub model: Option<String>,
    /// Model file to evaluate or predict with (default <out>/model.json)
    #[arg(long)]
    pub load: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long = "batch-size")]
    pub batch_size: Option<String>,
    #[arg(long = "learning-rate")]
    pub learning_rate: Option<String>,
    #[arg(long)]
    pub dropout: Option<String>,
    /// adam | sgd
    #[arg(long)]
    pub optimizer: Option<String>,
    /// bce | softmax
    #[arg(long)]
    pub loss: Option<String>,
    /// Backpropagate through at most this many trailing steps
    #[arg(long)]
    pub truncation: Option<String>,
    /// Recurrent/dense layer width
    #[arg(long)]
    pub units: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// point | window
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub window: Option<String>,
    #[arg(long = "test-fraction")]
    pub test_fraction: Option<String>,
    /// Stratify the train/test split and subsampling by class
    #[arg(long)]
    pub stratified: bool,
    /// Output directory
    #[arg(long)]
    pub out: Option<String>,
    /// key=value option file
    #[arg(long)]
    pub config: Option<String>,
    /// batch | dropout
    #[arg(long)]
    pub sweep: Option<String>,
    /// Comma-separated sweep values
    #[arg(long)]
    pub values: Option<String>,
    /// Row count for subsample and synth
    #[arg(long)]
    pub n: Option<String>,
    /// gini | entropy | misclassification
    #[arg(long)]
    pub criterion: Option<String>,
    /// Tree depth limit, or `none`
    #[arg(long = "max-depth")]
    pub max_depth: Option<String>,
    /// Forest size
    #[arg(long)]
    pub trees: Option<String>,
    /// Boosting rounds
    #[arg(long)]
    pub rounds: Option<String>,
    /// csv | json for history and sweep tables
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Parser)]
#[command(name = "grulstm", version, about = "Recurrent point-cloud classifier and classical baselines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Train a recurrent model; writes model.json, history and metrics
    Train(RawOptions),
    /// Evaluate a saved model on the held-out split
    Evaluate(RawOptions),
    /// Per-row class and scores for every row of --data
    Predict(RawOptions),
    /// Fit and evaluate a tree, forest or boosted ensemble
    Baseline(RawOptions),
    /// Batch-size or dropout sweep
    Sweep(RawOptions),
    /// Finite-difference check of the analytic gradients
    Gradcheck(RawOptions),
    /// Seeded (optionally stratified) row extraction from a large CSV
    Subsample(RawOptions),
    /// Write a seeded synthetic point cloud
    Synth(RawOptions),
}

impl CommandArgs {
    pub fn split(self) -> (Command, RawOptions) {
        match self {
            CommandArgs::Train(o) => (Command::Train, o),
            CommandArgs::Evaluate(o) => (Command::Evaluate, o),
            CommandArgs::Predict(o) => (Command::Predict, o),
            CommandArgs::Baseline(o) => (Command::Baseline, o),
            CommandArgs::Sweep(o) => (Command::Sweep, o),
            CommandArgs::Gradcheck(o) => (Command::Gradcheck, o),
            CommandArgs::Subsample(o) => (Command::Subsample, o),
            CommandArgs::Synth(o) => (Command::Synth, o),
        }
    }
}

/// Parses, resolves and runs; returns the process exit status.
pub fn run<I, S>(args: I, env_seed: Option<String>) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                eprint!("{e}");
                return 2;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::Usage(first).line());
            return 2;
        }
    };
    let (command, raw) = cli.command.split();
    let result = parse_config(command, &raw, env_seed.as_deref()).and_then(|cfg| dispatch(&cfg));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            0
        }
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_status()
        }
    }
}
