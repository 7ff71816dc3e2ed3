use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use super::{CliError, Command, ModelKind, RawOptions, RunConfig};
use crate::baselines::Criterion;
use crate::dataio::SequenceMode;
use crate::evaluation::{HistoryFormat, SweepParameter};
use crate::recurrent::Architecture;
use crate::training::{LossKind, OptimizerKind};

/// Every key a config file may set; identical to the long flag names.
const KEYS: [&str; 25] = [
    "data",
    "model",
    "load",
    "epochs",
    "batch-size",
    "learning-rate",
    "dropout",
    "optimizer",
    "loss",
    "truncation",
    "units",
    "seed",
    "mode",
    "window",
    "test-fraction",
    "stratified",
    "out",
    "sweep",
    "values",
    "n",
    "criterion",
    "max-depth",
    "trees",
    "rounds",
    "format",
];

const DEFAULT_WINDOW: usize = 10;
/// Layer width for `gradcheck`, small enough for an exhaustive check.
const GRADCHECK_UNITS: usize = 8;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(usage(format!("config line {}: expected key=value, got `{line}`", i + 1)));
        };
        let k = k.trim();
        if !KEYS.contains(&k) {
            return Err(usage(format!("config line {}: unknown key `{k}`", i + 1)));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn flag_pairs(raw: &RawOptions) -> Vec<(&'static str, String)> {
    let opts: [(&'static str, &Option<String>); 24] = [
        ("data", &raw.data),
        ("model", &raw.model),
        ("load", &raw.load),
        ("epochs", &raw.epochs),
        ("batch-size", &raw.batch_size),
        ("learning-rate", &raw.learning_rate),
        ("dropout", &raw.dropout),
        ("optimizer", &raw.optimizer),
        ("loss", &raw.loss),
        ("truncation", &raw.truncation),
        ("units", &raw.units),
        ("seed", &raw.seed),
        ("mode", &raw.mode),
        ("window", &raw.window),
        ("test-fraction", &raw.test_fraction),
        ("out", &raw.out),
        ("sweep", &raw.sweep),
        ("values", &raw.values),
        ("n", &raw.n),
        ("criterion", &raw.criterion),
        ("max-depth", &raw.max_depth),
        ("trees", &raw.trees),
        ("rounds", &raw.rounds),
        ("format", &raw.format),
    ];
    let mut v: Vec<_> = opts.iter().filter_map(|(k, o)| o.as_ref().map(|s| (*k, s.clone()))).collect();
    if raw.stratified {
        v.push(("stratified", "true".into()));
    }
    v
}

struct Resolver {
    values: BTreeMap<String, String>,
}

impl Resolver {
    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|s| s.parse::<T>().map_err(|e| usage(format!("--{key}: invalid value `{s}`: {e}"))))
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect()
}

fn optional_usize(s: &str) -> Result<Option<usize>, String> {
    if s == "none" {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|e| format!("{e}"))
    }
}

/// Resolves flags over an optional `--config` file over defaults.
pub fn parse_config(command: Command, raw: &RawOptions, env_seed: Option<&str>) -> Result<RunConfig, CliError> {
    let mut values = BTreeMap::new();
    if let Some(path) = &raw.config {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("--config: cannot read `{path}`: {e}")))?;
        for (k, v) in parse_config_text(&text)? {
            values.insert(k, v);
        }
    }
    let from_flags = flag_pairs(raw);
    for (k, v) in &from_flags {
        values.insert(k.to_string(), v.clone());
    }
    let r = Resolver { values };

    let default_model = match command {
        Command::Baseline => ModelKind::Tree,
        _ => ModelKind::Recurrent(Architecture::GruLstm),
    };
    let model: ModelKind = r.or("model", default_model)?;
    let lr_default = match model {
        ModelKind::GradientBoost => 0.05,
        ModelKind::Xgb => 0.1,
        _ => 0.001,
    };
    let depth_default = match model {
        ModelKind::GradientBoost => Some(4),
        ModelKind::Xgb => Some(5),
        _ => None,
    };
    let rounds_default = if model == ModelKind::GradientBoost { 3000 } else { 200 };

    let seed = match r.get::<u64>("seed")? {
        Some(s) => s,
        None => match env_seed {
            Some(s) => s
                .trim()
                .parse()
                .map_err(|e| usage(format!("GRULSTM_SEED: invalid value `{s}`: {e}")))?,
            None => 0,
        },
    };

    let window: Option<usize> = r.get("window")?;
    let mode = match r.raw("mode").unwrap_or("point") {
        "point" => {
            if window.is_some() {
                return Err(usage("--window conflicts with --mode point"));
            }
            SequenceMode::Point
        }
        "window" => SequenceMode::Window(window.unwrap_or(DEFAULT_WINDOW)),
        other => return Err(usage(format!("--mode: invalid value `{other}`: expected point or window"))),
    };

    let max_depth = match r.raw("max-depth") {
        Some(s) => optional_usize(s).map_err(|e| usage(format!("--max-depth: invalid value `{s}`: {e}")))?,
        None => depth_default,
    };
    let values = match r.raw("values") {
        Some(s) => Some(parse_list(s).map_err(|e| usage(format!("--values: invalid value {e}")))?),
        None => None,
    };
    let truncation = match r.raw("truncation") {
        Some(s) => optional_usize(s).map_err(|e| usage(format!("--truncation: invalid value `{s}`: {e}")))?,
        None => None,
    };
    let units_default = if command == Command::Gradcheck { GRADCHECK_UNITS } else { 100 };

    let cfg = RunConfig {
        command,
        data: r.raw("data").map(PathBuf::from),
        model,
        load: r.raw("load").map(PathBuf::from),
        epochs: r.or("epochs", 10)?,
        batch_size: r.or("batch-size", 3000)?,
        learning_rate: r.or("learning-rate", lr_default)?,
        dropout: r.or("dropout", 0.5)?,
        optimizer: r.or("optimizer", OptimizerKind::Adam)?,
        loss: r.or("loss", LossKind::Bce)?,
        truncation,
        units: r.or("units", units_default)?,
        seed,
        mode,
        test_fraction: r.or("test-fraction", 0.2)?,
        stratified: r.or("stratified", false)?,
        out: PathBuf::from(r.raw("out").unwrap_or("out")),
        sweep: r.get::<SweepParameter>("sweep")?,
        values,
        n: r.get("n")?,
        criterion: r.or("criterion", Criterion::Gini)?,
        max_depth,
        trees: r.or("trees", 100)?,
        rounds: r.or("rounds", rounds_default)?,
        format: r.or("format", HistoryFormat::Csv)?,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(c: &RunConfig) -> Result<(), CliError> {
    if !(c.learning_rate.is_finite() && c.learning_rate > 0.0) {
        return Err(usage(format!("--learning-rate must be positive, got {}", c.learning_rate)));
    }
    if !(0.0..1.0).contains(&c.dropout) {
        return Err(usage(format!("--dropout must lie in [0, 1), got {}", c.dropout)));
    }
    if !(c.test_fraction > 0.0 && c.test_fraction < 1.0) {
        return Err(usage(format!("--test-fraction must lie in (0, 1), got {}", c.test_fraction)));
    }
    let positive = [
        ("epochs", c.epochs),
        ("batch-size", c.batch_size),
        ("units", c.units),
        ("trees", c.trees),
    ];
    if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
        return Err(usage(format!("--{k} must be at least 1")));
    }
    if let SequenceMode::Window(0) = c.mode {
        return Err(usage("--window must be at least 1"));
    }
    if c.truncation == Some(0) {
        return Err(usage("--truncation must be at least 1"));
    }
    if c.n == Some(0) {
        return Err(usage("--n must be at least 1"));
    }
    if c.loss == LossKind::Softmax && c.model.architecture().is_none() {
        return Err(usage("--loss applies to recurrent models only"));
    }
    let needs_data = matches!(
        c.command,
        Command::Train | Command::Evaluate | Command::Predict | Command::Baseline | Command::Sweep | Command::Subsample
    );
    if needs_data && c.data.is_none() {
        return Err(usage(format!("{} requires --data", c.command.name())));
    }
    let recurrent = matches!(c.command, Command::Train | Command::Sweep | Command::Gradcheck);
    if recurrent && c.model.architecture().is_none() {
        return Err(usage(format!(
            "--model {} is not a recurrent model; use `baseline` for tree learners",
            c.model
        )));
    }
    if c.command == Command::Baseline && c.model.architecture().is_some() {
        return Err(usage(format!("--model {} is not a baseline learner (tree|forest|gb|xgb)", c.model)));
    }
    if c.command == Command::Sweep && c.sweep.is_none() {
        return Err(usage("sweep requires --sweep batch|dropout"));
    }
    if c.values.is_some() && c.command != Command::Sweep {
        return Err(usage("--values is only meaningful with sweep"));
    }
    if matches!(c.command, Command::Subsample | Command::Synth) && c.n.is_none() {
        return Err(usage(format!("{} requires --n", c.command.name())));
    }
    Ok(())
}

impl RunConfig {
    /// The resolved options as a config file that reproduces this run.
    pub fn to_config_text(&self) -> String {
        let mut lines = vec![format!("# grulstm {}", self.command.name())];
        let mut put = |k: &str, v: String| lines.push(format!("{k}={v}"));
        if let Some(d) = &self.data {
            put("data", d.display().to_string());
        }
        put("model", self.model.name().into());
        if let Some(l) = &self.load {
            put("load", l.display().to_string());
        }
        put("epochs", self.epochs.to_string());
        put("batch-size", self.batch_size.to_string());
        put("learning-rate", self.learning_rate.to_string());
        put("dropout", self.dropout.to_string());
        put("optimizer", self.optimizer.name().into());
        put("loss", self.loss.name().into());
        put("truncation", self.truncation.map_or("none".into(), |t| t.to_string()));
        put("units", self.units.to_string());
        put("seed", self.seed.to_string());
        put("mode", self.mode.name().into());
        if let SequenceMode::Window(w) = self.mode {
            put("window", w.to_string());
        }
        put("test-fraction", self.test_fraction.to_string());
        put("stratified", self.stratified.to_string());
        put("out", self.out.display().to_string());
        if let Some(s) = self.sweep {
            put("sweep", s.name().into());
        }
        if let Some(v) = &self.values {
            put("values", v.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        }
        if let Some(n) = self.n {
            put("n", n.to_string());
        }
        put("criterion", self.criterion.name().into());
        put("max-depth", self.max_depth.map_or("none".into(), |d| d.to_string()));
        put("trees", self.trees.to_string());
        put("rounds", self.rounds.to_string());
        put("format", self.format.extension().into());
        lines.push(String::new());
        lines.join("\n")
    }
}
