use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;

use super::{CliError, Command, ModelKind, RunConfig};
use crate::baselines::{
    fit_forest, fit_gradient_boost, fit_tree, fit_xgb, load_baseline, save_baseline, BaselineModel, ForestParams,
    GradientBoostParams, SavedBaseline, TreeParams, XgbParams,
};
use crate::dataio::{
    apply_minmax, fit_minmax, load_csv, make_sequences, split_train_test, subsample_csv, synthetic, write_csv, Dataset,
    SequenceMode, SequenceSample,
};
use crate::evaluation::{
    compute_metrics, confusion, emit_history, emit_sweep, format_report, run_sweep, write_report, MetricsReport,
};
use crate::numerics::{derive_seed, SeededRng, Vector};
use crate::recurrent::{predict_scores, Model, ModelConfig};
use crate::training::{evaluate, gradient_check, load_saved, save_saved, train, SavedModel, TrainConfig};

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// One-line result printed on stdout.
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

pub fn dispatch(cfg: &RunConfig) -> Result<Outcome, CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::runtime("io", format!("{}: {e}", cfg.out.display())))?;
    let conf = cfg.out.join(format!("{}.conf", cfg.command.name()));
    fs::write(&conf, cfg.to_config_text())?;
    let started = Instant::now();
    let mut outcome = match cfg.command {
        Command::Train => cmd_train(cfg),
        Command::Evaluate => cmd_evaluate(cfg),
        Command::Predict => cmd_predict(cfg),
        Command::Baseline => cmd_baseline(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Gradcheck => cmd_gradcheck(cfg),
        Command::Subsample => cmd_subsample(cfg),
        Command::Synth => cmd_synth(cfg),
    }?;
    outcome.artifacts.insert(0, conf);
    info!("{} finished in {:.1}s", cfg.command.name(), started.elapsed().as_secs_f64());
    Ok(outcome)
}

fn data_path(cfg: &RunConfig) -> &Path {
    cfg.data.as_deref().expect("validated: data is present")
}

/// Seeded split of `--data` into (train, test), unnormalized.
fn load_split(cfg: &RunConfig) -> Result<(Dataset<f64>, Dataset<f64>), CliError> {
    let d = load_csv::<f64>(data_path(cfg))?;
    info!("loaded {} rows from {}", d.len(), data_path(cfg).display());
    Ok(split_train_test(&d, cfg.test_fraction, derive_seed(cfg.seed, "split"), cfg.stratified)?)
}

fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        dropout: cfg.dropout,
        optimizer: cfg.optimizer,
        loss: cfg.loss,
        seed: derive_seed(cfg.seed, "train"),
        mode: cfg.mode,
        truncation: cfg.truncation,
    }
}

fn model_config(cfg: &RunConfig) -> ModelConfig {
    let arch = cfg.model.architecture().expect("validated: recurrent model");
    let mut mc = ModelConfig::canonical(arch, cfg.mode.step_dim())
        .with_width(cfg.units)
        .with_dropout(cfg.dropout);
    mc.output_activation = cfg.loss.output_activation();
    mc
}

fn write_metrics(out: &Path, stem: &str, r: &MetricsReport, names: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let txt = out.join(format!("{stem}.txt"));
    let json = out.join(format!("{stem}.json"));
    fs::write(&txt, format_report(r, names))?;
    write_report(r, &json)?;
    Ok(vec![txt, json])
}

fn cmd_train(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (train_raw, test_raw) = load_split(cfg)?;
    let stats = fit_minmax(&train_raw)?;
    let train_set = make_sequences(&apply_minmax(&train_raw, &stats), cfg.mode)?;
    let val_set = make_sequences(&apply_minmax(&test_raw, &stats), cfg.mode)?;
    let model = Model::<f64>::new(model_config(cfg), derive_seed(cfg.seed, "model.init"))?;
    info!(
        "training {} ({} parameters) on {} samples, validating on {}",
        cfg.model,
        model.param_count(),
        train_set.len(),
        val_set.len()
    );
    let tc = train_config(cfg);
    let (model, history) = train(model, &train_set, &val_set, &tc)?;

    let model_path = cfg.out.join("model.json");
    save_saved(
        &SavedModel {
            model: model.clone(),
            stats,
            sequence: Some(cfg.mode),
        },
        &model_path,
    )?;
    let hist_path = cfg.out.join(format!("history.{}", cfg.format.extension()));
    emit_history(&history, &hist_path, cfg.format)?;
    let mut artifacts = vec![model_path, hist_path];
    let mut summary = format!("trained {} for {} epochs", cfg.model, cfg.epochs);
    if !val_set.is_empty() {
        let ev = evaluate(&model, &val_set, cfg.loss)?;
        artifacts.extend(write_metrics(&cfg.out, "metrics", &ev.report, test_raw.class_names())?);
        summary.push_str(&format!(
            "; validation accuracy {:.4}, macro F1 {:.4}",
            ev.report.accuracy, ev.report.f1_macro
        ));
    }
    Ok(Outcome { summary, artifacts })
}

/// Reads the `kind` field to tell recurrent and baseline model files apart.
fn is_baseline_file(path: &Path) -> Result<bool, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::runtime("model", format!("{}: {e}", path.display())))?;
    let v: serde_json::Value = match serde_json::from_str(&text) {
        Ok(v) => v,
        Err(_) => return Ok(false),
    };
    Ok(v.get("kind").and_then(|k| k.as_str()).is_some_and(|k| k != "recurrent"))
}

fn load_recurrent(cfg: &RunConfig) -> Result<SavedModel<f64>, CliError> {
    let saved = load_saved::<f64>(cfg.model_path())?;
    if let (Some(mode), true) = (saved.sequence, cfg.mode != SequenceMode::Point) {
        if mode != cfg.mode {
            return Err(CliError::Usage(format!(
                "--mode/--window disagree with the model file ({} vs {})",
                cfg.mode.name(),
                mode.name()
            )));
        }
    }
    Ok(saved)
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (_, test_raw) = load_split(cfg)?;
    let path = cfg.model_path();
    let report = if is_baseline_file(&path)? {
        let saved = load_baseline(&path)?;
        let test = match &saved.stats {
            Some(s) => apply_minmax(&test_raw, s),
            None => test_raw.clone(),
        };
        let preds = saved.model.predict_all(test.features());
        compute_metrics(&confusion(&preds, test.labels())?)?
    } else {
        let saved = load_recurrent(cfg)?;
        let mode = saved.sequence.unwrap_or(cfg.mode);
        let samples = make_sequences(&apply_minmax(&test_raw, &saved.stats), mode)?;
        evaluate(&saved.model, &samples, loss_of(&saved.model))?.report
    };
    let artifacts = write_metrics(&cfg.out, "evaluation", &report, test_raw.class_names())?;
    Ok(Outcome {
        summary: format!(
            "accuracy {:.4}, macro precision {:.4}, macro recall {:.4}, macro F1 {:.4} on {} rows",
            report.accuracy, report.precision_macro, report.recall_macro, report.f1_macro, report.total
        ),
        artifacts,
    })
}

fn loss_of(m: &Model<f64>) -> crate::training::LossKind {
    use crate::training::LossKind;
    if m.config().output_activation == LossKind::Softmax.output_activation() {
        LossKind::Softmax
    } else {
        LossKind::Bce
    }
}

fn cmd_predict(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let d = load_csv::<f64>(data_path(cfg))?;
    let path = cfg.model_path();
    let out_path = cfg.out.join("predictions.csv");
    let mut w = csv::Writer::from_path(&out_path).map_err(|e| CliError::runtime("io", e))?;
    let csv_err = |e: csv::Error| CliError::runtime("io", e);
    let classes = crate::dataio::NUM_CLASSES;
    let mut header = vec!["row".to_string(), "class".to_string()];
    header.extend((0..classes).map(|c| format!("score_{c}")));
    w.write_record(&header).map_err(csv_err)?;
    if is_baseline_file(&path)? {
        let saved = load_baseline(&path)?;
        let x = match &saved.stats {
            Some(s) => apply_minmax(&d, s),
            None => d.clone(),
        };
        for (i, row) in x.features().iter_rows().enumerate() {
            let class = saved.model.predict(row);
            let mut rec = vec![i.to_string(), class.to_string()];
            // hard votes: one-hot scores
            rec.extend((0..classes).map(|c| if c == class { "1" } else { "0" }.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
    } else {
        let saved = load_recurrent(cfg)?;
        let mode = saved.sequence.unwrap_or(cfg.mode);
        let samples = make_sequences(&apply_minmax(&d, &saved.stats), mode)?;
        let offset = match mode {
            SequenceMode::Point => 0,
            SequenceMode::Window(w) => w,
        };
        let loss = loss_of(&saved.model);
        for (i, s) in samples.iter().enumerate() {
            let scores = predict_scores(&saved.model, s)?;
            let probs = loss.probabilities(&scores);
            let mut rec = vec![(i + offset).to_string(), crate::recurrent::predict_class(&scores).to_string()];
            rec.extend(probs.iter().map(|p| p.to_string()));
            w.write_record(&rec).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(Outcome {
        summary: format!("wrote predictions for {} to {}", data_path(cfg).display(), out_path.display()),
        artifacts: vec![out_path],
    })
}

fn cmd_baseline(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (train_raw, test_raw) = load_split(cfg)?;
    let stats = fit_minmax(&train_raw)?;
    let train = apply_minmax(&train_raw, &stats);
    let test = apply_minmax(&test_raw, &stats);
    let (x, y) = (train.features(), train.labels());
    info!("fitting {} on {} rows", cfg.model, train.len());
    let model = match cfg.model {
        ModelKind::Tree => BaselineModel::Tree(fit_tree(
            x,
            y,
            TreeParams {
                criterion: cfg.criterion,
                max_depth: cfg.max_depth,
                ..Default::default()
            },
        )?),
        ModelKind::Forest => BaselineModel::Forest(fit_forest(
            x,
            y,
            ForestParams {
                trees: cfg.trees,
                criterion: cfg.criterion,
                max_depth: cfg.max_depth,
                seed: derive_seed(cfg.seed, "forest"),
                ..Default::default()
            },
        )?),
        ModelKind::GradientBoost => BaselineModel::Booster(fit_gradient_boost(
            x,
            y,
            GradientBoostParams {
                rounds: cfg.rounds,
                learning_rate: cfg.learning_rate,
                max_depth: cfg.max_depth.unwrap_or(usize::MAX),
            },
        )?),
        ModelKind::Xgb => BaselineModel::Booster(fit_xgb(
            x,
            y,
            XgbParams {
                rounds: cfg.rounds,
                learning_rate: cfg.learning_rate,
                max_depth: cfg.max_depth.unwrap_or(usize::MAX),
                seed: derive_seed(cfg.seed, "xgb"),
                ..Default::default()
            },
        )?),
        ModelKind::Recurrent(_) => unreachable!("validated: baseline learner"),
    };
    let model_path = cfg.out.join("model.json");
    let saved = SavedBaseline {
        model,
        stats: Some(stats),
    };
    save_baseline(&saved, &model_path)?;
    let preds = saved.model.predict_all(test.features());
    let report = compute_metrics(&confusion(&preds, test.labels())?)?;
    let mut artifacts = vec![model_path];
    artifacts.extend(write_metrics(&cfg.out, "metrics", &report, test.class_names())?);
    Ok(Outcome {
        summary: format!(
            "{}: accuracy {:.4}, macro F1 {:.4} on {} held-out rows",
            cfg.model, report.accuracy, report.f1_macro, report.total
        ),
        artifacts,
    })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let parameter = cfg.sweep.expect("validated: sweep parameter");
    let values = cfg.values.clone().unwrap_or_else(|| parameter.default_values().to_vec());
    let (train_raw, test_raw) = load_split(cfg)?;
    let stats = fit_minmax(&train_raw)?;
    let train_set = make_sequences(&apply_minmax(&train_raw, &stats), cfg.mode)?;
    let val_set = make_sequences(&apply_minmax(&test_raw, &stats), cfg.mode)?;
    info!("sweeping {} over {:?}", parameter.name(), values);
    let result = run_sweep(
        parameter,
        &values,
        &train_config(cfg),
        &model_config(cfg),
        derive_seed(cfg.seed, "model.init"),
        &train_set,
        &val_set,
    )?;
    let path = cfg.out.join(format!("sweep.{}", cfg.format.extension()));
    emit_sweep(&result, &path, cfg.format)?;
    let mut artifacts = vec![path];
    for e in &result.entries {
        let p = cfg
            .out
            .join(format!("history_{}_{}.{}", parameter.name(), e.value, cfg.format.extension()));
        emit_history(&e.history, &p, cfg.format)?;
        artifacts.push(p);
    }
    Ok(Outcome {
        summary: format!("swept {} over {} values", parameter.name(), result.entries.len()),
        artifacts,
    })
}

fn cmd_gradcheck(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = Model::<f64>::new(model_config(cfg), derive_seed(cfg.seed, "model.init"))?;
    let mut rng = SeededRng::derive(cfg.seed, "gradcheck.sample");
    let (steps, dim) = match cfg.mode {
        SequenceMode::Point => (crate::dataio::NUM_FEATURES, 1),
        SequenceMode::Window(w) => (w, crate::dataio::NUM_FEATURES),
    };
    let sample = SequenceSample {
        steps: (0..steps)
            .map(|_| Vector::from((0..dim).map(|_| rng.next_f64()).collect::<Vec<_>>()))
            .collect(),
        target: rng.below(model.num_classes()),
    };
    let report = gradient_check(&model, &sample, 1e-6, 1e-4)?;
    let path = cfg.out.join("gradcheck.txt");
    let mut f = fs::File::create(&path)?;
    writeln!(f, "model: {} (units {}, {} parameters)", cfg.model, cfg.units, model.param_count())?;
    writeln!(f, "sequence: {} steps of dimension {}", steps, dim)?;
    writeln!(f, "eps: {:e}", report.eps)?;
    writeln!(f, "tolerance: {:e}", report.tolerance)?;
    writeln!(f, "parameters checked: {}", report.parameters_checked)?;
    writeln!(f, "max relative error: {:e}", report.max_rel_error)?;
    writeln!(f, "max absolute error: {:e}", report.max_abs_error)?;
    writeln!(f, "worst coordinate: {}[{}]", report.worst_parameter, report.worst_index)?;
    writeln!(f, "result: {}", if report.passed { "pass" } else { "fail" })?;
    let line = format!(
        "gradient check {}: max relative error {:.3e} over {} parameters (worst {}[{}])",
        if report.passed { "passed" } else { "failed" },
        report.max_rel_error,
        report.parameters_checked,
        report.worst_parameter,
        report.worst_index
    );
    if !report.passed {
        return Err(CliError::runtime("gradcheck", line));
    }
    Ok(Outcome {
        summary: line,
        artifacts: vec![path],
    })
}

fn cmd_subsample(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let n = cfg.n.expect("validated: n");
    let path = cfg.out.join("subsample.csv");
    let s = subsample_csv(data_path(cfg), &path, n, cfg.stratified, derive_seed(cfg.seed, "subsample"))?;
    Ok(Outcome {
        summary: format!(
            "kept {} of {} rows{} in {}",
            s.output_total(),
            s.source_total(),
            if cfg.stratified { " (stratified)" } else { "" },
            path.display()
        ),
        artifacts: vec![path],
    })
}

fn cmd_synth(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let n = cfg.n.expect("validated: n");
    let d = synthetic::generate(n, derive_seed(cfg.seed, "synth"));
    let path = cfg.out.join("points.csv");
    write_csv(&d, &path)?;
    Ok(Outcome {
        summary: format!("wrote {n} synthetic points to {}", path.display()),
        artifacts: vec![path],
    })
}
