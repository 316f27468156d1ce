use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use optbench_core::dataset::{
    feature_names, filter_quotes, split_dataset, Dataset, DatasetSplit, Labeled, Provenance, N_FEATURES,
};
use optbench_core::eval::{
    bs_implied_vol_predictions, bs_realized_vol_predictions, column_summaries, compare_models, histogram,
    render_table, target_digest, write_histograms, write_report, write_summaries, EvalError, ModelResult, BS_IMPLIED,
    BS_REALIZED,
};
use optbench_core::gbdt::{train_gbdt, GbdtConfig};
use optbench_core::ingest::{
    load_model, read_csv, save_model, write_csv, write_epoch_metrics, write_round_metrics, Model, ModelManifest,
};
use optbench_core::mlp::{train_mlp, Architecture};
use optbench_core::simgen::generate_dataset;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::ModelKind;

/// A command failure tagged with the exit status class it maps to.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Training(anyhow::Error),
}

impl Failure {
    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Training(e) => e,
        }
    }
}

trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn data(self) -> Result<T, Failure>;
    fn training(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }
    fn data(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(e.into()))
    }
    fn training(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Training(e.into()))
    }
}

type CmdResult = Result<(), Failure>;

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .data()
}

fn write_manifest(path: &Path, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("manifest serializes") + "\n";
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .data()
}

fn load_dataset(cfg: &RunConfig) -> Result<(PathBuf, Dataset), Failure> {
    let path = cfg.dataset_path();
    let load = read_csv(&path).data()?;
    for r in &load.rejected {
        eprintln!("warning: {}: skipped {r}", path.display());
    }
    let (quotes, dropped) = filter_quotes(load.quotes);
    for (field, n) in &dropped.by_field {
        eprintln!("warning: dropped {n} quotes with invalid {field}");
    }
    let ds = Dataset::from_quotes(&quotes, Provenance::Ingested).data()?;
    Ok((path, ds))
}

fn split_parts(ds: &Dataset, cfg: &RunConfig) -> Result<DatasetSplit, Failure> {
    split_dataset(ds, &cfg.split)
        .context("splitting dataset")
        .data()
}

pub fn gen(cfg: &RunConfig) -> CmdResult {
    let quotes = generate_dataset(&cfg.sim).usage()?;
    if quotes.is_empty() {
        eprintln!("warning: configuration produced no quotes");
    }
    create_dir(&cfg.out)?;
    let path = cfg.out.join("dataset.csv");
    write_csv(&quotes, &path).data()?;
    let ds = Dataset::from_quotes(&quotes, Provenance::Synthetic).data()?;
    write_manifest(
        &cfg.out.join("dataset.manifest.json"),
        &json!({
            "artifact": path,
            "rows": ds.len(),
            "dataset_digest": ds.digest(),
            "seed": cfg.seed,
            "sim": cfg.sim,
            "generated_at": unix_now(),
        }),
    )?;
    println!("wrote {} quotes to {}", ds.len(), path.display());
    Ok(())
}

pub fn split(cfg: &RunConfig) -> CmdResult {
    let (source, ds) = load_dataset(cfg)?;
    let parts = split_parts(&ds, cfg)?;
    create_dir(&cfg.out)?;
    let mut entries = serde_json::Map::new();
    for (name, part) in [("train", &parts.train), ("val", &parts.val), ("test", &parts.test)] {
        let path = cfg.out.join(format!("{name}.csv"));
        write_csv(&part.quotes(), &path).data()?;
        entries.insert(
            name.into(),
            json!({ "artifact": path, "rows": part.len(), "digest": part.digest() }),
        );
        println!("{name}: {} rows -> {}", part.len(), path.display());
    }
    write_manifest(
        &cfg.out.join("split.manifest.json"),
        &json!({
            "dataset": source,
            "dataset_digest": ds.digest(),
            "split": cfg.split,
            "parts": entries,
            "generated_at": unix_now(),
        }),
    )
}

pub fn train(cfg: &RunConfig, kind: ModelKind) -> CmdResult {
    let (source, ds) = load_dataset(cfg)?;
    let parts = split_parts(&ds, cfg)?;
    let train = Labeled::from(&parts.train);
    let val = Labeled::from(&parts.val);

    let started = Instant::now();
    let model = match kind {
        ModelKind::Gbdt5 | ModelKind::Gbdt10 => {
            let depth = if kind == ModelKind::Gbdt5 { 5 } else { 10 };
            let gbdt = GbdtConfig {
                max_depth: depth,
                ..cfg.gbdt
            };
            Model::Trees(train_gbdt(&train, &val, &gbdt).training()?)
        }
        ModelKind::Mlp3 | ModelKind::Mlp5 => {
            let arch = if kind == ModelKind::Mlp3 {
                Architecture::three_layer()
            } else {
                Architecture::five_layer()
            };
            Model::Network(train_mlp(&train, &val, &arch, &cfg.mlp).training()?)
        }
    };
    let seconds = started.elapsed().as_secs_f64();

    let dir = cfg.out.join("models");
    create_dir(&dir)?;
    let model_path = dir.join(format!("{}.model", kind.name()));
    let metrics_path = dir.join(format!("{}.metrics.csv", kind.name()));
    let digest = ds.digest();
    save_model(&model, Some(&digest), &model_path).data()?;
    let summary = match &model {
        Model::Trees(m) => {
            write_round_metrics(&m.history, &metrics_path).data()?;
            let best = m.best_round().map(|r| m.history[r]);
            format!(
                "{} trees, best round {:?}, val MAE {:.4}",
                m.trees.len(),
                best.map(|b| b.round),
                best.map_or(f64::NAN, |b| b.val_mae)
            )
        }
        Model::Network(m) => {
            write_epoch_metrics(&m.history, &metrics_path).data()?;
            let best = m.best_epoch.map(|e| m.history[e]);
            format!(
                "{} epochs, best epoch {:?}, val MAE {:.4}",
                m.history.len(),
                best.map(|b| b.epoch),
                best.map_or(f64::NAN, |b| b.val_mae)
            )
        }
    };
    write_manifest(
        &dir.join(format!("{}.manifest.json", kind.name())),
        &json!({
            "model": kind.name(),
            "artifact": model_path,
            "metrics": metrics_path,
            "dataset": source,
            "dataset_digest": digest,
            "train_rows": train.len(),
            "val_rows": val.len(),
            "training_seconds": seconds,
            "hyperparameters": ModelManifest::for_model(&model, Some(&digest)),
            "trained_at": unix_now(),
        }),
    )?;
    println!("{}: {summary}, {seconds:.1}s -> {}", kind.name(), model_path.display());
    Ok(())
}

/// Training time recorded next to a model file by `train`, if any.
fn recorded_seconds(model_path: &Path) -> Option<f64> {
    let text = fs::read_to_string(model_path.with_extension("manifest.json")).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v.get("training_seconds")?.as_f64()
}

pub fn evaluate(cfg: &RunConfig, models: &[PathBuf], include_bs: bool) -> CmdResult {
    if models.is_empty() && !include_bs {
        return Err(Failure::Usage(anyhow!("nothing to evaluate: pass --models and/or --include-bs")));
    }
    let (source, ds) = load_dataset(cfg)?;
    let digest = ds.digest();
    let test = split_parts(&ds, cfg)?.test;
    let x = test.feature_matrix();
    let targets = test.targets();

    let mut results = Vec::new();
    for path in models {
        let loaded = load_model(path).data()?;
        let name = path
            .file_stem()
            .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        if loaded.model.n_features() != N_FEATURES {
            return Err(Failure::Data(anyhow!(
                "{}: model takes {} features, dataset has {N_FEATURES}",
                path.display(),
                loaded.model.n_features()
            )));
        }
        if let Some(found) = loaded.manifest.dataset_digest() {
            if found != digest {
                return Err(Failure::Data(
                    EvalError::InconsistentEvaluation {
                        model: name,
                        expected: digest,
                        found: found.to_string(),
                    }
                    .into(),
                ));
            }
        }
        let predictions = loaded
            .model
            .predict_batch(x.view())
            .with_context(|| path.display().to_string())
            .data()?;
        results.push(ModelResult {
            name,
            predictions,
            targets: targets.clone(),
            training_seconds: recorded_seconds(path),
        });
    }
    if include_bs {
        for (name, predictions) in [
            (BS_IMPLIED, bs_implied_vol_predictions(&test.samples)),
            (BS_REALIZED, bs_realized_vol_predictions(&test.samples)),
        ] {
            results.push(ModelResult {
                name: name.into(),
                predictions: predictions.context(name).data()?,
                targets: targets.clone(),
                training_seconds: None,
            });
        }
    }

    let report = compare_models(&results, cfg.eval_bins).data()?;
    let dir = cfg.out.join("report");
    write_report(&report, &dir)
        .with_context(|| format!("writing report to {}", dir.display()))
        .data()?;
    write_manifest(
        &dir.join("evaluate.manifest.json"),
        &json!({
            "dataset": source,
            "dataset_digest": digest,
            "target_digest": target_digest(&targets),
            "test_rows": targets.len(),
            "models": models,
            "include_bs": include_bs,
            "generated_at": unix_now(),
        }),
    )?;
    print!("{}", render_table(&report));
    Ok(())
}

pub fn report(cfg: &RunConfig) -> CmdResult {
    let (source, ds) = load_dataset(cfg)?;
    let summaries = column_summaries(&ds).data()?;
    let x = ds.feature_matrix();
    let mut columns: Vec<(String, Vec<f64>)> = feature_names()
        .into_iter()
        .zip(x.columns())
        .map(|(name, col)| (name, col.to_vec()))
        .collect();
    let ivs: Vec<f64> = ds.samples.iter().filter_map(|s| s.implied_vol).collect();
    if !ivs.is_empty() {
        columns.push(("implied_vol".into(), ivs));
    }
    columns.push(("midpoint".into(), ds.targets()));
    let histograms = columns
        .iter()
        .map(|(name, values)| Ok((name.clone(), histogram(values, cfg.report_bins)?)))
        .collect::<Result<Vec<_>, EvalError>>()
        .data()?;

    let dir = cfg.out.join("report").join("dataset");
    create_dir(&dir)?;
    write_summaries(&summaries, &dir.join("summary.csv")).data()?;
    write_histograms(&histograms, &dir).data()?;
    write_manifest(
        &dir.join("report.manifest.json"),
        &json!({
            "dataset": source,
            "dataset_digest": ds.digest(),
            "rows": ds.len(),
            "histogram_bins": cfg.report_bins,
            "generated_at": unix_now(),
        }),
    )?;

    println!(
        "{:<18} {:>8} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "column", "count", "mean", "std", "min", "50%", "max"
    );
    for (name, s) in &summaries {
        println!(
            "{name:<18} {:>8} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            s.count, s.mean, s.std, s.min, s.q50, s.max
        );
    }
    println!("\nwrote summary and histograms to {}", dir.display());
    Ok(())
}
