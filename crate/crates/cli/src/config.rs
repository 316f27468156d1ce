//! Flat `key = value` run configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! seed = 7
//! sim.n_underlyings = 12
//! sim.vol_regimes = 0.2:0.5, 0.4:0.5
//! gbdt.num_rounds = 300
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use optbench_core::dataset::SplitSpec;
use optbench_core::gbdt::GbdtConfig;
use optbench_core::mlp::MlpTrainConfig;
use optbench_core::simgen::{SimConfig, VolRegime};

pub const KEYS: &[&str] = &[
    "seed",
    "out",
    "data",
    "sim.n_underlyings",
    "sim.days_per_underlying",
    "sim.s0_min",
    "sim.s0_max",
    "sim.vol_regimes",
    "sim.drift",
    "sim.rate_min",
    "sim.rate_max",
    "sim.yield_min",
    "sim.yield_max",
    "sim.maturities",
    "sim.moneyness",
    "sim.half_spread",
    "split.train",
    "split.val",
    "split.test",
    "split.method",
    "gbdt.num_rounds",
    "gbdt.early_stopping_rounds",
    "gbdt.n_bins",
    "gbdt.lambda",
    "gbdt.min_child_weight",
    "gbdt.eta_base",
    "gbdt.eta_min",
    "gbdt.max_iter_decay",
    "mlp.initial_lr",
    "mlp.plateau_factor",
    "mlp.plateau_patience",
    "mlp.min_lr",
    "mlp.early_stop_patience",
    "mlp.max_epochs",
    "mlp.batch_size",
    "eval.n_bins",
    "report.n_bins",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Seeds the generator, the split and both learners.
    pub seed: u64,
    pub out: PathBuf,
    /// Dataset CSV; defaults to `<out>/dataset.csv`.
    pub data: Option<PathBuf>,
    pub sim: SimConfig,
    pub split: SplitSpec,
    pub gbdt: GbdtConfig,
    pub mlp: MlpTrainConfig,
    pub eval_bins: usize,
    pub report_bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out: PathBuf::from("out"),
            data: None,
            sim: SimConfig::default(),
            split: SplitSpec::default(),
            gbdt: GbdtConfig::default(),
            mlp: MlpTrainConfig::default(),
            eval_bins: 10,
            report_bins: 50,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("{key}: cannot parse {value:?}: {e}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn parse_regimes(key: &str, value: &str) -> Result<Vec<VolRegime>> {
    value
        .split(',')
        .map(|item| {
            let (sigma, weight) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| anyhow!("{key}: expected sigma:weight, got {item:?}"))?;
            Ok(VolRegime {
                sigma: parse(key, sigma.trim())?,
                weight: parse(key, weight.trim())?,
            })
        })
        .collect()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "out" => self.out = PathBuf::from(v),
            "data" => self.data = Some(PathBuf::from(v)),
            "sim.n_underlyings" => self.sim.n_underlyings = parse(key, v)?,
            "sim.days_per_underlying" => self.sim.days_per_underlying = parse(key, v)?,
            "sim.s0_min" => self.sim.s0_range.0 = parse(key, v)?,
            "sim.s0_max" => self.sim.s0_range.1 = parse(key, v)?,
            "sim.vol_regimes" => self.sim.vol_regimes = parse_regimes(key, v)?,
            "sim.drift" => self.sim.drift = parse(key, v)?,
            "sim.rate_min" => self.sim.rate_range.0 = parse(key, v)?,
            "sim.rate_max" => self.sim.rate_range.1 = parse(key, v)?,
            "sim.yield_min" => self.sim.yield_range.0 = parse(key, v)?,
            "sim.yield_max" => self.sim.yield_range.1 = parse(key, v)?,
            "sim.maturities" => self.sim.maturities = parse_list(key, v)?,
            "sim.moneyness" => self.sim.moneyness_grid = parse_list(key, v)?,
            "sim.half_spread" => self.sim.half_spread = parse(key, v)?,
            "split.train" => self.split.train_fraction = parse(key, v)?,
            "split.val" => self.split.val_fraction = parse(key, v)?,
            "split.test" => self.split.test_fraction = parse(key, v)?,
            "split.method" => self.split.method = parse(key, v)?,
            "gbdt.num_rounds" => self.gbdt.num_rounds = parse(key, v)?,
            "gbdt.early_stopping_rounds" => self.gbdt.early_stopping_rounds = parse(key, v)?,
            "gbdt.n_bins" => self.gbdt.n_bins = parse(key, v)?,
            "gbdt.lambda" => self.gbdt.lambda = parse(key, v)?,
            "gbdt.min_child_weight" => self.gbdt.min_child_weight = parse(key, v)?,
            "gbdt.eta_base" => self.gbdt.eta.eta_base = parse(key, v)?,
            "gbdt.eta_min" => self.gbdt.eta.eta_min = parse(key, v)?,
            "gbdt.max_iter_decay" => self.gbdt.eta.max_iter_decay = parse(key, v)?,
            "mlp.initial_lr" => self.mlp.initial_lr = parse(key, v)?,
            "mlp.plateau_factor" => self.mlp.plateau_factor = parse(key, v)?,
            "mlp.plateau_patience" => self.mlp.plateau_patience = parse(key, v)?,
            "mlp.min_lr" => self.mlp.min_lr = parse(key, v)?,
            "mlp.early_stop_patience" => self.mlp.early_stop_patience = parse(key, v)?,
            "mlp.max_epochs" => self.mlp.max_epochs = parse(key, v)?,
            "mlp.batch_size" => self.mlp.batch_size = parse(key, v)?,
            "eval.n_bins" => self.eval_bins = parse(key, v)?,
            "report.n_bins" => self.report_bins = parse(key, v)?,
            _ => bail!("unknown config key {key:?}; known keys: {}", KEYS.join(", ")),
        }
        Ok(())
    }

    /// Applies `key = value` lines from `text`, later lines winning.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key = value", i + 1))?;
            self.set(key.trim(), value).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))
    }

    /// Applies a `key=value` override from the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got {assignment:?}"))?;
        self.set(key.trim(), value)
    }

    /// Copies the global seed into every seeded component.
    pub fn resolve_seeds(&mut self) {
        self.sim.seed = self.seed;
        self.split.seed = self.seed;
        self.gbdt.seed = self.seed;
        self.mlp.seed = self.seed;
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.data.clone().unwrap_or_else(|| self.out.join("dataset.csv"))
    }
}
