//! Flat key/value run configuration.
//!
//! The file holds `key = value` lines (`#` starts a comment). Unknown or
//! duplicate keys are rejected. Relative paths resolve against the config
//! file's directory. An optional `family` key seeds the per-dataset-family
//! hyperparameter defaults; explicit keys always win.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use kgboost::embedding::{EmbeddingKind, EmbeddingTrainConfig};
use kgboost::gbt::GbtConfig;
use kgboost::pipeline::{BaseStrategy, PipelineConfig};

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub train_path: PathBuf,
    pub valid_path: PathBuf,
    pub test_path: PathBuf,
    pub workdir: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub deterministic: bool,

    pub delta_sub: f64,
    pub delta_rcwc: u32,
    pub delta_lcw: f64,
    pub lcw_folds: usize,

    pub embedding_kind: EmbeddingKind,
    pub embedding_dim: usize,
    pub embedding_lr: f64,
    pub embedding_batch: usize,
    pub embedding_steps: usize,
    pub embedding_negatives: usize,
    pub embedding_alpha: f64,
    pub embedding_gamma: f64,
    pub embedding_checkpoint_interval: usize,
    pub embedding_log_interval: usize,
    pub embedding_valid_sample: usize,

    pub classifier_negatives: usize,
    pub estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_leaf_penalty: f64,
    pub min_split_gain: f64,
    pub min_child_hessian: f64,
    pub min_positives: usize,
    pub adversarial_fraction: f64,
    pub adversarial_refreshes: usize,
    pub adversarial_threshold: f64,
    pub base_negative_strategy: BaseStrategy,

    pub eval_subset: usize,
}

impl RunConfig {
    fn desk_defaults() -> Self {
        RunConfig {
            train_path: PathBuf::new(),
            valid_path: PathBuf::new(),
            test_path: PathBuf::new(),
            workdir: PathBuf::from("run"),
            seed: 42,
            threads: 0,
            deterministic: true,
            delta_sub: 0.8,
            delta_rcwc: 1,
            delta_lcw: 0.9,
            lcw_folds: 5,
            embedding_kind: EmbeddingKind::TranslationalReal,
            embedding_dim: 50,
            embedding_lr: 0.05,
            embedding_batch: 256,
            embedding_steps: 20_000,
            embedding_negatives: 16,
            embedding_alpha: 1.0,
            embedding_gamma: 6.0,
            embedding_checkpoint_interval: 0,
            embedding_log_interval: 1000,
            embedding_valid_sample: 200,
            classifier_negatives: 32,
            estimators: 300,
            max_depth: 3,
            learning_rate: 0.1,
            l2_leaf_penalty: 1.0,
            min_split_gain: 0.0,
            min_child_hessian: 0.0,
            min_positives: 4,
            adversarial_fraction: 0.5,
            adversarial_refreshes: 1,
            adversarial_threshold: 0.5,
            base_negative_strategy: BaseStrategy::Auto,
            eval_subset: 0,
        }
    }

    fn apply_family(&mut self, family: &str) -> Result<()> {
        match family {
            "wordnet" => {
                self.classifier_negatives = 32;
                self.estimators = 1500;
                self.max_depth = 3;
                self.learning_rate = 0.1;
                self.embedding_dim = 500;
                self.embedding_gamma = 6.0;
            }
            "freebase" => {
                self.classifier_negatives = 64;
                self.estimators = 1000;
                self.max_depth = 5;
                self.learning_rate = 0.1;
                self.embedding_dim = 1000;
                self.embedding_gamma = 12.0;
            }
            other => bail!("unknown dataset family {:?} (expected wordnet or freebase)", other),
        }
        Ok(())
    }

    pub fn embedding_config(&self) -> EmbeddingTrainConfig {
        EmbeddingTrainConfig {
            kind: self.embedding_kind,
            dim: self.embedding_dim,
            learning_rate: self.embedding_lr,
            batch_size: self.embedding_batch,
            steps: self.embedding_steps,
            negatives: self.embedding_negatives,
            alpha: self.embedding_alpha,
            gamma: self.embedding_gamma,
            seed: self.seed,
        }
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            delta_sub: self.delta_sub,
            delta_rcwc: self.delta_rcwc,
            delta_lcw: self.delta_lcw,
            lcw_folds: self.lcw_folds,
            negatives_per_positive: self.classifier_negatives,
            gbt: GbtConfig {
                num_estimators: self.estimators,
                max_depth: self.max_depth,
                learning_rate: self.learning_rate,
                l2_leaf_penalty: self.l2_leaf_penalty,
                min_split_gain: self.min_split_gain,
                min_child_hessian: self.min_child_hessian,
                seed: self.seed,
            },
            adversarial_fraction: self.adversarial_fraction,
            adversarial_refreshes: self.adversarial_refreshes,
            tau_adv: self.adversarial_threshold,
            min_positives: self.min_positives,
            base_strategy: self.base_negative_strategy,
            seed: self.seed,
        }
    }

    /// Key/value snapshot of every resolved setting, for the run manifest.
    pub fn snapshot(&self) -> Vec<(String, String)> {
        let kind = match self.embedding_kind {
            EmbeddingKind::TranslationalReal => "translational",
            EmbeddingKind::RotationalComplex => "rotational",
        };
        let strategy = match self.base_negative_strategy {
            BaseStrategy::Auto => "auto",
            BaseStrategy::Naive => "naive",
            BaseStrategy::Rcwc => "rcwc",
        };
        let mut out: Vec<(String, String)> = vec![
            ("train_path".into(), self.train_path.display().to_string()),
            ("valid_path".into(), self.valid_path.display().to_string()),
            ("test_path".into(), self.test_path.display().to_string()),
            ("workdir".into(), self.workdir.display().to_string()),
            ("seed".into(), self.seed.to_string()),
            ("threads".into(), self.threads.to_string()),
            ("deterministic".into(), self.deterministic.to_string()),
            ("delta_sub".into(), self.delta_sub.to_string()),
            ("delta_rcwc".into(), self.delta_rcwc.to_string()),
            ("delta_lcw".into(), self.delta_lcw.to_string()),
            ("lcw_folds".into(), self.lcw_folds.to_string()),
            ("embedding_kind".into(), kind.into()),
            ("embedding_dim".into(), self.embedding_dim.to_string()),
            ("embedding_lr".into(), self.embedding_lr.to_string()),
            ("embedding_batch".into(), self.embedding_batch.to_string()),
            ("embedding_steps".into(), self.embedding_steps.to_string()),
            ("embedding_negatives".into(), self.embedding_negatives.to_string()),
            ("embedding_alpha".into(), self.embedding_alpha.to_string()),
            ("embedding_gamma".into(), self.embedding_gamma.to_string()),
            (
                "embedding_checkpoint_interval".into(),
                self.embedding_checkpoint_interval.to_string(),
            ),
            ("classifier_negatives".into(), self.classifier_negatives.to_string()),
            ("estimators".into(), self.estimators.to_string()),
            ("max_depth".into(), self.max_depth.to_string()),
            ("learning_rate".into(), self.learning_rate.to_string()),
            ("l2_leaf_penalty".into(), self.l2_leaf_penalty.to_string()),
            ("min_split_gain".into(), self.min_split_gain.to_string()),
            ("min_child_hessian".into(), self.min_child_hessian.to_string()),
            ("min_positives".into(), self.min_positives.to_string()),
            ("adversarial_fraction".into(), self.adversarial_fraction.to_string()),
            ("adversarial_refreshes".into(), self.adversarial_refreshes.to_string()),
            ("adversarial_threshold".into(), self.adversarial_threshold.to_string()),
            ("base_negative_strategy".into(), strategy.into()),
            ("eval_subset".into(), self.eval_subset.to_string()),
        ];
        out.sort();
        out
    }
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("expected a boolean, got {:?}", other),
    }
}

fn check_range(name: &str, value: f64, lo: f64, hi: f64, hi_inclusive: bool) -> Result<()> {
    let ok = value >= lo && (value < hi || (hi_inclusive && value == hi));
    if !ok {
        bail!(
            "{} = {} outside [{}, {}{}",
            name,
            value,
            lo,
            hi,
            if hi_inclusive { "]" } else { ")" }
        );
    }
    Ok(())
}

/// Loads and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut cfg = RunConfig::desk_defaults();
    let mut seen: HashSet<String> = HashSet::new();
    let mut family: Option<String> = None;
    let mut raw: Vec<(usize, String, String)> = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", path.display(), idx + 1))?;
        let key = key.trim().to_owned();
        let value = value.trim().to_owned();
        if !seen.insert(key.clone()) {
            bail!("{}:{}: duplicate key {:?}", path.display(), idx + 1, key);
        }
        if key == "family" {
            family = Some(value);
        } else {
            raw.push((idx + 1, key, value));
        }
    }

    if let Some(f) = &family {
        cfg.apply_family(f)?;
    }

    for (line, key, value) in raw {
        set_key(&mut cfg, base, &key, &value)
            .with_context(|| format!("{}:{}: bad value for {:?}", path.display(), line, key))?;
    }

    validate(&cfg)?;
    Ok(cfg)
}

fn set_key(cfg: &mut RunConfig, base: &Path, key: &str, value: &str) -> Result<()> {
    let path_of = |v: &str| -> PathBuf {
        let p = PathBuf::from(v);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };
    match key {
        "train_path" => cfg.train_path = path_of(value),
        "valid_path" => cfg.valid_path = path_of(value),
        "test_path" => cfg.test_path = path_of(value),
        "workdir" => cfg.workdir = path_of(value),
        "seed" => cfg.seed = value.parse()?,
        "threads" => cfg.threads = value.parse()?,
        "deterministic" => cfg.deterministic = parse_bool(value)?,
        "delta_sub" => cfg.delta_sub = value.parse()?,
        "delta_rcwc" => {
            cfg.delta_rcwc = if value == "inf" { u32::MAX } else { value.parse()? }
        }
        "delta_lcw" => cfg.delta_lcw = value.parse()?,
        "lcw_folds" => cfg.lcw_folds = value.parse()?,
        "embedding_kind" => cfg.embedding_kind = parse_kind(value)?,
        "embedding_dim" => cfg.embedding_dim = value.parse()?,
        "embedding_lr" => cfg.embedding_lr = value.parse()?,
        "embedding_batch" => cfg.embedding_batch = value.parse()?,
        "embedding_steps" => cfg.embedding_steps = value.parse()?,
        "embedding_negatives" => cfg.embedding_negatives = value.parse()?,
        "embedding_alpha" => cfg.embedding_alpha = value.parse()?,
        "embedding_gamma" => cfg.embedding_gamma = value.parse()?,
        "embedding_checkpoint_interval" => cfg.embedding_checkpoint_interval = value.parse()?,
        "embedding_log_interval" => cfg.embedding_log_interval = value.parse()?,
        "embedding_valid_sample" => cfg.embedding_valid_sample = value.parse()?,
        "classifier_negatives" => cfg.classifier_negatives = value.parse()?,
        "estimators" => cfg.estimators = value.parse()?,
        "max_depth" => cfg.max_depth = value.parse()?,
        "learning_rate" => cfg.learning_rate = value.parse()?,
        "l2_leaf_penalty" => cfg.l2_leaf_penalty = value.parse()?,
        "min_split_gain" => cfg.min_split_gain = value.parse()?,
        "min_child_hessian" => cfg.min_child_hessian = value.parse()?,
        "min_positives" => cfg.min_positives = value.parse()?,
        "adversarial_fraction" => cfg.adversarial_fraction = value.parse()?,
        "adversarial_refreshes" => cfg.adversarial_refreshes = value.parse()?,
        "adversarial_threshold" => cfg.adversarial_threshold = value.parse()?,
        "base_negative_strategy" => {
            cfg.base_negative_strategy = match value {
                "auto" => BaseStrategy::Auto,
                "naive" => BaseStrategy::Naive,
                "rcwc" => BaseStrategy::Rcwc,
                other => bail!("unknown strategy {:?} (auto|naive|rcwc)", other),
            }
        }
        "eval_subset" => cfg.eval_subset = value.parse()?,
        other => bail!("unknown config key {:?}", other),
    }
    Ok(())
}

pub fn parse_kind(value: &str) -> Result<EmbeddingKind> {
    match value {
        "translational" => Ok(EmbeddingKind::TranslationalReal),
        "rotational" => Ok(EmbeddingKind::RotationalComplex),
        other => bail!("unknown embedding kind {:?} (translational|rotational)", other),
    }
}

fn validate(cfg: &RunConfig) -> Result<()> {
    for (name, path) in [
        ("train_path", &cfg.train_path),
        ("valid_path", &cfg.valid_path),
        ("test_path", &cfg.test_path),
    ] {
        if path.as_os_str().is_empty() {
            bail!("config is missing required key {:?}", name);
        }
    }
    check_range("delta_sub", cfg.delta_sub, 0.0, 1.0, true)?;
    check_range("delta_lcw", cfg.delta_lcw, 0.0, 1.0, true)?;
    check_range("adversarial_fraction", cfg.adversarial_fraction, 0.0, 1.0, false)?;
    check_range("adversarial_threshold", cfg.adversarial_threshold, 0.0, 1.0, true)?;
    check_range("learning_rate", cfg.learning_rate, 0.0, 1.0, true)?;
    check_range("embedding_alpha", cfg.embedding_alpha, 0.0, f64::INFINITY, false)?;
    if cfg.estimators == 0 || cfg.max_depth == 0 || cfg.embedding_dim == 0 {
        bail!("estimators, max_depth and embedding_dim must be at least 1");
    }
    if cfg.embedding_negatives == 0 || cfg.classifier_negatives == 0 {
        bail!("negative sample counts must be at least 1");
    }
    if cfg.lcw_folds == 0 {
        bail!("lcw_folds must be at least 1");
    }
    Ok(())
}
