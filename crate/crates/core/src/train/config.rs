use std::path::{Path, PathBuf};

use crate::data::{SplitMode, SplitSpec};
use crate::error::{Error, Result};
use crate::model::{Ablation, ModelConfig};

/// Overrides `checkpoint_dir` when set.
pub const CHECKPOINT_DIR_ENV: &str = "MEDGNN_CHECKPOINT_DIR";

/// Everything a training run depends on. Serialized as flat `key = value` text.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub split: SplitSpec,
    pub kernel_sizes: Vec<usize>,
    pub heads: usize,
    pub head_dim: usize,
    pub common_dim: usize,
    pub similarity_dim: usize,
    pub layers: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub ablation: Ablation,
    pub checkpoint_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data"),
            split: SplitSpec {
                mode: SplitMode::SubjectBased,
                ratios: [0.6, 0.2, 0.2],
                seed: 0,
            },
            kernel_sizes: vec![2, 4, 8],
            heads: 4,
            head_dim: 16,
            common_dim: 64,
            similarity_dim: 32,
            layers: 2,
            batch_size: 32,
            epochs: 10,
            learning_rate: 1e-4,
            ablation: Ablation::default(),
            checkpoint_dir: PathBuf::from("checkpoints"),
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key} expects true/false, got {value:?}"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse(key, v)).collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub const KEYS: [&'static str; 18] = [
        "dataset",
        "split_mode",
        "split_ratios",
        "split_seed",
        "kernel_sizes",
        "heads",
        "head_dim",
        "common_dim",
        "similarity_dim",
        "layers",
        "batch_size",
        "epochs",
        "learning_rate",
        "disable_da",
        "disable_fcn",
        "single_resolution",
        "checkpoint_dir",
        "seed",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "dataset" => self.dataset = PathBuf::from(value),
            "split_mode" => self.split.mode = value.parse()?,
            "split_ratios" => {
                let r: Vec<f64> = parse_list(key, value)?;
                self.split.ratios = r
                    .try_into()
                    .map_err(|_| Error::Config("split_ratios needs three values".into()))?;
            }
            "split_seed" => self.split.seed = parse(key, value)?,
            "kernel_sizes" => self.kernel_sizes = parse_list(key, value)?,
            "heads" => self.heads = parse(key, value)?,
            "head_dim" => self.head_dim = parse(key, value)?,
            "common_dim" => self.common_dim = parse(key, value)?,
            "similarity_dim" => self.similarity_dim = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "disable_da" => self.ablation.disable_da = parse_bool(key, value)?,
            "disable_fcn" => self.ablation.disable_fcn = parse_bool(key, value)?,
            "single_resolution" => self.ablation.single_resolution = parse_bool(key, value)?,
            "checkpoint_dir" => self.checkpoint_dir = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "dataset" => self.dataset.display().to_string(),
            "split_mode" => self.split.mode.to_string(),
            "split_ratios" => join(&self.split.ratios),
            "split_seed" => self.split.seed.to_string(),
            "kernel_sizes" => join(&self.kernel_sizes),
            "heads" => self.heads.to_string(),
            "head_dim" => self.head_dim.to_string(),
            "common_dim" => self.common_dim.to_string(),
            "similarity_dim" => self.similarity_dim.to_string(),
            "layers" => self.layers.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "epochs" => self.epochs.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "disable_da" => self.ablation.disable_da.to_string(),
            "disable_fcn" => self.ablation.disable_fcn.to_string(),
            "single_resolution" => self.ablation.single_resolution.to_string(),
            "checkpoint_dir" => self.checkpoint_dir.display().to_string(),
            "seed" => self.seed.to_string(),
            _ => return None,
        })
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {} is not key = value: {line:?}", lineno + 1))
            })?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).expect("known key")))
            .collect()
    }

    /// Applies [`CHECKPOINT_DIR_ENV`] if it is set and non-empty.
    pub fn apply_env(&mut self) {
        if let Ok(dir) = std::env::var(CHECKPOINT_DIR_ENV) {
            if !dir.is_empty() {
                self.checkpoint_dir = PathBuf::from(dir);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.kernel_sizes.is_empty() {
            return Err(Error::Config("kernel_sizes must not be empty".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, v) in [
            ("heads", self.heads),
            ("head_dim", self.head_dim),
            ("common_dim", self.common_dim),
            ("similarity_dim", self.similarity_dim),
            ("layers", self.layers),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        self.split.validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn model_config(&self, time_steps: usize, channels: usize, classes: usize) -> ModelConfig {
        ModelConfig {
            time_steps,
            channels,
            classes,
            kernel_sizes: self.kernel_sizes.clone(),
            heads: self.heads,
            head_dim: self.head_dim,
            common_dim: self.common_dim,
            similarity_dim: self.similarity_dim,
            layers: self.layers,
            ablation: self.ablation,
        }
    }
}
