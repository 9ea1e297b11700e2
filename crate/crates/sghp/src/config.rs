//! The run configuration document.
//!
//! One TOML document drives every subcommand; command-line flags override
//! individual fields. All randomness flows from the single `seed`. The
//! effective merged configuration is echoed into the output directory for
//! provenance.

use serde::{Deserialize, Serialize};
use sghp_core::adam::AdamConfig;
use sghp_core::model::ModelConfig;
use sghp_core::train::TrainConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("config error: {0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Io(_) => "io_error",
            ConfigError::Parse(_) | ConfigError::Serialize(_) => "parse_error",
            ConfigError::Invalid(_) => "config_error",
        }
    }
}

fn default_out_dir() -> String {
    "out".into()
}

fn default_spec() -> String {
    "appendix-a".into()
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct IoSection {
    /// Output directory; `--out` overrides.
    pub out_dir: String,
    /// Input dataset path (train / evaluate / validate).
    pub dataset: Option<String>,
    /// Input checkpoint path (evaluate / export-kernels).
    pub checkpoint: Option<String>,
    /// Hawkes specification: `appendix-a` or a TOML path (simulate source,
    /// recovery ground truth).
    pub spec: String,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection {
            out_dir: default_out_dir(),
            dataset: None,
            checkpoint: None,
            spec: default_spec(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub num_sequences: usize,
    pub horizon: f64,
    /// Discard simulated sequences shorter than this many events.
    pub min_len: usize,
    /// Label recorded in the dataset header.
    pub time_unit: String,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            num_sequences: 1000,
            horizon: 70.0,
            min_len: 2,
            time_unit: "unit".into(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub embedding_dim: usize,
    pub noise_samples: usize,
    pub use_squared_distance: bool,
    pub include_self_term: bool,
    pub per_sample_l1: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            embedding_dim: 16,
            noise_samples: 10,
            use_squared_distance: true,
            include_self_term: true,
            per_sample_l1: false,
        }
    }
}

impl ModelSection {
    /// Completes the model configuration with dataset-derived dimensions.
    pub fn to_model_config(&self, num_types: usize, covariate_dim: usize) -> ModelConfig {
        ModelConfig {
            num_types,
            embedding_dim: self.embedding_dim,
            covariate_dim,
            noise_samples: self.noise_samples,
            use_squared_distance: self.use_squared_distance,
            include_self_term: self.include_self_term,
            per_sample_l1: self.per_sample_l1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    /// Train/validation/test ratios; must sum to 1.
    pub split: [f64; 3],
}

impl Default for TrainingSection {
    fn default() -> Self {
        let adam = AdamConfig::default();
        let t = TrainConfig::new(ModelConfig::new(1, 2, 0));
        TrainingSection {
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            learning_rate: adam.learning_rate,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            clip_norm: t.clip_norm,
            split: [0.8, 0.1, 0.1],
        }
    }
}

impl TrainingSection {
    pub fn to_train_config(&self, model: ModelConfig, seed: u64) -> TrainConfig {
        TrainConfig {
            model,
            adam: AdamConfig {
                learning_rate: self.learning_rate,
                beta1: self.beta1,
                beta2: self.beta2,
                epsilon: self.epsilon,
            },
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            clip_norm: self.clip_norm,
            seed,
        }
    }
}

/// Which split of the dataset a metrics run scores.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum EvalSplit {
    Train,
    Val,
    Test,
    All,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
    pub split: EvalSplit,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            grid_start: 0.0,
            grid_stop: 8.0,
            grid_step: 0.05,
            split: EvalSplit::Test,
        }
    }
}

impl EvaluationSection {
    pub fn grid(&self) -> Result<Vec<f64>, ConfigError> {
        if !(self.grid_step > 0.0) || !(self.grid_stop > self.grid_start) {
            return Err(ConfigError::Invalid(
                "evaluation grid must ascend with a positive step".into(),
            ));
        }
        let n = ((self.grid_stop - self.grid_start) / self.grid_step).round() as usize;
        Ok((0..=n).map(|i| self.grid_start + i as f64 * self.grid_step).collect())
    }
}

/// The whole run document.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; all randomness derives from it.
    pub seed: u64,
    pub io: IoSection,
    pub simulate: SimulateSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
}

impl RunConfig {
    pub fn from_str(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_str(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let parsed = RunConfig::from_str(&text).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn partial_document_fills_defaults() {
        let cfg = RunConfig::from_str(
            "seed = 9\n[training]\nmax_epochs = 5\n[io]\nspec = \"appendix-a\"\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.training.max_epochs, 5);
        assert_eq!(cfg.training.batch_size, 32);
        assert_eq!(cfg.model.embedding_dim, 16);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(RunConfig::from_str("definitely_not_a_field = 1\n").is_err());
    }

    #[test]
    fn grid_construction() {
        let eval = EvaluationSection::default();
        let grid = eval.grid().unwrap();
        assert_eq!(grid.len(), 161);
        assert_eq!(grid[0], 0.0);
        assert!((grid[160] - 8.0).abs() < 1e-12);
        let bad = EvaluationSection {
            grid_step: -1.0,
            ..EvaluationSection::default()
        };
        assert!(bad.grid().is_err());
    }

    #[test]
    fn training_section_maps_to_train_config() {
        let sec = TrainingSection {
            learning_rate: 0.01,
            ..TrainingSection::default()
        };
        let model = ModelConfig::new(2, 16, 0);
        let cfg = sec.to_train_config(model, 42);
        assert_eq!(cfg.adam.learning_rate, 0.01);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.model.num_types, 2);
    }
}
