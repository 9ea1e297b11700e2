//! JSON model checkpoints: the model configuration plus every named
//! parameter array with explicit shapes. `load(save(model))` reproduces the
//! model exactly (bit-for-bit on every parameter).

use serde::{Deserialize, Serialize};
use sghp_core::model::{ModelConfig, ModelError, SghpModel};
use sghp_core::tape::{ParamSet, Shape, Tensor};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("checkpoint shape error: {0}")]
    Shape(String),
    #[error("{0}")]
    Model(#[from] ModelError),
}

impl CheckpointError {
    pub fn code(&self) -> &'static str {
        match self {
            CheckpointError::Io(_) => "io_error",
            CheckpointError::Parse(_) => "parse_error",
            CheckpointError::Shape(_) | CheckpointError::Model(_) => "invalid_checkpoint",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ConfigDoc {
    num_types: usize,
    embedding_dim: usize,
    covariate_dim: usize,
    noise_samples: usize,
    use_squared_distance: bool,
    include_self_term: bool,
    per_sample_l1: bool,
}

#[derive(Serialize, Deserialize)]
struct ArrayDoc {
    name: String,
    /// `[]` scalar, `[n]` vector, `[rows, cols]` matrix.
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    config: ConfigDoc,
    params: Vec<ArrayDoc>,
}

/// Serializes a model to the checkpoint JSON document.
pub fn save_to_string(model: &SghpModel) -> Result<String, CheckpointError> {
    let cfg = model.config();
    let doc = CheckpointDoc {
        config: ConfigDoc {
            num_types: cfg.num_types,
            embedding_dim: cfg.embedding_dim,
            covariate_dim: cfg.covariate_dim,
            noise_samples: cfg.noise_samples,
            use_squared_distance: cfg.use_squared_distance,
            include_self_term: cfg.include_self_term,
            per_sample_l1: cfg.per_sample_l1,
        },
        params: model
            .params()
            .iter()
            .map(|(name, t)| ArrayDoc {
                name: name.to_string(),
                shape: match t.shape() {
                    Shape::Scalar => vec![],
                    Shape::Vector(n) => vec![n],
                    Shape::Matrix(r, c) => vec![r, c],
                },
                data: t.data().to_vec(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses and layout-checks a checkpoint document.
pub fn load_from_str(text: &str) -> Result<SghpModel, CheckpointError> {
    let doc: CheckpointDoc = serde_json::from_str(text)?;
    let cfg = ModelConfig {
        num_types: doc.config.num_types,
        embedding_dim: doc.config.embedding_dim,
        covariate_dim: doc.config.covariate_dim,
        noise_samples: doc.config.noise_samples,
        use_squared_distance: doc.config.use_squared_distance,
        include_self_term: doc.config.include_self_term,
        per_sample_l1: doc.config.per_sample_l1,
    };
    let mut params = ParamSet::new();
    for array in doc.params {
        let tensor = match array.shape.as_slice() {
            [] => {
                if array.data.len() != 1 {
                    return Err(CheckpointError::Shape(array.name));
                }
                Tensor::scalar(array.data[0])
            }
            [n] => {
                if array.data.len() != *n {
                    return Err(CheckpointError::Shape(array.name));
                }
                Tensor::vector(array.data)
            }
            [r, c] => {
                if array.data.len() != r * c {
                    return Err(CheckpointError::Shape(array.name));
                }
                Tensor::matrix(*r, *c, array.data)
            }
            _ => return Err(CheckpointError::Shape(array.name)),
        };
        params.insert(&array.name, tensor);
    }
    Ok(SghpModel::from_parts(cfg, params)?)
}

/// Sum of serialized array sizes, for cross-checking the parameter count.
pub fn serialized_param_count(text: &str) -> Result<usize, CheckpointError> {
    let doc: CheckpointDoc = serde_json::from_str(text)?;
    Ok(doc.params.iter().map(|a| a.data.len()).sum())
}
