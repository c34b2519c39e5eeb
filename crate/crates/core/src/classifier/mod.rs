//! Template classifier: standardization, a ReLU MLP with softmax head,
//! Adam training with early stopping, gradient checking and persistence.

mod codec;
mod gradcheck;
mod mlp;
mod persist;
mod standardize;
mod train;

pub use codec::LabelCodec;
pub use gradcheck::{gradient_check, gradient_check_with, GradientCheckReport, FD_STEP, MIN_COORDINATES};
pub use mlp::{Gradients, Layer, Loss, MlpModel, HIDDEN_LAYERS};
pub use persist::{decode_model, encode_model, load_model, save_model, MODEL_FORMAT_VERSION};
pub use standardize::{Standardizer, STANDARDIZER_EPSILON};
pub use train::{accuracy, train_mlp, train_mlp_with_validation, EpochStats, TrainConfig, TrainReport, MIN_SAMPLES_PER_CLASS};

use ndarray::Array2;
use thiserror::Error;

use crate::domain::TemplateId;
use crate::embedding::EmbeddingVector;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: cross-entropy {cross_entropy}, penalty {penalty}")]
    Divergence {
        epoch: usize,
        batch: usize,
        cross_entropy: f64,
        penalty: f64,
    },
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("model file corrupt in {section}: {detail}")]
    Corrupt { section: String, detail: String },
    #[error("model file version {found} is not supported (expected {MODEL_FORMAT_VERSION})")]
    UnsupportedVersion { found: u8 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model file I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Feature rows with one template label each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub features: Array2<f64>,
    pub labels: Vec<TemplateId>,
}

impl LabeledData {
    pub fn new(features: Array2<f64>, labels: Vec<TemplateId>) -> Result<Self, ClassifierError> {
        if features.nrows() != labels.len() {
            return Err(ClassifierError::Integrity(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(ClassifierError::Integrity(format!(
                "non-finite feature in row {}",
                i / features.ncols().max(1)
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn from_embeddings(vectors: &[EmbeddingVector], labels: Vec<TemplateId>) -> Result<Self, ClassifierError> {
        let dim = vectors.first().map(|v| v.values().len()).unwrap_or(0);
        let mut flat = Vec::with_capacity(vectors.len() * dim);
        for v in vectors {
            flat.extend_from_slice(v.values());
        }
        let features = Array2::from_shape_vec((vectors.len(), dim), flat)
            .map_err(|e| ClassifierError::Integrity(e.to_string()))?;
        Self::new(features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(ndarray::Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }
}
