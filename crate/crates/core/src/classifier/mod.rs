//! Trainable sequence classifiers over per-token embeddings.
//!
//! - [`ClassifierKind::BiLstm`]: stacked bidirectional LSTM; the final forward
//!   state and the final backward state (the one produced at the first token)
//!   of the top layer are concatenated and passed to a linear output layer.
//! - [`ClassifierKind::Lstm`]: the same stack, forward direction only.
//! - [`ClassifierKind::Linear`]: mean-pooled embeddings through a `tanh`
//!   hidden layer and a linear output layer.
//!
//! Pad rows are excluded from every recurrence and from pooling. Everything
//! is computed in `f64` and differentiated by hand; see [`ModelParams::gradient`].

mod lstm;
mod model;
mod params;
mod train;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use model::{GateStep, PROB_FLOOR};
pub use params::{CellLayout, DenseLayout, Layout, ModelParams, TensorInfo};
pub use train::{evaluate, examples_from_reports, predict_all, train, EpochRecord, Example, TrainConfig, TrainOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    #[serde(rename = "bilstm")]
    BiLstm,
    Lstm,
    Linear,
}

impl ClassifierKind {
    pub fn directions(self) -> usize {
        match self {
            ClassifierKind::BiLstm => 2,
            _ => 1,
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bilstm" => Ok(ClassifierKind::BiLstm),
            "lstm" => Ok(ClassifierKind::Lstm),
            "linear" => Ok(ClassifierKind::Linear),
            other => Err(Error::Config(format!("unknown classifier `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub input_dim: usize,
    pub hidden_size: usize,
    /// Recurrent layers; ignored by the linear model.
    pub num_layers: usize,
    pub num_classes: usize,
}

impl ClassifierSpec {
    pub fn bilstm(input_dim: usize, hidden_size: usize, num_layers: usize, num_classes: usize) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::BiLstm,
            input_dim,
            hidden_size,
            num_layers,
            num_classes,
        }
    }

    pub fn lstm(input_dim: usize, hidden_size: usize, num_layers: usize, num_classes: usize) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Lstm,
            ..Self::bilstm(input_dim, hidden_size, num_layers, num_classes)
        }
    }

    pub fn linear(input_dim: usize, hidden_size: usize, num_classes: usize) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Linear,
            ..Self::bilstm(input_dim, hidden_size, 1, num_classes)
        }
    }

    /// 768-dim input, two layers of 256 hidden units.
    pub fn full_size(kind: ClassifierKind, num_classes: usize) -> Self {
        ClassifierSpec {
            kind,
            ..Self::bilstm(768, 256, 2, num_classes)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_size == 0 || self.num_layers == 0 {
            return Err(Error::Config(
                "input_dim, hidden_size and num_layers must be at least 1".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        Ok(())
    }
}

/// Class probabilities and their argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub predicted_class: usize,
}

impl Prediction {
    /// Argmax with ties going to the lowest class id.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Self {
        let mut best = 0;
        for (c, &p) in probabilities.iter().enumerate() {
            if p > probabilities[best] {
                best = c;
            }
        }
        Prediction {
            probabilities,
            predicted_class: best,
        }
    }
}
