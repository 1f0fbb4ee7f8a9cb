//! Linear reward scorer trained on preference groups.

pub mod features;
pub mod loss;
pub mod optim;
pub mod train;

use serde::{Deserialize, Serialize};

use features::FeatureVector;

pub use loss::{
    cross_entropy_loss, finite_diff_check, group_loss, listwise_bt_loss, loss_gradient, mse_loss,
    pairwise_bt_loss, softplus, Gradient, LossKind,
};
pub use train::{
    ranking_accuracy, train, Checkpoint, TraceRow, TrainError, TrainOutput, TrainerConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("feature dimension {got} does not match scorer dimension {expected}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub got: usize,
}

/// Anything that maps a feature vector to a scalar reward.
pub trait Scorer {
    fn score(&self, features: &FeatureVector) -> Result<f64, DimensionMismatch>;
}

/// `features · weights + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ScorerParams {
    pub fn zeros(dim: usize) -> Self {
        ScorerParams {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn score(&self, features: &FeatureVector) -> Result<f64, DimensionMismatch> {
        if features.dim() != self.weights.len() {
            return Err(DimensionMismatch {
                expected: self.weights.len(),
                got: features.dim(),
            });
        }
        let dot: f64 = self
            .weights
            .iter()
            .zip(features.as_slice())
            .map(|(w, x)| w * x)
            .sum();
        Ok(dot + self.bias)
    }

    pub fn is_finite(&self) -> bool {
        self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite())
    }

    /// Shifts coordinate `j` of the flattened `(weights, bias)` vector.
    pub(crate) fn nudge(&mut self, j: usize, delta: f64) {
        match self.weights.get_mut(j) {
            Some(w) => *w += delta,
            None => self.bias += delta,
        }
    }
}

impl Scorer for ScorerParams {
    fn score(&self, features: &FeatureVector) -> Result<f64, DimensionMismatch> {
        ScorerParams::score(self, features)
    }
}
