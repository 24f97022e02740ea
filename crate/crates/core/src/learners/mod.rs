//! Non-private online learners over finite hypothesis classes.

mod agnostic;
mod class;
mod stream;
mod version;

use serde::{Deserialize, Serialize};

pub use agnostic::AgnosticExpert;
pub use class::{FiniteHypothesisClass, RowSet};
pub use stream::{
    corrupt_labels, make_forcing_stream, make_realizable_stream, optimal_mistakes, StreamStyle,
};
pub use version::{Halving, RandomizedHalving, Soa};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub x: usize,
    pub y: bool,
}

impl LabeledExample {
    pub fn new(x: usize, y: bool) -> Self {
        Self { x, y }
    }
}

/// An online learner: predict a label for `x`, then receive the true label.
///
/// Deterministic learners must answer `predict` without changing any
/// observable state. Stochastic learners may advance internal randomness in
/// `predict`; [`OnlineLearner::snapshot`] returns an independent duplicate
/// whose future never affects the original.
pub trait OnlineLearner: Clone + Send {
    fn domain_size(&self) -> usize;

    fn predict(&mut self, x: usize) -> bool;

    fn update(&mut self, example: LabeledExample) -> Result<()>;

    fn is_deterministic(&self) -> bool {
        true
    }

    fn snapshot(&self) -> Self {
        self.clone()
    }

    /// Predictions on every domain point, computed on a snapshot.
    fn prediction_vector(&self) -> Vec<bool> {
        let mut probe = self.snapshot();
        (0..self.domain_size()).map(|x| probe.predict(x)).collect()
    }
}
