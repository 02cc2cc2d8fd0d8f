//! Sample containers shared by the regression and simulation stacks.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One observed quadruple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<S, A> {
    pub state: S,
    pub action: A,
    pub reward: f64,
    pub next_state: S,
}

/// A batch of transitions, optionally tagged with the stage (1-based) they
/// were collected at.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<S, A> {
    pub rows: Vec<Transition<S, A>>,
    pub stage: Option<usize>,
}

impl<S, A> Dataset<S, A> {
    pub fn new(rows: Vec<Transition<S, A>>) -> Self {
        Dataset { rows, stage: None }
    }

    pub fn with_stage(rows: Vec<Transition<S, A>>, stage: usize) -> Self {
        Dataset {
            rows,
            stage: Some(stage),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Nonempty with finite rewards — the checks every consumer needs.
    pub fn check_basic(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::data("dataset is empty"));
        }
        if let Some(i) = self.rows.iter().position(|t| !t.reward.is_finite()) {
            return Err(Error::data(format!("non-finite reward at row {i}")));
        }
        Ok(())
    }
}

/// Row-streaming view of a regression problem: the fitted-Q loop only ever
/// needs the design row of a sample, its reward, and the best next-state
/// value under a weight vector. Implementations own whatever per-sample
/// caches make those cheap.
pub trait RegressionDesign {
    /// Feature dimension d.
    fn dim(&self) -> usize;
    /// Sample count n.
    fn len(&self) -> usize;
    /// Reward of sample `i`.
    fn reward(&self, i: usize) -> f64;
    /// Write phi(s_i, a_i) into `out` (length d).
    fn write_row(&self, i: usize, out: &mut [f64]);
    /// max_a <w, phi(s'_i, a)> over the admissible actions.
    fn next_best_value(&self, i: usize, w: &[f64]) -> f64;
}
