//! Weighted random selection of an output iterate.

use crate::error::{invalid, Result};
use crate::rng::RngStream;
use crate::trace::SelectedOutput;
use crate::vector::Vector;

/// Reservoir rule: after offering candidates with weights `w_1, w_2, ...`,
/// the held candidate is `j` with probability `w_j / sum(w)`. Holds a single
/// iterate, so the solver never stores its trajectory.
#[derive(Debug, Clone)]
pub struct ReservoirSelector {
    total_weight: f64,
    current: Option<SelectedOutput>,
    stream: RngStream,
}

impl ReservoirSelector {
    pub fn new(stream: RngStream) -> Self {
        ReservoirSelector {
            total_weight: 0.0,
            current: None,
            stream,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn current_index(&self) -> Option<usize> {
        self.current.as_ref().map(|c| c.index)
    }

    /// Offers iterate `x_index`; it replaces the held one with probability
    /// `weight / W` where `W` is the running weight sum including `weight`.
    pub fn offer(&mut self, weight: f64, index: usize, x: &Vector, gamma: f64) -> Result<()> {
        if !(weight.is_finite() && weight >= 0.0) {
            return invalid(format!("selector weight must be nonnegative, got {weight}"));
        }
        self.total_weight += weight;
        // one draw per offer keeps stream consumption independent of outcomes
        let u = self.stream.uniform01();
        if weight > 0.0 && u * self.total_weight < weight {
            self.current = Some(SelectedOutput {
                index,
                x: x.clone(),
                gamma,
            });
        }
        Ok(())
    }

    pub fn finish(self) -> Option<SelectedOutput> {
        self.current
    }
}

/// Normalizes nonnegative weights into a probability mass function.
pub fn normalize(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}
