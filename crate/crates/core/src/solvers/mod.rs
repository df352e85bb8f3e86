//! Projected gradient solvers.

pub mod det;
pub mod stoch;
pub mod vr;

use crate::error::{invalid, Result};
use crate::mapping::projected_gradient;
use crate::oracle::StochOracle;
use crate::rng::RngStream;
use crate::sets::FeasibleSet;
use crate::vector::Vector;

/// How often a stochastic solver measures progress with the oracle's
/// reference gradient. Evaluation draws never touch the solver's own streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalCadence {
    pub every: usize,
}

impl EvalCadence {
    pub fn every(every: usize) -> Self {
        EvalCadence { every }
    }

    /// Evaluated steps: the first, every `every`-th, and the last.
    pub fn is_due(&self, t: usize, k: usize) -> bool {
        t == 1 || t == k || (self.every > 0 && t % self.every == 0)
    }
}

pub(crate) struct Evaluator {
    cadence: Option<EvalCadence>,
    stream: RngStream,
}

impl Evaluator {
    pub(crate) fn new(cadence: Option<EvalCadence>, solver_stream: &RngStream) -> Result<Self> {
        if cadence.is_some_and(|c| c.every == 0) {
            return invalid("evaluation cadence must be positive");
        }
        Ok(Evaluator {
            cadence,
            stream: solver_stream.fork("eval", 0),
        })
    }

    /// `(f(x_new), ||P_X(x_prev, grad f(x_prev), gamma)||)` when step `t` is due.
    pub(crate) fn evaluate<O: StochOracle>(
        &mut self,
        oracle: &O,
        set: &FeasibleSet,
        t: usize,
        k: usize,
        x_prev: &Vector,
        x_new: &Vector,
        gamma: f64,
    ) -> Result<(Option<f64>, Option<f64>)> {
        match self.cadence {
            Some(c) if c.is_due(t, k) => {
                let (_, g) = oracle.reference_value_grad(x_prev, &mut self.stream)?;
                let pg = projected_gradient(set, x_prev, &g, gamma)?.norm();
                let (f_new, _) = oracle.reference_value_grad(x_new, &mut self.stream)?;
                Ok((Some(f_new), Some(pg)))
            }
            _ => Ok((None, None)),
        }
    }
}

pub(crate) fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive and finite, got {v}"))
    }
}
