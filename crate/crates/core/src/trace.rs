//! Per-iteration telemetry shared by all solvers.

use serde::{Deserialize, Serialize};

use crate::vector::Vector;

/// One solver iteration `t` (1-based): the step from `x_{t-1}` to `x_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub t: usize,
    /// `f(x_t)`; exact for deterministic solvers, reference estimate (at the
    /// evaluation cadence) for stochastic ones.
    pub f_value: Option<f64>,
    /// `gamma_t * ||x_{t-1} - x_t||`, the mapping the step actually used.
    pub pg_norm: f64,
    /// `||P_X(x_{t-1}, grad f(x_{t-1}), gamma_t)||` with the true (or reference)
    /// gradient. Equals `pg_norm` for deterministic solvers.
    pub true_pg_norm: Option<f64>,
    pub gamma: f64,
    /// Local curvature estimate formed after the step, if the solver makes one.
    pub curvature: Option<f64>,
    /// Stochastic samples (or gradient evaluations) consumed through step `t`.
    pub samples_cum: u64,
}

/// Randomized output of a stochastic solver: the iterate `x_index` together
/// with the stepsize parameter of the step taken from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedOutput {
    pub index: usize,
    pub x: Vector,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub algorithm: String,
    pub records: Vec<IterRecord>,
    pub x0: Vector,
    /// `f(x_0)` when the solver evaluates it.
    pub initial_value: Option<f64>,
    pub final_x: Vector,
    /// Stepsize parameter the next step would use from `final_x`.
    pub next_gamma: f64,
    /// Mapping norm at `final_x` with `next_gamma` (deterministic solvers).
    pub final_pg_norm: Option<f64>,
    /// `x_0, ..., x_k`, only when requested.
    pub iterates: Option<Vec<Vector>>,
    pub output: Option<SelectedOutput>,
    pub config_echo: Vec<(String, String)>,
    pub stopped_early: bool,
}

impl Trace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn total_samples(&self) -> u64 {
        self.records.last().map_or(0, |r| r.samples_cum)
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gamma).collect()
    }

    pub fn output_index(&self) -> Option<usize> {
        self.output.as_ref().map(|o| o.index)
    }
}

/// Iterate index (`t - 1` of its record) with the smallest recorded
/// `pg_norm`; ties resolve to the earliest. `None` for an empty trace.
pub fn best_iterate(trace: &Trace) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in trace.records.iter().enumerate() {
        if best.is_none_or(|(_, b)| r.pg_norm < b) {
            best = Some((i, r.pg_norm));
        }
    }
    best
}
