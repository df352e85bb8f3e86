//! Projected gradient methods for smooth nonconvex problems over compact
//! convex sets: deterministic (PG, AC-PG), stochastic (SPG, AC-SPG,
//! two-phase AC-SPG) and variance-reduced (VR-SPG, AC-VR-SPG) solvers, with
//! the oracles, feasible sets and reproducible random streams they need.
//!
//! The `parallel` feature (default) evaluates mini-batches and independent
//! runs on rayon; without it everything runs sequentially with identical
//! results.

pub mod error;
pub mod exec;
pub mod mapping;
pub mod oracle;
pub mod problems;
pub mod rng;
pub mod select;
pub mod sets;
pub mod solvers;
pub mod trace;
pub mod vector;

pub use error::{OptError, Result};
pub use mapping::{local_curvature, projected_gradient, prox_step, ProjGrad};
pub use oracle::{DetOracle, StochOracle, ZeroNoise};
pub use rng::RngStream;
pub use sets::{BallSet, BoxSet, FeasibleSet, ProductSet};
pub use trace::{IterRecord, SelectedOutput, Trace};
pub use vector::Vector;
