//! Test problems: box-constrained quadratic programs, the smoothed SVM and a
//! finite-sum quadratic with controllable noise.

pub mod linalg;
pub mod qp;
pub mod svm;
pub mod synthetic;

use crate::error::{invalid, Result};
use crate::oracle::{batch_grad, StochOracle};
use crate::rng::RngStream;
use crate::vector::Vector;

/// Largest empirical per-sample gradient variance `mean ||G - Ḡ||^2` over
/// `points`, each probed with `samples` fresh draws.
pub fn empirical_variance<O: StochOracle>(
    oracle: &O,
    points: &[Vector],
    samples: usize,
    stream: &mut RngStream,
) -> Result<f64> {
    if samples < 2 {
        return invalid("need at least two samples per point");
    }
    let mut worst = 0.0f64;
    for x in points {
        let batch = oracle.draw(samples, stream)?;
        let mean = batch_grad(oracle, x, &batch)?;
        let mut total = 0.0;
        let mut g = vec![0.0; x.len()];
        for s in &batch {
            g.iter_mut().for_each(|v| *v = 0.0);
            oracle.accumulate(x.as_slice(), s, &mut g)?;
            total += g.iter().zip(mean.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        }
        worst = worst.max(total / (samples - 1) as f64);
    }
    Ok(worst)
}
