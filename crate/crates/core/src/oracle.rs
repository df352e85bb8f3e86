//! First-order oracle contracts and mini-batch evaluation.

use crate::error::{check_dim, OptError, Result};
use crate::exec::{map_chunks, BATCH_CHUNK};
use crate::rng::RngStream;
use crate::vector::Vector;

/// Exact value and gradient of a continuously differentiable objective.
pub trait DetOracle: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> Result<f64>;

    fn gradient(&self, x: &Vector) -> Result<Vector>;

    fn value_grad(&self, x: &Vector) -> Result<(f64, Vector)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }
}

/// Stochastic oracle returning `(F(x, xi), G(x, xi))` for drawn samples `xi`.
///
/// Drawing and evaluating are split so that one batch can be evaluated at
/// several points, as the recursive variance-reduced estimator requires.
pub trait StochOracle: Sync {
    type Sample: Send + Sync;

    fn dim(&self) -> usize;

    /// Draws `count` i.i.d. samples (or a without-replacement subset, for
    /// finite-sum oracles configured that way).
    fn draw(&self, count: usize, stream: &mut RngStream) -> Result<Vec<Self::Sample>>;

    /// Samples for a large anchor batch. Finite-sum oracles may return each
    /// element exactly once when `count` equals the dataset size.
    fn draw_anchor(&self, count: usize, stream: &mut RngStream) -> Result<Vec<Self::Sample>> {
        self.draw(count, stream)
    }

    /// Adds `G(x, sample)` into `grad_acc` and returns `F(x, sample)`.
    fn accumulate(&self, x: &[f64], sample: &Self::Sample, grad_acc: &mut [f64]) -> Result<f64>;

    /// Value and gradient used to evaluate progress: exact when the population
    /// is available, a large fresh-sample estimate otherwise.
    fn reference_value_grad(&self, x: &Vector, stream: &mut RngStream) -> Result<(f64, Vector)>;

    /// Exact gradient of the expectation, when it is computable.
    fn population_gradient(&self, _x: &Vector) -> Option<Result<Vector>> {
        None
    }
}

/// `(F(x, xi), G(x, xi))` for a single sample.
pub fn sample_value_grad<O: StochOracle>(
    oracle: &O,
    x: &Vector,
    sample: &O::Sample,
) -> Result<(f64, Vector)> {
    check_dim(oracle.dim(), x.len())?;
    let mut g = vec![0.0; x.len()];
    let v = oracle.accumulate(x.as_slice(), sample, &mut g)?;
    finish(v, g, "sample gradient")
}

fn finish(v: f64, g: Vec<f64>, what: &'static str) -> Result<(f64, Vector)> {
    if !v.is_finite() {
        return Err(OptError::NonFinite(what));
    }
    Ok((v, Vector::checked(g, what)?))
}

/// Means of `F` and `G` over `samples`, evaluated at `x`.
///
/// Partial sums are formed over fixed-size chunks (possibly in parallel) and
/// combined in order, so the result does not depend on the thread count.
pub fn batch_value_grad<O: StochOracle>(
    oracle: &O,
    x: &Vector,
    samples: &[O::Sample],
) -> Result<(f64, Vector)> {
    check_dim(oracle.dim(), x.len())?;
    if samples.is_empty() {
        return Err(OptError::InvalidParameter("empty batch".into()));
    }
    let n = x.len();
    let xs = x.as_slice();
    let partials = map_chunks(samples.len(), BATCH_CHUNK, |r| -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; n];
        let mut v = 0.0;
        for s in &samples[r] {
            v += oracle.accumulate(xs, s, &mut g)?;
        }
        Ok((v, g))
    });
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for p in partials {
        let (v, g) = p?;
        value += v;
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
    }
    let inv = 1.0 / samples.len() as f64;
    grad.iter_mut().for_each(|a| *a *= inv);
    finish(value * inv, grad, "batch gradient")
}

pub fn batch_grad<O: StochOracle>(oracle: &O, x: &Vector, samples: &[O::Sample]) -> Result<Vector> {
    batch_value_grad(oracle, x, samples).map(|(_, g)| g)
}

/// Draws `b` fresh samples and returns the batch means at `x`.
pub fn draw_batch_value_grad<O: StochOracle>(
    oracle: &O,
    x: &Vector,
    b: usize,
    stream: &mut RngStream,
) -> Result<(f64, Vector)> {
    let samples = oracle.draw(b, stream)?;
    batch_value_grad(oracle, x, &samples)
}

/// Paired evaluation of one batch at two points.
#[derive(Debug, Clone)]
pub struct BatchDifference {
    /// `mean_i [G(x_new, xi_i) - G(x_old, xi_i)]`
    pub mean_diff: Vector,
    /// `sum_i ||G(x_new, xi_i) - G(x_old, xi_i)||^2`
    pub sum_sq_diff: f64,
    pub count: usize,
}

pub fn batch_difference<O: StochOracle>(
    oracle: &O,
    x_new: &Vector,
    x_old: &Vector,
    samples: &[O::Sample],
) -> Result<BatchDifference> {
    check_dim(oracle.dim(), x_new.len())?;
    check_dim(x_new.len(), x_old.len())?;
    if samples.is_empty() {
        return Err(OptError::InvalidParameter("empty batch".into()));
    }
    let n = x_new.len();
    let (a, b) = (x_new.as_slice(), x_old.as_slice());
    let partials = map_chunks(samples.len(), BATCH_CHUNK, |r| -> Result<(Vec<f64>, f64)> {
        let mut sum = vec![0.0; n];
        let mut sq = 0.0;
        let mut ga = vec![0.0; n];
        let mut gb = vec![0.0; n];
        for s in &samples[r] {
            ga.iter_mut().for_each(|v| *v = 0.0);
            gb.iter_mut().for_each(|v| *v = 0.0);
            oracle.accumulate(a, s, &mut ga)?;
            oracle.accumulate(b, s, &mut gb)?;
            for i in 0..n {
                let d = ga[i] - gb[i];
                sum[i] += d;
                sq += d * d;
            }
        }
        Ok((sum, sq))
    });
    let mut mean = vec![0.0; n];
    let mut sum_sq = 0.0;
    for p in partials {
        let (s, q) = p?;
        mean.iter_mut().zip(&s).for_each(|(m, v)| *m += v);
        sum_sq += q;
    }
    let inv = 1.0 / samples.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    if !sum_sq.is_finite() {
        return Err(OptError::NonFinite("batch difference"));
    }
    Ok(BatchDifference {
        mean_diff: Vector::checked(mean, "batch difference")?,
        sum_sq_diff: sum_sq,
        count: samples.len(),
    })
}

/// Wraps an exact oracle as a stochastic one with zero variance.
#[derive(Debug, Clone)]
pub struct ZeroNoise<O>(pub O);

impl<O: DetOracle> StochOracle for ZeroNoise<O> {
    type Sample = ();

    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn draw(&self, count: usize, _stream: &mut RngStream) -> Result<Vec<()>> {
        Ok(vec![(); count])
    }

    fn accumulate(&self, x: &[f64], _sample: &(), grad_acc: &mut [f64]) -> Result<f64> {
        let x = Vector::new(x.to_vec())?;
        let (v, g) = self.0.value_grad(&x)?;
        grad_acc.iter_mut().zip(g.iter()).for_each(|(a, b)| *a += b);
        Ok(v)
    }

    fn reference_value_grad(&self, x: &Vector, _stream: &mut RngStream) -> Result<(f64, Vector)> {
        self.0.value_grad(x)
    }

    fn population_gradient(&self, x: &Vector) -> Option<Result<Vector>> {
        Some(self.0.gradient(x))
    }
}
