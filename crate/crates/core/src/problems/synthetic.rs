//! Finite-sum quadratic with a known noise model, for statistical tests.
//!
//! Sample `i` has `F(x, i) = 1/2 x^T Q x + (c + e_i)^T x + s_i/2 ||x||^2`, where
//! the offsets `e_i` and scalars `s_i` are centered over the data set. The
//! population objective is therefore exactly `1/2 x^T Q x + c^T x`, and the
//! per-sample gradient error `e_i + s_i x` has a variance available in closed form.

use crate::error::{check_dim, invalid, Result};
use crate::oracle::{DetOracle, StochOracle};
use crate::problems::linalg::SymMatrix;
use crate::problems::qp::BoxQP;
use crate::rng::RngStream;
use crate::vector::{dot, Vector};

#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    base: BoxQP,
    offsets: Vec<f64>,
    scales: Vec<f64>,
    m: usize,
}

impl NoisyQuadratic {
    /// `m` samples with Gaussian offsets of standard deviation `offset_std`
    /// per coordinate and curvature perturbations of standard deviation
    /// `scale_std`, both centered exactly.
    pub fn new(
        base: BoxQP,
        m: usize,
        offset_std: f64,
        scale_std: f64,
        stream: &mut RngStream,
    ) -> Result<Self> {
        if m < 2 {
            return invalid("need at least two samples");
        }
        if !(offset_std >= 0.0 && scale_std >= 0.0) {
            return invalid("noise levels must be nonnegative");
        }
        let n = base.dim();
        let mut offsets = stream.standard_normal(m * n).into_inner();
        for j in 0..n {
            let mean = (0..m).map(|i| offsets[i * n + j]).sum::<f64>() / m as f64;
            for i in 0..m {
                offsets[i * n + j] = offset_std * (offsets[i * n + j] - mean);
            }
        }
        let mut scales = stream.standard_normal(m).into_inner();
        let mean = scales.iter().sum::<f64>() / m as f64;
        scales.iter_mut().for_each(|s| *s = scale_std * (*s - mean));
        Ok(NoisyQuadratic {
            base,
            offsets,
            scales,
            m,
        })
    }

    pub fn base(&self) -> &BoxQP {
        &self.base
    }

    pub fn size(&self) -> usize {
        self.m
    }

    fn offset(&self, i: usize) -> &[f64] {
        let n = self.base.dim();
        &self.offsets[i * n..(i + 1) * n]
    }

    /// `E ||G(x, i) - grad f(x)||^2 = mean_i ||e_i + s_i x||^2`.
    pub fn variance_at(&self, x: &Vector) -> Result<f64> {
        check_dim(self.base.dim(), x.len())?;
        let xs = x.as_slice();
        Ok((0..self.m)
            .map(|i| {
                let s = self.scales[i];
                self.offset(i)
                    .iter()
                    .zip(xs)
                    .map(|(e, xi)| (e + s * xi).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / self.m as f64)
    }

    /// Upper bound of [`Self::variance_at`] over `||x|| <= radius`.
    pub fn variance_bound(&self, radius: f64) -> f64 {
        let m = self.m as f64;
        let e2 = self.offsets.iter().map(|v| v * v).sum::<f64>() / m;
        let s2 = self.scales.iter().map(|v| v * v).sum::<f64>() / m;
        let n = self.base.dim();
        let cross: f64 = (0..n)
            .map(|j| {
                (0..self.m)
                    .map(|i| self.scales[i] * self.offsets[i * n + j])
                    .sum::<f64>()
                    / m
            })
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt();
        e2 + 2.0 * cross * radius + s2 * radius * radius
    }

    /// `max_i ||Q + s_i I||`, the largest per-sample gradient Lipschitz constant.
    pub fn sample_lipschitz(&self) -> f64 {
        let lo = self.base.lambda_min();
        let hi = self.base.matrix().eigenvalues().map(|e| e[e.len() - 1]).unwrap_or(lo);
        self.scales
            .iter()
            .map(|s| (hi + s).abs().max((lo + s).abs()))
            .fold(self.base.spectral_norm(), f64::max)
    }
}

impl StochOracle for NoisyQuadratic {
    type Sample = usize;

    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn draw(&self, count: usize, stream: &mut RngStream) -> Result<Vec<usize>> {
        Ok((0..count).map(|_| stream.index(self.m)).collect())
    }

    /// `count == M` returns every sample once.
    fn draw_anchor(&self, count: usize, stream: &mut RngStream) -> Result<Vec<usize>> {
        if count == self.m {
            Ok((0..self.m).collect())
        } else {
            self.draw(count, stream)
        }
    }

    fn accumulate(&self, x: &[f64], i: &usize, g: &mut [f64]) -> Result<f64> {
        let q: &SymMatrix = self.base.matrix();
        let c = self.base.linear().as_slice();
        let e = self.offset(*i);
        let s = self.scales[*i];
        let mut value = 0.0;
        for (j, row) in q.rows().enumerate() {
            let qx = dot(row, x);
            g[j] += qx + c[j] + e[j] + s * x[j];
            value += x[j] * (0.5 * qx + c[j] + e[j] + 0.5 * s * x[j]);
        }
        Ok(value)
    }

    fn reference_value_grad(&self, x: &Vector, _stream: &mut RngStream) -> Result<(f64, Vector)> {
        self.base.value_grad(x)
    }

    fn population_gradient(&self, x: &Vector) -> Option<Result<Vector>> {
        Some(self.base.gradient(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::batch_value_grad;
    use crate::problems::qp::gen_convex_qp;

    #[test]
    fn full_pass_recovers_population() {
        let mut s = RngStream::new(1, 0, "nq");
        let base = gen_convex_qp(4, -1.0, 1.0, &mut s).unwrap();
        let nq = NoisyQuadratic::new(base, 64, 0.7, 0.3, &mut s).unwrap();
        let x = Vector::new(vec![0.3, -0.2, 0.9, 0.0]).unwrap();
        let all = nq.draw_anchor(64, &mut s).unwrap();
        let (v, g) = batch_value_grad(&nq, &x, &all).unwrap();
        let (v0, g0) = nq.base().value_grad(&x).unwrap();
        assert!((v - v0).abs() < 1e-12);
        for i in 0..4 {
            assert!((g[i] - g0[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_bound_dominates() {
        let mut s = RngStream::new(2, 0, "nq");
        let base = gen_convex_qp(3, -1.0, 1.0, &mut s).unwrap();
        let nq = NoisyQuadratic::new(base, 200, 1.0, 0.5, &mut s).unwrap();
        let radius = 3f64.sqrt();
        for _ in 0..50 {
            let x = nq.base().set().sample_uniform(&mut s).unwrap();
            assert!(nq.variance_at(&x).unwrap() <= nq.variance_bound(radius) + 1e-12);
        }
    }
}
