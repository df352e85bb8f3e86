//! Dense symmetric matrices: products, spectral norm, eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, OptError, Result};
use crate::rng::RngStream;
use crate::vector::{dot, CompensatedSum};

/// Dense symmetric matrix stored row-major in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

pub const SPECTRAL_REL_TOL: f64 = 1e-8;
pub const SPECTRAL_MAX_ITER: usize = 100_000;

impl SymMatrix {
    /// Accepts a row-major square matrix that is symmetric to `1e-12`
    /// (relative to its largest entry).
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(n * n, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(OptError::NonFinite("matrix entries"));
        }
        let scale = data.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            for j in 0..i {
                if (data[i * n + j] - data[j * n + i]).abs() > 1e-12 * scale {
                    return invalid(format!("matrix is not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(SymMatrix { n, data })
    }

    /// `(A + A^T) / 2` for a row-major square `A`.
    pub fn symmetrize(n: usize, a: &[f64]) -> Result<Self> {
        check_dim(n * n, a.len())?;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
            }
        }
        Self::from_rows(n, data)
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        let mut data = vec![0.0; n * n];
        for (i, v) in d.iter().enumerate() {
            data[i * n + i] = *v;
        }
        Self::from_rows(n, data)
    }

    /// `A^T A / scale` for a row-major `rows x cols` matrix `A`.
    pub fn gram(rows: usize, cols: usize, a: &[f64], scale: f64) -> Result<Self> {
        check_dim(rows * cols, a.len())?;
        let mut data = vec![0.0; cols * cols];
        for i in 0..cols {
            for j in i..cols {
                let s: f64 = (0..rows).map(|r| a[r * cols + i] * a[r * cols + j]).sum::<f64>() / scale;
                data[i * cols + j] = s;
                data[j * cols + i] = s;
            }
        }
        Self::from_rows(cols, data)
    }

    /// Gaussian `(A + A^T) / 2` with i.i.d. standard normal `A`.
    pub fn random_symmetric(n: usize, stream: &mut RngStream) -> Result<Self> {
        let a = stream.standard_normal(n * n);
        Self::symmetrize(n, a.as_slice())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.rows()) {
            *o = dot(row, x);
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_into(x, &mut out);
        out
    }

    /// `x^T A x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.rows().zip(x).map(|(row, xi)| xi * dot(row, x)).sum()
    }

    /// `x^T A x / 2 + c^T x` in double-double precision, so that the result is
    /// within about one rounding of the exact value even when the terms
    /// cancel heavily.
    pub fn quad_value(&self, x: &[f64], c: &[f64]) -> f64 {
        let mut acc = CompensatedSum::default();
        for ((row, &xi), &ci) in self.rows().zip(x).zip(c) {
            let mut ax = CompensatedSum::default();
            for (a, b) in row.iter().zip(x) {
                ax.add_product(*a, *b);
            }
            let (hi, lo) = ax.parts();
            acc.add_product(xi, 0.5 * hi);
            acc.add_product(xi, 0.5 * lo);
            acc.add_product(xi, ci);
        }
        acc.value()
    }

    /// Largest absolute eigenvalue by power iteration on `A^2`.
    ///
    /// Stops once the eigen-residual `||A^2 v - rho v||` of the unit iterate is
    /// at most `SPECTRAL_REL_TOL * rho`, which places `rho` within that
    /// relative distance of an eigenvalue of `A^2`; errors after
    /// `SPECTRAL_MAX_ITER` steps.
    pub fn spectral_norm(&self) -> Result<f64> {
        let n = self.n;
        if n == 0 || self.data.iter().all(|v| *v == 0.0) {
            return Ok(0.0);
        }
        // deterministic start with no special alignment
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i + 1) as f64).sin()).collect();
        normalize(&mut v);
        let mut w = vec![0.0; n];
        let mut u = vec![0.0; n];
        for _ in 0..SPECTRAL_MAX_ITER {
            self.mul_into(&v, &mut w);
            self.mul_into(&w, &mut u);
            // Rayleigh quotient of A^2 is ||Av||^2 for unit v
            let rho = dot(&w, &w);
            if rho == 0.0 {
                // v lies in the null space; restart from a basis vector
                v.iter_mut().enumerate().for_each(|(i, x)| *x = if i == 0 { 1.0 } else { 0.0 });
                continue;
            }
            let resid = u
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - rho * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if resid <= SPECTRAL_REL_TOL * rho {
                return Ok(rho.sqrt());
            }
            normalize(&mut u);
            std::mem::swap(&mut v, &mut u);
        }
        Err(OptError::NotConverged {
            what: "spectral norm power iteration",
            iterations: SPECTRAL_MAX_ITER,
        })
    }

    /// All eigenvalues in ascending order (cyclic Jacobi rotations).
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut a = self.data.clone();
        let off = |a: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        s += a[i * n + j] * a[i * n + j];
                    }
                }
            }
            s
        };
        let total: f64 = a.iter().map(|v| v * v).sum();
        const SWEEPS: usize = 100;
        for _ in 0..SWEEPS {
            if off(&a) <= 1e-30 * total.max(f64::MIN_POSITIVE) {
                let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
                ev.sort_by(f64::total_cmp);
                return Ok(ev);
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        Err(OptError::NotConverged {
            what: "Jacobi eigenvalue sweeps",
            iterations: SWEEPS,
        })
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let nrm = dot(v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
    nrm
}
