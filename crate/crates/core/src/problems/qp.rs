//! Box-constrained quadratic programs `min 1/2 x^T Q x + c^T x` over a box.

use crate::error::{check_dim, invalid, Result};
use crate::oracle::DetOracle;
use crate::problems::linalg::SymMatrix;
use crate::rng::RngStream;
use crate::sets::{BoxSet, FeasibleSet};
use crate::vector::Vector;

#[derive(Debug, Clone)]
pub struct BoxQP {
    q: SymMatrix,
    c: Vector,
    set: FeasibleSet,
    spectral_norm: f64,
    lambda_min: f64,
}

impl BoxQP {
    /// Builds the instance and caches `||Q||` and the smallest eigenvalue.
    pub fn new(q: SymMatrix, c: Vector, bounds: BoxSet) -> Result<Self> {
        check_dim(q.dim(), c.len())?;
        check_dim(q.dim(), bounds.dim())?;
        let spectral_norm = q.spectral_norm()?;
        let lambda_min = q.eigenvalues()?.first().copied().unwrap_or(0.0);
        Ok(BoxQP {
            q,
            c,
            set: bounds.into(),
            spectral_norm,
            lambda_min,
        })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.q
    }

    pub fn linear(&self) -> &Vector {
        &self.c
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    /// `||Q||`, the gradient Lipschitz constant.
    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Weak-convexity modulus `max(0, -lambda_min(Q))`.
    pub fn lower_curvature(&self) -> f64 {
        (-self.lambda_min).max(0.0)
    }
}

impl DetOracle for BoxQP {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.q.quad_value(x.as_slice(), self.c.as_slice()))
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.value_grad(x).map(|(_, g)| g)
    }

    fn value_grad(&self, x: &Vector) -> Result<(f64, Vector)> {
        check_dim(self.dim(), x.len())?;
        let qx = self.q.mul(x.as_slice());
        // accurate values keep the descent checks and curvature quotients
        // meaningful near stationarity, where successive values agree to
        // the last few bits
        let value = self.q.quad_value(x.as_slice(), self.c.as_slice());
        let g: Vec<f64> = qx.iter().zip(self.c.iter()).map(|(a, b)| a + b).collect();
        Ok((value, Vector::checked(g, "QP gradient")?))
    }
}

fn check_bounds(n: usize, a: f64, b: f64) -> Result<()> {
    if n == 0 {
        return invalid("dimension must be at least 1");
    }
    if !(a < b) {
        return invalid(format!("box bounds need a < b, got [{a}, {b}]"));
    }
    Ok(())
}

/// `Q = (A + A^T)/2` and `c` with i.i.d. standard normal entries, box `[a, b]^n`.
pub fn gen_boxqp(n: usize, a: f64, b: f64, stream: &mut RngStream) -> Result<BoxQP> {
    check_bounds(n, a, b)?;
    let q = SymMatrix::random_symmetric(n, stream)?;
    let c = stream.standard_normal(n);
    BoxQP::new(q, c, BoxSet::uniform(n, a, b)?)
}

/// Convex variant: `Q = A^T A / n` with Gaussian `A`.
pub fn gen_convex_qp(n: usize, a: f64, b: f64, stream: &mut RngStream) -> Result<BoxQP> {
    check_bounds(n, a, b)?;
    let m = stream.standard_normal(n * n);
    let q = SymMatrix::gram(n, n, m.as_slice(), n as f64)?;
    let c = stream.standard_normal(n);
    BoxQP::new(q, c, BoxSet::uniform(n, a, b)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_instance() {
        let mut s = RngStream::new(1, 0, "qp");
        let qp = gen_boxqp(1, -5.0, 5.0, &mut s).unwrap();
        assert!((qp.spectral_norm() - qp.matrix().get(0, 0).abs()).abs() < 1e-12);
    }

    #[test]
    fn generated_matrix_is_exactly_symmetric() {
        let mut s = RngStream::new(2, 0, "qp");
        let qp = gen_boxqp(30, -5.0, 5.0, &mut s).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                assert_eq!(qp.matrix().get(i, j), qp.matrix().get(j, i));
            }
        }
        let big = gen_boxqp(100, -5.0, 5.0, &mut s).unwrap();
        assert!((big.set().diameter() - 100.0).abs() < 1e-12);
    }

    #[test]
    fn convex_variant_has_no_lower_curvature() {
        let mut s = RngStream::new(3, 0, "qp");
        let qp = gen_convex_qp(12, -1.0, 1.0, &mut s).unwrap();
        assert!(qp.lambda_min() > -1e-10);
        assert!(qp.lower_curvature() < 1e-10);
    }

    #[test]
    fn rejects_bad_bounds() {
        let mut s = RngStream::new(4, 0, "qp");
        assert!(gen_boxqp(3, 1.0, 1.0, &mut s).is_err());
        assert!(gen_boxqp(0, -1.0, 1.0, &mut s).is_err());
    }

    #[test]
    fn value_and_gradient_agree() {
        let q = SymMatrix::from_rows(2, vec![2.0, 1.0, 1.0, -1.0]).unwrap();
        let c = Vector::new(vec![1.0, -2.0]).unwrap();
        let qp = BoxQP::new(q, c, BoxSet::uniform(2, -1.0, 1.0).unwrap()).unwrap();
        let x = Vector::new(vec![0.5, 1.0]).unwrap();
        assert!((qp.value(&x).unwrap() - (0.25 - 1.5)).abs() < 1e-15);
        assert_eq!(qp.gradient(&x).unwrap().as_slice(), &[3.0, -2.5]);
    }
}
