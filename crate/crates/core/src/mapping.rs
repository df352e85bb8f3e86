//! Prox-mapping, projected gradient mapping and the local curvature quotient.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, OptError, Result};
use crate::sets::FeasibleSet;
use crate::vector::{dot, Vector};

/// Squared displacements below this are treated as zero (0/0 := 0).
pub const ZERO_DISPLACEMENT_SQ: f64 = 1e-30;

/// Curvature quotients whose numerator is within this many ulps of the
/// magnitudes it was formed from are reported as 0.
pub const CANCELLATION_ULPS: f64 = 64.0;

/// Result of the projected gradient mapping `gamma * (x - x_plus)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjGrad {
    pub value: Vector,
    pub x_plus: Vector,
    pub gamma: f64,
}

impl ProjGrad {
    pub fn norm(&self) -> f64 {
        self.value.norm()
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        invalid(format!("gamma must be positive and finite, got {gamma}"))
    }
}

/// `argmin_{u in X} <g, u> + gamma/2 ||x - u||^2`, i.e. `P_X(x - g / gamma)`.
pub fn prox_step(set: &FeasibleSet, x: &Vector, g: &Vector, gamma: f64) -> Result<Vector> {
    check_gamma(gamma)?;
    check_dim(set.dim(), x.len())?;
    check_dim(x.len(), g.len())?;
    let step: Vec<f64> = x
        .iter()
        .zip(g.iter())
        .map(|(xi, gi)| xi - gi / gamma)
        .collect();
    if step.iter().any(|v| !v.is_finite()) {
        return Err(OptError::NonFinite("prox step"));
    }
    let mut out = vec![0.0; step.len()];
    set.project_into(&step, &mut out);
    Vector::checked(out, "prox step")
}

/// Projected gradient mapping at `x` for direction `g` and scale `gamma`.
pub fn projected_gradient(
    set: &FeasibleSet,
    x: &Vector,
    g: &Vector,
    gamma: f64,
) -> Result<ProjGrad> {
    let x_plus = prox_step(set, x, g, gamma)?;
    let value = Vector::checked(
        x.iter()
            .zip(x_plus.iter())
            .map(|(a, b)| gamma * (a - b))
            .collect(),
        "projected gradient",
    )?;
    Ok(ProjGrad {
        value,
        x_plus,
        gamma,
    })
}

/// Local curvature quotient `2 (f(y) - f(x) - <grad f(x), y - x>) / ||y - x||^2`.
///
/// Signed: negative values indicate locally concave behaviour. Returns 0 for a
/// (numerically) zero displacement, and when the numerator is lost to
/// cancellation (see [`CANCELLATION_ULPS`]).
pub fn local_curvature(
    f_x: f64,
    f_y: f64,
    grad_x: &Vector,
    x: &Vector,
    y: &Vector,
) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    check_dim(x.len(), grad_x.len())?;
    if !(f_x.is_finite() && f_y.is_finite()) {
        return Err(OptError::NonFinite("local curvature inputs"));
    }
    Ok(curvature_quotient(
        f_x,
        f_y,
        grad_x.as_slice(),
        x.as_slice(),
        y.as_slice(),
    ))
}

pub(crate) fn curvature_quotient(f_x: f64, f_y: f64, grad_x: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let dd = dot(&d, &d);
    if dd < ZERO_DISPLACEMENT_SQ {
        return 0.0;
    }
    let gd = dot(grad_x, &d);
    let num = f_y - f_x - gd;
    // below this the numerator is indistinguishable from rounding error
    let noise = CANCELLATION_ULPS * f64::EPSILON * (f_x.abs() + f_y.abs() + gd.abs());
    if num.abs() <= noise {
        return 0.0;
    }
    2.0 * num / dd
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::BoxSet;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_slice(xs).unwrap()
    }

    fn boxed(n: usize, a: f64, b: f64) -> FeasibleSet {
        BoxSet::uniform(n, a, b).unwrap().into()
    }

    #[test]
    fn interior_prox_is_a_gradient_step() {
        let s = boxed(1, -10.0, 10.0);
        assert_eq!(prox_step(&s, &v(&[0.0]), &v(&[2.0]), 4.0).unwrap(), v(&[-0.5]));
        let pg = projected_gradient(&s, &v(&[0.0]), &v(&[2.0]), 4.0).unwrap();
        assert_eq!(pg.value, v(&[2.0]));
    }

    #[test]
    fn boundary_fixed_point() {
        let s = boxed(1, 0.0, 1.0);
        assert_eq!(prox_step(&s, &v(&[0.0]), &v(&[1.0]), 1.0).unwrap(), v(&[0.0]));
        let pg = projected_gradient(&s, &v(&[0.0]), &v(&[1.0]), 1.0).unwrap();
        assert_eq!(pg.value, v(&[0.0]));
    }

    #[test]
    fn clipped_prox() {
        let s = boxed(2, -1.0, 1.0);
        let p = prox_step(&s, &v(&[0.5, 0.5]), &v(&[3.0, -3.0]), 2.0).unwrap();
        assert_eq!(p, v(&[-1.0, 1.0]));
        let pg = projected_gradient(&boxed(1, -1.0, 1.0), &v(&[1.0]), &v(&[-4.0]), 2.0).unwrap();
        assert_eq!(pg.x_plus, v(&[1.0]));
        assert_eq!(pg.value, v(&[0.0]));
    }

    #[test]
    fn rejects_bad_gamma() {
        let s = boxed(1, 0.0, 1.0);
        for g in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(prox_step(&s, &v(&[0.0]), &v(&[1.0]), g).is_err());
        }
    }

    #[test]
    fn value_is_reconstructible() {
        let s = boxed(3, -1.0, 1.0);
        let x = v(&[0.2, -0.9, 0.7]);
        let g = v(&[1.5, 3.0, -0.1]);
        let pg = projected_gradient(&s, &x, &g, 1.7).unwrap();
        let rebuilt = x.sub(&pg.x_plus).unwrap().scale(pg.gamma).unwrap();
        assert_eq!(rebuilt, pg.value);
    }

    #[test]
    fn curvature_zero_displacement() {
        let x = v(&[1.0, 2.0]);
        assert_eq!(local_curvature(3.0, 5.0, &v(&[1.0, 1.0]), &x, &x).unwrap(), 0.0);
        let y = v(&[1.0, 2.0 + 1e-16]);
        assert_eq!(local_curvature(3.0, 3.0, &v(&[1.0, 1.0]), &x, &y).unwrap(), 0.0);
    }

    #[test]
    fn curvature_of_quadratic() {
        // f = 1/2 (x1^2 + 3 x2^2), x = 0, y = e2
        let f = |z: &Vector| 0.5 * (z[0] * z[0] + 3.0 * z[1] * z[1]);
        let x = v(&[0.0, 0.0]);
        let y = v(&[0.0, 1.0]);
        let l = local_curvature(f(&x), f(&y), &v(&[0.0, 0.0]), &x, &y).unwrap();
        assert!((l - 3.0).abs() < 1e-15);
    }

    #[test]
    fn curvature_of_affine_is_zero() {
        let a = v(&[2.0, -1.0]);
        let f = |z: &Vector| a.dot(z).unwrap() + 4.0;
        let x = v(&[0.3, 0.1]);
        let y = v(&[-1.0, 2.5]);
        let l = local_curvature(f(&x), f(&y), &a, &x, &y).unwrap();
        assert!(l.abs() < 1e-14);
    }

    #[test]
    fn curvature_rejects_non_finite() {
        let x = v(&[0.0]);
        assert!(local_curvature(f64::NAN, 0.0, &x, &x, &x).is_err());
    }
}
