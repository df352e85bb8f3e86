//! Compact convex feasible sets with exact Euclidean projections.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{check_dim, invalid, OptError, Result};
use crate::rng::RngStream;
use crate::vector::Vector;

/// Axis-aligned box `{x : lower <= x <= upper}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lower: Vector,
    upper: Vector,
}

impl BoxSet {
    pub fn new(lower: Vector, upper: Vector) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return invalid("box lower bound exceeds upper bound");
        }
        Ok(BoxSet { lower, upper })
    }

    /// The cube `[a, b]^n`.
    pub fn uniform(n: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(Vector::filled(n, a)?, Vector::filled(n, b)?)
    }

    pub fn lower(&self) -> &Vector {
        &self.lower
    }

    pub fn upper(&self) -> &Vector {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn diameter(&self) -> f64 {
        self.upper.dist(&self.lower).unwrap_or(0.0)
    }

    fn project_into(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = y[i].clamp(self.lower[i], self.upper[i]);
        }
    }

    fn contains_slice(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &v)| v >= self.lower[i] - tol && v <= self.upper[i] + tol)
    }
}

/// Euclidean ball `{x : ||x - center|| <= radius}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSet {
    center: Vector,
    radius: f64,
}

impl BallSet {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid(format!("ball radius must be positive, got {radius}"));
        }
        Ok(BallSet { center, radius })
    }

    pub fn centered(n: usize, radius: f64) -> Result<Self> {
        Self::new(Vector::zeros(n), radius)
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    fn project_into(&self, y: &[f64], out: &mut [f64]) {
        let c = self.center.as_slice();
        let dist = y
            .iter()
            .zip(c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if dist <= self.radius {
            out.copy_from_slice(y);
        } else {
            let s = self.radius / dist;
            for i in 0..out.len() {
                out[i] = c[i] + s * (y[i] - c[i]);
            }
        }
    }

    fn contains_slice(&self, x: &[f64], tol: f64) -> bool {
        let d = x
            .iter()
            .zip(self.center.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        d <= self.radius + tol
    }
}

/// Cartesian product of sets acting on disjoint coordinate blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSet {
    blocks: Vec<(Range<usize>, FeasibleSet)>,
    dim: usize,
}

impl ProductSet {
    /// Blocks must be listed in order and tile `[0, n)` without gaps.
    pub fn new(blocks: Vec<(Range<usize>, FeasibleSet)>) -> Result<Self> {
        let mut next = 0;
        for (range, set) in &blocks {
            if range.start != next || range.end <= range.start {
                return invalid(format!(
                    "product block {range:?} does not continue the partition at {next}"
                ));
            }
            check_dim(range.len(), set.dim())?;
            next = range.end;
        }
        if blocks.is_empty() {
            return invalid("product set needs at least one block");
        }
        Ok(ProductSet { blocks, dim: next })
    }

    /// Components placed consecutively; ranges are derived from their sizes.
    pub fn concat(parts: Vec<FeasibleSet>) -> Result<Self> {
        let mut start = 0;
        let blocks = parts
            .into_iter()
            .map(|set| {
                let end = start + set.dim();
                let r = start..end;
                start = end;
                (r, set)
            })
            .collect();
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[(Range<usize>, FeasibleSet)] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diameter(&self) -> f64 {
        self.blocks
            .iter()
            .map(|(_, s)| s.diameter().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// A projection-capable compact convex set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeasibleSet {
    Box(BoxSet),
    Ball(BallSet),
    Product(ProductSet),
}

impl FeasibleSet {
    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Box(b) => b.dim(),
            FeasibleSet::Ball(b) => b.dim(),
            FeasibleSet::Product(p) => p.dim(),
        }
    }

    /// Euclidean diameter `D_X`.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Box(b) => b.diameter(),
            FeasibleSet::Ball(b) => b.diameter(),
            FeasibleSet::Product(p) => p.diameter(),
        }
    }

    /// Nearest point of the set to `y`.
    pub fn project(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.dim(), y.len())?;
        let mut out = vec![0.0; y.len()];
        self.project_into(y.as_slice(), &mut out);
        Vector::checked(out, "projection")
    }

    pub(crate) fn project_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            FeasibleSet::Box(b) => b.project_into(y, out),
            FeasibleSet::Ball(b) => b.project_into(y, out),
            FeasibleSet::Product(p) => {
                for (range, set) in &p.blocks {
                    set.project_into(&y[range.clone()], &mut out[range.clone()]);
                }
            }
        }
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.len() == self.dim() && self.contains_slice(x.as_slice(), tol)
    }

    fn contains_slice(&self, x: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::Box(b) => b.contains_slice(x, tol),
            FeasibleSet::Ball(b) => b.contains_slice(x, tol),
            FeasibleSet::Product(p) => p
                .blocks
                .iter()
                .all(|(r, s)| s.contains_slice(&x[r.clone()], tol)),
        }
    }

    /// A point drawn uniformly (with respect to volume) from the set.
    pub fn sample_uniform(&self, stream: &mut RngStream) -> Result<Vector> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(stream, &mut out);
        Vector::checked(out, "uniform sample")
    }

    fn sample_into(&self, stream: &mut RngStream, out: &mut [f64]) {
        match self {
            FeasibleSet::Box(b) => {
                for (i, o) in out.iter_mut().enumerate() {
                    let (lo, hi) = (b.lower[i], b.upper[i]);
                    *o = lo + (hi - lo) * stream.uniform01();
                }
            }
            FeasibleSet::Ball(b) => {
                let n = out.len();
                let dir = stream.unit_sphere(n);
                // radial law r * U^(1/n) gives volume-uniform points
                let r = b.radius * stream.uniform01().powf(1.0 / n as f64);
                for i in 0..n {
                    out[i] = b.center[i] + r * dir[i];
                }
            }
            FeasibleSet::Product(p) => {
                for (range, set) in &p.blocks {
                    set.sample_into(stream, &mut out[range.clone()]);
                }
            }
        }
    }
}

impl From<BoxSet> for FeasibleSet {
    fn from(b: BoxSet) -> Self {
        FeasibleSet::Box(b)
    }
}

impl From<BallSet> for FeasibleSet {
    fn from(b: BallSet) -> Self {
        FeasibleSet::Ball(b)
    }
}

impl From<ProductSet> for FeasibleSet {
    fn from(p: ProductSet) -> Self {
        FeasibleSet::Product(p)
    }
}

impl TryFrom<&FeasibleSet> for BoxSet {
    type Error = OptError;

    fn try_from(set: &FeasibleSet) -> Result<BoxSet> {
        match set {
            FeasibleSet::Box(b) => Ok(b.clone()),
            _ => Err(OptError::Unsupported("expected a box set".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_slice(xs).unwrap()
    }

    #[test]
    fn box_clamps_coordinatewise() {
        let s: FeasibleSet = BoxSet::uniform(2, -5.0, 5.0).unwrap().into();
        assert_eq!(s.project(&v(&[7.0, -9.0])).unwrap(), v(&[5.0, -5.0]));
    }

    #[test]
    fn ball_keeps_interior_points() {
        let s: FeasibleSet = BallSet::centered(3, 10.0).unwrap().into();
        let y = v(&[0.0, 4.0, 0.0]);
        assert_eq!(s.project(&y).unwrap(), y);
    }

    #[test]
    fn ball_rescales_exterior_points() {
        let s: FeasibleSet = BallSet::centered(2, 2.0).unwrap().into();
        let p = s.project(&v(&[3.0, 4.0])).unwrap();
        assert!((p[0] - 1.2).abs() < 1e-15 && (p[1] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn invalid_constructions() {
        assert!(BoxSet::new(v(&[1.0]), v(&[0.0])).is_err());
        assert!(BallSet::centered(2, 0.0).is_err());
        assert!(BallSet::centered(2, -1.0).is_err());
        let b: FeasibleSet = BoxSet::uniform(1, 0.0, 1.0).unwrap().into();
        assert!(ProductSet::new(vec![(1..2, b.clone())]).is_err());
        assert!(ProductSet::new(vec![]).is_err());
        assert!(ProductSet::new(vec![(0..2, b)]).is_err());
    }

    #[test]
    fn projection_rejects_wrong_dimension() {
        let s: FeasibleSet = BoxSet::uniform(2, 0.0, 1.0).unwrap().into();
        assert!(matches!(
            s.project(&v(&[1.0])),
            Err(OptError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn diameters() {
        let b: FeasibleSet = BoxSet::uniform(100, -5.0, 5.0).unwrap().into();
        assert!((b.diameter() - 100.0).abs() < 1e-12);
        let ball: FeasibleSet = BallSet::centered(4, 10.0).unwrap().into();
        assert_eq!(ball.diameter(), 20.0);
        let prod: FeasibleSet = ProductSet::concat(vec![
            ball,
            BoxSet::uniform(1, -2.0, 2.0).unwrap().into(),
        ])
        .unwrap()
        .into();
        assert!((prod.diameter() - (400.0f64 + 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn product_projects_blockwise() {
        let prod: FeasibleSet = ProductSet::concat(vec![
            BallSet::centered(2, 2.0).unwrap().into(),
            BoxSet::uniform(1, -2.0, 2.0).unwrap().into(),
        ])
        .unwrap()
        .into();
        let p = prod.project(&v(&[3.0, 4.0, -7.0])).unwrap();
        assert!((p[0] - 1.2).abs() < 1e-15);
        assert!((p[1] - 1.6).abs() < 1e-15);
        assert_eq!(p[2], -2.0);
    }

    #[test]
    fn uniform_samples_are_feasible() {
        let prod: FeasibleSet = ProductSet::concat(vec![
            BallSet::centered(5, 10.0).unwrap().into(),
            BoxSet::uniform(1, -2.0, 2.0).unwrap().into(),
        ])
        .unwrap()
        .into();
        let mut s = RngStream::new(9, 0, "x0");
        for _ in 0..200 {
            let x = prod.sample_uniform(&mut s).unwrap();
            assert!(prod.contains(&x, 1e-12));
        }
    }
}
