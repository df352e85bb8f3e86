//! Dense real vectors with a finiteness invariant.

use serde::{Deserialize, Serialize};
use std::ops::Index;

use crate::error::{check_dim, OptError, Result};

/// A dense coordinate vector. Every stored entry is finite; operations that
/// would produce NaN or an infinity return [`OptError::NonFinite`] instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(Vector(values))
        } else {
            Err(OptError::NonFinite("vector construction"))
        }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Unit basis vector `e_i` in dimension `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Vector(v)
    }

    // Internal constructor for buffers already known to be finite.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Vector(values)
    }

    pub(crate) fn checked(values: Vec<f64>, what: &'static str) -> Result<Self> {
        if values.iter().all(|v| v.is_finite()) {
            Ok(Vector(values))
        } else {
            Err(OptError::NonFinite(what))
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dim(self.len(), other.len())?;
        let d = dot(&self.0, &other.0);
        if d.is_finite() {
            Ok(d)
        } else {
            Err(OptError::NonFinite("dot product"))
        }
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        self.zip_with(other, |a, b| a + b, "vector addition")
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        self.zip_with(other, |a, b| a - b, "vector subtraction")
    }

    pub fn scale(&self, alpha: f64) -> Result<Vector> {
        Self::checked(self.0.iter().map(|v| alpha * v).collect(), "vector scaling")
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Vector) -> Result<Vector> {
        self.zip_with(other, |a, b| a + alpha * b, "axpy")
    }

    pub fn dist_sq(&self, other: &Vector) -> Result<f64> {
        check_dim(self.len(), other.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }

    pub fn dist(&self, other: &Vector) -> Result<f64> {
        self.dist_sq(other).map(f64::sqrt)
    }

    fn zip_with(
        &self,
        other: &Vector,
        f: impl Fn(f64, f64) -> f64,
        what: &'static str,
    ) -> Result<Vector> {
        check_dim(self.len(), other.len())?;
        Self::checked(
            self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect(),
            what,
        )
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl AsRef<[f64]> for Vector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = OptError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Vector::new(values)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sum of products carried in double-double precision: each product and
/// each addition keeps its exact rounding error, so the result is as
/// accurate as if computed in twice the working precision.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    hi: f64,
    lo: f64,
}

impl CompensatedSum {
    pub(crate) fn add_product(&mut self, a: f64, b: f64) {
        let p = a * b;
        let p_err = a.mul_add(b, -p);
        let s = self.hi + p;
        let z = s - self.hi;
        let s_err = (self.hi - (s - z)) + (p - z);
        self.hi = s;
        self.lo += s_err + p_err;
    }

    /// Unevaluated pair `(hi, lo)`.
    pub(crate) fn parts(&self) -> (f64, f64) {
        (self.hi, self.lo)
    }

    pub(crate) fn value(&self) -> f64 {
        self.hi + self.lo
    }
}
