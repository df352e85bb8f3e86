//! Semisupervised smoothed SVM over `z = (x, b)`:
//!
//! `f(x, b) = l1 E[max(0, 1 - v(u1^T x + b))^2] + l2 E[exp(-5 (u2^T x + b)^2)] + l3/2 ||x||^2`
//!
//! with labeled pairs `(u1, v)` and unlabeled points `u2` on the unit sphere,
//! feasible set `{||x|| <= 10} x [-2, 2]`.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, OptError, Result};
use crate::oracle::{batch_value_grad, DetOracle, StochOracle};
use crate::rng::RngStream;
use crate::sets::{BallSet, BoxSet, FeasibleSet, ProductSet};
use crate::vector::{dot, Vector};

pub const MODEL_RADIUS: f64 = 10.0;
pub const OFFSET_BOUND: f64 = 2.0;
pub const UNIT_TOL: f64 = 1e-9;
pub const DEFAULT_EVAL_SAMPLES: usize = 100_000;

/// Loss weights `(l1, l2, l3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmWeights {
    pub labeled: f64,
    pub unlabeled: f64,
    pub ridge: f64,
}

impl SvmWeights {
    pub fn new(labeled: f64, unlabeled: f64, ridge: f64) -> Result<Self> {
        if [labeled, unlabeled, ridge]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return invalid("SVM weights must be finite and nonnegative");
        }
        Ok(SvmWeights {
            labeled,
            unlabeled,
            ridge,
        })
    }
}

/// Gradient Lipschitz constant `8 l1 + 40 l2 (1 + e^-1) + l3` for unit-norm data.
pub fn svm_lipschitz(w: &SvmWeights) -> f64 {
    8.0 * w.labeled + 40.0 * w.unlabeled * (1.0 + (-1.0f64).exp()) + w.ridge
}

/// A-priori bound on any per-sample gradient norm over the feasible set.
pub fn svm_gradient_bound(w: &SvmWeights) -> f64 {
    let lift = 2f64.sqrt(); // ||(u; 1)|| for unit u
    let margin = 1.0 + MODEL_RADIUS + OFFSET_BOUND;
    // max_z |z| exp(-5 z^2) is attained at z^2 = 1/10
    let bump = (0.1f64).sqrt() * (-0.5f64).exp();
    2.0 * w.labeled * margin * lift + 10.0 * w.unlabeled * bump * lift + w.ridge * MODEL_RADIUS
}

/// The feasible set `Ball(0, 10) x [-2, 2]` in `R^{n+1}`.
pub fn svm_set(n: usize) -> Result<FeasibleSet> {
    Ok(ProductSet::concat(vec![
        BallSet::centered(n, MODEL_RADIUS)?.into(),
        BoxSet::uniform(1, -OFFSET_BOUND, OFFSET_BOUND)?.into(),
    ])?
    .into())
}

/// One term of the loss, without the ridge part.
#[derive(Debug, Clone, PartialEq)]
pub enum SvmTerm<'a> {
    Labeled { u: &'a [f64], label: f64 },
    Unlabeled { u: &'a [f64] },
}

fn labeled_term(z: &[f64], u: &[f64], label: f64, weight: f64, g: &mut [f64]) -> f64 {
    let n = u.len();
    let m = 1.0 - label * (dot(u, &z[..n]) + z[n]);
    if m <= 0.0 {
        return 0.0;
    }
    let s = -2.0 * weight * m * label;
    for (gi, ui) in g[..n].iter_mut().zip(u) {
        *gi += s * ui;
    }
    g[n] += s;
    weight * m * m
}

fn unlabeled_term(z: &[f64], u: &[f64], weight: f64, g: &mut [f64]) -> f64 {
    let n = u.len();
    let s = dot(u, &z[..n]) + z[n];
    let e = (-5.0 * s * s).exp();
    let c = -10.0 * weight * s * e;
    for (gi, ui) in g[..n].iter_mut().zip(u) {
        *gi += c * ui;
    }
    g[n] += c;
    weight * e
}

fn ridge_term(z: &[f64], weight: f64, g: &mut [f64]) -> f64 {
    let n = z.len() - 1;
    for (gi, xi) in g[..n].iter_mut().zip(&z[..n]) {
        *gi += weight * xi;
    }
    0.5 * weight * dot(&z[..n], &z[..n])
}

/// Loss and gradient over `(x, b)` of one labeled or unlabeled term.
pub fn svm_sample_loss_grad(model: &Vector, term: &SvmTerm<'_>, w: &SvmWeights) -> Result<(f64, Vector)> {
    let u = match term {
        SvmTerm::Labeled { u, .. } | SvmTerm::Unlabeled { u } => *u,
    };
    check_dim(u.len() + 1, model.len())?;
    if (dot(u, u).sqrt() - 1.0).abs() > UNIT_TOL {
        return invalid("SVM samples must have unit norm");
    }
    let mut g = vec![0.0; model.len()];
    let v = match term {
        SvmTerm::Labeled { u, label } => labeled_term(model.as_slice(), u, *label, w.labeled, &mut g),
        SvmTerm::Unlabeled { u } => unlabeled_term(model.as_slice(), u, w.unlabeled, &mut g),
    };
    Ok((v, Vector::checked(g, "SVM sample gradient")?))
}

fn sign_label(s: f64) -> i8 {
    if s >= 0.0 {
        1
    } else {
        -1
    }
}

/// Pre-generated finite data sets: `m` labeled rows with labels and `m`
/// unlabeled rows, each row a unit vector in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmDataset {
    n: usize,
    m: usize,
    truth: Vec<f64>,
    labeled: Vec<f64>,
    labels: Vec<i8>,
    unlabeled: Vec<f64>,
}

const MAGIC: &[u8; 8] = b"PGSVMDS\0";
const VERSION: u32 = 1;

impl SvmDataset {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// Ground truth `(x̄, b̄)` used for labeling.
    pub fn truth(&self) -> (&[f64], f64) {
        (&self.truth[..self.n], self.truth[self.n])
    }

    pub fn labeled_row(&self, i: usize) -> &[f64] {
        &self.labeled[i * self.n..(i + 1) * self.n]
    }

    pub fn unlabeled_row(&self, i: usize) -> &[f64] {
        &self.unlabeled[i * self.n..(i + 1) * self.n]
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    /// Binary layout (little endian): magic, version `u32`, `n` and `M` as
    /// `u64`; then `x̄, b̄` (`n + 1` floats), the labeled rows and the
    /// unlabeled rows (row-major `f64`), then `M` labels as `i8`.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&(self.n as u64).to_le_bytes())?;
        out.write_all(&(self.m as u64).to_le_bytes())?;
        for v in self.truth.iter().chain(&self.labeled).chain(&self.unlabeled) {
            out.write_all(&v.to_le_bytes())?;
        }
        let labels: Vec<u8> = self.labels.iter().map(|l| *l as u8).collect();
        out.write_all(&labels)?;
        out.flush()
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let io_err = |e: io::Error| OptError::Io(e.to_string());
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic).map_err(io_err)?;
        if &magic != MAGIC {
            return Err(OptError::Io("not an SVM dataset file".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4).map_err(io_err)?;
        let version = u32::from_le_bytes(b4);
        if version != VERSION {
            return Err(OptError::Io(format!("unsupported dataset version {version}")));
        }
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8).map_err(io_err)?;
        let n = u64::from_le_bytes(b8) as usize;
        input.read_exact(&mut b8).map_err(io_err)?;
        let m = u64::from_le_bytes(b8) as usize;
        let mut read_floats = |count: usize| -> Result<Vec<f64>> {
            let mut buf = vec![0u8; count * 8];
            input.read_exact(&mut buf).map_err(io_err)?;
            Ok(buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect())
        };
        let truth = read_floats(n + 1)?;
        let labeled = read_floats(n * m)?;
        let unlabeled = read_floats(n * m)?;
        let mut lab = vec![0u8; m];
        input.read_exact(&mut lab).map_err(io_err)?;
        let labels: Vec<i8> = lab.into_iter().map(|b| b as i8).collect();
        if labels.iter().any(|l| *l != 1 && *l != -1) {
            return Err(OptError::Io("labels must be +1 or -1".into()));
        }
        Ok(SvmDataset {
            n,
            m,
            truth,
            labeled,
            labels,
            unlabeled,
        })
    }

    /// CSV export: `kind,label,u_0,...,u_{n-1}` with kind `labeled` or `unlabeled`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (0..self.n).map(|i| format!("u_{i}")).collect();
        writeln!(out, "kind,label,{}", header.join(","))?;
        for i in 0..self.m {
            let row: Vec<String> = self.labeled_row(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "labeled,{},{}", self.labels[i], row.join(","))?;
        }
        for i in 0..self.m {
            let row: Vec<String> = self.unlabeled_row(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(out, "unlabeled,,{}", row.join(","))?;
        }
        out.flush()
    }
}

/// Draws ground truth `(x̄, b̄) ~ N(0, I)`, then `m` labeled rows with
/// `v = sign(u1^T x̄ + b̄)` (`sign(0) = +1`) and `m` unlabeled rows.
pub fn gen_svm_dataset(m: usize, n: usize, stream: &mut RngStream) -> Result<SvmDataset> {
    if m == 0 || n == 0 {
        return invalid("dataset size and dimension must be at least 1");
    }
    let truth = stream.standard_normal(n + 1).into_inner();
    let mut labeled = vec![0.0; m * n];
    let mut labels = Vec::with_capacity(m);
    for row in labeled.chunks_mut(n) {
        stream.fill_unit_sphere(row);
        labels.push(sign_label(dot(row, &truth[..n]) + truth[n]));
    }
    let mut unlabeled = vec![0.0; m * n];
    for row in unlabeled.chunks_mut(n) {
        stream.fill_unit_sphere(row);
    }
    Ok(SvmDataset {
        n,
        m,
        truth,
        labeled,
        labels,
        unlabeled,
    })
}

#[derive(Debug, Clone)]
pub enum SvmData {
    FiniteSum(SvmDataset),
    /// Fresh samples from the sphere, labeled by the ground truth `(x̄, b̄)`.
    Online { truth: Vec<f64> },
}

/// One stochastic sample: a labeled and an unlabeled observation.
#[derive(Debug, Clone, PartialEq)]
pub enum SvmSample {
    /// Row indices into a finite data set.
    Indexed { labeled: usize, unlabeled: usize },
    Fresh {
        labeled: Vec<f64>,
        label: f64,
        unlabeled: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct SmoothedSvm {
    n: usize,
    weights: SvmWeights,
    data: SvmData,
    set: FeasibleSet,
    eval_samples: usize,
}

impl SmoothedSvm {
    pub fn finite(dataset: SvmDataset, weights: SvmWeights) -> Result<Self> {
        let n = dataset.dim();
        Ok(SmoothedSvm {
            n,
            weights,
            data: SvmData::FiniteSum(dataset),
            set: svm_set(n)?,
            eval_samples: DEFAULT_EVAL_SAMPLES,
        })
    }

    pub fn online(n: usize, weights: SvmWeights, stream: &mut RngStream) -> Result<Self> {
        if n == 0 {
            return invalid("dimension must be at least 1");
        }
        Ok(SmoothedSvm {
            n,
            weights,
            data: SvmData::Online {
                truth: stream.standard_normal(n + 1).into_inner(),
            },
            set: svm_set(n)?,
            eval_samples: DEFAULT_EVAL_SAMPLES,
        })
    }

    /// Fresh samples used per reference evaluation in online mode.
    pub fn with_eval_samples(mut self, count: usize) -> Self {
        self.eval_samples = count.max(1);
        self
    }

    pub fn feature_dim(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &SvmWeights {
        &self.weights
    }

    pub fn data(&self) -> &SvmData {
        &self.data
    }

    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }

    pub fn lipschitz(&self) -> f64 {
        svm_lipschitz(&self.weights)
    }

    pub fn dataset(&self) -> Option<&SvmDataset> {
        match &self.data {
            SvmData::FiniteSum(d) => Some(d),
            SvmData::Online { .. } => None,
        }
    }

    fn all_pairs(&self, d: &SvmDataset) -> Vec<SvmSample> {
        (0..d.size())
            .map(|i| SvmSample::Indexed {
                labeled: i,
                unlabeled: i,
            })
            .collect()
    }

    fn fresh(&self, truth: &[f64], stream: &mut RngStream) -> SvmSample {
        let n = self.n;
        let mut labeled = vec![0.0; n];
        stream.fill_unit_sphere(&mut labeled);
        let label = sign_label(dot(&labeled, &truth[..n]) + truth[n]) as f64;
        let mut unlabeled = vec![0.0; n];
        stream.fill_unit_sphere(&mut unlabeled);
        SvmSample::Fresh {
            labeled,
            label,
            unlabeled,
        }
    }
}

impl StochOracle for SmoothedSvm {
    type Sample = SvmSample;

    fn dim(&self) -> usize {
        self.n + 1
    }

    /// Finite-sum mode draws both row sets without replacement when
    /// `count <= M` and with replacement otherwise.
    fn draw(&self, count: usize, stream: &mut RngStream) -> Result<Vec<SvmSample>> {
        match &self.data {
            SvmData::FiniteSum(d) => {
                let m = d.size();
                if count <= m {
                    let a = stream.sample_without_replacement(m, count)?;
                    let b = stream.sample_without_replacement(m, count)?;
                    Ok(a.into_iter()
                        .zip(b)
                        .map(|(labeled, unlabeled)| SvmSample::Indexed { labeled, unlabeled })
                        .collect())
                } else {
                    Ok((0..count)
                        .map(|_| SvmSample::Indexed {
                            labeled: stream.index(m),
                            unlabeled: stream.index(m),
                        })
                        .collect())
                }
            }
            SvmData::Online { truth } => Ok((0..count).map(|_| self.fresh(truth, stream)).collect()),
        }
    }

    /// With `count == M` in finite-sum mode every row is used exactly once.
    fn draw_anchor(&self, count: usize, stream: &mut RngStream) -> Result<Vec<SvmSample>> {
        match &self.data {
            SvmData::FiniteSum(d) if count == d.size() => Ok(self.all_pairs(d)),
            _ => self.draw(count, stream),
        }
    }

    fn accumulate(&self, z: &[f64], sample: &SvmSample, g: &mut [f64]) -> Result<f64> {
        let w = &self.weights;
        let (u1, v, u2) = match (sample, &self.data) {
            (
                SvmSample::Indexed {
                    labeled,
                    unlabeled,
                },
                SvmData::FiniteSum(d),
            ) => (
                d.labeled_row(*labeled),
                d.label(*labeled) as f64,
                d.unlabeled_row(*unlabeled),
            ),
            (
                SvmSample::Fresh {
                    labeled,
                    label,
                    unlabeled,
                },
                _,
            ) => (labeled.as_slice(), *label, unlabeled.as_slice()),
            _ => return Err(OptError::Oracle("indexed sample without a data set".into())),
        };
        Ok(labeled_term(z, u1, v, w.labeled, g)
            + unlabeled_term(z, u2, w.unlabeled, g)
            + ridge_term(z, w.ridge, g))
    }

    fn reference_value_grad(&self, x: &Vector, stream: &mut RngStream) -> Result<(f64, Vector)> {
        match &self.data {
            SvmData::FiniteSum(_) => self.value_grad(x),
            SvmData::Online { .. } => {
                let samples = self.draw(self.eval_samples, stream)?;
                batch_value_grad(self, x, &samples)
            }
        }
    }

    fn population_gradient(&self, x: &Vector) -> Option<Result<Vector>> {
        match &self.data {
            SvmData::FiniteSum(_) => Some(self.gradient(x)),
            SvmData::Online { .. } => None,
        }
    }
}

/// The finite-sum objective, averaged over all rows. Online mode has no
/// computable objective and returns [`OptError::Unsupported`].
impl DetOracle for SmoothedSvm {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        self.value_grad(x).map(|(v, _)| v)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.value_grad(x).map(|(_, g)| g)
    }

    fn value_grad(&self, x: &Vector) -> Result<(f64, Vector)> {
        match &self.data {
            SvmData::FiniteSum(d) => batch_value_grad(self, x, &self.all_pairs(d)),
            SvmData::Online { .. } => Err(OptError::Unsupported(
                "online SVM has no exact objective".into(),
            )),
        }
    }
}

/// Exact gradient of the finite-sum objective.
pub fn svm_population_gradient(model: &Vector, svm: &SmoothedSvm) -> Result<Vector> {
    svm.population_gradient(model)
        .unwrap_or_else(|| Err(OptError::Unsupported("online SVM has no population gradient".into())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w() -> SvmWeights {
        SvmWeights::new(0.5, 0.5, 1.0).unwrap()
    }

    #[test]
    fn lipschitz_formula() {
        assert!((svm_lipschitz(&w()) - 32.35759).abs() < 1e-5);
        assert_eq!(svm_lipschitz(&SvmWeights::new(0.0, 0.0, 0.0).unwrap()), 0.0);
        assert_eq!(svm_lipschitz(&SvmWeights::new(1.0, 0.0, 0.0).unwrap()), 8.0);
        assert!(SvmWeights::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn satisfied_margin_and_critical_point() {
        let u = [0.6, 0.8];
        let z = Vector::new(vec![3.0, 4.0, 0.0]).unwrap();
        let (l, g) = svm_sample_loss_grad(&z, &SvmTerm::Labeled { u: &u, label: 1.0 }, &w()).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g.norm(), 0.0);
        let z0 = Vector::new(vec![0.8, -0.6, 0.0]).unwrap();
        let (l, g) = svm_sample_loss_grad(&z0, &SvmTerm::Unlabeled { u: &u }, &w()).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g.norm(), 0.0);
        assert!(svm_sample_loss_grad(&z0, &SvmTerm::Unlabeled { u: &[1.0, 1.0] }, &w()).is_err());
    }

    #[test]
    fn dataset_rows_and_labels() {
        let mut s = RngStream::new(5, 0, "svm");
        let d = gen_svm_dataset(1000, 10, &mut s).unwrap();
        for i in 0..1000 {
            assert!((dot(d.labeled_row(i), d.labeled_row(i)).sqrt() - 1.0).abs() < 1e-12);
            assert!((dot(d.unlabeled_row(i), d.unlabeled_row(i)).sqrt() - 1.0).abs() < 1e-12);
            let (xt, bt) = d.truth();
            assert_eq!(d.label(i), sign_label(dot(d.labeled_row(i), xt) + bt));
        }
        assert!(d.labels.contains(&1) && d.labels.contains(&-1));
        let again = gen_svm_dataset(1000, 10, &mut RngStream::new(5, 0, "svm")).unwrap();
        assert_eq!(d, again);
    }

    #[test]
    fn binary_round_trip() {
        let mut s = RngStream::new(6, 0, "svm");
        let d = gen_svm_dataset(50, 4, &mut s).unwrap();
        let mut buf = Vec::new();
        d.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 16 + 8 * (5 + 2 * 200) + 50);
        assert_eq!(SvmDataset::read_binary(buf.as_slice()).unwrap(), d);
        buf[0] = b'X';
        assert!(SvmDataset::read_binary(buf.as_slice()).is_err());
        let mut csv = Vec::new();
        d.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 101);
    }

    #[test]
    fn single_row_population_is_the_sample() {
        let mut s = RngStream::new(7, 0, "svm");
        let d = gen_svm_dataset(1, 3, &mut s).unwrap();
        let svm = SmoothedSvm::finite(d.clone(), w()).unwrap();
        let z = Vector::new(vec![0.1, -0.2, 0.3, 0.05]).unwrap();
        let g = svm_population_gradient(&z, &svm).unwrap();
        let (_, g1) = svm_sample_loss_grad(
            &z,
            &SvmTerm::Labeled {
                u: d.labeled_row(0),
                label: d.label(0) as f64,
            },
            &w(),
        )
        .unwrap();
        let (_, g2) = svm_sample_loss_grad(&z, &SvmTerm::Unlabeled { u: d.unlabeled_row(0) }, &w()).unwrap();
        for i in 0..4 {
            let ridge = if i < 3 { z[i] } else { 0.0 };
            assert!((g[i] - (g1[i] + g2[i] + ridge)).abs() < 1e-15);
        }
    }

    #[test]
    fn online_mode_has_no_population() {
        let mut s = RngStream::new(8, 0, "svm");
        let svm = SmoothedSvm::online(5, w(), &mut s).unwrap();
        assert!(svm_population_gradient(&Vector::zeros(6), &svm).is_err());
        let batch = svm.draw(10, &mut s).unwrap();
        assert_eq!(batch.len(), 10);
    }

    #[test]
    fn exhaustive_anchor_covers_every_row() {
        let mut s = RngStream::new(9, 0, "svm");
        let svm = SmoothedSvm::finite(gen_svm_dataset(20, 3, &mut s).unwrap(), w()).unwrap();
        let a = svm.draw_anchor(20, &mut s).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a[7], SvmSample::Indexed { labeled: 7, unlabeled: 7 });
        let b = svm.draw(20, &mut s).unwrap();
        let mut rows: Vec<usize> = b
            .iter()
            .map(|smp| match smp {
                SvmSample::Indexed { labeled, .. } => *labeled,
                _ => unreachable!(),
            })
            .collect();
        rows.sort();
        assert_eq!(rows, (0..20).collect::<Vec<_>>());
    }
}
