//! Variance-reduced stochastic projected gradient: VR-SPG and AC-VR-SPG.
//!
//! Both methods run in epochs of length `T`. The first step of each epoch
//! (an anchor step) estimates the gradient from `N` fresh samples; the other
//! steps update the previous estimate with a mini-batch of paired gradient
//! differences between the last two iterates.

use crate::error::{invalid, OptError, Result};
use crate::mapping::{curvature_quotient, prox_step, ZERO_DISPLACEMENT_SQ};
use crate::oracle::{batch_difference, batch_grad, batch_value_grad, BatchDifference, StochOracle};
use crate::rng::RngStream;
use crate::select::ReservoirSelector;
use crate::sets::FeasibleSet;
use crate::solvers::{check_positive, EvalCadence, Evaluator};
use crate::trace::{IterRecord, SelectedOutput, Trace};
use crate::vector::Vector;

/// Position of global step `t` (1-based) in the epoch structure:
/// `t = (epoch - 1) * T + within`, `1 <= within <= T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochIndex {
    pub t: usize,
    pub epoch: usize,
    pub within: usize,
}

impl EpochIndex {
    pub fn of(t: usize, epoch_len: usize) -> Self {
        assert!(t >= 1 && epoch_len >= 1);
        EpochIndex {
            t,
            epoch: (t - 1) / epoch_len + 1,
            within: (t - 1) % epoch_len + 1,
        }
    }

    pub fn is_anchor(&self) -> bool {
        self.within == 1
    }
}

/// Inner batch size `ceil(T^2 / (u - 1))` in the first epoch and
/// `ceil(13 T / 2)` afterwards.
pub fn vr_batch_size(epoch: usize, within: usize, epoch_len: usize) -> Result<usize> {
    if within < 2 {
        return invalid(format!("inner batch needs within-epoch index >= 2, got {within}"));
    }
    if epoch == 0 {
        return invalid("epochs are numbered from 1");
    }
    let t = epoch_len as f64;
    let b = if epoch == 1 {
        (t * t / (within - 1) as f64).ceil()
    } else {
        (13.0 * t / 2.0).ceil()
    };
    Ok((b as usize).max(1))
}

/// Recursive estimate `mean_i[G(x_prev1, xi_i) - G(x_prev2, xi_i)] + g_prev`
/// from an already drawn batch. Also returns the paired differences so the
/// caller can reuse them.
pub fn spider_from_samples<O: StochOracle>(
    oracle: &O,
    g_prev: &Vector,
    x_prev2: &Vector,
    x_prev1: &Vector,
    samples: &[O::Sample],
) -> Result<(Vector, BatchDifference)> {
    let diff = batch_difference(oracle, x_prev1, x_prev2, samples)?;
    let g = diff.mean_diff.add(g_prev)?;
    Ok((g, diff))
}

/// Draws `b` samples and applies the recursive update.
pub fn spider_update<O: StochOracle>(
    oracle: &O,
    g_prev: &Vector,
    x_prev2: &Vector,
    x_prev1: &Vector,
    b: usize,
    stream: &mut RngStream,
) -> Result<Vector> {
    if b == 0 {
        return invalid("batch size must be at least 1");
    }
    let samples = oracle.draw(b, stream)?;
    spider_from_samples(oracle, g_prev, x_prev2, x_prev1, &samples).map(|(g, _)| g)
}

/// Root-mean-square difference quotient
/// `sqrt(sum_i ||G(x_prev1, xi_i) - G(x_prev2, xi_i)||^2 / (b ||x_prev1 - x_prev2||^2))`;
/// zero for a zero displacement.
pub fn pairwise_curvature<O: StochOracle>(
    oracle: &O,
    x_prev2: &Vector,
    x_prev1: &Vector,
    samples: &[O::Sample],
) -> Result<f64> {
    let diff = batch_difference(oracle, x_prev1, x_prev2, samples)?;
    Ok(pairwise_from_difference(&diff, x_prev1.dist_sq(x_prev2)?))
}

fn pairwise_from_difference(diff: &BatchDifference, disp_sq: f64) -> f64 {
    if disp_sq < ZERO_DISPLACEMENT_SQ {
        0.0
    } else {
        (diff.sum_sq_diff / (diff.count as f64 * disp_sq)).sqrt()
    }
}

/// Inner batch rule for VR-SPG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VrInnerBatch {
    /// [`vr_batch_size`]
    EpochAdaptive,
    Constant(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VrConfig {
    pub gamma: f64,
    pub epoch_len: usize,
    pub anchor_batch: usize,
    pub k: usize,
    pub inner_batch: VrInnerBatch,
    pub eval: Option<EvalCadence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcvrConfig {
    pub l_bar0: f64,
    pub epoch_len: usize,
    pub anchor_batch: usize,
    pub k: usize,
    /// Inner batch size; `T` by default.
    pub inner_batch: usize,
    pub curvature_batch: usize,
    /// `gamma_t = multiplier * L̂_{t-1}`; 4 by default.
    pub gamma_multiplier: f64,
    pub eval: Option<EvalCadence>,
}

impl AcvrConfig {
    pub fn new(l_bar0: f64, epoch_len: usize, anchor_batch: usize, k: usize) -> Self {
        AcvrConfig {
            l_bar0,
            epoch_len,
            anchor_batch,
            k,
            inner_batch: epoch_len,
            curvature_batch: 1,
            gamma_multiplier: 4.0,
            eval: None,
        }
    }
}

/// What a VR solver computed at one step, before taking the prox step.
#[derive(Debug)]
pub struct VrStep<'a> {
    pub index: EpochIndex,
    /// The point `x_{t-1}` the estimate refers to.
    pub point: &'a Vector,
    pub estimate: &'a Vector,
    pub batch: usize,
    pub gamma: f64,
}

fn check_epochs(epoch_len: usize, anchor_batch: usize, k: usize) -> Result<()> {
    if epoch_len == 0 || anchor_batch == 0 {
        return invalid("epoch length and anchor batch must be at least 1");
    }
    if k < epoch_len {
        return invalid(format!("need k >= T (k = {k}, T = {epoch_len})"));
    }
    Ok(())
}

pub fn run_vrspg<O: StochOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    config: &VrConfig,
    stream: &RngStream,
) -> Result<Trace> {
    run_vrspg_observed(oracle, set, x0, config, stream, |_| {})
}

/// VR-SPG with constant `gamma`; output drawn from `{x_0, ..., x_{k-1}}` with
/// masses proportional to `t` for `x_{t-1}`. `observe` sees every estimate.
pub fn run_vrspg_observed<O, F>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    config: &VrConfig,
    stream: &RngStream,
    mut observe: F,
) -> Result<Trace>
where
    O: StochOracle,
    F: FnMut(&VrStep<'_>),
{
    let k = config.k;
    let gamma = config.gamma;
    check_positive("gamma", gamma)?;
    check_epochs(config.epoch_len, config.anchor_batch, k)?;
    if config.inner_batch == VrInnerBatch::Constant(0) {
        return invalid("inner batch must be at least 1");
    }
    let weights: Vec<f64> = (1..=k).map(|t| t as f64).collect();
    let chosen = stream.fork("output", 0).categorical(&weights)?;

    let mut grad_stream = stream.fork("grad", 0);
    let mut evaluator = Evaluator::new(config.eval, stream)?;
    let mut x = set.project(x0)?;
    let x_start = x.clone();
    let mut x_old = x.clone();
    let mut g_est = Vector::zeros(x.len());
    let mut records = Vec::with_capacity(k);
    let mut samples_cum = 0u64;
    let mut output = None;

    for t in 1..=k {
        let idx = EpochIndex::of(t, config.epoch_len);
        let b = if idx.is_anchor() {
            let samples = oracle.draw_anchor(config.anchor_batch, &mut grad_stream)?;
            g_est = batch_grad(oracle, &x, &samples)?;
            config.anchor_batch
        } else {
            let b = match config.inner_batch {
                VrInnerBatch::EpochAdaptive => vr_batch_size(idx.epoch, idx.within, config.epoch_len)?,
                VrInnerBatch::Constant(b) => b,
            };
            let samples = oracle.draw(b, &mut grad_stream)?;
            g_est = spider_from_samples(oracle, &g_est, &x_old, &x, &samples)?.0;
            b
        };
        samples_cum += b as u64;
        observe(&VrStep {
            index: idx,
            point: &x,
            estimate: &g_est,
            batch: b,
            gamma,
        });
        if t - 1 == chosen {
            output = Some(SelectedOutput {
                index: chosen,
                x: x.clone(),
                gamma,
            });
        }
        let x_new = prox_step(set, &x, &g_est, gamma)?;
        let (f_value, true_pg_norm) = evaluator.evaluate(oracle, set, t, k, &x, &x_new, gamma)?;
        records.push(IterRecord {
            t,
            f_value,
            pg_norm: gamma * x.dist(&x_new)?,
            true_pg_norm,
            gamma,
            curvature: None,
            samples_cum,
        });
        x_old = std::mem::replace(&mut x, x_new);
    }

    Ok(Trace {
        algorithm: "vrspg".into(),
        records,
        x0: x_start,
        initial_value: None,
        final_x: x,
        next_gamma: gamma,
        final_pg_norm: None,
        iterates: None,
        output,
        config_echo: vec![
            ("gamma".into(), gamma.to_string()),
            ("T".into(), config.epoch_len.to_string()),
            ("N".into(), config.anchor_batch.to_string()),
            ("k".into(), k.to_string()),
            ("inner_batch".into(), format!("{:?}", config.inner_batch)),
        ],
        stopped_early: false,
    })
}

pub fn run_acvrspg<O: StochOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    config: &AcvrConfig,
    stream: &RngStream,
) -> Result<Trace> {
    run_acvrspg_observed(oracle, set, x0, config, stream, |_| {})
}

/// AC-VR-SPG: the stepsize follows the running maximum of two curvature
/// estimates, one from an independent small batch after every step and one
/// from the paired differences of each inner batch. Output selected by the
/// reservoir rule with weights `1 / gamma_t` over `{x_0, ..., x_{k-1}}`.
pub fn run_acvrspg_observed<O, F>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    config: &AcvrConfig,
    stream: &RngStream,
    mut observe: F,
) -> Result<Trace>
where
    O: StochOracle,
    F: FnMut(&VrStep<'_>),
{
    let k = config.k;
    check_positive("L̄_0", config.l_bar0)?;
    check_positive("gamma multiplier", config.gamma_multiplier)?;
    check_epochs(config.epoch_len, config.anchor_batch, k)?;
    if config.inner_batch == 0 || config.curvature_batch == 0 {
        return invalid("inner and curvature batches must be at least 1");
    }

    let mut grad_stream = stream.fork("grad", 0);
    let mut curv_stream = stream.fork("curv", 0);
    let mut selector = ReservoirSelector::new(stream.fork("output", 0));
    let mut evaluator = Evaluator::new(config.eval, stream)?;
    let mut x = set.project(x0)?;
    let x_start = x.clone();
    let mut x_old = x.clone();
    let mut g_est = Vector::zeros(x.len());
    let mut l_hat = config.l_bar0;
    let mut l_bar = config.l_bar0;
    let mut records = Vec::with_capacity(k);
    let mut samples_cum = 0u64;

    for t in 1..=k {
        let idx = EpochIndex::of(t, config.epoch_len);
        let b = if idx.is_anchor() {
            let samples = oracle.draw_anchor(config.anchor_batch, &mut grad_stream)?;
            g_est = batch_grad(oracle, &x, &samples)?;
            l_hat = l_hat.max(l_bar);
            config.anchor_batch
        } else {
            let samples = oracle.draw(config.inner_batch, &mut grad_stream)?;
            let (g, diff) = spider_from_samples(oracle, &g_est, &x_old, &x, &samples)?;
            g_est = g;
            let l_tilde = pairwise_from_difference(&diff, x.dist_sq(&x_old)?);
            l_hat = l_hat.max(l_bar).max(l_tilde);
            config.inner_batch
        };
        let gamma = config.gamma_multiplier * l_hat;
        if !gamma.is_finite() {
            return Err(OptError::NonFinite("stepsize parameter"));
        }
        observe(&VrStep {
            index: idx,
            point: &x,
            estimate: &g_est,
            batch: b,
            gamma,
        });
        selector.offer(1.0 / gamma, t - 1, &x, gamma)?;
        let x_new = prox_step(set, &x, &g_est, gamma)?;

        let curv_samples = oracle.draw(config.curvature_batch, &mut curv_stream)?;
        let (f_prev, g_prev) = batch_value_grad(oracle, &x, &curv_samples)?;
        let (f_new, _) = batch_value_grad(oracle, &x_new, &curv_samples)?;
        l_bar = curvature_quotient(
            f_prev,
            f_new,
            g_prev.as_slice(),
            x.as_slice(),
            x_new.as_slice(),
        );
        samples_cum += (b + config.curvature_batch) as u64;

        let (f_value, true_pg_norm) = evaluator.evaluate(oracle, set, t, k, &x, &x_new, gamma)?;
        records.push(IterRecord {
            t,
            f_value,
            pg_norm: gamma * x.dist(&x_new)?,
            true_pg_norm,
            gamma,
            curvature: Some(l_bar),
            samples_cum,
        });
        x_old = std::mem::replace(&mut x, x_new);
    }

    Ok(Trace {
        algorithm: "acvrspg".into(),
        records,
        x0: x_start,
        initial_value: None,
        final_x: x,
        next_gamma: config.gamma_multiplier * l_hat.max(l_bar),
        final_pg_norm: None,
        iterates: None,
        output: selector.finish(),
        config_echo: vec![
            ("l_bar0".into(), config.l_bar0.to_string()),
            ("T".into(), config.epoch_len.to_string()),
            ("N".into(), config.anchor_batch.to_string()),
            ("k".into(), k.to_string()),
            ("inner_batch".into(), config.inner_batch.to_string()),
            ("curvature_batch".into(), config.curvature_batch.to_string()),
            ("gamma_multiplier".into(), config.gamma_multiplier.to_string()),
        ],
        stopped_early: false,
    })
}

/// Oracle samples consumed by VR-SPG: `N ceil(k/T)` plus all inner batches.
pub fn vrspg_sample_total(config: &VrConfig) -> Result<u64> {
    check_epochs(config.epoch_len, config.anchor_batch, config.k)?;
    let mut total = (config.anchor_batch * config.k.div_ceil(config.epoch_len)) as u64;
    for t in 1..=config.k {
        let idx = EpochIndex::of(t, config.epoch_len);
        if !idx.is_anchor() {
            total += match config.inner_batch {
                VrInnerBatch::EpochAdaptive => vr_batch_size(idx.epoch, idx.within, config.epoch_len)?,
                VrInnerBatch::Constant(b) => b,
            } as u64;
        }
    }
    Ok(total)
}
