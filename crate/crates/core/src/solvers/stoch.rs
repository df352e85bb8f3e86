//! Mini-batch stochastic projected gradient methods: SPG, AC-SPG and the
//! two-phase AC-SPG wrapper.

use crate::error::{invalid, OptError, Result};
use crate::exec::map_indexed;
use crate::mapping::{curvature_quotient, projected_gradient, prox_step};
use crate::oracle::{batch_grad, batch_value_grad, StochOracle};
use crate::rng::RngStream;
use crate::select::ReservoirSelector;
use crate::sets::FeasibleSet;
use crate::solvers::{check_positive, EvalCadence, Evaluator};
use crate::trace::{IterRecord, SelectedOutput, Trace};
use crate::vector::Vector;

/// Gradient batch sizes for SPG.
#[derive(Debug, Clone, PartialEq)]
pub enum BatchSchedule {
    Constant(usize),
    /// `b_t = sizes[t - 1]`; must cover all `k` steps.
    Explicit(Vec<usize>),
    /// The schedule that makes SPG with `gamma = 2L` attain its `O(1/k)`
    /// guarantee; see [`spg_increasing_batch`].
    Increasing {
        upper_curvature: f64,
        lower_curvature: f64,
        sigma2: f64,
        diameter: f64,
    },
}

impl BatchSchedule {
    pub fn batch(&self, t: usize, k: usize) -> Result<usize> {
        let b = match self {
            BatchSchedule::Constant(b) => *b,
            BatchSchedule::Explicit(v) => *v.get(t - 1).ok_or_else(|| {
                OptError::InvalidParameter(format!("explicit schedule has no entry for step {t}"))
            })?,
            BatchSchedule::Increasing {
                upper_curvature,
                lower_curvature,
                sigma2,
                diameter,
            } => spg_increasing_batch(t, k, *upper_curvature, *lower_curvature, *sigma2, *diameter)?,
        };
        if b == 0 {
            return invalid(format!("batch size at step {t} is zero"));
        }
        Ok(b)
    }
}

/// `max{1, min{ceil(3 t s2 / (4 L l D^2)), ceil(3 t k s2 / (4 L^2 D^2))}}`.
/// With `l = 0` the first branch is dropped (it is `+inf`).
pub fn spg_increasing_batch(
    t: usize,
    k: usize,
    upper_curvature: f64,
    lower_curvature: f64,
    sigma2: f64,
    diameter: f64,
) -> Result<usize> {
    check_positive("L", upper_curvature)?;
    check_positive("D_X", diameter)?;
    if !(lower_curvature >= 0.0 && sigma2 >= 0.0) {
        return invalid("lower curvature and variance must be nonnegative");
    }
    let (t, k) = (t as f64, k as f64);
    let d2 = diameter * diameter;
    let mut b = (3.0 * t * k * sigma2 / (4.0 * upper_curvature * upper_curvature * d2)).ceil();
    if lower_curvature > 0.0 {
        b = b.min((3.0 * t * sigma2 / (4.0 * upper_curvature * lower_curvature * d2)).ceil());
    }
    if !b.is_finite() {
        return Err(OptError::NonFinite("batch size"));
    }
    Ok(b.max(1.0) as usize)
}

/// Output weights `W(t) = (3t - 2)/(8 gamma) - t L/(4 gamma^2)` for `t = 2..=k`;
/// entry `t - 2` is the weight of candidate `x_{t-1}`.
pub fn spg_output_weights(k: usize, gamma: f64, upper_curvature: f64) -> Result<Vec<f64>> {
    if k < 2 {
        return invalid("randomized output needs k >= 2");
    }
    if !(gamma > upper_curvature) {
        return invalid(format!("weights need gamma > L (gamma = {gamma}, L = {upper_curvature})"));
    }
    Ok((2..=k)
        .map(|t| {
            let t = t as f64;
            (3.0 * t - 2.0) / (8.0 * gamma) - t * upper_curvature / (4.0 * gamma * gamma)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpgConfig {
    pub gamma: f64,
    /// Gradient Lipschitz constant `L` used by the output weights; `gamma > L`.
    pub upper_curvature: f64,
    pub k: usize,
    pub batch: BatchSchedule,
    pub eval: Option<EvalCadence>,
}

/// SPG: prox steps on mini-batch gradients with constant `gamma`, output drawn
/// from `{x_1, ..., x_{k-1}}` with probabilities proportional to `W(t)`.
pub fn run_spg<O: StochOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    config: &SpgConfig,
    stream: &RngStream,
) -> Result<Trace> {
    let k = config.k;
    let gamma = config.gamma;
    check_positive("gamma", gamma)?;
    let weights = spg_output_weights(k, gamma, config.upper_curvature)?;
    let chosen = stream.fork("output", 0).categorical(&weights)? + 1;

    let mut grad_stream = stream.fork("grad", 0);
    let mut evaluator = Evaluator::new(config.eval, stream)?;
    let mut x = set.project(x0)?;
    let x_start = x.clone();
    let mut records = Vec::with_capacity(k);
    let mut samples_cum = 0u64;
    let mut output = None;

    for t in 1..=k {
        let b = config.batch.batch(t, k)?;
        let samples = oracle.draw(b, &mut grad_stream)?;
        let g = batch_grad(oracle, &x, &samples)?;
        let x_new = prox_step(set, &x, &g, gamma)?;
        samples_cum += b as u64;
        if t - 1 == chosen {
            output = Some(SelectedOutput {
                index: chosen,
                x: x.clone(),
                gamma,
            });
        }
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
        x = x_new;
    }

    Ok(Trace {
        algorithm: "spg".into(),
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
            ("L".into(), config.upper_curvature.to_string()),
            ("k".into(), k.to_string()),
            ("batch".into(), format!("{:?}", config.batch)),
        ],
        stopped_early: false,
    })
}

/// Gradient batch rule for AC-SPG.
#[derive(Debug, Clone, PartialEq)]
pub enum AcBatch {
    Constant(usize),
    /// `b_t = max{1, ceil((3t - 1) alpha / (2 gamma_t))}`
    Adaptive(f64),
}

impl AcBatch {
    pub fn batch(&self, t: usize, gamma: f64) -> Result<usize> {
        match *self {
            AcBatch::Constant(0) => invalid("batch size must be at least 1"),
            AcBatch::Constant(b) => Ok(b),
            AcBatch::Adaptive(alpha) => {
                check_positive("alpha", alpha)?;
                let b = ((3.0 * t as f64 - 1.0) * alpha / (2.0 * gamma)).ceil();
                if !b.is_finite() {
                    return Err(OptError::NonFinite("adaptive batch size"));
                }
                Ok(b.max(1.0) as usize)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcspgConfig {
    /// Initial curvature estimate `L̄_0 > 0`.
    pub l_bar0: f64,
    /// `gamma_t = multiplier * max{L̄_0, ..., L̄_{t-1}}`.
    pub gamma_multiplier: f64,
    pub k: usize,
    pub grad_batch: AcBatch,
    /// Size `b'_t` of the independent batch used for curvature estimates.
    pub curvature_batch: usize,
    pub eval: Option<EvalCadence>,
}

impl AcspgConfig {
    pub fn new(l_bar0: f64, k: usize, grad_batch: AcBatch) -> Self {
        AcspgConfig {
            l_bar0,
            gamma_multiplier: 2.0,
            k,
            grad_batch,
            curvature_batch: 1,
            eval: None,
        }
    }
}

/// Mini-batch curvature estimate between `x_prev` and `x_new` from one batch.
pub fn batch_curvature<O: StochOracle>(
    oracle: &O,
    x_prev: &Vector,
    x_new: &Vector,
    samples: &[O::Sample],
) -> Result<f64> {
    let (f_prev, g_prev) = batch_value_grad(oracle, x_prev, samples)?;
    let (f_new, _) = batch_value_grad(oracle, x_new, samples)?;
    Ok(curvature_quotient(
        f_prev,
        f_new,
        g_prev.as_slice(),
        x_prev.as_slice(),
        x_new.as_slice(),
    ))
}

/// AC-SPG: stepsizes from running maxima of mini-batch curvature estimates,
/// output selected by the reservoir rule with weights `(t - 1) / gamma_t`.
pub fn run_acspg<O: StochOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    config: &AcspgConfig,
    stream: &RngStream,
) -> Result<Trace> {
    let k = config.k;
    check_positive("L̄_0", config.l_bar0)?;
    check_positive("gamma multiplier", config.gamma_multiplier)?;
    if k < 2 {
        return invalid("AC-SPG needs k >= 2");
    }
    if config.curvature_batch == 0 {
        return invalid("curvature batch must be at least 1");
    }

    let mut grad_stream = stream.fork("grad", 0);
    let mut curv_stream = stream.fork("curv", 0);
    let mut selector = ReservoirSelector::new(stream.fork("output", 0));
    let mut evaluator = Evaluator::new(config.eval, stream)?;
    let mut x = set.project(x0)?;
    let x_start = x.clone();
    let mut l_hat = config.l_bar0;
    let mut records = Vec::with_capacity(k);
    let mut samples_cum = 0u64;

    for t in 1..=k {
        let gamma = config.gamma_multiplier * l_hat;
        let b = config.grad_batch.batch(t, gamma)?;
        let samples = oracle.draw(b, &mut grad_stream)?;
        let g = batch_grad(oracle, &x, &samples)?;
        let x_new = prox_step(set, &x, &g, gamma)?;
        if t >= 2 {
            selector.offer((t - 1) as f64 / gamma, t - 1, &x, gamma)?;
        }

        let curv_samples = oracle.draw(config.curvature_batch, &mut curv_stream)?;
        let l_bar = batch_curvature(oracle, &x, &x_new, &curv_samples)?;
        l_hat = l_hat.max(l_bar);
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
        x = x_new;
    }

    Ok(Trace {
        algorithm: "acspg".into(),
        records,
        x0: x_start,
        initial_value: None,
        final_x: x,
        next_gamma: config.gamma_multiplier * l_hat,
        final_pg_norm: None,
        iterates: None,
        output: selector.finish(),
        config_echo: vec![
            ("l_bar0".into(), config.l_bar0.to_string()),
            ("gamma_multiplier".into(), config.gamma_multiplier.to_string()),
            ("k".into(), k.to_string()),
            ("grad_batch".into(), format!("{:?}", config.grad_batch)),
            ("curvature_batch".into(), config.curvature_batch.to_string()),
        ],
        stopped_early: false,
    })
}

/// A post-optimization candidate: the point and the stepsize parameter of
/// the step its run took from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub x: Vector,
    pub gamma: f64,
}

impl From<SelectedOutput> for Candidate {
    fn from(o: SelectedOutput) -> Self {
        Candidate {
            x: o.x,
            gamma: o.gamma,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TwoPhaseReport {
    /// `||ḡ_X(x̄_r)||` for every candidate, in run order.
    pub candidate_norms: Vec<f64>,
    pub selected: usize,
    pub optimization_samples: u64,
    pub post_samples: u64,
    pub traces: Vec<Trace>,
}

/// Picks the candidate whose projected gradient, estimated from
/// `post_samples` fresh samples, is smallest. Ties go to the earliest run.
pub fn post_optimize<O: StochOracle>(
    oracle: &O,
    set: &FeasibleSet,
    candidates: &[Candidate],
    post_samples: usize,
    stream: &RngStream,
) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return invalid("no candidates");
    }
    if post_samples == 0 {
        return invalid("post-optimization sample size must be at least 1");
    }
    let norms = map_indexed(candidates.len(), |r| -> Result<f64> {
        let c = &candidates[r];
        let samples = oracle.draw(post_samples, &mut stream.fork("post", r as u64))?;
        let g = batch_grad(oracle, &c.x, &samples)?;
        Ok(projected_gradient(set, &c.x, &g, c.gamma)?.norm())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (r, &n) in norms.iter().enumerate() {
        if n < norms[best] {
            best = r;
        }
    }
    Ok((best, norms))
}

/// 2-AC-SPG: `runs` independent AC-SPG runs followed by the post-optimization
/// selection. Runs use child streams and may execute concurrently; results
/// are merged in run order.
pub fn run_two_phase<O: StochOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    runs: usize,
    inner: &AcspgConfig,
    post_samples: usize,
    stream: &RngStream,
) -> Result<(Vector, TwoPhaseReport)> {
    if runs == 0 {
        return invalid("number of runs must be at least 1");
    }
    let traces = map_indexed(runs, |r| {
        run_acspg(oracle, set, x0, inner, &stream.fork("run", r as u64))
    })
    .into_iter()
    .collect::<Result<Vec<Trace>>>()?;
    let candidates: Vec<Candidate> = traces
        .iter()
        .map(|tr| {
            tr.output
                .clone()
                .map(Candidate::from)
                .ok_or_else(|| OptError::InvalidParameter("run produced no output".into()))
        })
        .collect::<Result<_>>()?;
    let (selected, candidate_norms) =
        post_optimize(oracle, set, &candidates, post_samples, &stream.fork("post-phase", 0))?;
    let optimization_samples = traces.iter().map(Trace::total_samples).sum();
    Ok((
        candidates[selected].x.clone(),
        TwoPhaseReport {
            candidate_norms,
            selected,
            optimization_samples,
            post_samples: (runs * post_samples) as u64,
            traces,
        },
    ))
}
