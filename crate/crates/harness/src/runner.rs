//! Multi-trial experiment execution and output files.
//!
//! Every trial generates its own instance and starting point, then runs all
//! configured solvers on it. Random streams are keyed by (seed, trial,
//! purpose), so results do not depend on how trials are scheduled.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use pgopt::problems::empirical_variance;
use pgopt::problems::qp::{gen_boxqp, gen_convex_qp, BoxQP};
use pgopt::problems::svm::{gen_svm_dataset, SmoothedSvm, SvmWeights};
use pgopt::solvers::det::{run_acpg, run_pg};
use pgopt::solvers::stoch::{run_acspg, run_spg, AcBatch, AcspgConfig, BatchSchedule, SpgConfig};
use pgopt::solvers::vr::{run_acvrspg, run_vrspg, vrspg_sample_total, AcvrConfig, VrConfig, VrInnerBatch};
use pgopt::solvers::EvalCadence;
use pgopt::{DetOracle, FeasibleSet, OptError, RngStream, StochOracle, Trace, Vector, ZeroNoise};

use crate::aggregate::{aggregate, trial_rows, write_curve_csv, write_trial_csv, Curve};
use crate::config::{
    serialize_config, AcspgBatch, AnchorRule, ExperimentConfig, GammaRule, LowerRule, ProblemSpec,
    RunSpec, Sigma2Rule, SolverParams, SpgBatch, StartRule, SvmMode, VrInner,
};
use crate::error::{HarnessError, Result};
use crate::plot::{emit_plot, AxesSpec, PlotOutput, XAxis, YMetric};

/// Version of the trial and curve CSV layouts.
pub const CSV_SCHEMA: u32 = 1;
/// Points and samples per point for the variance estimate behind `sigma2 = estimate`.
pub const SIGMA2_POINTS: usize = 10;
pub const SIGMA2_SAMPLES: usize = 1000;
pub const SIGMA2_SAFETY: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Concurrent trials; 0 lets the thread pool decide.
    pub jobs: usize,
}

pub enum Instance {
    Qp(BoxQP),
    Svm(SmoothedSvm),
}

impl Instance {
    pub fn set(&self) -> &FeasibleSet {
        match self {
            Instance::Qp(q) => q.set(),
            Instance::Svm(s) => s.set(),
        }
    }

    /// Known gradient Lipschitz constant.
    pub fn upper_curvature(&self) -> f64 {
        match self {
            Instance::Qp(q) => q.spectral_norm(),
            Instance::Svm(s) => s.lipschitz(),
        }
    }

    /// Weak-convexity modulus used by `lower_curvature = auto`: exact for
    /// quadratics, 0 for the SVM where it is unknown.
    pub fn lower_curvature(&self) -> f64 {
        match self {
            Instance::Qp(q) => q.lower_curvature(),
            Instance::Svm(_) => 0.0,
        }
    }

    fn data_size(&self) -> Option<usize> {
        match self {
            Instance::Svm(s) => s.dataset().map(|d| d.size()),
            Instance::Qp(_) => None,
        }
    }
}

pub fn build_instance(cfg: &ExperimentConfig, trial: usize) -> pgopt::Result<Instance> {
    let key = if cfg.fixed_instance { 0 } else { trial as u64 };
    let mut s = RngStream::new(cfg.seed, key, "instance");
    Ok(match &cfg.problem {
        ProblemSpec::Qp { n, lower, upper, convex } => Instance::Qp(if *convex {
            gen_convex_qp(*n, *lower, *upper, &mut s)?
        } else {
            gen_boxqp(*n, *lower, *upper, &mut s)?
        }),
        ProblemSpec::Svm { n, mode, lambdas } => {
            let w = SvmWeights::new(lambdas[0], lambdas[1], lambdas[2])?;
            Instance::Svm(match mode {
                SvmMode::FiniteSum { m } => SmoothedSvm::finite(gen_svm_dataset(*m, *n, &mut s)?, w)?,
                SvmMode::Online => SmoothedSvm::online(*n, w, &mut s)?.with_eval_samples(cfg.eval.samples),
            })
        }
    })
}

pub fn starting_point(cfg: &ExperimentConfig, set: &FeasibleSet, trial: usize) -> pgopt::Result<Vector> {
    let key = if cfg.fixed_instance { 0 } else { trial as u64 };
    match cfg.x0 {
        StartRule::Uniform => set.sample_uniform(&mut RngStream::new(cfg.seed, key, "x0")),
        StartRule::Origin => set.project(&Vector::zeros(set.dim())),
    }
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub trial: usize,
    pub trace: Trace,
    pub wall_time: Duration,
    pub total_samples: u64,
    /// Sample count predicted from the batch rules.
    pub expected_samples: u64,
    pub upper_curvature: f64,
    /// Derived quantities worth recording, such as an estimated variance.
    pub notes: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub run: RunSpec,
    pub trials: Vec<std::result::Result<TrialResult, String>>,
}

#[derive(Debug, Clone)]
pub struct InstanceInfo {
    pub upper_curvature: f64,
    pub lower_curvature: f64,
    pub x0: Vector,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub runs: Vec<RunReport>,
    pub instances: Vec<std::result::Result<InstanceInfo, String>>,
}

impl ExperimentReport {
    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .instances
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().err().map(|e| format!("trial {i}: instance: {e}")))
            .collect();
        for run in &self.runs {
            for (i, t) in run.trials.iter().enumerate() {
                if let Err(e) = t {
                    out.push(format!("trial {i}: {}: {e}", run.run.label));
                }
            }
        }
        out
    }
}

fn gamma_of(rule: GammaRule, default_multiple: f64, l: f64) -> f64 {
    match rule {
        GammaRule::Auto => default_multiple * l,
        GammaRule::Value(v) => v,
        GammaRule::TimesL(m) => m * l,
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    instance: &'a Instance,
    x0: &'a Vector,
    trial: usize,
}

type Outcome = (Trace, u64, Vec<(String, String)>);

fn run_deterministic<O: DetOracle>(oracle: &O, ctx: &Context<'_>, run: &RunSpec) -> pgopt::Result<Outcome> {
    let set = ctx.instance.set();
    let l = ctx.instance.upper_curvature();
    let k = run.spec.k;
    let trace = match (&run.spec.params, run.theta) {
        (SolverParams::Pg { gamma }, _) => run_pg(oracle, set, ctx.x0, gamma_of(*gamma, 1.0, l), k)?,
        (SolverParams::Acpg { .. }, Some(theta)) => run_acpg(oracle, set, ctx.x0, theta * l, k)?,
        _ => return Err(OptError::Unsupported(format!("{} is not deterministic", run.spec.algorithm()))),
    };
    Ok((trace, k as u64, Vec::new()))
}

fn run_stochastic<O: StochOracle>(oracle: &O, ctx: &Context<'_>, run: &RunSpec) -> pgopt::Result<Outcome> {
    let set = ctx.instance.set();
    let l = ctx.instance.upper_curvature();
    let k = run.spec.k;
    let eval = Some(EvalCadence::every(ctx.cfg.eval.cadence(run.spec.algorithm())));
    let stream = RngStream::new(ctx.cfg.seed, ctx.trial as u64, &format!("solver/{}", run.label));
    let anchor = |rule: &AnchorRule| match rule {
        AnchorRule::Count(n) => Ok(*n),
        AnchorRule::DataSize => ctx
            .instance
            .data_size()
            .ok_or_else(|| OptError::Unsupported("anchor batch M needs a finite data set".into())),
    };
    let mut notes = Vec::new();
    match (&run.spec.params, run.theta) {
        (
            SolverParams::Spg {
                gamma,
                batch,
                sigma2,
                lower_curvature,
            },
            _,
        ) => {
            let batch = match batch {
                SpgBatch::Constant(b) => BatchSchedule::Constant(*b),
                SpgBatch::Increasing => {
                    let sigma2 = match sigma2 {
                        Sigma2Rule::Value(v) => *v,
                        Sigma2Rule::Estimate => {
                            let mut s = stream.fork("sigma2", 0);
                            let points = (0..SIGMA2_POINTS)
                                .map(|_| set.sample_uniform(&mut s))
                                .collect::<pgopt::Result<Vec<_>>>()?;
                            SIGMA2_SAFETY * empirical_variance(oracle, &points, SIGMA2_SAMPLES, &mut s)?
                        }
                    };
                    notes.push(("sigma2".to_string(), sigma2.to_string()));
                    BatchSchedule::Increasing {
                        upper_curvature: l,
                        lower_curvature: match lower_curvature {
                            LowerRule::Auto => ctx.instance.lower_curvature(),
                            LowerRule::Value(v) => *v,
                        },
                        sigma2,
                        diameter: set.diameter(),
                    }
                }
            };
            let expected = (1..=k).map(|t| batch.batch(t, k).map(|b| b as u64)).sum::<pgopt::Result<u64>>()?;
            let config = SpgConfig {
                gamma: gamma_of(*gamma, 2.0, l),
                upper_curvature: l,
                k,
                batch,
                eval,
            };
            Ok((run_spg(oracle, set, ctx.x0, &config, &stream)?, expected, notes))
        }
        (
            SolverParams::Acspg {
                gamma_multiplier,
                batch,
                curvature_batch,
                ..
            },
            Some(theta),
        ) => {
            let grad_batch = match batch {
                AcspgBatch::Constant(b) => AcBatch::Constant(*b),
                AcspgBatch::Adaptive(a) => AcBatch::Adaptive(*a),
            };
            let config = AcspgConfig {
                gamma_multiplier: *gamma_multiplier,
                curvature_batch: *curvature_batch,
                eval,
                ..AcspgConfig::new(theta * l, k, grad_batch.clone())
            };
            let trace = run_acspg(oracle, set, ctx.x0, &config, &stream)?;
            // adaptive batches follow the realized stepsizes
            let expected = trace
                .records
                .iter()
                .map(|r| grad_batch.batch(r.t, r.gamma).map(|b| (b + curvature_batch) as u64))
                .sum::<pgopt::Result<u64>>()?;
            Ok((trace, expected, notes))
        }
        (
            SolverParams::Vrspg {
                gamma,
                epoch_len,
                anchor_batch,
                inner_batch,
            },
            _,
        ) => {
            let config = VrConfig {
                gamma: gamma_of(*gamma, 4.0, l),
                epoch_len: *epoch_len,
                anchor_batch: anchor(anchor_batch)?,
                k,
                inner_batch: match inner_batch {
                    VrInner::Constant(b) => VrInnerBatch::Constant(*b),
                    VrInner::EpochAdaptive => VrInnerBatch::EpochAdaptive,
                },
                eval,
            };
            let expected = vrspg_sample_total(&config)?;
            Ok((run_vrspg(oracle, set, ctx.x0, &config, &stream)?, expected, notes))
        }
        (
            SolverParams::Acvrspg {
                gamma_multiplier,
                epoch_len,
                anchor_batch,
                inner_batch,
                curvature_batch,
                ..
            },
            Some(theta),
        ) => {
            let n_anchor = anchor(anchor_batch)?;
            let config = AcvrConfig {
                inner_batch: *inner_batch,
                curvature_batch: *curvature_batch,
                gamma_multiplier: *gamma_multiplier,
                eval,
                ..AcvrConfig::new(theta * l, *epoch_len, n_anchor, k)
            };
            let anchors = k.div_ceil(*epoch_len);
            let expected = (n_anchor * anchors + (k - anchors) * inner_batch + k * curvature_batch) as u64;
            Ok((run_acvrspg(oracle, set, ctx.x0, &config, &stream)?, expected, notes))
        }
        _ => Err(OptError::Unsupported(format!("{} is not stochastic", run.spec.algorithm()))),
    }
}

fn run_one(ctx: &Context<'_>, run: &RunSpec) -> std::result::Result<TrialResult, String> {
    let started = Instant::now();
    let deterministic = run.spec.algorithm().is_deterministic();
    let outcome = match (ctx.instance, deterministic) {
        (Instance::Qp(q), true) => run_deterministic(q, ctx, run),
        (Instance::Qp(q), false) => run_stochastic(&ZeroNoise(q.clone()), ctx, run),
        (Instance::Svm(s), true) if s.dataset().is_some() => run_deterministic(s, ctx, run),
        (Instance::Svm(_), true) => Err(OptError::Unsupported(
            "deterministic methods need an exact objective".into(),
        )),
        (Instance::Svm(s), false) => run_stochastic(s, ctx, run),
    };
    let wall_time = started.elapsed();
    let (trace, expected, notes) = outcome.map_err(|e| e.to_string())?;
    let total = trace.total_samples();
    if total != expected {
        return Err(format!("sample accounting mismatch: used {total}, batch rules give {expected}"));
    }
    Ok(TrialResult {
        trial: ctx.trial,
        total_samples: total,
        expected_samples: expected,
        upper_curvature: ctx.instance.upper_curvature(),
        trace,
        wall_time,
        notes,
    })
}

type TrialOutcome = (
    std::result::Result<InstanceInfo, String>,
    Vec<std::result::Result<TrialResult, String>>,
);

fn run_trial(cfg: &ExperimentConfig, runs: &[RunSpec], trial: usize) -> TrialOutcome {
    let setup = build_instance(cfg, trial).and_then(|inst| {
        let x0 = starting_point(cfg, inst.set(), trial)?;
        Ok((inst, x0))
    });
    let (instance, x0) = match setup {
        Ok(v) => v,
        Err(e) => {
            let msg = format!("instance generation failed: {e}");
            return (Err(msg.clone()), runs.iter().map(|_| Err(msg.clone())).collect());
        }
    };
    log::info!("trial {trial}: instance ready (L = {})", instance.upper_curvature());
    let ctx = Context {
        cfg,
        instance: &instance,
        x0: &x0,
        trial,
    };
    let results = runs
        .iter()
        .map(|run| {
            let r = run_one(&ctx, run);
            match &r {
                Ok(t) => log::info!("trial {trial}: {} done in {:.2?}", run.label, t.wall_time),
                Err(e) => log::error!("trial {trial}: {} failed: {e}", run.label),
            }
            r
        })
        .collect();
    let info = InstanceInfo {
        upper_curvature: instance.upper_curvature(),
        lower_curvature: instance.lower_curvature(),
        x0,
    };
    (Ok(info), results)
}

/// Runs every trial, `opts.jobs` at a time. Results do not depend on the
/// number of jobs.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    let runs = cfg.runs();
    let task = |trial: usize| run_trial(cfg, &runs, trial);
    #[cfg(feature = "parallel")]
    let per_trial: Vec<TrialOutcome> = {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| HarnessError::Trial(format!("cannot start worker threads: {e}")))?;
        pool.install(|| pgopt::exec::map_indexed(cfg.trials, task))
    };
    #[cfg(not(feature = "parallel"))]
    let per_trial: Vec<TrialOutcome> = {
        let _ = opts;
        pgopt::exec::map_indexed_sequential(cfg.trials, task)
    };

    let mut instances = Vec::with_capacity(cfg.trials);
    let mut reports: Vec<RunReport> = runs
        .into_iter()
        .map(|run| RunReport {
            run,
            trials: Vec::with_capacity(cfg.trials),
        })
        .collect();
    for (info, results) in per_trial {
        instances.push(info);
        for (rep, r) in reports.iter_mut().zip(results) {
            rep.trials.push(r);
        }
    }
    Ok(ExperimentReport {
        runs: reports,
        instances,
    })
}

/// Aggregate curves of the successful trials of each run, in run order.
pub fn curves(report: &ExperimentReport) -> Result<Vec<Curve>> {
    report
        .runs
        .iter()
        .filter(|r| r.trials.iter().any(|t| t.is_ok()))
        .map(|r| {
            let det = r.run.spec.algorithm().is_deterministic();
            let tables: Vec<_> = r.trials.iter().flatten().map(|t| trial_rows(&t.trace, det)).collect();
            aggregate(&r.run.label, &tables)
        })
        .collect()
}

fn manifest(cfg: &ExperimentConfig, report: &ExperimentReport) -> String {
    let mut m = String::new();
    let _ = writeln!(m, "csv_schema = {CSV_SCHEMA}");
    let _ = writeln!(
        m,
        "x0_rule = {}",
        match cfg.x0 {
            StartRule::Uniform => "uniform draw from the feasible set (assumed; not specified by the source experiments)",
            StartRule::Origin => "projection of the origin",
        }
    );
    m.push_str("\n[config]\n");
    for line in serialize_config(cfg).lines() {
        // the output location does not change results
        if !line.starts_with("experiment.output_dir") {
            let _ = writeln!(m, "{line}");
        }
    }
    m.push_str("\n[samples]\n");
    for run in &report.runs {
        for (i, t) in run.trials.iter().enumerate() {
            match t {
                Ok(t) => {
                    let _ = write!(
                        m,
                        "{} trial {i}: samples = {}, expected = {}",
                        run.run.label, t.total_samples, t.expected_samples
                    );
                    for (k, v) in &t.notes {
                        let _ = write!(m, ", {k} = {v}");
                    }
                    if let Some(o) = &t.trace.output {
                        let _ = write!(m, ", output_index = {}", o.index);
                    }
                    m.push('\n');
                }
                Err(_) => {
                    let _ = writeln!(m, "{} trial {i}: failed", run.run.label);
                }
            }
        }
    }
    m.push_str("\n[instances]\n");
    for (i, inst) in report.instances.iter().enumerate() {
        match inst {
            Ok(info) => {
                let x0: Vec<String> = info.x0.iter().map(f64::to_string).collect();
                let _ = writeln!(
                    m,
                    "trial {i}: upper_curvature = {}, lower_curvature = {}, x0 = {}",
                    info.upper_curvature,
                    info.lower_curvature,
                    x0.join(" ")
                );
            }
            Err(e) => {
                let _ = writeln!(m, "trial {i}: {e}");
            }
        }
    }
    m.push_str("\n[errors]\n");
    for e in report.failures() {
        let _ = writeln!(m, "{e}");
    }
    m
}

fn timing(report: &ExperimentReport) -> String {
    let mut s = String::from("run,trial,seconds\n");
    for run in &report.runs {
        for t in run.trials.iter().flatten() {
            let _ = writeln!(s, "{},{},{:.6}", run.run.label, t.trial, t.wall_time.as_secs_f64());
        }
    }
    s
}

/// The standard figure set: mapping norm against iterations and samples,
/// and stepsize parameters against iterations.
pub fn standard_plots(curves: &[Curve], dir: &Path) -> Result<Vec<PlotOutput>> {
    if curves.is_empty() {
        return Ok(Vec::new());
    }
    let specs = [
        ("pg_norm_vs_iteration", AxesSpec::new(XAxis::Iteration, YMetric::PgNorm, true, "projected gradient norm")),
        ("pg_norm_vs_samples", AxesSpec::new(XAxis::Samples, YMetric::PgNorm, true, "projected gradient norm")),
        ("gamma_vs_iteration", AxesSpec::new(XAxis::Iteration, YMetric::Gamma, true, "stepsize parameter")),
    ];
    specs
        .iter()
        .map(|(stem, axes)| emit_plot(curves, axes, &dir.join(stem)))
        .collect()
}

/// Writes trial CSVs, curves, manifest, timing and plots into `dir`.
pub fn write_outputs(cfg: &ExperimentConfig, report: &ExperimentReport, dir: &Path) -> Result<Vec<Curve>> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for run in &report.runs {
        let det = run.run.spec.algorithm().is_deterministic();
        for t in run.trials.iter().flatten() {
            let path = dir.join(format!("trial_{}_{}.csv", run.run.label, t.trial));
            write_trial_csv(&path, &trial_rows(&t.trace, det))?;
        }
    }
    let curves = curves(report)?;
    for c in &curves {
        write_curve_csv(&dir.join(format!("curve_{}.csv", c.label)), c)?;
    }
    let path = dir.join("manifest.txt");
    std::fs::write(&path, manifest(cfg, report)).map_err(|e| HarnessError::io(&path, e))?;
    let path = dir.join("timing.txt");
    std::fs::write(&path, timing(report)).map_err(|e| HarnessError::io(&path, e))?;
    standard_plots(&curves, dir)?;
    Ok(curves)
}
