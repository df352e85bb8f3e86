//! Experiment configuration: a strict, line-oriented `section.key = value`
//! format.
//!
//! ```text
//! # comments run to end of line
//! experiment.trials = 10
//! problem.kind = qp
//! solver.acpg.algorithm = acpg
//! solver.acpg.theta = 0.1, 0.2, 0.5, 0.001
//! ```
//!
//! Solvers are declared by `solver.<label>.<field>` and keep the order of
//! their first appearance. Unknown keys, duplicate keys, malformed values and
//! fields that do not apply to the chosen problem or algorithm are errors.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Reuse the trial-0 instance for every trial.
    pub fixed_instance: bool,
    pub x0: StartRule,
    pub problem: ProblemSpec,
    pub eval: EvalSpec,
    pub solvers: Vec<SolverSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartRule {
    /// Uniform draw from the feasible set.
    Uniform,
    /// Projection of the origin.
    Origin,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Qp {
        n: usize,
        lower: f64,
        upper: f64,
        /// PSD Gram matrix instead of a symmetrized Gaussian one.
        convex: bool,
    },
    Svm {
        n: usize,
        mode: SvmMode,
        lambdas: [f64; 3],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvmMode {
    FiniteSum { m: usize },
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSpec {
    /// `None`: every step for deterministic solvers, every 10 otherwise.
    pub every: Option<usize>,
    /// Fresh samples per reference evaluation for online problems.
    pub samples: usize,
}

pub const DEFAULT_STOCH_EVAL_EVERY: usize = 10;

impl EvalSpec {
    pub fn cadence(&self, algorithm: Algorithm) -> usize {
        self.every.unwrap_or(if algorithm.is_deterministic() {
            1
        } else {
            DEFAULT_STOCH_EVAL_EVERY
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Pg,
    Acpg,
    Spg,
    Acspg,
    Vrspg,
    Acvrspg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Pg,
        Algorithm::Acpg,
        Algorithm::Spg,
        Algorithm::Acspg,
        Algorithm::Vrspg,
        Algorithm::Acvrspg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Pg => "pg",
            Algorithm::Acpg => "acpg",
            Algorithm::Spg => "spg",
            Algorithm::Acspg => "acspg",
            Algorithm::Vrspg => "vrspg",
            Algorithm::Acvrspg => "acvrspg",
        }
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, Algorithm::Pg | Algorithm::Acpg)
    }

    /// Fields accepted under `solver.<label>.` besides `algorithm` and `k`.
    fn fields(self) -> &'static [&'static str] {
        match self {
            Algorithm::Pg => &["gamma"],
            Algorithm::Acpg => &["theta"],
            Algorithm::Spg => &["gamma", "batch", "sigma2", "lower_curvature"],
            Algorithm::Acspg => &["theta", "gamma_multiplier", "batch", "curvature_batch"],
            Algorithm::Vrspg => &["gamma", "epoch_len", "anchor_batch", "inner_batch"],
            Algorithm::Acvrspg => &[
                "theta",
                "gamma_multiplier",
                "epoch_len",
                "anchor_batch",
                "inner_batch",
                "curvature_batch",
            ],
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                format!("unknown algorithm `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Constant stepsize parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaRule {
    /// `L` for PG, `2L` for SPG, `4L` for VR-SPG.
    Auto,
    Value(f64),
    /// A multiple of the problem's known gradient Lipschitz constant.
    TimesL(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpgBatch {
    Constant(usize),
    Increasing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcspgBatch {
    Constant(usize),
    Adaptive(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VrInner {
    Constant(usize),
    EpochAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnchorRule {
    Count(usize),
    /// The data-set size `M` (one exhaustive pass).
    DataSize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma2Rule {
    /// 1.5 times the largest empirical per-sample variance at random points.
    Estimate,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LowerRule {
    /// `max(0, -lambda_min(Q))` for quadratics, 0 otherwise.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverParams {
    Pg {
        gamma: GammaRule,
    },
    Acpg {
        theta: Vec<f64>,
    },
    Spg {
        gamma: GammaRule,
        batch: SpgBatch,
        sigma2: Sigma2Rule,
        lower_curvature: LowerRule,
    },
    Acspg {
        theta: Vec<f64>,
        gamma_multiplier: f64,
        batch: AcspgBatch,
        curvature_batch: usize,
    },
    Vrspg {
        gamma: GammaRule,
        epoch_len: usize,
        anchor_batch: AnchorRule,
        inner_batch: VrInner,
    },
    Acvrspg {
        theta: Vec<f64>,
        gamma_multiplier: f64,
        epoch_len: usize,
        anchor_batch: AnchorRule,
        /// Defaults to the epoch length.
        inner_batch: usize,
        curvature_batch: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub label: String,
    pub k: usize,
    pub params: SolverParams,
}

/// One concrete solver run: a solver with a single `theta`, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub label: String,
    pub spec: SolverSpec,
    pub theta: Option<f64>,
}

impl SolverSpec {
    pub fn algorithm(&self) -> Algorithm {
        match self.params {
            SolverParams::Pg { .. } => Algorithm::Pg,
            SolverParams::Acpg { .. } => Algorithm::Acpg,
            SolverParams::Spg { .. } => Algorithm::Spg,
            SolverParams::Acspg { .. } => Algorithm::Acspg,
            SolverParams::Vrspg { .. } => Algorithm::Vrspg,
            SolverParams::Acvrspg { .. } => Algorithm::Acvrspg,
        }
    }

    pub fn thetas(&self) -> Option<&[f64]> {
        match &self.params {
            SolverParams::Acpg { theta }
            | SolverParams::Acspg { theta, .. }
            | SolverParams::Acvrspg { theta, .. } => Some(theta),
            _ => None,
        }
    }

    /// Expands a `theta` list into one run per value, labeled
    /// `<label>-<theta>` when there is more than one.
    pub fn runs(&self) -> Vec<RunSpec> {
        match self.thetas() {
            None => vec![RunSpec {
                label: self.label.clone(),
                spec: self.clone(),
                theta: None,
            }],
            Some([one]) => vec![RunSpec {
                label: self.label.clone(),
                spec: self.clone(),
                theta: Some(*one),
            }],
            Some(list) => list
                .iter()
                .map(|t| RunSpec {
                    label: format!("{}-{t}", self.label),
                    spec: self.clone(),
                    theta: Some(*t),
                })
                .collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn runs(&self) -> Vec<RunSpec> {
        self.solvers.iter().flat_map(SolverSpec::runs).collect()
    }
}

// ---------------------------------------------------------------------------
// parsing

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

/// Entries of one section keyed by field, remembering where the section
/// first appeared.
#[derive(Debug, Default)]
struct Section {
    first_line: usize,
    fields: BTreeMap<String, Entry>,
}

impl Section {
    fn take(&mut self, key: &str) -> Option<Entry> {
        self.fields.remove(key)
    }

    fn missing(&self, path: &str) -> ConfigError {
        ConfigError::at(self.first_line, format!("missing required field `{path}`"))
    }

    fn required<T>(&mut self, prefix: &str, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        let path = format!("{prefix}.{key}");
        let e = self.take(key).ok_or_else(|| self.missing(&path))?;
        typed(&path, &e, parse)
    }

    fn optional<T>(&mut self, prefix: &str, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            Some(e) => typed(&format!("{prefix}.{key}"), &e, parse).map(Some),
            None => Ok(None),
        }
    }

    /// Any field left over is not part of the grammar for this section.
    fn finish(self, prefix: &str, context: &str) -> Result<(), ConfigError> {
        match self.fields.into_iter().min_by_key(|(_, e)| e.line) {
            Some((key, e)) => Err(ConfigError::at(
                e.line,
                format!("unknown key `{prefix}.{key}`{context}"),
            )),
            None => Ok(()),
        }
    }
}

fn typed<T>(path: &str, e: &Entry, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
    parse(&e.value).map_err(|msg| ConfigError::at(e.line, format!("`{path}`: {msg}")))
}

fn count(s: &str) -> Result<usize, String> {
    s.parse::<usize>()
        .map_err(|_| format!("expected a nonnegative integer, found `{s}`"))
}

fn positive_count(s: &str) -> Result<usize, String> {
    match count(s)? {
        0 => Err("must be at least 1".into()),
        v => Ok(v),
    }
}

fn real(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, found `{s}`")),
    }
}

fn positive_real(s: &str) -> Result<f64, String> {
    match real(s)? {
        v if v > 0.0 => Ok(v),
        v => Err(format!("must be positive, found {v}")),
    }
}

fn nonneg_real(s: &str) -> Result<f64, String> {
    match real(s)? {
        v if v >= 0.0 => Ok(v),
        v => Err(format!("must be nonnegative, found {v}")),
    }
}

fn boolean(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected `true` or `false`, found `{s}`")),
    }
}

fn real_list(s: &str) -> Result<Vec<f64>, String> {
    let v = s
        .split(',')
        .map(|p| positive_real(p.trim()))
        .collect::<Result<Vec<f64>, String>>()?;
    let mut seen = v.clone();
    seen.sort_by(f64::total_cmp);
    if seen.windows(2).any(|w| w[0] == w[1]) {
        return Err("list has repeated values".into());
    }
    Ok(v)
}

fn gamma_rule(s: &str) -> Result<GammaRule, String> {
    if s == "auto" {
        return Ok(GammaRule::Auto);
    }
    if let Some(m) = s.strip_suffix('L') {
        let m = if m.is_empty() { 1.0 } else { positive_real(m.trim())? };
        return Ok(GammaRule::TimesL(m));
    }
    positive_real(s).map(GammaRule::Value)
}

fn spg_batch(s: &str) -> Result<SpgBatch, String> {
    if s == "increasing" {
        return Ok(SpgBatch::Increasing);
    }
    positive_count(s)
        .map(SpgBatch::Constant)
        .map_err(|_| format!("expected `increasing` or a batch size, found `{s}`"))
}

fn acspg_batch(s: &str) -> Result<AcspgBatch, String> {
    if let Some(a) = s.strip_prefix("adaptive:") {
        return positive_real(a.trim()).map(AcspgBatch::Adaptive);
    }
    positive_count(s)
        .map(AcspgBatch::Constant)
        .map_err(|_| format!("expected `adaptive:<alpha>` or a batch size, found `{s}`"))
}

fn vr_inner(s: &str) -> Result<VrInner, String> {
    if s == "epoch-adaptive" {
        return Ok(VrInner::EpochAdaptive);
    }
    positive_count(s)
        .map(VrInner::Constant)
        .map_err(|_| format!("expected `epoch-adaptive` or a batch size, found `{s}`"))
}

fn anchor_rule(s: &str) -> Result<AnchorRule, String> {
    if s == "M" {
        return Ok(AnchorRule::DataSize);
    }
    positive_count(s)
        .map(AnchorRule::Count)
        .map_err(|_| format!("expected `M` or a batch size, found `{s}`"))
}

fn sigma2_rule(s: &str) -> Result<Sigma2Rule, String> {
    if s == "estimate" {
        return Ok(Sigma2Rule::Estimate);
    }
    nonneg_real(s).map(Sigma2Rule::Value)
}

fn lower_rule(s: &str) -> Result<LowerRule, String> {
    if s == "auto" {
        return Ok(LowerRule::Auto);
    }
    nonneg_real(s).map(LowerRule::Value)
}

fn start_rule(s: &str) -> Result<StartRule, String> {
    match s {
        "uniform" => Ok(StartRule::Uniform),
        "origin" => Ok(StartRule::Origin),
        _ => Err(format!("expected `uniform` or `origin`, found `{s}`")),
    }
}

fn label_ok(label: &str) -> bool {
    !label.is_empty()
        && label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut experiment = Section::default();
    let mut problem = Section::default();
    let mut eval = Section::default();
    let mut solvers: Vec<(String, Section)> = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, found `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(ConfigError::at(line, format!("missing value for `{key}`")));
        }
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(ConfigError::at(
                line,
                format!("duplicate key `{key}` (first set on line {first})"),
            ));
        }
        let entry = Entry {
            line,
            value: value.to_string(),
        };
        let parts: Vec<&str> = key.split('.').collect();
        let section = match parts.as_slice() {
            ["experiment", _] => &mut experiment,
            ["problem", _] => &mut problem,
            ["eval", _] => &mut eval,
            ["solver", label, _] => {
                if !label_ok(label) {
                    return Err(ConfigError::at(
                        line,
                        format!("solver label `{label}` may only use letters, digits, `_` and `-`"),
                    ));
                }
                match solvers.iter().position(|(l, _)| l == label) {
                    Some(p) => &mut solvers[p].1,
                    None => {
                        solvers.push((label.to_string(), Section::default()));
                        &mut solvers.last_mut().unwrap().1
                    }
                }
            }
            _ => return Err(ConfigError::at(line, format!("unknown key `{key}`"))),
        };
        if section.fields.is_empty() && section.first_line == 0 {
            section.first_line = line;
        }
        section.fields.insert(parts[parts.len() - 1].to_string(), entry);
    }
    // missing sections report the end of the input
    for s in [&mut experiment, &mut problem, &mut eval] {
        if s.first_line == 0 {
            s.first_line = last_line.max(1);
        }
    }

    let name = experiment
        .optional("experiment", "name", |s| {
            if label_ok(s) {
                Ok(s.to_string())
            } else {
                Err("names may only use letters, digits, `_` and `-`".into())
            }
        })?
        .unwrap_or_else(|| "experiment".into());
    let trials = experiment.optional("experiment", "trials", positive_count)?.unwrap_or(1);
    let seed = experiment
        .optional("experiment", "seed", |s| s.parse::<u64>().map_err(|_| format!("expected an unsigned integer, found `{s}`")))?
        .unwrap_or(0);
    let output_dir = experiment
        .optional("experiment", "output_dir", |s| Ok(PathBuf::from(s)))?
        .unwrap_or_else(|| PathBuf::from("out").join(&name));
    let fixed_instance = experiment.optional("experiment", "fixed_instance", boolean)?.unwrap_or(false);
    let x0 = experiment.optional("experiment", "x0", start_rule)?.unwrap_or(StartRule::Uniform);
    experiment.finish("experiment", "")?;

    let kind = problem.required("problem", "kind", |s| match s {
        "qp" | "convex-qp" | "svm" => Ok(s.to_string()),
        _ => Err(format!("expected `qp`, `convex-qp` or `svm`, found `{s}`")),
    })?;
    let n = problem.required("problem", "n", positive_count)?;
    let problem_spec = if kind == "svm" {
        let mode = problem
            .optional("problem", "mode", |s| match s {
                "finite" | "online" => Ok(s.to_string()),
                _ => Err(format!("expected `finite` or `online`, found `{s}`")),
            })?
            .unwrap_or_else(|| "finite".into());
        let mode = if mode == "finite" {
            SvmMode::FiniteSum {
                m: problem.optional("problem", "m", positive_count)?.unwrap_or(200_000),
            }
        } else {
            SvmMode::Online
        };
        let lambdas = [
            problem.optional("problem", "lambda1", nonneg_real)?.unwrap_or(0.5),
            problem.optional("problem", "lambda2", nonneg_real)?.unwrap_or(0.5),
            problem.optional("problem", "lambda3", nonneg_real)?.unwrap_or(1.0),
        ];
        problem.finish("problem", " for problem kind `svm`")?;
        ProblemSpec::Svm { n, mode, lambdas }
    } else {
        let lower_line = problem.fields.get("lower").map(|e| e.line);
        let lower = problem.optional("problem", "lower", real)?.unwrap_or(-5.0);
        let upper = problem.optional("problem", "upper", real)?.unwrap_or(5.0);
        if lower >= upper {
            return Err(ConfigError::at(
                lower_line.unwrap_or(problem.first_line),
                format!("`problem.lower` ({lower}) must be below `problem.upper` ({upper})"),
            ));
        }
        problem.finish("problem", &format!(" for problem kind `{kind}`"))?;
        ProblemSpec::Qp {
            n,
            lower,
            upper,
            convex: kind == "convex-qp",
        }
    };

    let every = eval
        .optional("eval", "every", |s| {
            if s == "auto" {
                Ok(None)
            } else {
                positive_count(s).map(Some)
            }
        })?
        .flatten();
    let samples = eval
        .optional("eval", "samples", positive_count)?
        .unwrap_or(pgopt::problems::svm::DEFAULT_EVAL_SAMPLES);
    eval.finish("eval", "")?;

    if solvers.is_empty() {
        return Err(ConfigError::at(last_line.max(1), "no solvers declared (`solver.<label>.algorithm = ...`)"));
    }
    let mut specs = Vec::with_capacity(solvers.len());
    for (label, mut sec) in solvers {
        let prefix = format!("solver.{label}");
        let algorithm = sec.required(&prefix, "algorithm", |s| s.parse::<Algorithm>())?;
        let k = sec.required(&prefix, "k", positive_count)?;
        // fields of other algorithms are reported before any type errors
        let allowed = algorithm.fields();
        if let Some((key, e)) = sec
            .fields
            .iter()
            .filter(|(key, _)| !allowed.contains(&key.as_str()))
            .min_by_key(|(_, e)| e.line)
        {
            return Err(ConfigError::at(
                e.line,
                format!("unknown key `{prefix}.{key}` for algorithm `{algorithm}`"),
            ));
        }
        let params = match algorithm {
            Algorithm::Pg => SolverParams::Pg {
                gamma: sec.optional(&prefix, "gamma", gamma_rule)?.unwrap_or(GammaRule::Auto),
            },
            Algorithm::Acpg => SolverParams::Acpg {
                theta: sec.required(&prefix, "theta", real_list)?,
            },
            Algorithm::Spg => SolverParams::Spg {
                gamma: sec.optional(&prefix, "gamma", gamma_rule)?.unwrap_or(GammaRule::Auto),
                batch: sec.optional(&prefix, "batch", spg_batch)?.unwrap_or(SpgBatch::Increasing),
                sigma2: sec.optional(&prefix, "sigma2", sigma2_rule)?.unwrap_or(Sigma2Rule::Estimate),
                lower_curvature: sec
                    .optional(&prefix, "lower_curvature", lower_rule)?
                    .unwrap_or(LowerRule::Auto),
            },
            Algorithm::Acspg => SolverParams::Acspg {
                theta: sec.required(&prefix, "theta", real_list)?,
                gamma_multiplier: sec.optional(&prefix, "gamma_multiplier", positive_real)?.unwrap_or(2.0),
                batch: sec.required(&prefix, "batch", acspg_batch)?,
                curvature_batch: sec.optional(&prefix, "curvature_batch", positive_count)?.unwrap_or(1),
            },
            Algorithm::Vrspg => SolverParams::Vrspg {
                gamma: sec.optional(&prefix, "gamma", gamma_rule)?.unwrap_or(GammaRule::Auto),
                epoch_len: sec.required(&prefix, "epoch_len", positive_count)?,
                anchor_batch: sec.required(&prefix, "anchor_batch", anchor_rule)?,
                inner_batch: sec.optional(&prefix, "inner_batch", vr_inner)?.unwrap_or(VrInner::EpochAdaptive),
            },
            Algorithm::Acvrspg => {
                let epoch_len = sec.required(&prefix, "epoch_len", positive_count)?;
                SolverParams::Acvrspg {
                    theta: sec.required(&prefix, "theta", real_list)?,
                    gamma_multiplier: sec.optional(&prefix, "gamma_multiplier", positive_real)?.unwrap_or(4.0),
                    epoch_len,
                    anchor_batch: sec.required(&prefix, "anchor_batch", anchor_rule)?,
                    inner_batch: sec.optional(&prefix, "inner_batch", positive_count)?.unwrap_or(epoch_len),
                    curvature_batch: sec.optional(&prefix, "curvature_batch", positive_count)?.unwrap_or(1),
                }
            }
        };
        let first_line = sec.first_line;
        sec.finish(&prefix, "")?;
        let spec = SolverSpec { label, k, params };
        check_solver(&spec, &problem_spec).map_err(|msg| ConfigError::at(first_line, msg))?;
        specs.push(spec);
    }

    let cfg = ExperimentConfig {
        name,
        trials,
        seed,
        output_dir,
        fixed_instance,
        x0,
        problem: problem_spec,
        eval: EvalSpec { every, samples },
        solvers: specs,
    };
    let mut labels: Vec<String> = cfg.runs().into_iter().map(|r| r.label).collect();
    labels.sort();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        return Err(ConfigError::at(last_line.max(1), format!("two runs share the label `{}`", w[0])));
    }
    Ok(cfg)
}

/// Cross-field checks between a solver and the problem.
fn check_solver(spec: &SolverSpec, problem: &ProblemSpec) -> Result<(), String> {
    let label = &spec.label;
    let online = matches!(problem, ProblemSpec::Svm { mode: SvmMode::Online, .. });
    match &spec.params {
        SolverParams::Pg { .. } | SolverParams::Acpg { .. } if online => {
            return Err(format!("solver `{label}`: deterministic methods need an exact objective, not an online problem"));
        }
        SolverParams::Acspg { .. } if spec.k < 2 => {
            return Err(format!("solver `{label}`: needs k >= 2"));
        }
        SolverParams::Spg { .. } if spec.k < 2 => {
            return Err(format!("solver `{label}`: needs k >= 2"));
        }
        SolverParams::Vrspg { epoch_len, anchor_batch, .. }
        | SolverParams::Acvrspg { epoch_len, anchor_batch, .. } => {
            if spec.k < *epoch_len {
                return Err(format!("solver `{label}`: needs k >= epoch_len"));
            }
            if *anchor_batch == AnchorRule::DataSize
                && !matches!(problem, ProblemSpec::Svm { mode: SvmMode::FiniteSum { .. }, .. })
            {
                return Err(format!("solver `{label}`: `anchor_batch = M` needs a finite-sum problem"));
            }
        }
        _ => {}
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// serialization

fn list(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for GammaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaRule::Auto => f.write_str("auto"),
            GammaRule::Value(v) => write!(f, "{v}"),
            GammaRule::TimesL(m) => write!(f, "{m}L"),
        }
    }
}

impl fmt::Display for AnchorRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnchorRule::Count(n) => write!(f, "{n}"),
            AnchorRule::DataSize => f.write_str("M"),
        }
    }
}

/// Canonical text with every default spelled out; parses back to an equal
/// config.
pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("experiment.name", cfg.name.clone());
    kv("experiment.trials", cfg.trials.to_string());
    kv("experiment.seed", cfg.seed.to_string());
    kv("experiment.output_dir", cfg.output_dir.display().to_string());
    kv("experiment.fixed_instance", cfg.fixed_instance.to_string());
    kv(
        "experiment.x0",
        match cfg.x0 {
            StartRule::Uniform => "uniform",
            StartRule::Origin => "origin",
        }
        .into(),
    );
    match &cfg.problem {
        ProblemSpec::Qp { n, lower, upper, convex } => {
            kv("problem.kind", if *convex { "convex-qp" } else { "qp" }.into());
            kv("problem.n", n.to_string());
            kv("problem.lower", lower.to_string());
            kv("problem.upper", upper.to_string());
        }
        ProblemSpec::Svm { n, mode, lambdas } => {
            kv("problem.kind", "svm".into());
            kv("problem.n", n.to_string());
            match mode {
                SvmMode::FiniteSum { m } => {
                    kv("problem.mode", "finite".into());
                    kv("problem.m", m.to_string());
                }
                SvmMode::Online => kv("problem.mode", "online".into()),
            }
            kv("problem.lambda1", lambdas[0].to_string());
            kv("problem.lambda2", lambdas[1].to_string());
            kv("problem.lambda3", lambdas[2].to_string());
        }
    }
    kv(
        "eval.every",
        cfg.eval.every.map_or_else(|| "auto".to_string(), |e| e.to_string()),
    );
    kv("eval.samples", cfg.eval.samples.to_string());
    for sp in &cfg.solvers {
        let p = format!("solver.{}", sp.label);
        kv(&format!("{p}.algorithm"), sp.algorithm().to_string());
        kv(&format!("{p}.k"), sp.k.to_string());
        match &sp.params {
            SolverParams::Pg { gamma } => kv(&format!("{p}.gamma"), gamma.to_string()),
            SolverParams::Acpg { theta } => kv(&format!("{p}.theta"), list(theta)),
            SolverParams::Spg {
                gamma,
                batch,
                sigma2,
                lower_curvature,
            } => {
                kv(&format!("{p}.gamma"), gamma.to_string());
                kv(
                    &format!("{p}.batch"),
                    match batch {
                        SpgBatch::Constant(b) => b.to_string(),
                        SpgBatch::Increasing => "increasing".into(),
                    },
                );
                kv(
                    &format!("{p}.sigma2"),
                    match sigma2 {
                        Sigma2Rule::Estimate => "estimate".into(),
                        Sigma2Rule::Value(v) => v.to_string(),
                    },
                );
                kv(
                    &format!("{p}.lower_curvature"),
                    match lower_curvature {
                        LowerRule::Auto => "auto".into(),
                        LowerRule::Value(v) => v.to_string(),
                    },
                );
            }
            SolverParams::Acspg {
                theta,
                gamma_multiplier,
                batch,
                curvature_batch,
            } => {
                kv(&format!("{p}.theta"), list(theta));
                kv(&format!("{p}.gamma_multiplier"), gamma_multiplier.to_string());
                kv(
                    &format!("{p}.batch"),
                    match batch {
                        AcspgBatch::Constant(b) => b.to_string(),
                        AcspgBatch::Adaptive(a) => format!("adaptive:{a}"),
                    },
                );
                kv(&format!("{p}.curvature_batch"), curvature_batch.to_string());
            }
            SolverParams::Vrspg {
                gamma,
                epoch_len,
                anchor_batch,
                inner_batch,
            } => {
                kv(&format!("{p}.gamma"), gamma.to_string());
                kv(&format!("{p}.epoch_len"), epoch_len.to_string());
                kv(&format!("{p}.anchor_batch"), anchor_batch.to_string());
                kv(
                    &format!("{p}.inner_batch"),
                    match inner_batch {
                        VrInner::Constant(b) => b.to_string(),
                        VrInner::EpochAdaptive => "epoch-adaptive".into(),
                    },
                );
            }
            SolverParams::Acvrspg {
                theta,
                gamma_multiplier,
                epoch_len,
                anchor_batch,
                inner_batch,
                curvature_batch,
            } => {
                kv(&format!("{p}.theta"), list(theta));
                kv(&format!("{p}.gamma_multiplier"), gamma_multiplier.to_string());
                kv(&format!("{p}.epoch_len"), epoch_len.to_string());
                kv(&format!("{p}.anchor_batch"), anchor_batch.to_string());
                kv(&format!("{p}.inner_batch"), inner_batch.to_string());
                kv(&format!("{p}.curvature_batch"), curvature_batch.to_string());
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
experiment.seed = 7
experiment.trials = 1
problem.kind = qp
problem.n = 2
solver.pg.algorithm = pg
solver.pg.gamma = auto
solver.pg.k = 5
";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.name, "experiment");
        assert_eq!(c.x0, StartRule::Uniform);
        assert_eq!(
            c.problem,
            ProblemSpec::Qp {
                n: 2,
                lower: -5.0,
                upper: 5.0,
                convex: false
            }
        );
        assert_eq!(c.eval.every, None);
        assert_eq!(c.eval.cadence(Algorithm::Pg), 1);
        assert_eq!(c.eval.cadence(Algorithm::Spg), 10);
        let text = serialize_config(&c);
        assert!(text.contains("problem.lower = -5\n"));
        assert!(text.contains("experiment.output_dir = out/experiment\n"));
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = format!("{MINIMAL}solver.pg.gama = 3\n");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line, Some(8));
        assert!(e.to_string().contains("solver.pg.gama"), "{e}");
        let e = parse_config("problem.kind = qp\nproblem.n = 3\nfoo = 1\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn type_and_missing_field_errors_carry_lines() {
        let e = parse_config(&MINIMAL.replace("solver.pg.k = 5", "solver.pg.k = five")).unwrap_err();
        assert_eq!(e.line, Some(7));
        let e = parse_config(&MINIMAL.replace("solver.pg.k = 5\n", "")).unwrap_err();
        assert_eq!(e.line, Some(5));
        assert!(e.to_string().contains("solver.pg.k"));
        let e = parse_config(&format!("{MINIMAL}solver.pg.theta = 0.1\n")).unwrap_err();
        assert!(e.to_string().contains("algorithm `pg`"));
        let e = parse_config(&format!("{MINIMAL}experiment.seed = 8\n")).unwrap_err();
        assert!(e.to_string().contains("duplicate"));
        assert!(parse_config(&format!("{MINIMAL}this line is junk\n")).is_err());
    }

    #[test]
    fn gamma_rules() {
        assert_eq!(gamma_rule("2L").unwrap(), GammaRule::TimesL(2.0));
        assert_eq!(gamma_rule("L").unwrap(), GammaRule::TimesL(1.0));
        assert_eq!(gamma_rule("3.5").unwrap(), GammaRule::Value(3.5));
        assert!(gamma_rule("-1").is_err());
        assert!(gamma_rule("xL").is_err());
    }

    #[test]
    fn theta_lists_expand_into_runs() {
        let text = "problem.kind = qp\nproblem.n = 3\nsolver.ac.algorithm = acpg\nsolver.ac.k = 4\nsolver.ac.theta = 0.1, 0.001\n";
        let c = parse_config(text).unwrap();
        let labels: Vec<String> = c.runs().into_iter().map(|r| r.label).collect();
        assert_eq!(labels, vec!["ac-0.1", "ac-0.001"]);
    }

    #[test]
    fn cross_field_checks() {
        let base = "problem.kind = qp\nproblem.n = 3\n";
        let vr = "solver.v.algorithm = vrspg\nsolver.v.k = 10\nsolver.v.epoch_len = 5\nsolver.v.anchor_batch = M\n";
        assert!(parse_config(&format!("{base}{vr}")).unwrap_err().to_string().contains("finite-sum"));
        let online = "problem.kind = svm\nproblem.n = 3\nproblem.mode = online\nsolver.p.algorithm = pg\nsolver.p.k = 3\n";
        assert!(parse_config(online).is_err());
        let online_m = "problem.kind = svm\nproblem.n = 3\nproblem.mode = online\nproblem.m = 10\nsolver.p.algorithm = spg\nsolver.p.k = 3\n";
        assert!(parse_config(online_m).unwrap_err().to_string().contains("problem.m"));
    }
}
