//! Deterministic projected gradient (PG) and its auto-conditioned variant (AC-PG).

use crate::error::{invalid, OptError, Result};
use crate::mapping::{curvature_quotient, projected_gradient, prox_step};
use crate::oracle::DetOracle;
use crate::sets::FeasibleSet;
use crate::trace::{IterRecord, Trace};
use crate::vector::Vector;

/// Options shared by the deterministic solvers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetOptions {
    /// Keep `x_0, ..., x_k` in the trace.
    pub keep_iterates: bool,
    /// Stop once a step's mapping norm falls to this value or below.
    pub stop_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcpgConfig {
    /// Initial curvature guess `L_0 > 0`.
    pub l0: f64,
    pub k: usize,
    /// Every this many iterations the running maximum restarts from
    /// `max(L_0, L_t)`. Off by default.
    pub reset_every: Option<usize>,
    pub options: DetOptions,
}

impl AcpgConfig {
    pub fn new(l0: f64, k: usize) -> Self {
        AcpgConfig {
            l0,
            k,
            reset_every: None,
            options: DetOptions::default(),
        }
    }
}

fn start<O: DetOracle>(oracle: &O, set: &FeasibleSet, x0: &Vector) -> Result<(Vector, f64, Vector)> {
    let x = set.project(x0)?;
    let (f, g) = oracle.value_grad(&x)?;
    if !f.is_finite() {
        return Err(OptError::NonFinite("objective value"));
    }
    Ok((x, f, g))
}

/// PG with constant `gamma` for `k` iterations.
pub fn run_pg<O: DetOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    gamma: f64,
    k: usize,
) -> Result<Trace> {
    run_pg_with(oracle, set, x0, gamma, k, &DetOptions::default())
}

pub fn run_pg_with<O: DetOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    gamma: f64,
    k: usize,
    options: &DetOptions,
) -> Result<Trace> {
    if k == 0 {
        return invalid("iteration count must be at least 1");
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return invalid(format!("gamma must be positive, got {gamma}"));
    }
    let echo = vec![
        ("gamma".to_string(), gamma.to_string()),
        ("k".to_string(), k.to_string()),
    ];
    run_loop(oracle, set, x0, k, options, "pg", echo, |_, _| gamma, |_, _, _| {})
}

/// AC-PG: `gamma_t = max(L_0, L_1, ..., L_{t-1})` with `L_t` the local
/// curvature between consecutive iterates.
pub fn run_acpg<O: DetOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    l0: f64,
    k: usize,
) -> Result<Trace> {
    run_acpg_with(oracle, set, x0, &AcpgConfig::new(l0, k))
}

pub fn run_acpg_with<O: DetOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    config: &AcpgConfig,
) -> Result<Trace> {
    let l0 = config.l0;
    if !(l0 > 0.0 && l0.is_finite()) {
        return invalid(format!("L0 must be positive, got {l0}"));
    }
    if config.k == 0 {
        return invalid("iteration count must be at least 1");
    }
    if config.reset_every == Some(0) {
        return invalid("reset period must be positive");
    }
    let mut echo = vec![
        ("l0".to_string(), l0.to_string()),
        ("k".to_string(), config.k.to_string()),
    ];
    if let Some(p) = config.reset_every {
        echo.push(("reset_every".to_string(), p.to_string()));
    }
    let running_max = std::cell::Cell::new(l0);
    run_loop(
        oracle,
        set,
        x0,
        config.k,
        &config.options,
        "acpg",
        echo,
        |_, _| running_max.get(),
        |t, l_t, _| {
            let mut hat = running_max.get().max(l_t);
            if config.reset_every.is_some_and(|p| t % p == 0) {
                hat = l0.max(l_t);
            }
            running_max.set(hat);
        },
    )
}

#[allow(clippy::too_many_arguments)]
fn run_loop<O: DetOracle>(
    oracle: &O,
    set: &FeasibleSet,
    x0: &Vector,
    k: usize,
    options: &DetOptions,
    name: &str,
    config_echo: Vec<(String, String)>,
    gamma_for: impl Fn(usize, &Vector) -> f64,
    mut after_step: impl FnMut(usize, f64, f64),
) -> Result<Trace> {
    let (mut x, mut f, mut g) = start(oracle, set, x0)?;
    let x_start = x.clone();
    let initial_value = f;
    let track_curvature = name != "pg";
    let mut iterates = options.keep_iterates.then(|| vec![x.clone()]);
    let mut records = Vec::with_capacity(k);
    let mut stopped_early = false;

    for t in 1..=k {
        let gamma = gamma_for(t, &x);
        let x_new = prox_step(set, &x, &g, gamma)?;
        let pg_norm = gamma * x.dist(&x_new)?;
        let (f_new, g_new) = oracle.value_grad(&x_new)?;
        if !f_new.is_finite() {
            return Err(OptError::NonFinite("objective value"));
        }
        let l_t = curvature_quotient(f, f_new, g.as_slice(), x.as_slice(), x_new.as_slice());
        records.push(IterRecord {
            t,
            f_value: Some(f_new),
            pg_norm,
            true_pg_norm: Some(pg_norm),
            gamma,
            curvature: track_curvature.then_some(l_t),
            samples_cum: t as u64,
        });
        after_step(t, l_t, gamma);
        if let Some(it) = iterates.as_mut() {
            it.push(x_new.clone());
        }
        x = x_new;
        f = f_new;
        g = g_new;
        if options.stop_tol.is_some_and(|tol| pg_norm <= tol) {
            stopped_early = true;
            break;
        }
    }

    let next_gamma = gamma_for(records.len() + 1, &x);
    let final_pg_norm = projected_gradient(set, &x, &g, next_gamma)?.norm();
    Ok(Trace {
        algorithm: name.to_string(),
        records,
        x0: x_start,
        initial_value: Some(initial_value),
        final_x: x,
        next_gamma,
        final_pg_norm: Some(final_pg_norm),
        iterates,
        output: None,
        config_echo,
        stopped_early,
    })
}

/// Number of AC-PG segments: one plus the count of steps `t >= 2` whose
/// curvature estimate exceeds 3/2 of the running maximum that set `gamma_t`.
pub fn segment_count(trace: &Trace) -> Result<usize> {
    let mut m = 1;
    for r in &trace.records {
        let l_t = r.curvature.ok_or_else(|| {
            OptError::InvalidParameter("trace has no curvature estimates".into())
        })?;
        if r.t >= 2 && l_t > 1.5 * r.gamma {
            m += 1;
        }
    }
    Ok(m)
}

/// `floor(log_{3/2}(L / L_0)) + 1`, the segment bound for known `L >= L_0`.
pub fn segment_bound(l: f64, l0: f64) -> usize {
    if l <= l0 {
        return 1;
    }
    ((l / l0).ln() / 1.5f64.ln() + 1e-12).floor() as usize + 1
}

/// `L_0` from the curvature between two user-chosen points (absolute value,
/// so a locally concave pair still yields a usable scale).
pub fn bootstrap_l0<O: DetOracle>(oracle: &O, x: &Vector, y: &Vector) -> Result<f64> {
    let (fx, gx) = oracle.value_grad(x)?;
    let fy = oracle.value(y)?;
    let l = crate::mapping::local_curvature(fx, fy, &gx, x, y)?.abs();
    if l > 0.0 {
        Ok(l)
    } else {
        invalid("points give zero curvature; choose a different pair")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sets::BoxSet;

    /// `1/2 x^T diag(d) x + c^T x`
    struct Diag {
        d: Vec<f64>,
        c: Vec<f64>,
    }

    impl DetOracle for Diag {
        fn dim(&self) -> usize {
            self.d.len()
        }
        fn value(&self, x: &Vector) -> Result<f64> {
            Ok((0..self.d.len())
                .map(|i| 0.5 * self.d[i] * x[i] * x[i] + self.c[i] * x[i])
                .sum())
        }
        fn gradient(&self, x: &Vector) -> Result<Vector> {
            Vector::new((0..self.d.len()).map(|i| self.d[i] * x[i] + self.c[i]).collect())
        }
    }

    fn cube(n: usize, r: f64) -> FeasibleSet {
        BoxSet::uniform(n, -r, r).unwrap().into()
    }

    #[test]
    fn unit_quadratic_jumps_to_minimizer() {
        let o = Diag {
            d: vec![1.0; 3],
            c: vec![0.0; 3],
        };
        let x0 = Vector::new(vec![3.0, -4.0, 1.5]).unwrap();
        let tr = run_pg(&o, &cube(3, 5.0), &x0, 1.0, 3).unwrap();
        assert_eq!(tr.records.len(), 3);
        assert!(tr.final_x.norm() < 1e-15);
        assert_eq!(tr.records[0].f_value, Some(0.0));
    }

    #[test]
    fn infeasible_start_is_projected() {
        let o = Diag {
            d: vec![1.0],
            c: vec![0.0],
        };
        let tr = run_pg(&o, &cube(1, 1.0), &Vector::new(vec![9.0]).unwrap(), 2.0, 1).unwrap();
        assert_eq!(tr.x0.as_slice(), &[1.0]);
    }

    #[test]
    fn constant_curvature_keeps_gamma() {
        let o = Diag {
            d: vec![2.0, 2.0],
            c: vec![0.3, -0.1],
        };
        let x0 = Vector::new(vec![4.0, -3.0]).unwrap();
        let tr = run_acpg(&o, &cube(2, 5.0), &x0, 2.0, 20).unwrap();
        for r in &tr.records {
            assert!((r.gamma - 2.0).abs() < 1e-12);
            if let Some(l) = r.curvature {
                // zero displacement after convergence reports 0
                assert!(l == 0.0 || (l - 2.0).abs() < 1e-10, "{l}");
            }
        }
        assert_eq!(segment_count(&tr).unwrap(), 1);
    }

    #[test]
    fn large_l0_reproduces_pg() {
        let o = Diag {
            d: vec![1.0, -0.5, 3.0],
            c: vec![0.2, 0.1, -1.0],
        };
        let x0 = Vector::new(vec![0.5, 0.4, -0.3]).unwrap();
        let a = run_acpg(&o, &cube(3, 1.0), &x0, 3.0, 40).unwrap();
        let b = run_pg(&o, &cube(3, 1.0), &x0, 3.0, 40).unwrap();
        assert_eq!(a.final_x, b.final_x);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.pg_norm, rb.pg_norm);
            assert_eq!(ra.gamma, rb.gamma);
        }
    }

    #[test]
    fn gamma_is_monotone_and_bounded() {
        let o = Diag {
            d: vec![5.0, -2.0, 0.5, 1.0],
            c: vec![1.0, 0.0, -2.0, 0.5],
        };
        let x0 = Vector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let tr = run_acpg(&o, &cube(4, 2.0), &x0, 0.01, 200).unwrap();
        let g = tr.gammas();
        assert!(g.windows(2).all(|w| w[1] >= w[0]));
        assert!(tr.next_gamma <= 5.0 + 1e-9);
        assert!(segment_count(&tr).unwrap() <= segment_bound(5.0, 0.01));
    }

    #[test]
    fn reset_allows_gamma_to_fall() {
        let o = Diag {
            d: vec![5.0, 0.1],
            c: vec![0.0, 1.0],
        };
        let x0 = Vector::new(vec![1.0, 1.0]).unwrap();
        let mut cfg = AcpgConfig::new(0.05, 60);
        cfg.reset_every = Some(5);
        let tr = run_acpg_with(&o, &cube(2, 2.0), &x0, &cfg).unwrap();
        assert_eq!(tr.records.len(), 60);
        assert!(tr.config_echo.iter().any(|(k, _)| k == "reset_every"));
    }

    #[test]
    fn early_stop_and_errors() {
        let o = Diag {
            d: vec![1.0],
            c: vec![0.0],
        };
        let x0 = Vector::new(vec![1.0]).unwrap();
        let opts = DetOptions {
            keep_iterates: true,
            stop_tol: Some(1e-12),
        };
        let tr = run_pg_with(&o, &cube(1, 5.0), &x0, 1.0, 50, &opts).unwrap();
        assert!(tr.stopped_early);
        assert_eq!(tr.iterates.as_ref().unwrap().len(), tr.records.len() + 1);
        assert!(run_pg(&o, &cube(1, 5.0), &x0, 0.0, 5).is_err());
        assert!(run_pg(&o, &cube(1, 5.0), &x0, 1.0, 0).is_err());
        assert!(run_acpg(&o, &cube(1, 5.0), &x0, -1.0, 5).is_err());
    }

    #[test]
    fn segment_count_requires_curvature() {
        let o = Diag {
            d: vec![1.0],
            c: vec![0.0],
        };
        let tr = run_pg(&o, &cube(1, 5.0), &Vector::new(vec![1.0]).unwrap(), 1.0, 3).unwrap();
        assert!(segment_count(&tr).is_err());
    }

    #[test]
    fn segment_bound_values() {
        assert_eq!(segment_bound(1000.0, 1.0), 18);
        assert_eq!(segment_bound(1.0, 1.0), 1);
        assert_eq!(segment_bound(1.5, 1.0), 2);
    }

    #[test]
    fn bootstrap_from_two_points() {
        let o = Diag {
            d: vec![1.0, 3.0],
            c: vec![0.0, 0.0],
        };
        let l = bootstrap_l0(&o, &Vector::zeros(2), &Vector::basis(2, 1)).unwrap();
        assert!((l - 3.0).abs() < 1e-14);
        assert!(bootstrap_l0(&o, &Vector::zeros(2), &Vector::zeros(2)).is_err());
    }
}
