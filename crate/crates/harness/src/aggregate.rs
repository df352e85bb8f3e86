//! Per-trial tables and their pointwise mean/std aggregation, with CSV I/O.

use std::path::Path;

use pgopt::Trace;

use crate::error::{HarnessError, Result};

pub const TRIAL_HEADER: [&str; 6] = ["t", "samples_cum", "f", "pg_norm", "gamma", "curvature_est"];
pub const CURVE_HEADER: [&str; 11] = [
    "t",
    "samples_cum",
    "pg_norm_mean",
    "pg_norm_std",
    "f_mean",
    "f_std",
    "gamma_mean",
    "gamma_std",
    "curvature_mean",
    "curvature_std",
    "trials",
];

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub t: usize,
    pub samples_cum: u64,
    pub f: Option<f64>,
    pub pg_norm: Option<f64>,
    pub gamma: Option<f64>,
    pub curvature: Option<f64>,
}

/// Rows of one trial. Deterministic runs report the mapping of each step;
/// stochastic runs report the reference mapping where it was evaluated.
pub fn trial_rows(trace: &Trace, deterministic: bool) -> Vec<TrialRow> {
    trace
        .records
        .iter()
        .map(|r| TrialRow {
            t: r.t,
            samples_cum: r.samples_cum,
            f: r.f_value,
            pg_norm: if deterministic { Some(r.pg_norm) } else { r.true_pg_norm },
            gamma: Some(r.gamma),
            curvature: r.curvature,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (denominator n - 1; 0 for one trial).
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        // a constant column must aggregate to exactly that constant
        let mean = if values.iter().all(|v| *v == values[0]) { values[0] } else { mean };
        Some(Stat { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub t: usize,
    /// Mean over trials; equal across trials for fixed batch schedules.
    pub samples_cum: f64,
    pub pg_norm: Option<Stat>,
    pub f: Option<Stat>,
    pub gamma: Option<Stat>,
    pub curvature: Option<Stat>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub rows: Vec<CurveRow>,
}

fn column(
    label: &str,
    t: usize,
    name: &str,
    values: impl Iterator<Item = Option<f64>>,
) -> Result<Option<Stat>> {
    let values: Vec<Option<f64>> = values.collect();
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    if !present.is_empty() && present.len() != values.len() {
        return Err(HarnessError::Trial(format!(
            "{label}: `{name}` at t = {t} is present in some trials and missing in others"
        )));
    }
    Ok(Stat::of(&present))
}

/// Pointwise aggregation of aligned trials.
pub fn aggregate(label: &str, trials: &[Vec<TrialRow>]) -> Result<Curve> {
    let first = trials
        .first()
        .ok_or_else(|| HarnessError::Trial(format!("{label}: no trials to aggregate")))?;
    for (i, tr) in trials.iter().enumerate() {
        if tr.len() != first.len() || tr.iter().zip(first).any(|(a, b)| a.t != b.t) {
            return Err(HarnessError::Trial(format!(
                "{label}: trial {i} is not aligned with trial 0 (iteration columns differ)"
            )));
        }
    }
    let mut rows = Vec::with_capacity(first.len());
    for (j, r0) in first.iter().enumerate() {
        let at = |f: fn(&TrialRow) -> Option<f64>| trials.iter().map(move |tr| f(&tr[j]));
        let samples: Vec<f64> = trials.iter().map(|tr| tr[j].samples_cum as f64).collect();
        rows.push(CurveRow {
            t: r0.t,
            samples_cum: Stat::of(&samples).map_or(0.0, |s| s.mean),
            pg_norm: column(label, r0.t, "pg_norm", at(|r| r.pg_norm))?,
            f: column(label, r0.t, "f", at(|r| r.f))?,
            gamma: column(label, r0.t, "gamma", at(|r| r.gamma))?,
            curvature: column(label, r0.t, "curvature_est", at(|r| r.curvature))?,
            trials: trials.len(),
        });
    }
    Ok(Curve {
        label: label.to_string(),
        rows,
    })
}

/// Shortest round-trip text, switching to exponent form for very small or
/// large magnitudes.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt_num)
}

fn parse_cell(path: &Path, line: u64, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>().map(Some).map_err(|_| {
        HarnessError::Trial(format!("{}: line {line}: `{s}` is not a number", path.display()))
    })
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| HarnessError::csv(path, e))
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| HarnessError::csv(path, e))?;
    let found = rd.headers().map_err(|e| HarnessError::csv(path, e))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(HarnessError::Trial(format!(
            "{}: unexpected header `{}`",
            path.display(),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(rd)
}

pub fn write_trial_csv(path: &Path, rows: &[TrialRow]) -> Result<()> {
    let mut w = writer(path)?;
    let e = |e| HarnessError::csv(path, e);
    w.write_record(TRIAL_HEADER).map_err(e)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.samples_cum.to_string(),
            cell(r.f),
            cell(r.pg_norm),
            cell(r.gamma),
            cell(r.curvature),
        ])
        .map_err(e)?;
    }
    w.flush().map_err(|err| HarnessError::io(path, err))
}

pub fn read_trial_csv(path: &Path) -> Result<Vec<TrialRow>> {
    let mut rd = reader(path, &TRIAL_HEADER)?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let int = |s: &str| {
            s.parse::<u64>().map_err(|_| {
                HarnessError::Trial(format!("{}: line {line}: `{s}` is not a count", path.display()))
            })
        };
        rows.push(TrialRow {
            t: int(&rec[0])? as usize,
            samples_cum: int(&rec[1])?,
            f: parse_cell(path, line, &rec[2])?,
            pg_norm: parse_cell(path, line, &rec[3])?,
            gamma: parse_cell(path, line, &rec[4])?,
            curvature: parse_cell(path, line, &rec[5])?,
        });
    }
    Ok(rows)
}

pub fn write_curve_csv(path: &Path, curve: &Curve) -> Result<()> {
    let mut w = writer(path)?;
    let e = |e| HarnessError::csv(path, e);
    w.write_record(CURVE_HEADER).map_err(e)?;
    let pair = |s: Option<Stat>| [cell(s.map(|s| s.mean)), cell(s.map(|s| s.std))];
    for r in &curve.rows {
        let mut rec = vec![r.t.to_string(), fmt_num(r.samples_cum)];
        rec.extend(pair(r.pg_norm));
        rec.extend(pair(r.f));
        rec.extend(pair(r.gamma));
        rec.extend(pair(r.curvature));
        rec.push(r.trials.to_string());
        w.write_record(&rec).map_err(e)?;
    }
    w.flush().map_err(|err| HarnessError::io(path, err))
}

pub fn read_curve_csv(path: &Path, label: &str) -> Result<Curve> {
    let mut rd = reader(path, &CURVE_HEADER)?;
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| HarnessError::csv(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| parse_cell(path, line, &rec[i]);
        let stat = |i: usize| -> Result<Option<Stat>> {
            Ok(match (num(i)?, num(i + 1)?) {
                (Some(mean), Some(std)) => Some(Stat { mean, std }),
                _ => None,
            })
        };
        let bad = || HarnessError::Trial(format!("{}: line {line}: malformed row", path.display()));
        rows.push(CurveRow {
            t: rec[0].parse().map_err(|_| bad())?,
            samples_cum: num(1)?.ok_or_else(bad)?,
            pg_norm: stat(2)?,
            f: stat(4)?,
            gamma: stat(6)?,
            curvature: stat(8)?,
            trials: rec[10].parse().map_err(|_| bad())?,
        });
    }
    Ok(Curve {
        label: label.to_string(),
        rows,
    })
}
