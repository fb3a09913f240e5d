//! Remainder sweeps over scale grids, growth-exponent fits, and
//! lower-order (Ω) evidence from unit-length windows.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;

use crate::counter::{remainder_with_volume, Scale};
use crate::domain::{DomainSpec, ExponentReport};
use crate::error::{Error, Result};
use crate::stats::{log_log_fit, running_max};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: Scale,
    #[serde(serialize_with = "crate::counter::serialize_biguint")]
    pub count: BigUint,
    pub volume_term: f64,
    pub remainder: f64,
    /// `remainder / t^E` for the reference exponent of the sweep.
    pub normalized: f64,
}

/// Geometric grid on `[t_min, t_max]` rounded to rationals with denominator
/// `denom`; duplicates after rounding are dropped.
pub fn geometric_grid(t_min: f64, t_max: f64, steps: usize, denom: u64) -> Result<Vec<Scale>> {
    if !(t_min > 0.0) || !(t_max >= t_min) || steps == 0 {
        return Err(Error::Degenerate(format!("grid [{t_min}, {t_max}] with {steps} steps")));
    }
    let ratio = if steps > 1 { (t_max / t_min).powf(1.0 / (steps - 1) as f64) } else { 1.0 };
    let mut grid = Vec::with_capacity(steps);
    for i in 0..steps {
        let s = Scale::round_to(t_min * ratio.powi(i as i32), denom)?;
        if grid.last() != Some(&s) {
            grid.push(s);
        }
    }
    Ok(grid)
}

/// Evenly spaced grid `t_min, t_min + step, …` up to `t_max` inclusive.
pub fn linear_grid(t_min: Scale, t_max: Scale, step: Scale) -> Vec<Scale> {
    let mut grid = Vec::new();
    let mut t = t_min.ratio();
    while t <= t_max.ratio() {
        grid.push(Scale::new(*t.numer(), *t.denom()).expect("positive"));
        t += step.ratio();
    }
    grid
}

/// One row per scale, computed in parallel; `reference_exponent` sets the
/// `normalized` column.
pub fn sweep_remainder(spec: &DomainSpec, grid: &[Scale], reference_exponent: f64) -> Result<Vec<SweepRow>> {
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Degenerate("scale grid must be strictly increasing".into()));
    }
    let volume = spec.volume();
    Ok(grid
        .par_iter()
        .map(|&t| {
            let r = remainder_with_volume(spec, t, volume);
            SweepRow {
                t,
                count: r.count,
                volume_term: r.volume_term,
                remainder: r.remainder,
                normalized: r.remainder / t.to_f64().powf(reference_exponent),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub fitted_exponent: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub predicted: f64,
    pub residual: f64,
}

/// Log–log slope of the running maximum of `|R|`. The running max tracks
/// the sup-growth that the upper bound controls; pointwise `|R|` oscillates
/// through zero.
pub fn fit_growth_exponent(rows: &[SweepRow], predicted: f64) -> Result<FitResult> {
    let ts: Vec<f64> = rows.iter().map(|r| r.t.to_f64()).collect();
    let rs: Vec<f64> = rows.iter().map(|r| r.remainder).collect();
    fit_growth_values(&ts, &rs, predicted)
}

pub fn fit_growth_values(ts: &[f64], remainders: &[f64], predicted: f64) -> Result<FitResult> {
    if ts.len() < 20 {
        return Err(Error::Degenerate(format!("{} rows, need at least 20", ts.len())));
    }
    let (t_lo, t_hi) = (ts[0], ts[ts.len() - 1]);
    if t_hi < 10.0 * t_lo * (1.0 - 1e-12) {
        return Err(Error::Degenerate(format!("window [{t_lo}, {t_hi}] spans less than a decade")));
    }
    let abs: Vec<f64> = remainders.iter().map(|r| r.abs()).collect();
    if abs.iter().all(|r| *r < 1e-9) {
        return Err(Error::Degenerate("all remainders vanish".into()));
    }
    let env = running_max(&abs);
    let fit = log_log_fit(ts, &env).ok_or_else(|| Error::Degenerate("log-log fit failed".into()))?;
    Ok(FitResult {
        fitted_exponent: fit.slope,
        intercept: fit.intercept,
        window: (t_lo, t_hi),
        predicted,
        residual: fit.slope - predicted,
    })
}

pub const DEFAULT_EXPONENT_TOL: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub fitted: f64,
    pub predicted: f64,
    pub margin: f64,
    pub pass: bool,
}

pub fn compare_to_bound(fit: &FitResult, report: &ExponentReport, tol: f64) -> Verdict {
    compare_exponents(fit.fitted_exponent, report.overall, tol)
}

pub fn compare_exponents(fitted: f64, predicted: f64, tol: f64) -> Verdict {
    Verdict { fitted, predicted, margin: predicted - fitted, pass: fitted <= predicted + tol }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowSup {
    pub t_lo: f64,
    pub t_hi: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaEvidence {
    /// 1-based axis.
    pub axis: usize,
    pub exponent: f64,
    pub windows: Vec<WindowSup>,
    /// Minimum over windows of `sup |R|/t^E`.
    pub evidence: f64,
    pub inconclusive: bool,
}

/// Per window `[lo, hi]`, `sup |R(t)|/t^E` over the samples in it.
pub fn window_sups(ts: &[f64], remainders: &[f64], exponent: f64, windows: &[(f64, f64)]) -> Vec<WindowSup> {
    windows
        .iter()
        .map(|&(lo, hi)| {
            let sup = ts
                .iter()
                .zip(remainders)
                .filter(|(t, _)| **t >= lo && **t <= hi)
                .map(|(t, r)| r.abs() / t.powf(exponent))
                .fold(0.0, f64::max);
            WindowSup { t_lo: lo, t_hi: hi, sup }
        })
        .collect()
}

pub fn omega_evidence(axis: usize, exponent: f64, windows: Vec<WindowSup>) -> OmegaEvidence {
    let evidence = windows.iter().map(|w| w.sup).fold(f64::INFINITY, f64::min);
    let evidence = if evidence.is_finite() { evidence } else { 0.0 };
    OmegaEvidence { axis, exponent, windows, evidence, inconclusive: evidence <= 1e-12 }
}

/// Dense sweep over each window with the given step; `axis` is 1-based and
/// sets `E = d - 1 - ν_axis`.
pub fn omega_scan(spec: &DomainSpec, axis: usize, windows: &[(Scale, Scale)], step: Scale) -> Result<OmegaEvidence> {
    if axis == 0 || axis > spec.d() {
        return Err(Error::IndexOutOfRange { index: axis, d: spec.d() });
    }
    let exponent = (spec.d() - 1) as f64 - spec.nu(axis - 1);
    let mut grid: Vec<Scale> = windows.iter().flat_map(|&(lo, hi)| linear_grid(lo, hi, step)).collect();
    grid.sort();
    grid.dedup();
    let rows = sweep_remainder(spec, &grid, exponent)?;
    let ts: Vec<f64> = rows.iter().map(|r| r.t.to_f64()).collect();
    let rs: Vec<f64> = rows.iter().map(|r| r.remainder).collect();
    let bounds: Vec<(f64, f64)> = windows.iter().map(|(a, b)| (a.to_f64(), b.to_f64())).collect();
    Ok(omega_evidence(axis, exponent, window_sups(&ts, &rs, exponent, &bounds)))
}
