//! Dispatch from a [`RunConfig`] to the library and assembly of reports.

use latlab_core::caps::{default_eps0, lemma1_check, TREND_TOL};
use latlab_core::counter::remainder;
use latlab_core::fourier::{axis_asymptotics, cone_grid, decay_check, log_grid, ProfileCache, ProfileOptions};
use latlab_core::poisson::{sandwich_check, Mollifier, DEFAULT_CUTOFF, DEFAULT_ORDER};
use latlab_core::qmc::qmc_volume;
use latlab_core::remainder::{compare_exponents, fit_growth_exponent, geometric_grid, sweep_remainder, DEFAULT_EXPONENT_TOL};
use latlab_core::{DomainSpec, Scale};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig, ScaleChoice};
use crate::error::CliError;
use crate::report::{Report, Table};

/// Denominator for rounding geometric grids to exact rationals.
const GRID_DENOM: u64 = 1000;
const QMC_POINTS: u64 = 1 << 20;
const DIRECTIONS_PER_CONE: usize = 12;
const ASYM_TOL: f64 = 0.1;
const SPACING_TOL: f64 = 0.02;

pub fn run_command(cfg: &RunConfig) -> Result<Report, CliError> {
    match cfg.command {
        Command::Validate => Ok(validate(cfg)),
        Command::Volume => Ok(volume(cfg)),
        Command::Count => count(cfg),
        Command::Sweep => sweep(cfg),
        Command::Fit => fit(cfg),
        Command::FourierDecay => fourier_decay(cfg),
        Command::AxisAsym => axis_asym(cfg),
        Command::CapsCheck => caps_check(cfg),
        Command::PoissonCheck => poisson_check(cfg),
        Command::FullReport => full_report(cfg),
    }
}

fn single(cfg: &RunConfig, default: Option<Scale>) -> Result<Scale, CliError> {
    match (&cfg.scale, default) {
        (ScaleChoice::Single(t), _) => Ok(*t),
        (ScaleChoice::Unset, Some(t)) => Ok(t),
        (ScaleChoice::Unset, None) => Err(CliError::Usage("this command needs --t".into())),
        (ScaleChoice::Range { .. }, _) => Err(CliError::Usage("this command takes --t, not a range".into())),
    }
}

fn range(cfg: &RunConfig, default: (f64, f64, usize)) -> Result<(f64, f64, usize), CliError> {
    match &cfg.scale {
        ScaleChoice::Range { t_min, t_max, steps } => Ok((t_min.to_f64(), t_max.to_f64(), steps.unwrap_or(default.2))),
        ScaleChoice::Unset => Ok(default),
        ScaleChoice::Single(_) => Err(CliError::Usage("this command takes --t-min/--t-max, not --t".into())),
    }
}

fn axes(cfg: &RunConfig) -> Vec<usize> {
    match cfg.axis {
        Some(a) => vec![a],
        None => (1..=cfg.spec.d()).collect(),
    }
}

fn verdict_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn relation(pass: bool) -> &'static str {
    if pass {
        "≤"
    } else {
        ">"
    }
}

fn spec_summary(spec: &DomainSpec) -> Value {
    let t = spec.table();
    json!({
        "spec": spec.to_raw(),
        "d": spec.d(),
        "nu": (0..spec.d()).map(|j| spec.nu(j)).collect::<Vec<_>>(),
        "eta": t.eta,
        "m": t.m_jl,
        "exponents": spec.predicted_exponents(),
        "volume": spec.volume(),
        "warnings": spec.warnings(),
    })
}

fn validate(cfg: &RunConfig) -> Report {
    let e = cfg.spec.predicted_exponents();
    Report {
        json: spec_summary(&cfg.spec),
        table: None,
        summary: format!("{}: valid {}, predicted remainder exponent {:.4}", cfg.spec_path.display(), cfg.spec, e.overall),
        pass: true,
    }
}

fn volume(cfg: &RunConfig) -> Report {
    let v = cfg.spec.volume();
    let estimate = qmc_volume(&cfg.spec, QMC_POINTS, cfg.seed);
    Report {
        json: json!({
            "volume": v,
            "qmc_estimate": estimate,
            "qmc_points": QMC_POINTS,
            "qmc_relative_error": (estimate - v).abs() / v,
            "seed": cfg.seed,
        }),
        table: None,
        summary: format!("{v:.6}"),
        pass: true,
    }
}

fn count(cfg: &RunConfig) -> Result<Report, CliError> {
    let t = single(cfg, None)?;
    let r = remainder(&cfg.spec, t);
    let summary = r.count.to_string();
    let json = serde_json::to_value(&r).expect("count serializes");
    let table = Table::from_rows(&["t", "count", "volume_term", "remainder"], &[&r]);
    Ok(Report { json, table: Some(table), summary, pass: true })
}

const SWEEP_FIELDS: [&str; 5] = ["t", "count", "volume_term", "remainder", "normalized"];

fn sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let (lo, hi, steps) = range(cfg, (1.0, 100.0, 100))?;
    let grid = geometric_grid(lo, hi, steps, GRID_DENOM)?;
    let e = cfg.spec.predicted_exponents().overall;
    let rows = sweep_remainder(&cfg.spec, &grid, e)?;
    let max_r = rows.iter().map(|r| r.remainder.abs()).fold(0.0, f64::max);
    let summary = format!("{} scales in [{lo}, {hi}], max |R| = {max_r:.6}", rows.len());
    Ok(Report {
        json: json!({ "reference_exponent": e, "rows": rows }),
        table: Some(Table::from_rows(&SWEEP_FIELDS, &rows)),
        summary,
        pass: true,
    })
}

fn fit_value(spec: &DomainSpec, lo: f64, hi: f64, steps: usize, tol: f64) -> Result<(Value, Table, String, bool), CliError> {
    let grid = geometric_grid(lo, hi, steps, GRID_DENOM)?;
    let report = spec.predicted_exponents();
    let rows = sweep_remainder(spec, &grid, report.overall)?;
    let fit = fit_growth_exponent(&rows, report.overall)?;
    let verdict = compare_exponents(fit.fitted_exponent, report.overall, tol);
    let summary = format!(
        "fitted {:.2} {} predicted {:.2} {}",
        fit.fitted_exponent,
        relation(verdict.pass),
        report.overall,
        verdict_word(verdict.pass)
    );
    let json = json!({ "fit": fit, "verdict": verdict, "tolerance": tol, "scales": rows.len() });
    Ok((json, Table::from_rows(&SWEEP_FIELDS, &rows), summary, verdict.pass))
}

fn fit(cfg: &RunConfig) -> Result<Report, CliError> {
    let (lo, hi, steps) = range(cfg, (2.0, 200.0, 400))?;
    let (json, table, summary, pass) = fit_value(&cfg.spec, lo, hi, steps, cfg.tol.unwrap_or(DEFAULT_EXPONENT_TOL))?;
    Ok(Report { json, table: Some(table), summary, pass })
}

#[derive(Serialize)]
struct AxisRow<'a, T: Serialize> {
    axis: usize,
    #[serde(flatten)]
    row: &'a T,
}

fn decay_value(cfg: &RunConfig, ts: &[f64], directions: usize, tol: f64) -> Result<(Value, Table, String, bool), CliError> {
    let spec = &cfg.spec;
    let eps0 = default_eps0(spec.d());
    let cache = ProfileCache::new(spec, ProfileOptions::for_dimension(spec.d()).with_seed(cfg.seed));
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut pass = true;
    for axis in axes(cfg) {
        let dirs = cone_grid(spec.d(), axis, directions, eps0);
        let rep = decay_check(spec, axis, &dirs, ts, eps0, &cache)?;
        worst = worst.max(rep.top_decade_slope);
        pass &= rep.top_decade_slope <= tol;
        summaries.push(json!({
            "axis": axis,
            "max_ratio": rep.max_ratio,
            "top_decade_slope": rep.top_decade_slope,
            "pass": rep.top_decade_slope <= tol,
        }));
        for r in &rep.rows {
            rows.push(serde_json::to_value(AxisRow { axis, row: r }).expect("row serializes"));
        }
    }
    let summary = format!("decay-ratio slope {worst:.4} {} {tol} {}", relation(pass), verdict_word(pass));
    let table = Table::from_rows(&["axis", "xi", "t", "re", "im", "error", "envelope", "bound", "ratio"], &rows);
    Ok((json!({ "cones": summaries, "tolerance": tol, "rows": rows }), table, summary, pass))
}

fn fourier_decay(cfg: &RunConfig) -> Result<Report, CliError> {
    let (lo, hi, steps) = range(cfg, (1.0, 1000.0, 30))?;
    let ts = log_grid(lo, hi, steps);
    let (json, table, summary, pass) = decay_value(cfg, &ts, DIRECTIONS_PER_CONE, cfg.tol.unwrap_or(TREND_TOL))?;
    Ok(Report { json, table: Some(table), summary, pass })
}

fn asym_value(spec: &DomainSpec, axis: usize, lo: f64, hi: f64, steps: usize, tol: f64) -> Result<(Value, String, bool), CliError> {
    let a = axis_asymptotics(spec, axis, lo, hi, steps, 100.0, 10.0)?;
    let pass = (a.fitted_exponent - a.predicted_exponent).abs() <= tol && a.zero_spacing_rel_error <= SPACING_TOL;
    let summary = format!(
        "axis {axis}: envelope exponent {:.3} vs {:.3}, zero spacing {:.5} {}",
        a.fitted_exponent,
        a.predicted_exponent,
        a.zero_spacing,
        verdict_word(pass)
    );
    Ok((json!({ "asymptotics": a, "tolerance": tol, "pass": pass }), summary, pass))
}

fn axis_asym(cfg: &RunConfig) -> Result<Report, CliError> {
    let (lo, hi, steps) = range(cfg, (10.0, 1000.0, 40))?;
    let (json, summary, pass) = asym_value(&cfg.spec, cfg.axis.unwrap_or(1), lo, hi, steps, cfg.tol.unwrap_or(ASYM_TOL))?;
    Ok(Report { json, table: None, summary, pass })
}

fn caps_value(cfg: &RunConfig, ts: &[f64], directions: usize, tol: f64) -> Result<(Value, Table, String, bool), CliError> {
    let spec = &cfg.spec;
    let eps0 = default_eps0(spec.d());
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut pass = true;
    for axis in axes(cfg) {
        let dirs = cone_grid(spec.d(), axis, directions, eps0);
        let rep = lemma1_check(spec, axis, &dirs, ts, eps0)?;
        worst = worst.max(rep.measure_slope).max(rep.extent_slope);
        pass &= rep.measure_slope <= tol && rep.extent_slope <= tol;
        summaries.push(json!({
            "axis": axis,
            "measure_slope": rep.measure_slope,
            "extent_slope": rep.extent_slope,
            "max_ratio": rep.max_ratio,
            "pass": rep.measure_slope <= tol && rep.extent_slope <= tol,
        }));
        for r in &rep.rows {
            rows.push(serde_json::to_value(AxisRow { axis, row: r }).expect("row serializes"));
        }
    }
    let summary = format!("cap-ratio slope {worst:.4} {} {tol} {}", relation(pass), verdict_word(pass));
    let table = Table::from_rows(
        &["axis", "xi", "t", "delta", "support_point", "extents", "measure", "bound", "ratio", "extent_ratios"],
        &rows,
    );
    Ok((json!({ "cones": summaries, "tolerance": tol, "rows": rows }), table, summary, pass))
}

fn caps_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let (lo, hi, steps) = range(cfg, (10.0, 1e4, 13))?;
    let ts = log_grid(lo, hi, steps);
    let (json, table, summary, pass) = caps_value(cfg, &ts, 6, cfg.tol.unwrap_or(TREND_TOL))?;
    Ok(Report { json, table: Some(table), summary, pass })
}

fn poisson_value(cfg: &RunConfig, t: Scale) -> Result<(Value, String, bool), CliError> {
    let spec = &cfg.spec;
    if spec.d() != 3 {
        return Err(CliError::Usage(format!("poisson-check is limited to d = 3, spec has d = {}", spec.d())));
    }
    if t.to_f64() < 2.0 {
        return Err(CliError::Usage(format!("poisson-check needs t >= 2, got {t}")));
    }
    let rho = Mollifier::for_domain(spec, DEFAULT_ORDER)?;
    let cache = ProfileCache::new(spec, ProfileOptions::for_dimension(3).with_seed(cfg.seed));
    let v = sandwich_check(spec, t, &rho, DEFAULT_CUTOFF, &cache, None)?;
    let summary = format!(
        "{:.4} ≤ {} ≤ {:.4}, poisson gap {:.3e} (tail {:.3e}) {}",
        v.rhs_minus,
        v.exact,
        v.rhs_plus,
        v.poisson_gap,
        v.tail_bound,
        verdict_word(v.pass)
    );
    let pass = v.pass;
    Ok((serde_json::to_value(v).expect("verdict serializes"), summary, pass))
}

fn poisson_check(cfg: &RunConfig) -> Result<Report, CliError> {
    let t = single(cfg, Some(Scale::integer(4)))?;
    let (json, summary, pass) = poisson_value(cfg, t)?;
    Ok(Report { json, table: None, summary, pass })
}

fn full_report(cfg: &RunConfig) -> Result<Report, CliError> {
    if !matches!(cfg.scale, ScaleChoice::Unset) {
        return Err(CliError::Usage("full-report uses fixed scale ranges; drop the scale flags".into()));
    }
    let spec = &cfg.spec;
    let mut sections = serde_json::Map::new();
    let mut lines = Vec::new();
    let mut pass = true;
    sections.insert("spec".into(), spec_summary(spec));
    sections.insert("volume".into(), volume(cfg).json);

    let (fit, _, s, ok) = fit_value(spec, 2.0, 100.0, 200, cfg.tol.unwrap_or(DEFAULT_EXPONENT_TOL))?;
    sections.insert("fit".into(), fit);
    lines.push(s);
    pass &= ok;

    let (mut decay, _, s, ok) = decay_value(cfg, &log_grid(1.0, 1000.0, 16), 6, TREND_TOL)?;
    if let Value::Object(o) = &mut decay {
        o.remove("rows");
    }
    sections.insert("fourier_decay".into(), decay);
    lines.push(s);
    pass &= ok;

    let axis = cfg.axis.unwrap_or(1);
    let (asym, s, ok) = asym_value(spec, axis, 10.0, 1000.0, 40, ASYM_TOL)?;
    sections.insert("axis_asymptotics".into(), asym);
    lines.push(s);
    pass &= ok;

    let (mut caps, _, s, ok) = caps_value(cfg, &log_grid(10.0, 1e4, 7), 4, TREND_TOL)?;
    if let Value::Object(o) = &mut caps {
        o.remove("rows");
    }
    sections.insert("caps".into(), caps);
    lines.push(s);
    pass &= ok;

    if spec.d() == 3 {
        let (p, s, ok) = poisson_value(cfg, Scale::integer(4))?;
        sections.insert("poisson".into(), p);
        lines.push(s);
        pass &= ok;
    }
    sections.insert("pass".into(), Value::Bool(pass));
    Ok(Report { json: Value::Object(sections), table: None, summary: lines.join("\n"), pass })
}
