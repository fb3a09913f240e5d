//! Command-line and config-file ingestion.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use latlab_core::{DomainSpec, Scale};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check a spec and print its exponent table.
    Validate,
    /// Closed-form volume.
    Volume,
    /// Exact lattice count at one scale.
    Count,
    /// Remainders over a geometric scale grid.
    Sweep,
    /// Sweep plus growth-exponent fit against the predicted bound.
    Fit,
    /// Transform decay against the product bound, per cone.
    FourierDecay,
    /// Axis envelope exponent and zero spacing.
    AxisAsym,
    /// Cap measures and extents against their bounds.
    CapsCheck,
    /// Mollifier sandwich and the Poisson identity.
    PoissonCheck,
    /// Every check in one JSON document.
    FullReport,
}

#[derive(Debug, Parser)]
#[command(name = "latlab", version, about = "Lattice points, Fourier decay and caps for finite-type domains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub spec: Option<PathBuf>,
    #[arg(long, global = true)]
    pub t: Option<String>,
    #[arg(long = "t-min", global = true)]
    pub t_min: Option<String>,
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<String>,
    #[arg(long = "t-steps", global = true)]
    pub t_steps: Option<usize>,
    /// 1-based axis.
    #[arg(long, global = true)]
    pub axis: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "LATLAB_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Output file; `.csv` selects CSV, anything else JSON.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file with defaults for any of the flags above.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    spec: Option<PathBuf>,
    t: Option<String>,
    t_min: Option<String>,
    t_max: Option<String>,
    t_steps: Option<usize>,
    axis: Option<usize>,
    seed: Option<u64>,
    threads: Option<usize>,
    tol: Option<f64>,
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScaleChoice {
    Unset,
    Single(Scale),
    Range { t_min: Scale, t_max: Scale, steps: Option<usize> },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub spec_path: PathBuf,
    pub spec: DomainSpec,
    pub scale: ScaleChoice,
    pub axis: Option<usize>,
    pub seed: u64,
    pub threads: usize,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20240917;

fn parse_scale(flag: &str, text: &str) -> Result<Scale, CliError> {
    text.parse().map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn resolve_scale(
    t: Option<String>,
    t_min: Option<String>,
    t_max: Option<String>,
    steps: Option<usize>,
) -> Result<ScaleChoice, CliError> {
    let ranged = t_min.is_some() || t_max.is_some() || steps.is_some();
    match (t, ranged) {
        (Some(_), true) => Err(CliError::ConflictingScale("--t cannot be combined with --t-min/--t-max/--t-steps".into())),
        (Some(t), false) => Ok(ScaleChoice::Single(parse_scale("t", &t)?)),
        (None, false) => Ok(ScaleChoice::Unset),
        (None, true) => {
            let (Some(lo), Some(hi)) = (t_min, t_max) else {
                return Err(CliError::ConflictingScale("--t-min and --t-max must be given together".into()));
            };
            let (t_min, t_max) = (parse_scale("t-min", &lo)?, parse_scale("t-max", &hi)?);
            if t_min >= t_max {
                return Err(CliError::ConflictingScale(format!("--t-min {t_min} is not below --t-max {t_max}")));
            }
            if steps == Some(0) {
                return Err(CliError::ConflictingScale("--t-steps must be positive".into()));
            }
            Ok(ScaleChoice::Range { t_min, t_max, steps })
        }
    }
}

pub fn load_spec(path: &Path) -> Result<DomainSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Spec { path: path.display().to_string(), reason: e.to_string() })?;
    DomainSpec::from_json(&text).map_err(|e| CliError::Spec { path: path.display().to_string(), reason: e.to_string() })
}

/// Merges flags over the optional config file; flags win. A scale given by
/// flags replaces the file's scale settings entirely.
pub fn load_config(cli: Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
            serde_json::from_str::<FileConfig>(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let flag_scale = cli.t.is_some() || cli.t_min.is_some() || cli.t_max.is_some() || cli.t_steps.is_some();
    let scale = if flag_scale {
        resolve_scale(cli.t, cli.t_min, cli.t_max, cli.t_steps)?
    } else {
        resolve_scale(file.t, file.t_min, file.t_max, file.t_steps)?
    };
    let spec_path = cli
        .spec
        .or(file.spec)
        .ok_or_else(|| CliError::Spec { path: "<none>".into(), reason: "no --spec given".into() })?;
    let spec = load_spec(&spec_path)?;
    let threads = cli.threads.or(file.threads).unwrap_or(1);
    if threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    let axis = cli.axis.or(file.axis);
    if let Some(a) = axis {
        if a == 0 || a > spec.d() {
            return Err(CliError::Usage(format!("--axis {a} outside 1..={}", spec.d())));
        }
    }
    Ok(RunConfig {
        command: cli.command,
        spec_path,
        spec,
        scale,
        axis,
        seed: cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        threads,
        tol: cli.tol.or(file.tol),
        out: cli.out.or(file.out),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &str) -> Option<String> {
        Some(v.to_string())
    }

    #[test]
    fn scale_forms() {
        assert_eq!(resolve_scale(s("2.5"), None, None, None).unwrap(), ScaleChoice::Single(Scale::new(5, 2).unwrap()));
        assert!(matches!(
            resolve_scale(None, s("1"), s("100"), Some(50)).unwrap(),
            ScaleChoice::Range { steps: Some(50), .. }
        ));
        assert!(matches!(resolve_scale(s("2"), s("1"), None, None), Err(CliError::ConflictingScale(_))));
        assert!(matches!(resolve_scale(None, s("5"), s("2"), None), Err(CliError::ConflictingScale(_))));
        assert!(matches!(resolve_scale(None, s("5"), None, None), Err(CliError::ConflictingScale(_))));
        assert!(matches!(resolve_scale(s("-1"), None, None, None), Err(CliError::Usage(_))));
    }
}
