//! End-to-end conformance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use latlab_core::caps::{cap_measure, default_eps0, lemma1_check};
use latlab_core::corpus::{by_name, corpus};
use latlab_core::counter::brute_force_count;
use latlab_core::fourier::{
    axis_asymptotics, ball3_transform, cone_grid, decay_check, log_grid, ProfileCache, ProfileOptions, SliceProfile,
};
use latlab_core::poisson::{sandwich_check, Mollifier, DEFAULT_CUTOFF, DEFAULT_ORDER};
use latlab_core::qmc::qmc_volume;
use latlab_core::remainder::{fit_growth_exponent, geometric_grid, omega_scan, sweep_remainder};
use latlab_core::{count_lattice_points, DomainSpec, Scale};

const COUNT_BUDGET_S: f64 = 60.0;
const VOLUME_REL_TOL: f64 = 1e-3;
const BALL_VOLUME_TOL: f64 = 1e-12;
const QMC_POINTS: u64 = 10_000_000;
const EXPONENT_TOL: f64 = 0.15;
const BALL_FT_TOL: f64 = 1e-6;
const ZERO_FREQ_REL_TOL: f64 = 1e-8;
const TREND_TOL: f64 = 0.05;
const ASYM_TOL: f64 = 0.1;
const SPACING_TOL: f64 = 0.02;
const BALL_CAP_REL_TOL: f64 = 1e-3;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn named(name: &str) -> DomainSpec {
    by_name(name).expect("corpus name").spec
}

fn counting() -> Outcome {
    let start = Instant::now();
    let mut cases = 0;
    let mut mismatches = Vec::new();
    for ns in corpus().into_iter().filter(|s| s.spec.d() <= 4) {
        for half in 1..=20u64 {
            let t = Scale::new(half, 2).unwrap();
            cases += 1;
            if count_lattice_points(&ns.spec, t) != brute_force_count(&ns.spec, t).unwrap() {
                mismatches.push(format!("{} t={t}", ns.name));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches.is_empty() && secs <= COUNT_BUDGET_S,
        format!("{cases} cases, {} mismatches {:?}, {secs:.1} s (budget {COUNT_BUDGET_S} s)", mismatches.len(), mismatches),
    )
}

fn volumes() -> Outcome {
    let ball_err = (named("ball3").volume() - 4.0 * std::f64::consts::PI / 3.0).abs();
    let mut worst = (0.0f64, "");
    for ns in corpus() {
        let v = ns.spec.volume();
        let rel = (qmc_volume(&ns.spec, QMC_POINTS, 7) - v).abs() / v;
        if rel > worst.0 {
            worst = (rel, ns.name);
        }
    }
    outcome(
        ball_err <= BALL_VOLUME_TOL && worst.0 <= VOLUME_REL_TOL,
        format!("ball |vol - 4π/3| = {ball_err:.1e}; worst QMC relative error {:.2e} ({}) ≤ {VOLUME_REL_TOL}", worst.0, worst.1),
    )
}

fn growth_exponents() -> Outcome {
    let grid = geometric_grid(2.0, 300.0, 600, 20).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["ss4_d3", "ss6_d3", "ss8_d3", "kn"] {
        let spec = named(name);
        let predicted = spec.predicted_exponents().overall;
        let rows = sweep_remainder(&spec, &grid, predicted).unwrap();
        let fit = fit_growth_exponent(&rows, predicted).unwrap();
        pass &= fit.fitted_exponent <= predicted + EXPONENT_TOL;
        parts.push(format!("{name} {:.3}/{predicted:.3}", fit.fitted_exponent));
    }
    outcome(pass, format!("fitted/predicted over {} scales in [2, 300], tol {EXPONENT_TOL}: {}", grid.len(), parts.join(", ")))
}

fn omega_evidence() -> Outcome {
    let spec = named("ss8_d3");
    let windows: Vec<(Scale, Scale)> =
        (0..5).map(|i| (Scale::integer(50 + 2 * i), Scale::integer(51 + 2 * i))).collect();
    let ev = omega_scan(&spec, 1, &windows, Scale::new(1, 20).unwrap()).unwrap();
    let sups: Vec<String> = ev.windows.iter().map(|w| format!("{:.3}", w.sup)).collect();
    outcome(
        ev.windows.iter().all(|w| w.sup > 0.0) && !ev.inconclusive,
        format!("sup |R|/t^{:.3} per window: [{}]", ev.exponent, sups.join(", ")),
    )
}

fn fourier_oracle() -> Outcome {
    let ball = named("ball3");
    let profile = SliceProfile::build(&ball, &[0.6, 0.0, 0.8], &ProfileOptions::for_dimension(3)).unwrap();
    let ball_err = log_grid(0.5, 50.0, 200)
        .iter()
        .map(|&t| {
            let v = profile.transform(t);
            (v.re - ball3_transform(t)).abs().max(v.im.abs())
        })
        .fold(0.0, f64::max);
    let mut worst_axis = 0.0f64;
    let mut generic_ok = true;
    let mut generic_worst = 0.0f64;
    for ns in corpus() {
        let d = ns.spec.d();
        let v = ns.spec.volume();
        let mut axis = vec![0.0; d];
        axis[0] = 1.0;
        let a = SliceProfile::build(&ns.spec, &axis, &ProfileOptions::for_dimension(d)).unwrap().transform(0.0);
        worst_axis = worst_axis.max((a.re - v).abs() / v);
        let diag: Vec<f64> = (0..d).map(|l| 1.0 + 0.25 * l as f64).collect();
        let g = SliceProfile::build(&ns.spec, &diag, &ProfileOptions::for_dimension(d)).unwrap().transform(0.0);
        // generic slices use sphere nodes; their own error estimate is the tolerance
        generic_ok &= (g.re - v).abs() <= (3.0 * g.error).max(1e-9 * v);
        generic_worst = generic_worst.max((g.re - v).abs() / v);
    }
    outcome(
        ball_err <= BALL_FT_TOL && worst_axis <= ZERO_FREQ_REL_TOL && generic_ok,
        format!(
            "ball max error {ball_err:.1e} on [0.5, 50]; χ̂(0) vs vol: axis rel {worst_axis:.1e}, generic rel {generic_worst:.1e} within estimate: {generic_ok}"
        ),
    )
}

fn decay_conformance() -> Outcome {
    let ts = log_grid(1.0, 1000.0, 30);
    let mut worst = (f64::NEG_INFINITY, String::new());
    let mut pass = true;
    for ns in corpus() {
        let d = ns.spec.d();
        let eps0 = default_eps0(d);
        let cache = ProfileCache::new(&ns.spec, ProfileOptions::for_dimension(d));
        for axis in 1..=d {
            let dirs = cone_grid(d, axis, 12, eps0);
            let rep = decay_check(&ns.spec, axis, &dirs, &ts, eps0, &cache).unwrap();
            pass &= rep.top_decade_slope <= TREND_TOL;
            if !(rep.top_decade_slope <= worst.0) {
                worst = (rep.top_decade_slope, format!("{} cone {axis}", ns.name));
            }
        }
    }
    outcome(pass, format!("worst top-decade slope {:.4} ({}) ≤ {TREND_TOL}", worst.0, worst.1))
}

fn axis_expansion() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["ball3", "ss4_d3", "kn"] {
        let a = axis_asymptotics(&named(name), 1, 10.0, 1000.0, 40, 100.0, 10.0).unwrap();
        pass &= (a.fitted_exponent - a.predicted_exponent).abs() <= ASYM_TOL && a.zero_spacing_rel_error <= SPACING_TOL;
        parts.push(format!(
            "{name} {:.3}/{:.3} spacing {:.5}",
            a.fitted_exponent, a.predicted_exponent, a.zero_spacing
        ));
    }
    outcome(pass, format!("exponent tol {ASYM_TOL}, spacing tol {SPACING_TOL}: {}", parts.join(", ")))
}

fn cap_conformance() -> Outcome {
    let ts = log_grid(10.0, 1e4, 13);
    let mut pass = true;
    let mut worst = (f64::NEG_INFINITY, String::new());
    let mut run = |name: &str, axes: &[usize], directions: usize| {
        let spec = named(name);
        let eps0 = default_eps0(spec.d());
        for &axis in axes {
            let dirs = cone_grid(spec.d(), axis, directions, eps0);
            let rep = lemma1_check(&spec, axis, &dirs, &ts, eps0).unwrap();
            let slope = rep.measure_slope.max(rep.extent_slope);
            pass &= rep.measure_slope <= TREND_TOL && rep.extent_slope <= TREND_TOL;
            if !(slope <= worst.0) {
                worst = (slope, format!("{name} cone {axis}"));
            }
        }
    };
    for name in ["ball3", "ss4_d3", "ss6_d3", "ss8_d3", "kn"] {
        run(name, &[1, 2, 3], 6);
    }
    run("ss4_d4", &[1], 4);
    let ball = named("ball3");
    let n = [0.0, 0.6, 0.8];
    let cap_err = [0.1, 0.01, 0.001]
        .iter()
        .map(|&delta| (cap_measure(&ball, &n, delta).unwrap() - 2.0 * std::f64::consts::PI * delta).abs() / (2.0 * std::f64::consts::PI * delta))
        .fold(0.0, f64::max);
    let pass = pass && cap_err <= BALL_CAP_REL_TOL;
    outcome(
        pass,
        format!("worst trend slope {:.4} ({}) ≤ {TREND_TOL}; ball cap vs 2πδ rel {cap_err:.1e}", worst.0, worst.1),
    )
}

fn poisson_cross_check() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut worst = (0.0f64, String::new());
    let mut failures = Vec::new();
    for ns in corpus().into_iter().filter(|s| s.spec.d() == 3) {
        let rho = Mollifier::for_domain(&ns.spec, DEFAULT_ORDER).unwrap();
        let cache = ProfileCache::new(&ns.spec, ProfileOptions::for_dimension(3));
        for t in 2..=4 {
            let v = sandwich_check(&ns.spec, Scale::integer(t), &rho, DEFAULT_CUTOFF, &cache, None).unwrap();
            if !v.pass {
                failures.push(format!("{} t={t}", ns.name));
            }
            pass &= v.pass;
            let used = v.poisson_gap / (v.tail_bound + v.quadrature_error);
            if used > worst.0 {
                worst = (used, format!("{} t={t}", ns.name));
            }
        }
    }
    outcome(
        pass,
        format!(
            "sandwich and |smoothed - poisson| ≤ tail + quadrature at t ∈ {{2,3,4}}, K = {DEFAULT_CUTOFF}; largest gap/allowance {:.2} ({}); failures {:?}; {:.0} s",
            worst.0,
            worst.1,
            failures,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("latlab-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let spec = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs").join("ball.json");
    let run = |args: &[&str], out: &str, threads: &str| -> Vec<u8> {
        let path = dir.join(out);
        let status = Command::new(env!("CARGO_BIN_EXE_latlab"))
            .args(args)
            .args(["--spec", spec.to_str().unwrap(), "--seed", "11", "--threads", threads, "--out", path.to_str().unwrap()])
            .output()
            .expect("binary runs")
            .status;
        assert!(status.code().is_some_and(|c| c <= 1), "{args:?} exited with {status}");
        std::fs::read(path).unwrap_or_default()
    };
    let mut pass = true;
    let mut checked = Vec::new();
    for (args, out) in [
        (vec!["full-report"], "full.json"),
        (vec!["sweep", "--t-min", "1", "--t-max", "60", "--t-steps", "80"], "sweep.csv"),
        (vec!["volume"], "volume.json"),
    ] {
        let a = run(&args, &format!("1-{out}"), "1");
        let b = run(&args, &format!("8-{out}"), "8");
        pass &= !a.is_empty() && a == b;
        checked.push(format!("{} ({} bytes)", args[0], a.len()));
    }
    std::fs::remove_dir_all(&dir).ok();
    outcome(pass, format!("byte-identical at threads 1 and 8: {}", checked.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("counting correctness", counting),
        ("volume correctness", volumes),
        ("remainder growth exponents", growth_exponents),
        ("omega evidence", omega_evidence),
        ("fourier oracle", fourier_oracle),
        ("fourier decay conformance", decay_conformance),
        ("axis asymptotics", axis_expansion),
        ("cap conformance", cap_conformance),
        ("poisson cross-validation", poisson_cross_check),
        ("determinism", determinism),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        println!(
            "criterion {n:>2} {:<28} {}  {} [{:.1} s]",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
