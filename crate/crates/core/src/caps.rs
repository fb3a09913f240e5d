//! Normal points, boundary caps and their extents and surface measures.
//!
//! The normal point `x(ξ)` maximizes `⟨x, ξ⟩` over `D`. A cap of depth `δ`
//! is `{y ∈ ∂D : ⟨x(ξ) - y, n⟩ < δ}` with `n = ξ/|ξ|`.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::qmc::sphere_nodes;
use crate::quadrature::GaussLegendre;
use crate::roots::newton_bracketed;
use crate::special::sphere_area;
use crate::stats::top_decade_slope;

fn normalize(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::ZeroDirection);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bisection on an increasing function of `ln x`, returning `ln x` at the
/// sign change. The bracket is grown until it straddles the root.
fn log_bisect<F: FnMut(f64) -> f64>(mut f: F, start: f64) -> f64 {
    let (mut lo, mut hi) = (start - 1.0, start + 1.0);
    while f(lo) > 0.0 {
        hi = lo;
        lo -= 2.0 * (hi - lo).max(1.0);
    }
    while f(hi) <= 0.0 {
        lo = hi;
        hi += 2.0 * (hi - lo).max(1.0);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The maximizer of `⟨x, ξ⟩` over `D`.
///
/// On a block with multiplier `μ` the stationarity conditions give
/// `x_l = (μ|ξ_l|/ω_l)^{1/(ω_l-1)}`; the block multiplier solves
/// `μ m S(μ)^{m-1} = λ` and `λ` is fixed by `Σ_p S_p^{m_p} = 1`. Every map
/// involved is monotone, so both levels are solved by bisection in log
/// space. Zero components of `ξ` give exact zeros.
pub fn support_point(spec: &DomainSpec, xi: &[f64]) -> Result<Vec<f64>> {
    if xi.len() != spec.d() {
        return Err(Error::IndexOutOfRange { index: xi.len(), d: spec.d() });
    }
    let n = normalize(xi)?;
    let blocks = spec.blocks();
    // ln S_p as a function of ln μ: ln Σ_l exp(k_l ln μ + c_l)
    let terms: Vec<Vec<(f64, f64)>> = blocks
        .iter()
        .map(|b| {
            b.omegas
                .iter()
                .zip(&n[b.start..])
                .filter(|(_, x)| **x != 0.0)
                .map(|(&w, x)| {
                    let w = w as f64;
                    let k = w / (w - 1.0);
                    (k, k * (x.abs() / w).ln())
                })
                .collect()
        })
        .collect();
    let ln_s = |p: usize, ln_mu: f64| -> f64 {
        let t = &terms[p];
        let top = t.iter().map(|(k, c)| k * ln_mu + c).fold(f64::NEG_INFINITY, f64::max);
        top + t.iter().map(|(k, c)| (k * ln_mu + c - top).exp()).sum::<f64>().ln()
    };
    let block_mu = |p: usize, ln_lambda: f64| -> f64 {
        let m = blocks[p].m;
        if m == 1 {
            return ln_lambda;
        }
        let mf = m as f64;
        log_bisect(|lm| lm + mf.ln() + (mf - 1.0) * ln_s(p, lm) - ln_lambda, ln_lambda / (2.0 * mf - 1.0))
    };
    let active: Vec<usize> = (0..blocks.len()).filter(|&p| !terms[p].is_empty()).collect();
    let ln_total = |ln_lambda: f64| -> f64 {
        let parts: Vec<f64> =
            active.iter().map(|&p| blocks[p].m as f64 * ln_s(p, block_mu(p, ln_lambda))).collect();
        let top = parts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + parts.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
    };
    let ln_lambda = log_bisect(ln_total, 0.0);
    let mut x = vec![0.0; spec.d()];
    for &p in &active {
        let ln_mu = block_mu(p, ln_lambda);
        let b = &blocks[p];
        for (k, &w) in b.omegas.iter().enumerate() {
            let l = b.start + k;
            if n[l] != 0.0 {
                let w = w as f64;
                x[l] = n[l].signum() * ((ln_mu + (n[l].abs() / w).ln()) / (w - 1.0)).exp();
            }
        }
    }
    Ok(x)
}

/// Support function `h_D(v) = max_{x∈D} ⟨x, v⟩`.
pub fn support_value(spec: &DomainSpec, v: &[f64]) -> Result<f64> {
    if v.iter().all(|x| *x == 0.0) {
        return Ok(0.0);
    }
    Ok(dot(&support_point(spec, v)?, v))
}

/// KKT residuals of a support point: `(|F(x)|, angle between ∇F(x) and ξ)`.
pub fn support_residuals(spec: &DomainSpec, xi: &[f64], x: &[f64]) -> (f64, f64) {
    let g = spec.grad_f(x);
    let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let cos = (dot(&g, xi) / (gn * xn)).clamp(-1.0, 1.0);
    // angle from the sine for accuracy near zero
    let sin2: f64 = g
        .iter()
        .zip(xi)
        .map(|(a, b)| {
            let r = a / gn - b / xn;
            r * r
        })
        .sum::<f64>();
    let angle = if cos > 0.0 { 2.0 * (0.5 * sin2.sqrt()).asin() } else { cos.acos() };
    (spec.eval_f(x).abs(), angle)
}

/// Orthonormal basis of `n^⊥` (rows), from the Householder reflection that
/// sends the coordinate axis closest to `n` onto `n`.
pub fn orthogonal_basis(n: &[f64]) -> Vec<Vec<f64>> {
    let d = n.len();
    let k = (0..d).max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap();
    let sign = if n[k] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = n.to_vec();
    v[k] += sign;
    let vv = dot(&v, &v);
    (0..d)
        .filter(|&i| i != k)
        .map(|i| (0..d).map(|r| if r == i { 1.0 } else { 0.0 } - 2.0 * v[r] * v[i] / vv).collect())
        .collect()
}

fn check_depth(h: f64, delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::CapTooLarge { delta, reason: "depth must be positive".into() });
    }
    if delta >= h {
        return Err(Error::CapTooLarge { delta, reason: format!("reaches the central hyperplane (support value {h})") });
    }
    Ok(())
}

/// `max ⟨y, e⟩` over `D ∩ {⟨y, n⟩ ≥ c}` by duality:
/// `min_{μ≥0} h_D(e + μn) - μc`, minimized where `⟨x(e + μn), n⟩ = c`.
fn constrained_max(spec: &DomainSpec, e: &[f64], n: &[f64], c: f64) -> Result<f64> {
    let v = |mu: f64| -> Vec<f64> { e.iter().zip(n).map(|(a, b)| a + mu * b).collect() };
    let slope = |mu: f64| -> Result<f64> {
        let w = v(mu);
        if w.iter().all(|x| x.abs() < 1e-300) {
            return Ok(0.0);
        }
        Ok(dot(&support_point(spec, &w)?, n) - c)
    };
    if slope(0.0)? >= 0.0 {
        return support_value(spec, e);
    }
    let mut err = None;
    let ln_mu = log_bisect(
        |lm| match slope(lm.exp()) {
            Ok(s) => s,
            Err(e) => {
                err = Some(e);
                1.0
            }
        },
        0.0,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let mu = ln_mu.exp();
    Ok(support_value(spec, &v(mu))? - mu * c)
}

/// Per-coordinate `max |y_l - a_l|` over the cap of depth `delta`.
pub fn cap_extents(spec: &DomainSpec, xi: &[f64], delta: f64) -> Result<Vec<f64>> {
    let n = normalize(xi)?;
    let a = support_point(spec, &n)?;
    let h = dot(&a, &n);
    check_depth(h, delta)?;
    let c = h - delta;
    (0..spec.d())
        .into_par_iter()
        .map(|l| {
            let mut e = vec![0.0; spec.d()];
            e[l] = 1.0;
            let up = constrained_max(spec, &e, &n, c)?;
            e[l] = -1.0;
            let down = constrained_max(spec, &e, &n, c)?;
            Ok((up - a[l]).max(down + a[l]).max(0.0))
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct CapQuadrature {
    /// Angular nodes on the unit sphere of the tangent plane.
    pub angular_nodes: usize,
    pub radial_nodes: usize,
    pub seed: u64,
}

impl CapQuadrature {
    pub fn for_dimension(d: usize) -> Self {
        let angular_nodes = match d {
            2 => 2,
            3 => 256,
            4 => 2048,
            _ => 4096,
        };
        Self { angular_nodes, radial_nodes: 24, seed: 0x5eed }
    }
}

/// Surface measure of the cap of depth `delta`.
///
/// The cap is the graph `z ↦ a + z - g(z) n` over the region `{g < δ}` of
/// the tangent plane, which is star-shaped about the origin with radial
/// extent `R(θ)` = exit distance from `a - δn` along `θ`. The area element is
/// `|∇F| / ⟨∇F, n⟩`.
pub fn cap_measure(spec: &DomainSpec, xi: &[f64], delta: f64) -> Result<f64> {
    cap_measure_with(spec, xi, delta, CapQuadrature::for_dimension(spec.d()))
}

pub fn cap_measure_with(spec: &DomainSpec, xi: &[f64], delta: f64, quad: CapQuadrature) -> Result<f64> {
    let d = spec.d();
    let n = normalize(xi)?;
    let a = support_point(spec, &n)?;
    let h = dot(&a, &n);
    check_depth(h, delta)?;
    let basis = orthogonal_basis(&n);
    let k = d - 1;
    let nodes = sphere_nodes(k, quad.angular_nodes, quad.seed);
    let gl = GaussLegendre::new(quad.radial_nodes);
    let base: Vec<f64> = a.iter().zip(&n).map(|(x, v)| x - delta * v).collect();
    let sums: Vec<Result<f64>> = nodes
        .par_chunks(k)
        .map(|u| {
            let mut theta = vec![0.0; d];
            for (ui, b) in u.iter().zip(&basis) {
                for (t, bv) in theta.iter_mut().zip(b) {
                    *t += ui * bv;
                }
            }
            let (mut p, mut g) = (vec![0.0; d], vec![0.0; d]);
            let r_max = spec.ray_exit_with(&base, &theta, &mut p, &mut g);
            // rim must lie on the part of the boundary facing n
            let rim: Vec<f64> = base.iter().zip(&theta).map(|(b, t)| b + r_max * t).collect();
            spec.grad_f_into(&rim, &mut g);
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if dot(&g, &n) <= 1e-9 * gn {
                return Err(Error::CapTooLarge { delta, reason: "cap extends past the silhouette".into() });
            }
            let mut acc = 0.0;
            let mut y = vec![0.0; d];
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                let r = 0.5 * r_max * (1.0 + x);
                let top: Vec<f64> = a.iter().zip(&theta).map(|(ai, t)| ai + r * t).collect();
                let depth = newton_bracketed(
                    |s| {
                        for ((yi, ti), ni) in y.iter_mut().zip(&top).zip(&n) {
                            *yi = ti - s * ni;
                        }
                        spec.grad_f_into(&y, &mut g);
                        (-spec.eval_f(&y), dot(&g, &n))
                    },
                    0.0,
                    delta,
                    1e-15,
                );
                for ((yi, ti), ni) in y.iter_mut().zip(&top).zip(&n) {
                    *yi = ti - depth * ni;
                }
                spec.grad_f_into(&y, &mut g);
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let jac = gn / dot(&g, &n);
                acc += w * jac * r.powi(k as i32 - 1);
            }
            Ok(acc * 0.5 * r_max)
        })
        .collect();
    let mut total = 0.0;
    for s in sums {
        total += s?;
    }
    Ok(total * sphere_area(k - 1) / quad.angular_nodes as f64)
}

pub fn default_eps0(d: usize) -> f64 {
    (2.0 * d as f64).powf(-0.5)
}

/// `min{t^{-1/(mω)}, t^{-1/2} |u|^{-(mω-2)/(2(mω-1))}}` for one coordinate,
/// where `u` is the normalized direction component.
pub fn coordinate_factor(contact: u32, u: f64, t: f64) -> f64 {
    let k = contact as f64;
    let first = t.powf(-1.0 / k);
    if u == 0.0 {
        return first;
    }
    let second = t.powf(-0.5) * u.abs().powf(-(k - 2.0) / (2.0 * (k - 1.0)));
    first.min(second)
}

/// Normalized direction and a check that it lies in the cone of axis `j`
/// (0-based).
pub fn cone_direction(spec: &DomainSpec, j: usize, xi: &[f64], eps0: f64) -> Result<Vec<f64>> {
    if j >= spec.d() {
        return Err(Error::IndexOutOfRange { index: j + 1, d: spec.d() });
    }
    let n = normalize(xi)?;
    if n[j].abs() < eps0 {
        return Err(Error::OutsideCone { axis: j + 1, ratio: n[j].abs(), eps0 });
    }
    Ok(n)
}

/// `Π_{l≠j} coordinate_factor(m_{j,l} ω_l, ξ_l/|ξ|, t)` for 0-based `j`.
pub fn lemma_bound(spec: &DomainSpec, j: usize, n: &[f64], t: f64) -> f64 {
    (0..spec.d())
        .filter(|&l| l != j)
        .map(|l| coordinate_factor(spec.table().contact_order(j, l, spec.omegas()), n[l], t))
        .product()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapStats {
    pub xi: Vec<f64>,
    pub t: f64,
    pub delta: f64,
    pub support_point: Vec<f64>,
    pub extents: Vec<f64>,
    pub measure: f64,
    pub bound: f64,
    pub ratio: f64,
    /// `extent_l / coordinate_factor_l` for `l ≠ j` (0 at `l = j`).
    pub extent_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    /// 1-based axis.
    pub axis: usize,
    pub rows: Vec<CapStats>,
    pub measure_slope: f64,
    pub extent_slope: f64,
    pub max_ratio: f64,
    pub pass: bool,
}

pub const TREND_TOL: f64 = 0.05;

/// Cap statistics at depth `1/t` for each direction and scale; `axis` is
/// 1-based. Passes when the per-scale maxima of the measure ratio and of the
/// extent ratios show no growth over the top decade.
pub fn lemma1_check(spec: &DomainSpec, axis: usize, xis: &[Vec<f64>], ts: &[f64], eps0: f64) -> Result<LemmaReport> {
    if axis == 0 || axis > spec.d() {
        return Err(Error::IndexOutOfRange { index: axis, d: spec.d() });
    }
    let j = axis - 1;
    let dirs: Vec<Vec<f64>> = xis.iter().map(|x| cone_direction(spec, j, x, eps0)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..dirs.len()).flat_map(|a| (0..ts.len()).map(move |b| (a, b))).collect();
    let rows: Vec<CapStats> = jobs
        .par_iter()
        .map(|&(a, b)| {
            let (n, t) = (&dirs[a], ts[b]);
            let delta = 1.0 / t;
            let extents = cap_extents(spec, n, delta)?;
            let measure = cap_measure(spec, n, delta)?;
            let bound = lemma_bound(spec, j, n, t);
            let extent_ratios = (0..spec.d())
                .map(|l| {
                    if l == j {
                        0.0
                    } else {
                        extents[l] / coordinate_factor(spec.table().contact_order(j, l, spec.omegas()), n[l], t)
                    }
                })
                .collect();
            Ok(CapStats {
                xi: n.clone(),
                t,
                delta,
                support_point: support_point(spec, n)?,
                extents,
                measure,
                bound,
                ratio: measure / bound,
                extent_ratios,
            })
        })
        .collect::<Result<_>>()?;
    let per_t = |f: &dyn Fn(&CapStats) -> f64| -> Vec<f64> {
        ts.iter()
            .map(|&t| rows.iter().filter(|r| r.t == t).map(f).fold(0.0, f64::max))
            .collect()
    };
    let measure_max = per_t(&|r| r.ratio);
    let extent_max = per_t(&|r| r.extent_ratios.iter().cloned().fold(0.0, f64::max));
    let measure_slope = top_decade_slope(ts, &measure_max).unwrap_or(f64::NAN);
    let extent_slope = top_decade_slope(ts, &extent_max).unwrap_or(f64::NAN);
    let max_ratio = measure_max.iter().cloned().fold(0.0, f64::max);
    let pass = measure_slope <= TREND_TOL && extent_slope <= TREND_TOL;
    Ok(LemmaReport { axis, rows, measure_slope, extent_slope, max_ratio, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::split_block;

    #[test]
    fn support_point_examples() {
        let ss4 = DomainSpec::supersphere(3, 4).unwrap();
        let x = support_point(&ss4, &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
        let x = support_point(&ss4, &[1.0, 1.0, 1.0]).unwrap();
        for v in &x {
            assert!((v - 3f64.powf(-0.25)).abs() < 1e-14);
        }
        let ball = DomainSpec::ball(3);
        let x = support_point(&ball, &[1.0, 1.0, 1.0]).unwrap();
        for v in &x {
            assert!((v - 3f64.powf(-0.5)).abs() < 1e-14);
        }
        let x = support_point(&split_block(2, 4), &[-1.0, 0.3, -2.0]).unwrap();
        let (f, angle) = support_residuals(&split_block(2, 4), &[-1.0, 0.3, -2.0], &x);
        assert!(f < 1e-12 && angle < 1e-10, "{f} {angle}");
        assert!(matches!(support_point(&ball, &[0.0, 0.0, 0.0]), Err(Error::ZeroDirection)));
    }

    #[test]
    fn basis_is_orthonormal() {
        let n = normalize(&[0.3, -0.5, 0.8, 0.1]).unwrap();
        let b = orthogonal_basis(&n);
        assert_eq!(b.len(), 3);
        for (i, u) in b.iter().enumerate() {
            assert!(dot(u, &n).abs() < 1e-15);
            for (k, v) in b.iter().enumerate() {
                let want = if i == k { 1.0 } else { 0.0 };
                assert!((dot(u, v) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn ball_cap_extent_and_measure() {
        let ball = DomainSpec::ball(3);
        let e = cap_extents(&ball, &[1.0, 0.0, 0.0], 0.02).unwrap();
        assert!((e[1] - (0.04f64 - 0.0004).sqrt()).abs() < 1e-9, "{e:?}");
        assert!((e[0] - 0.02).abs() < 1e-9);
        for delta in [0.01, 0.05, 0.1, 0.2] {
            let m = cap_measure(&ball, &[1.0, 0.0, 0.0], delta).unwrap();
            let want = 2.0 * std::f64::consts::PI * delta;
            assert!(((m - want) / want).abs() < 1e-3, "{delta}: {m}");
        }
        let m = cap_measure(&ball, &[1.0, 2.0, -0.5], 0.1).unwrap();
        assert!((m - 0.2 * std::f64::consts::PI).abs() < 1e-6);
        assert!(cap_measure(&ball, &[1.0, 0.0, 0.0], 1.5).is_err());
    }

    #[test]
    fn supersphere_axis_extent() {
        // Near e_1 the boundary is x_1 = (1 - x_2^4 - x_3^4)^{1/4} ≈ 1 - x_2^4/4,
        // so the extent in x_2 is about (4δ)^{1/4}.
        let ss4 = DomainSpec::supersphere(3, 4).unwrap();
        let delta = 1e-4;
        let e = cap_extents(&ss4, &[1.0, 0.0, 0.0], delta).unwrap();
        let exact = (1.0 - (1.0 - delta).powi(4)).powf(0.25);
        assert!((e[1] - exact).abs() < 1e-9, "{} vs {exact}", e[1]);
    }

    #[test]
    fn lemma_bound_examples() {
        let ball = DomainSpec::ball(3);
        let n = [1.0, 0.0, 0.0];
        assert!((lemma_bound(&ball, 0, &n, 100.0) - 0.01).abs() < 1e-15);
        let kn = split_block(2, 4);
        assert!((lemma_bound(&kn, 0, &n, 256.0) - 0.25).abs() < 1e-12);
        assert!(matches!(cone_direction(&kn, 0, &[0.1, 1.0, 1.0], default_eps0(3)), Err(Error::OutsideCone { .. })));
    }
}
