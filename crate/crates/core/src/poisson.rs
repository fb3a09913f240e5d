//! Mollified lattice counts and the Poisson-summation identity
//! `Σ_k (χ_{tD} * ρ_ε)(k) = Σ_k χ̂_{tD}(k) ρ̂(εk)`, with the sandwich
//! `smoothed(t-ε) ≤ N(t) ≤ smoothed(t+ε)` that transfers it to sharp counts.

use rayon::prelude::*;
use serde::Serialize;

use crate::counter::{count_lattice_points, Scale};
use crate::domain::DomainSpec;
use crate::error::{Error, Result};
use crate::fourier::{theorem2_bound, ProfileCache};
use crate::caps::default_eps0;
use crate::quadrature::GaussLegendre;
use crate::special::sinc;

pub const DEFAULT_ORDER: u32 = 8;
pub const DEFAULT_CUTOFF: i64 = 8;

/// Centered cardinal B-spline of order `q` (support `[-q/2, q/2]`).
pub fn spline(q: u32, u: f64) -> f64 {
    let x = -u.abs() + q as f64 / 2.0;
    if x <= 0.0 {
        return 0.0;
    }
    // left half only, where few truncated powers are active
    let mut sum = 0.0;
    let mut binom = 1.0;
    for i in 0..=q {
        let a = x - i as f64;
        if a <= 0.0 {
            break;
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom * a.powi(q as i32 - 1);
        binom = binom * (q - i) as f64 / (i + 1) as f64;
    }
    sum / factorial(q - 1)
}

/// CDF of the centered B-spline of order `q`.
pub fn spline_cdf(q: u32, u: f64) -> f64 {
    if u > 0.0 {
        return 1.0 - spline_cdf(q, -u);
    }
    let x = u + q as f64 / 2.0;
    if x <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut binom = 1.0;
    for i in 0..=q {
        let a = x - i as f64;
        if a <= 0.0 {
            break;
        }
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom * a.powi(q as i32);
        binom = binom * (q - i) as f64 / (i + 1) as f64;
    }
    sum / factorial(q)
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Product of per-axis B-splines scaled so the support box fits inside `D`,
/// hence `supp ρ_ε ⊂ εD`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mollifier {
    pub order: u32,
    pub d: usize,
    /// Per-axis scale `r`: `ρ(x) = Π B_q(x_i/r)/r`.
    pub scale: f64,
}

impl Mollifier {
    pub fn for_domain(spec: &DomainSpec, order: u32) -> Result<Self> {
        if order < 4 {
            return Err(Error::Degenerate(format!("mollifier order {order} below 4")));
        }
        let d = spec.d();
        let corner = spec.radial_boundary(&vec![1.0; d]) / (d as f64).sqrt();
        Ok(Self { order, d, scale: 2.0 * corner / order as f64 })
    }

    /// Half-width of the support box of `ρ`.
    pub fn support_radius(&self) -> f64 {
        self.scale * self.order as f64 / 2.0
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        x.iter().map(|v| spline(self.order, v / self.scale) / self.scale).product()
    }

    /// `ρ̂(ξ) = Π sinc(r ξ_i)^q`.
    pub fn transform(&self, xi: &[f64]) -> f64 {
        xi.iter().map(|v| sinc(self.scale * v).powi(self.order as i32)).product()
    }

    /// Per-axis majorant `min{1, (π r |ξ_i|)^{-q}}` of `|ρ̂|`.
    pub fn transform_envelope(&self, xi: &[f64]) -> f64 {
        xi.iter().map(|v| axis_envelope(self.order, self.scale * v)).product()
    }
}

fn axis_envelope(q: u32, x: f64) -> f64 {
    let y = std::f64::consts::PI * x.abs();
    if y <= 1.0 {
        1.0
    } else {
        y.powi(-(q as i32))
    }
}

/// `ε = t^{-(d-1)/(d+1)}`.
pub fn epsilon_schedule(d: usize, t: f64) -> f64 {
    t.powf(-((d - 1) as f64) / ((d + 1) as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothedCount {
    pub value: f64,
    /// `|I_16 - I_8|` summed over boundary points.
    pub error: f64,
    pub boundary_points: usize,
}

/// Per-axis Gauss nodes over the spline pieces, with the spline density
/// folded into the weights.
fn spline_nodes(q: u32, per_piece: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(per_piece);
    let mut out = Vec::with_capacity(q as usize * per_piece);
    for i in 0..q {
        let c = -(q as f64) / 2.0 + i as f64 + 0.5;
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let u = c + 0.5 * x;
            out.push((u, 0.5 * w * spline(q, u)));
        }
    }
    out
}

/// `Σ_k (χ_{tD} * ρ_ε)(k)`. Lattice points whose whole mollifier box lies
/// inside (outside) `tD` count 1 (0); the rest are integrated with the
/// first coordinate handled exactly through the spline CDF and a product
/// Gauss rule over the others. `eps = 0` returns the exact count.
pub fn smoothed_count(spec: &DomainSpec, t: f64, eps: f64, rho: &Mollifier) -> Result<SmoothedCount> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveScale(format!("{t}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::Degenerate(format!("negative mollifier width {eps}")));
    }
    if rho.d != spec.d() {
        return Err(Error::IndexOutOfRange { index: rho.d, d: spec.d() });
    }
    if eps == 0.0 {
        let n = count_lattice_points(spec, Scale::from_f64_exact(t)?);
        let value = n.to_string().parse::<f64>().expect("count parses as f64");
        return Ok(SmoothedCount { value, error: 0.0, boundary_points: 0 });
    }
    let d = spec.d();
    let half = eps * rho.support_radius();
    let reach = (t + half).floor() as i64;
    let mut inside = 0.0;
    let mut boundary: Vec<(Vec<i64>, f64)> = Vec::new();
    let mut k = vec![0i64; d];
    let (mut lo, mut hi) = (vec![0.0; d], vec![0.0; d]);
    loop {
        for l in 0..d {
            hi[l] = (k[l] as f64 + half) / t;
            lo[l] = ((k[l] as f64 - half).max(0.0)) / t;
        }
        let weight = k.iter().map(|&v| if v == 0 { 1.0 } else { 2.0 }).product::<f64>();
        if spec.gauge(&hi) <= 1.0 - 1e-12 {
            inside += weight;
        } else if spec.gauge(&lo) <= 1.0 + 1e-12 {
            boundary.push((k.clone(), weight));
        }
        if !next_index(&mut k, reach) {
            break;
        }
    }
    let sigma = eps * rho.scale;
    let coarse = spline_nodes(rho.order, 16);
    let fine = spline_nodes(rho.order, 32);
    let parts: Vec<(f64, f64)> = boundary
        .par_iter()
        .map(|(k, w)| {
            let a = boundary_mass(spec, rho.order, t, sigma, k, &coarse);
            let b = boundary_mass(spec, rho.order, t, sigma, k, &fine);
            (w * b, w * (b - a).abs())
        })
        .collect();
    let (mut value, mut error) = (inside, 0.0);
    for (v, e) in parts {
        value += v;
        error += e;
    }
    Ok(SmoothedCount { value, error, boundary_points: boundary.len() })
}

fn next_index(k: &mut [i64], reach: i64) -> bool {
    for v in k.iter_mut() {
        if *v < reach {
            *v += 1;
            return true;
        }
        *v = 0;
    }
    false
}

/// `P(k - Y ∈ tD)` for `Y ~ ρ_ε`, per-axis scale `sigma`.
fn boundary_mass(spec: &DomainSpec, q: u32, t: f64, sigma: f64, k: &[i64], nodes: &[(f64, f64)]) -> f64 {
    let d = spec.d();
    let p0 = spec.block_of(0);
    let blocks = spec.blocks();
    let (m0, w0) = (blocks[p0].m as f64, spec.omegas()[0] as f64);
    let mut x = vec![0.0; d];
    let mut idx = vec![0usize; d - 1];
    let mut total = 0.0;
    loop {
        let mut weight = 1.0;
        for (l, &i) in (1..d).zip(&idx) {
            let (u, w) = nodes[i];
            weight *= w;
            x[l] = (k[l] as f64 - sigma * u) / t;
        }
        if weight > 0.0 {
            let mut outer = 0.0;
            let mut own = 0.0;
            for (p, b) in blocks.iter().enumerate() {
                let inner: f64 = b
                    .coords()
                    .filter(|&l| l != 0)
                    .map(|l| x[l].powi(spec.omegas()[l] as i32))
                    .sum();
                if p == p0 {
                    own = inner;
                } else {
                    outer += inner.powi(b.m as i32);
                }
            }
            let room = 1.0 - outer;
            if room > 0.0 {
                let r = room.powf(1.0 / m0) - own;
                if r > 0.0 {
                    let reach = t * r.powf(1.0 / w0);
                    let k0 = k[0] as f64;
                    total += weight * (spline_cdf(q, (k0 + reach) / sigma) - spline_cdf(q, (k0 - reach) / sigma));
                }
            }
        }
        let mut carry = true;
        for i in idx.iter_mut() {
            *i += 1;
            if *i < nodes.len() {
                carry = false;
                break;
            }
            *i = 0;
        }
        if carry {
            break;
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonSum {
    pub value: f64,
    /// Accumulated quadrature error of the transform values.
    pub transform_error: f64,
    /// Estimate of `Σ_{|k|_∞ > K} |χ̂_{tD}(k) ρ̂(εk)|`.
    pub tail: f64,
    /// Largest observed `|χ̂_{tD}(k)|` over its decay-bound shape, used to
    /// scale the tail estimate.
    pub decay_constant: f64,
    pub cutoff: i64,
    pub profiles: usize,
}

/// Upper orthant of `{|k|_∞ ≤ K}` with the multiplicity of each point
/// under sign flips, sorted lexicographically.
fn orthant(d: usize, lo_exclusive: Option<i64>, hi: i64) -> Vec<(Vec<i64>, f64)> {
    let mut out = Vec::new();
    let mut k = vec![0i64; d];
    loop {
        let top = *k.iter().max().unwrap();
        if lo_exclusive.is_none_or(|lo| top > lo) {
            let w = k.iter().map(|&v| if v == 0 { 1.0 } else { 2.0 }).product();
            out.push((k.clone(), w));
        }
        if !next_index(&mut k, hi) {
            break;
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn norm(k: &[i64]) -> f64 {
    k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
}

/// Decay-bound shape at `k ≠ 0`: the product bound in the cone of the
/// largest coordinate, evaluated at `t|k|` and dilated.
fn decay_shape(spec: &DomainSpec, k: &[i64], t: f64) -> Result<f64> {
    let j = (0..k.len()).max_by_key(|&l| (k[l].abs(), std::cmp::Reverse(l))).unwrap();
    let xi: Vec<f64> = k.iter().map(|&v| v as f64).collect();
    let b = theorem2_bound(spec, j + 1, &xi, t * norm(k), default_eps0(spec.d()))?;
    Ok(b * t.powi(spec.d() as i32))
}

/// `Σ_{|k|_∞ ≤ K} χ̂_{tD}(k) ρ̂(εk)`, plus a tail estimate.
///
/// The tail for `K < |k|_∞ ≤ 4K` sums `C·shape(k)·env(εk)` where `shape` is
/// the product decay bound and `C` the largest observed ratio
/// `|χ̂_{tD}(k)|/shape(k)` inside the cutoff. Beyond `4K` it uses
/// `|χ̂_{tD}| ≤ vol(D)t^d` with the factorized envelope of `ρ̂`.
pub fn poisson_rhs(
    spec: &DomainSpec,
    t: f64,
    eps: f64,
    rho: &Mollifier,
    cutoff: i64,
    cache: &ProfileCache,
) -> Result<PoissonSum> {
    if cutoff < 0 {
        return Err(Error::Degenerate(format!("frequency cutoff {cutoff}")));
    }
    if !(t > 0.0) {
        return Err(Error::NonPositiveScale(format!("{t}")));
    }
    let d = spec.d();
    let main = spec.volume() * t.powi(d as i32);
    let points = orthant(d, None, cutoff);
    let dirs: Vec<Vec<f64>> = points
        .iter()
        .filter(|(k, _)| k.iter().any(|&v| v != 0))
        .map(|(k, _)| k.iter().map(|&v| v as f64).collect())
        .collect();
    cache.prefetch(&dirs)?;
    let terms: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|(k, w)| {
            if k.iter().all(|&v| v == 0) {
                return Ok((main, 0.0, 0.0));
            }
            let xi: Vec<f64> = k.iter().map(|&v| v as f64).collect();
            let profile = cache.get(&xi)?;
            let ft = profile.transform(t * norm(k)).dilate(t, d);
            let damp = rho.transform(&xi.iter().map(|v| v * eps).collect::<Vec<_>>());
            let ratio = ft.abs() / decay_shape(spec, k, t)?;
            Ok((w * ft.re * damp, w * ft.error * damp.abs(), ratio))
        })
        .collect::<Result<_>>()?;
    let (mut value, mut transform_error, mut constant) = (0.0, 0.0, 0.0f64);
    for (v, e, r) in terms {
        value += v;
        transform_error += e;
        constant = constant.max(r);
    }
    if cutoff == 0 {
        constant = 1.0;
    }

    let far = 4 * cutoff.max(1);
    let near: f64 = orthant(d, Some(cutoff), far)
        .par_iter()
        .map(|(k, w)| {
            let xi: Vec<f64> = k.iter().map(|&v| eps * v as f64).collect();
            let env = rho.transform_envelope(&xi);
            Ok(w * env * (constant * decay_shape(spec, k, t)?).min(main))
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    // Σ_{n∈ℤ} env(a n), split at |n| ≤ far, with an integral bound past it
    let a = eps * rho.scale;
    let q = rho.order as i32;
    let inner: f64 = (-far..=far).map(|n| axis_envelope(rho.order, a * n as f64)).sum();
    let beyond = {
        let y = std::f64::consts::PI * a * far as f64;
        if y > 1.0 {
            2.0 * far as f64 * y.powi(-q) / (q - 1) as f64
        } else {
            f64::INFINITY
        }
    };
    let outside = main * ((inner + beyond).powi(d as i32) - inner.powi(d as i32));
    Ok(PoissonSum {
        value,
        transform_error,
        tail: near + outside,
        decay_constant: constant,
        cutoff,
        profiles: cache.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichVerdict {
    pub t: f64,
    pub eps: f64,
    /// Smoothed count at `t`.
    pub lhs: f64,
    pub exact: f64,
    /// Smoothed count at `t - ε`.
    pub rhs_minus: f64,
    /// Smoothed count at `t + ε`.
    pub rhs_plus: f64,
    /// `|lhs - Σ_{|k|_∞ ≤ K} χ̂_{tD}(k)ρ̂(εk)|`.
    pub poisson_gap: f64,
    pub tail_bound: f64,
    /// Spatial and spectral quadrature error estimates combined.
    pub quadrature_error: f64,
    /// `|N(t) - vol(D)t^d| / t^E` with `E` the predicted remainder exponent.
    pub remainder_ratio: f64,
    pub ordered: bool,
    pub poisson_ok: bool,
    pub pass: bool,
}

/// Sandwich ordering and the Poisson identity at scale `t` with the
/// scheduled `ε`. `eps_override` replaces the schedule (`Some(0.0)` makes
/// every count exact).
pub fn sandwich_check(
    spec: &DomainSpec,
    t: Scale,
    rho: &Mollifier,
    cutoff: i64,
    cache: &ProfileCache,
    eps_override: Option<f64>,
) -> Result<SandwichVerdict> {
    let tf = t.to_f64();
    let d = spec.d();
    let eps = eps_override.unwrap_or_else(|| epsilon_schedule(d, tf));
    if tf - eps <= 0.0 {
        return Err(Error::Degenerate(format!("t - eps = {} is not positive", tf - eps)));
    }
    let exact = count_lattice_points(spec, t).to_string().parse::<f64>().expect("count parses as f64");
    let report = spec.predicted_exponents();
    let remainder_ratio = (exact - spec.volume() * tf.powi(d as i32)).abs() / tf.powf(report.overall);
    if eps == 0.0 {
        return Ok(SandwichVerdict {
            t: tf,
            eps,
            lhs: exact,
            exact,
            rhs_minus: exact,
            rhs_plus: exact,
            poisson_gap: 0.0,
            tail_bound: 0.0,
            quadrature_error: 0.0,
            remainder_ratio,
            ordered: true,
            poisson_ok: true,
            pass: true,
        });
    }
    let minus = smoothed_count(spec, tf - eps, eps, rho)?;
    let plus = smoothed_count(spec, tf + eps, eps, rho)?;
    let mid = smoothed_count(spec, tf, eps, rho)?;
    let sum = poisson_rhs(spec, tf, eps, rho, cutoff, cache)?;
    let slack = 1e-9 * exact.max(1.0);
    let ordered = minus.value <= exact + minus.error + slack && exact <= plus.value + plus.error + slack;
    let quadrature_error = mid.error + sum.transform_error;
    let poisson_gap = (mid.value - sum.value).abs();
    let poisson_ok = poisson_gap <= sum.tail + quadrature_error + slack;
    Ok(SandwichVerdict {
        t: tf,
        eps,
        lhs: mid.value,
        exact,
        rhs_minus: minus.value,
        rhs_plus: plus.value,
        poisson_gap,
        tail_bound: sum.tail,
        quadrature_error,
        remainder_ratio,
        ordered,
        poisson_ok,
        pass: ordered && poisson_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::ProfileOptions;

    #[test]
    fn spline_is_a_density() {
        for q in [4, 6, 8] {
            let h = q as f64 / 2.0;
            let gl = GaussLegendre::new(16);
            let mass: f64 = (0..q).map(|i| gl.integrate(-h + i as f64, -h + i as f64 + 1.0, |u| spline(q, u))).sum();
            assert!((mass - 1.0).abs() < 1e-12, "q={q}: {mass}");
            assert!((spline_cdf(q, 0.0) - 0.5).abs() < 1e-14);
            assert_eq!(spline_cdf(q, h + 0.1), 1.0);
            assert_eq!(spline(q, h), 0.0);
        }
        assert!((spline(4, 0.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((spline(4, 1.0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mollifier_transform_and_support() {
        let ball = DomainSpec::ball(3);
        let rho = Mollifier::for_domain(&ball, 8).unwrap();
        assert_eq!(rho.transform(&[0.0, 0.0, 0.0]), 1.0);
        let r = rho.support_radius();
        assert!(ball.gauge(&[r, r, r]) <= 1.0 + 1e-12);
        assert!(Mollifier::for_domain(&ball, 3).is_err());
        let xi = [3.0, -7.5, 20.0];
        assert!(rho.transform(&xi).abs() <= rho.transform_envelope(&xi));
    }

    #[test]
    fn schedule_examples() {
        assert!((epsilon_schedule(3, 16.0) - 0.25).abs() < 1e-15);
        assert_eq!(epsilon_schedule(3, 1.0), 1.0);
        assert!((epsilon_schedule(5, 64.0) - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn smoothed_count_limits() {
        let ss4 = DomainSpec::supersphere(3, 4).unwrap();
        let rho = Mollifier::for_domain(&ss4, 8).unwrap();
        let s = smoothed_count(&ss4, 0.5, 0.01, &rho).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        let exact = count_lattice_points(&ss4, Scale::new(31, 10).unwrap()).to_string().parse::<f64>().unwrap();
        let s = smoothed_count(&ss4, 3.1, 1e-3, &rho).unwrap();
        assert!((s.value - exact).abs() <= 0.01, "{} vs {exact}", s.value);
        assert_eq!(smoothed_count(&ss4, 3.0, 0.0, &rho).unwrap().value, 131.0);
    }

    #[test]
    fn smoothed_ball_sits_between_counts() {
        let ball = DomainSpec::ball(3);
        let rho = Mollifier::for_domain(&ball, 8).unwrap();
        let s = smoothed_count(&ball, 2.0, 0.25, &rho).unwrap();
        let lo = count_lattice_points(&ball, Scale::new(7, 4).unwrap()).to_string().parse::<f64>().unwrap();
        let hi = count_lattice_points(&ball, Scale::new(9, 4).unwrap()).to_string().parse::<f64>().unwrap();
        assert!(lo <= s.value && s.value <= hi, "{lo} <= {} <= {hi}", s.value);
    }

    #[test]
    fn poisson_identity_ball() {
        let ball = DomainSpec::ball(3);
        let rho = Mollifier::for_domain(&ball, 8).unwrap();
        let cache = ProfileCache::new(&ball, ProfileOptions::for_dimension(3));
        let only_zero = poisson_rhs(&ball, 2.0, 0.25, &rho, 0, &cache).unwrap();
        assert!((only_zero.value - ball.volume() * 8.0).abs() < 1e-12);
        for eps in [0.25, 1.0] {
            let lhs = smoothed_count(&ball, 2.0, eps, &rho).unwrap();
            let rhs = poisson_rhs(&ball, 2.0, eps, &rho, 6, &cache).unwrap();
            let gap = (lhs.value - rhs.value).abs();
            assert!(gap <= rhs.tail + rhs.transform_error + lhs.error + 1e-9, "eps={eps}: gap {gap}, tail {}", rhs.tail);
        }
    }

    #[test]
    fn degenerate_eps_is_exact() {
        let ball = DomainSpec::ball(3);
        let rho = Mollifier::for_domain(&ball, 8).unwrap();
        let cache = ProfileCache::new(&ball, ProfileOptions::for_dimension(3));
        let v = sandwich_check(&ball, Scale::integer(4), &rho, 8, &cache, Some(0.0)).unwrap();
        assert!(v.pass && v.lhs == v.exact && v.rhs_minus == v.exact && v.rhs_plus == v.exact);
        assert_eq!(v.exact, 257.0);
    }
}
