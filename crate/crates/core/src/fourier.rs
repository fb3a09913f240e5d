//! Fourier transform of the indicator of `D`, reduced to one dimension:
//! `χ̂_D(tξ) = ∫ A_ξ(s) e^{-2πits} ds` where `A_ξ(s)` is the area of the
//! slice `D ∩ {⟨x, ξ⟩ = s}`.
//!
//! The slice profile is sampled once per direction on a panel mesh refined
//! geometrically toward the support endpoints; each panel stores the
//! Legendre expansion of `A`, and the oscillatory integral is then exact for
//! the piecewise polynomial at every frequency.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::caps::{cone_direction, coordinate_factor, orthogonal_basis, support_point};
use crate::domain::{block_measure, DomainSpec};
use crate::error::{Error, Result};
use crate::qmc::sphere_nodes;
use crate::quadrature::{filon_panel, tanh_sinh, GaussLegendre};
use crate::special::{gamma, sphere_area};
use crate::stats::{log_log_fit, top_decade_slope};

#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    /// Angular nodes for slices through non-axis directions.
    pub sphere_nodes: usize,
    pub seed: u64,
    /// Uniform panels on `[0, h/2]` per side.
    pub uniform_panels: usize,
    /// Geometric panels between `h/2` and `h` (widths halve each step).
    pub geometric_depth: usize,
    /// The same for axis directions, whose slices are exact and cheap and
    /// can vanish like `(h - s)^{1/4}` or slower at the endpoints.
    pub axis_depth: usize,
    /// Legendre tail threshold that triggers panel bisection.
    pub panel_tol: f64,
    pub max_refine: usize,
}

impl ProfileOptions {
    pub fn for_dimension(d: usize) -> Self {
        let sphere_nodes = match d {
            2 => 2,
            3 => 128,
            4 => 768,
            _ => 1024,
        };
        Self { sphere_nodes, seed: 0x5eed, uniform_panels: 6, geometric_depth: 22, axis_depth: 30, panel_tol: 1e-11, max_refine: 6 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

const PANEL_ORDER: usize = 16;

/// Slice areas along an axis from the Dirichlet reduction of each block.
#[derive(Debug, Clone)]
struct AxisSlices {
    omega: f64,
    m_own: u32,
    /// `(c', α')` for the rest of the axis's own block.
    rest: Option<(f64, f64)>,
    /// `(K, β)`: the other blocks fill `{Σ v_q ≤ B}` with volume `K B^β`.
    others: Option<(f64, f64)>,
}

impl AxisSlices {
    fn new(spec: &DomainSpec, j: usize) -> Self {
        let p = spec.block_of(j);
        let blk = &spec.blocks()[p];
        let rest_omegas: Vec<u32> =
            blk.omegas.iter().enumerate().filter(|(k, _)| blk.start + k != j).map(|(_, &w)| w).collect();
        let rest = (!rest_omegas.is_empty()).then(|| block_measure(&rest_omegas));
        let mut k_num = 1.0;
        let mut beta = 0.0;
        for (q, b) in spec.blocks().iter().enumerate() {
            if q == p {
                continue;
            }
            let (c, alpha) = block_measure(&b.omegas);
            let bq = alpha / b.m as f64;
            k_num *= c * gamma(1.0 + bq);
            beta += bq;
        }
        let others = (spec.blocks().len() > 1).then(|| (k_num / gamma(1.0 + beta), beta));
        Self { omega: spec.omegas()[j] as f64, m_own: blk.m, rest, others }
    }

    fn area(&self, s: f64) -> f64 {
        let sigma = s.abs().powf(self.omega);
        if sigma >= 1.0 {
            return 0.0;
        }
        match (self.rest, self.others) {
            (None, Some((k, beta))) => k * (1.0 - sigma.powi(self.m_own as i32)).powf(beta),
            (Some((c, alpha)), None) => c * (1.0 - sigma).powf(alpha),
            (Some((c, alpha)), Some((k, beta))) => {
                // v = u^{α'} turns the density α' u^{α'-1} du into dv
                let top = (1.0 - sigma).powf(alpha);
                let m = self.m_own as i32;
                let inner = tanh_sinh(0.0, top, 1e-14, |v, _, db| {
                    let u = v.powf(1.0 / alpha);
                    let gap = if db < 0.5 * top {
                        // 1 - σ - u with u close to 1 - σ
                        (1.0 - sigma) * (1.0 - (1.0 - db / top).powf(1.0 / alpha))
                    } else {
                        1.0 - sigma - u
                    };
                    if gap <= 0.0 {
                        return 0.0;
                    }
                    let w = sigma + u;
                    let mut geo = 0.0;
                    let mut pw = 1.0;
                    for _ in 0..m {
                        geo += pw;
                        pw *= w;
                    }
                    (gap * geo).powf(beta)
                });
                c * k * inner.value
            }
            (None, None) => 0.0,
        }
    }
}

/// Slice areas through a general direction by polar integration around
/// `c(s) = (s/h) x(ξ)`, which stays inside every slice: `A(s) = |S^{d-2}|/(d-1)`
/// times the mean of `ρ(θ)^{d-1}` over fixed nodes `θ`. Returns the full-set
/// and half-set (even nodes) estimates.
#[derive(Debug, Clone)]
struct PolarSlices<'a> {
    spec: &'a DomainSpec,
    top: Vec<f64>,
    h: f64,
    dirs: Vec<Vec<f64>>,
    scale: f64,
}

impl<'a> PolarSlices<'a> {
    fn new(spec: &'a DomainSpec, n: &[f64], top: Vec<f64>, h: f64, opts: &ProfileOptions) -> Self {
        let d = spec.d();
        let basis = orthogonal_basis(n);
        let nodes = sphere_nodes(d - 1, opts.sphere_nodes, opts.seed);
        let dirs = nodes
            .chunks(d - 1)
            .map(|u| {
                let mut v = vec![0.0; d];
                for (ui, b) in u.iter().zip(&basis) {
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi += ui * bi;
                    }
                }
                v
            })
            .collect();
        let scale = if d == 2 { 2.0 } else { sphere_area(d - 2) / (d - 1) as f64 };
        Self { spec, top, h, dirs, scale }
    }

    fn area(&self, s: f64) -> (f64, f64) {
        if s.abs() >= self.h {
            return (0.0, 0.0);
        }
        let d = self.spec.d();
        let center: Vec<f64> = self.top.iter().map(|x| s / self.h * x).collect();
        let (mut p, mut g) = (vec![0.0; d], vec![0.0; d]);
        let (mut all, mut even) = (0.0, 0.0);
        for (i, dir) in self.dirs.iter().enumerate() {
            let r = self.spec.ray_exit_with(&center, dir, &mut p, &mut g);
            let v = r.powi(d as i32 - 1);
            all += v;
            if i % 2 == 0 {
                even += v;
            }
        }
        let n = self.dirs.len() as f64;
        let half = (self.dirs.len() as f64 / 2.0).ceil();
        (self.scale * all / n, self.scale * even / half)
    }
}

#[derive(Debug, Clone)]
enum Slicer<'a> {
    Axis(AxisSlices),
    Polar(PolarSlices<'a>),
}

impl Slicer<'_> {
    fn area(&self, s: f64) -> (f64, Option<f64>) {
        match self {
            Slicer::Axis(a) => (a.area(s), None),
            Slicer::Polar(p) => {
                let (full, half) = p.area(s);
                (full, Some(half))
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Panel {
    center: f64,
    half_width: f64,
    coef: Vec<f64>,
    coef_half: Option<Vec<f64>>,
    /// L1 size of the two highest Legendre terms.
    tail: f64,
    nodes: Vec<(f64, f64)>,
}

/// `A_ξ(s)` on `[-h, h]` as piecewise Legendre expansions.
#[derive(Debug, Clone)]
pub struct SliceProfile {
    pub xi: Vec<f64>,
    pub s_range: (f64, f64),
    /// `(s, A(s))` at every quadrature node, increasing in `s`.
    pub samples: Vec<(f64, f64)>,
    /// Whether the profile comes from the exact axis reduction.
    pub exact_axis: bool,
    panels: Vec<Panel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FTValue {
    pub xi: Vec<f64>,
    pub t: f64,
    pub re: f64,
    pub im: f64,
    pub error: f64,
}

impl FTValue {
    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    /// `χ̂_{sD}(η)` from `χ̂_D(sη)`: multiply by `s^d`.
    pub fn dilate(mut self, scale: f64, d: usize) -> Self {
        let f = scale.powi(d as i32);
        self.re *= f;
        self.im *= f;
        self.error *= f;
        self
    }
}

fn axis_of(n: &[f64]) -> Option<usize> {
    let nz: Vec<usize> = (0..n.len()).filter(|&i| n[i] != 0.0).collect();
    (nz.len() == 1).then(|| nz[0])
}

/// Breakpoints on `[0, h]`: uniform up to `h/2`, then halving toward `h`.
fn breakpoints(h: f64, uniform: usize, depth: usize) -> Vec<f64> {
    let mut b: Vec<f64> = (0..=uniform).map(|i| 0.5 * h * i as f64 / uniform as f64).collect();
    let mut gap = 0.5 * h;
    for _ in 0..depth {
        gap *= 0.5;
        b.push(h - gap);
    }
    b.push(h);
    b
}

fn build_panel(slicer: &Slicer, gl: &GaussLegendre, a: f64, b: f64, refine: usize, opts: &ProfileOptions, terminal: bool) -> Vec<Panel> {
    let center = 0.5 * (a + b);
    let half_width = 0.5 * (b - a);
    let mut full = Vec::with_capacity(gl.len());
    let mut half = Vec::with_capacity(gl.len());
    let mut nodes = Vec::with_capacity(gl.len());
    for x in &gl.nodes {
        let s = center + half_width * x;
        let (v, hv) = slicer.area(s);
        full.push(v);
        nodes.push((s, v));
        if let Some(hv) = hv {
            half.push(hv);
        }
    }
    let coef = gl.legendre_coefficients(&full);
    let n = coef.len();
    let tail = 2.0 * half_width * (coef[n - 1].abs() + coef[n - 2].abs());
    if tail > opts.panel_tol && refine < opts.max_refine && !terminal {
        let mut left = build_panel(slicer, gl, a, center, refine + 1, opts, false);
        left.extend(build_panel(slicer, gl, center, b, refine + 1, opts, false));
        return left;
    }
    let coef_half = (!half.is_empty()).then(|| gl.legendre_coefficients(&half));
    vec![Panel { center, half_width, coef, coef_half, tail, nodes }]
}

fn mirror(p: &Panel) -> Panel {
    let flip = |c: &[f64]| -> Vec<f64> { c.iter().enumerate().map(|(k, v)| if k % 2 == 0 { *v } else { -v }).collect() };
    Panel {
        center: -p.center,
        half_width: p.half_width,
        coef: flip(&p.coef),
        coef_half: p.coef_half.as_deref().map(flip),
        tail: p.tail,
        nodes: p.nodes.iter().rev().map(|(s, v)| (-s, *v)).collect(),
    }
}

impl SliceProfile {
    pub fn build(spec: &DomainSpec, xi: &[f64], opts: &ProfileOptions) -> Result<Self> {
        if xi.len() != spec.d() {
            return Err(Error::IndexOutOfRange { index: xi.len(), d: spec.d() });
        }
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::ZeroDirection);
        }
        let n: Vec<f64> = xi.iter().map(|v| v / norm).collect();
        let gl = GaussLegendre::new(PANEL_ORDER);
        let (slicer, h, depth) = match axis_of(&n) {
            Some(j) => (Slicer::Axis(AxisSlices::new(spec, j)), 1.0, opts.axis_depth),
            None => {
                let top = support_point(spec, &n)?;
                let h: f64 = top.iter().zip(&n).map(|(a, b)| a * b).sum();
                (Slicer::Polar(PolarSlices::new(spec, &n, top, h, opts)), h, opts.geometric_depth)
            }
        };
        let bp = breakpoints(h, opts.uniform_panels, depth);
        let last = bp.len() - 2;
        let right: Vec<Panel> = (0..bp.len() - 1)
            .into_par_iter()
            .map(|i| build_panel(&slicer, &gl, bp[i], bp[i + 1], 0, opts, i == last))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();
        let left: Vec<Panel> = match slicer {
            // slices through an axis are even in s
            Slicer::Axis(_) => right.iter().rev().map(mirror).collect(),
            Slicer::Polar(_) => {
                let neg: Vec<f64> = bp.iter().rev().map(|b| -b).collect();
                (0..neg.len() - 1)
                    .into_par_iter()
                    .map(|i| build_panel(&slicer, &gl, neg[i], neg[i + 1], 0, opts, i == 0))
                    .collect::<Vec<_>>()
                    .into_iter()
                    .flatten()
                    .collect()
            }
        };
        let panels: Vec<Panel> = left.into_iter().chain(right).collect();
        let samples = panels.iter().flat_map(|p| p.nodes.iter().cloned()).collect();
        Ok(Self { xi: n, s_range: (-h, h), samples, exact_axis: matches!(slicer, Slicer::Axis(_)), panels })
    }

    /// Support value `h = max ⟨x, ξ⟩`.
    pub fn support(&self) -> f64 {
        self.s_range.1
    }

    /// `∫ A(s) ds`, which equals `vol(D)`.
    pub fn integral(&self) -> f64 {
        self.panels.iter().map(|p| 2.0 * p.half_width * p.coef[0]).sum()
    }

    /// Piecewise-polynomial value of `A(s)`.
    pub fn area(&self, s: f64) -> f64 {
        let Some(p) = self.panels.iter().find(|p| (s - p.center).abs() <= p.half_width) else {
            return 0.0;
        };
        let x = (s - p.center) / p.half_width;
        let (mut p0, mut p1) = (1.0, x);
        let mut acc = p.coef[0] + if p.coef.len() > 1 { p.coef[1] * x } else { 0.0 };
        for (k, c) in p.coef.iter().enumerate().skip(2) {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            acc += c * p2;
            p0 = p1;
            p1 = p2;
        }
        acc
    }

    /// `χ̂_D(tξ)` with an error estimate combining the truncated Legendre
    /// terms, the full-versus-half node discrepancy of non-axis slices, and
    /// rounding.
    pub fn transform(&self, t: f64) -> FTValue {
        let omega = 2.0 * PI * t;
        let mut bessel = vec![0.0; PANEL_ORDER];
        let (mut re, mut im) = (0.0, 0.0);
        let (mut re_h, mut im_h) = (0.0, 0.0);
        let mut trunc = 0.0;
        let mut mass = 0.0;
        for p in &self.panels {
            let (r, i) = filon_panel(&p.coef, p.center, p.half_width, omega, &mut bessel);
            re += r;
            im += i;
            let kappa = (omega * p.half_width).abs();
            let n = PANEL_ORDER;
            // dropped terms integrate against j_k(κ), k ≥ n-2
            let decay = if kappa > (n - 2) as f64 { 1.0 / kappa } else { bessel[n - 2].abs() + bessel[n - 1].abs() };
            trunc += p.tail * decay.min(1.0);
            mass += 2.0 * p.half_width * p.coef[0].abs();
            if let Some(ch) = &p.coef_half {
                let (r, i) = filon_panel(ch, p.center, p.half_width, omega, &mut bessel);
                re_h += r;
                im_h += i;
            }
        }
        let sampling = if self.exact_axis { 0.0 } else { (re - re_h).hypot(im - im_h) };
        FTValue { xi: self.xi.clone(), t, re, im, error: trunc + sampling + 1e-14 * mass }
    }

    /// `max |χ̂_D(τξ)|` over `τ ∈ [t, t + 1/h]`, one oscillation period of the
    /// endpoint contributions.
    pub fn local_envelope(&self, t: f64, samples: usize) -> f64 {
        let period = 1.0 / self.support();
        (0..samples)
            .map(|i| self.transform(t + period * i as f64 / samples as f64).abs())
            .fold(0.0, f64::max)
    }
}

/// Representative of a direction under the symmetries of `D`: coordinate
/// sign flips and permutations of coordinates with equal exponents inside a
/// block. The transform is invariant under both. Normalized after
/// canonicalizing so equivalent inputs give bit-identical output.
pub fn canonical_direction(spec: &DomainSpec, xi: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = xi.iter().map(|x| x.abs()).collect();
    for b in spec.blocks() {
        let mut ws: Vec<u32> = b.omegas.clone();
        ws.sort();
        ws.dedup();
        for w in ws {
            let idx: Vec<usize> = b.coords().filter(|&l| spec.omegas()[l] == w).collect();
            let mut vals: Vec<f64> = idx.iter().map(|&l| v[l]).collect();
            vals.sort_by(|a, b| b.total_cmp(a));
            for (l, x) in idx.iter().zip(vals) {
                v[*l] = x;
            }
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

/// Slice profiles shared across requests, keyed by canonical direction.
#[derive(Debug)]
pub struct ProfileCache<'a> {
    spec: &'a DomainSpec,
    opts: ProfileOptions,
    map: Mutex<HashMap<Vec<u64>, Arc<SliceProfile>>>,
}

impl<'a> ProfileCache<'a> {
    pub fn new(spec: &'a DomainSpec, opts: ProfileOptions) -> Self {
        Self { spec, opts, map: Mutex::new(HashMap::new()) }
    }

    fn key(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    pub fn get(&self, xi: &[f64]) -> Result<Arc<SliceProfile>> {
        if xi.iter().all(|x| *x == 0.0) {
            return Err(Error::ZeroDirection);
        }
        let c = canonical_direction(self.spec, xi);
        let key = Self::key(&c);
        if let Some(p) = self.map.lock().expect("cache lock").get(&key) {
            return Ok(p.clone());
        }
        let p = Arc::new(SliceProfile::build(self.spec, &c, &self.opts)?);
        Ok(self.map.lock().expect("cache lock").entry(key).or_insert(p).clone())
    }

    /// Builds the missing profiles for `dirs` in parallel.
    pub fn prefetch(&self, dirs: &[Vec<f64>]) -> Result<()> {
        let mut todo: Vec<Vec<f64>> = dirs.iter().map(|x| canonical_direction(self.spec, x)).collect();
        todo.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
        todo.dedup();
        {
            let map = self.map.lock().expect("cache lock");
            todo.retain(|c| !map.contains_key(&Self::key(c)));
        }
        let built: Vec<(Vec<u64>, SliceProfile)> = todo
            .par_iter()
            .map(|c| Ok((Self::key(c), SliceProfile::build(self.spec, c, &self.opts)?)))
            .collect::<Result<_>>()?;
        let mut map = self.map.lock().expect("cache lock");
        for (k, p) in built {
            map.entry(k).or_insert_with(|| Arc::new(p));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn slice_area(spec: &DomainSpec, xi: &[f64], s: f64) -> Result<f64> {
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::ZeroDirection);
    }
    let n: Vec<f64> = xi.iter().map(|v| v / norm).collect();
    match axis_of(&n) {
        Some(j) => Ok(AxisSlices::new(spec, j).area(s)),
        None => {
            let opts = ProfileOptions::for_dimension(spec.d());
            let top = support_point(spec, &n)?;
            let h: f64 = top.iter().zip(&n).map(|(a, b)| a * b).sum();
            Ok(PolarSlices::new(spec, &n, top, h, &opts).area(s).0)
        }
    }
}

pub fn ft_indicator(spec: &DomainSpec, xi: &[f64], t: f64) -> Result<FTValue> {
    Ok(SliceProfile::build(spec, xi, &ProfileOptions::for_dimension(spec.d()))?.transform(t))
}

/// `χ̂_{sD}(η) = s^d χ̂_D(sη)`.
pub fn ft_dilated(profile: &SliceProfile, d: usize, scale: f64, eta_norm: f64) -> FTValue {
    profile.transform(scale * eta_norm).dilate(scale, d)
}

/// `t^{-1} Π_{l≠j} min{t^{-1/(m_{j,l}ω_l)}, t^{-1/2}|ξ_l|^{-(m_{j,l}ω_l-2)/(2(m_{j,l}ω_l-1))}}`
/// for a direction in the cone of the 1-based `axis`.
pub fn theorem2_bound(spec: &DomainSpec, axis: usize, xi: &[f64], t: f64, eps0: f64) -> Result<f64> {
    if axis == 0 || axis > spec.d() {
        return Err(Error::IndexOutOfRange { index: axis, d: spec.d() });
    }
    let j = axis - 1;
    let n = cone_direction(spec, j, xi, eps0)?;
    Ok((0..spec.d())
        .filter(|&l| l != j)
        .map(|l| coordinate_factor(spec.table().contact_order(j, l, spec.omegas()), n[l], t))
        .product::<f64>()
        / t)
}

/// Directions in the cone of `axis` (1-based): the axis itself, then a
/// deterministic spread covering the cone edge, near-axis directions with
/// small components, and directions with some components exactly zero.
pub fn cone_grid(d: usize, axis: usize, count: usize, eps0: f64) -> Vec<Vec<f64>> {
    let j = axis - 1;
    let others: Vec<usize> = (0..d).filter(|&l| l != j).collect();
    let mut out = Vec::with_capacity(count);
    let mut e = vec![0.0; d];
    e[j] = 1.0;
    out.push(e);
    let smalls = [1.0, 0.5, 0.1, 0.02, 0.003, 3e-4];
    let period = 6 * others.len().max(1);
    let mut k = 0usize;
    while out.len() < count && k < 100 * count {
        // later rounds rescale coordinates unevenly so directions stay distinct
        let round = (k / period) as f64;
        let mut v = vec![0.0; d];
        v[j] = 1.0;
        for (idx, &l) in others.iter().enumerate() {
            // leave one coordinate at zero on every third direction
            if k % 3 == 2 && idx == k % others.len() {
                continue;
            }
            let stretch = 1.0 + 0.5 * round * (idx + 1) as f64;
            let stretch = if (k / period) % 2 == 1 { 1.0 / stretch } else { stretch };
            let mag = smalls[(k + 2 * idx) % smalls.len()] * stretch;
            v[l] = if (k + idx).is_multiple_of(2) { mag } else { -mag };
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut n: Vec<f64> = v.iter().map(|x| x / norm).collect();
        if n[j].abs() < eps0 {
            // pull back to the cone edge
            let rest = (1.0 - eps0 * eps0).sqrt();
            let rn = others.iter().map(|&l| n[l] * n[l]).sum::<f64>().sqrt();
            for &l in &others {
                n[l] *= rest / rn;
            }
            n[j] = eps0;
        }
        if !out.contains(&n) {
            out.push(n);
        }
        k += 1;
    }
    out
}

pub fn log_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![t_min];
    }
    (0..n).map(|i| t_min * (t_max / t_min).powf(i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayRow {
    pub xi: Vec<f64>,
    pub t: f64,
    pub re: f64,
    pub im: f64,
    pub error: f64,
    /// Local envelope `max |χ̂|` over one period starting at `t`.
    pub envelope: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub axis: usize,
    pub rows: Vec<DecayRow>,
    pub max_ratio: f64,
    pub top_decade_slope: f64,
    pub pass: bool,
}

pub const ENVELOPE_SAMPLES: usize = 24;

/// Ratios of the local envelope of `|χ̂_D(tξ)|` to the decay bound. Passes
/// when the per-`t` maximum over directions has log-slope ≤ 0.05 over the
/// top decade. `t = 0` is skipped.
pub fn decay_check(
    spec: &DomainSpec,
    axis: usize,
    xis: &[Vec<f64>],
    ts: &[f64],
    eps0: f64,
    cache: &ProfileCache,
) -> Result<DecayReport> {
    let ts: Vec<f64> = ts.iter().cloned().filter(|t| *t > 0.0).collect();
    let mut dirs = Vec::with_capacity(xis.len());
    for xi in xis {
        theorem2_bound(spec, axis, xi, 1.0, eps0)?;
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        dirs.push(xi.iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    cache.prefetch(&dirs)?;
    let profiles: Vec<Arc<SliceProfile>> = dirs.iter().map(|x| cache.get(x)).collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> = (0..dirs.len()).flat_map(|i| ts.iter().map(move |&t| (i, t))).collect();
    let rows: Vec<DecayRow> = jobs
        .par_iter()
        .map(|&(i, t)| {
            let p = &profiles[i];
            let v = p.transform(t);
            let envelope = p.local_envelope(t, ENVELOPE_SAMPLES);
            let bound = theorem2_bound(spec, axis, &dirs[i], t, eps0).expect("checked above");
            DecayRow { xi: dirs[i].clone(), t, re: v.re, im: v.im, error: v.error, envelope, bound, ratio: envelope / bound }
        })
        .collect();
    let per_t: Vec<f64> =
        ts.iter().map(|&t| rows.iter().filter(|r| r.t == t).map(|r| r.ratio).fold(0.0, f64::max)).collect();
    let slope = top_decade_slope(&ts, &per_t).unwrap_or(f64::NAN);
    let max_ratio = per_t.iter().cloned().fold(0.0, f64::max);
    Ok(DecayReport { axis, rows, max_ratio, top_decade_slope: slope, pass: slope <= 0.05 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisAsymptotics {
    pub axis: usize,
    pub nu: f64,
    pub predicted_exponent: f64,
    pub fitted_exponent: f64,
    /// Envelope constant, a proxy for the leading coefficient's size.
    pub fitted_constant: f64,
    pub zero_spacing: f64,
    pub zero_spacing_rel_error: f64,
    /// Circular mean of `πν/2 - 2πt_k` mod π over zeros `t_k`, in `[-π/2, π/2)`.
    pub phase_offset: f64,
    pub zeros_used: usize,
    /// Exponent of the expansion's error term, `-1 - ν - 1/η`.
    pub error_exponent: f64,
}

/// Envelope fit of `|χ̂_D(t e_j)|` over log-spaced `t` in `[t_min, t_max]`
/// and zero-crossing analysis in `[zero_lo, zero_lo + zero_span]`.
pub fn axis_asymptotics(
    spec: &DomainSpec,
    axis: usize,
    t_min: f64,
    t_max: f64,
    points: usize,
    zero_lo: f64,
    zero_span: f64,
) -> Result<AxisAsymptotics> {
    if axis == 0 || axis > spec.d() {
        return Err(Error::IndexOutOfRange { index: axis, d: spec.d() });
    }
    if t_max < t_min * 10f64.powf(1.5) * (1.0 - 1e-12) {
        return Err(Error::Degenerate("axis fit needs at least 1.5 decades of t".into()));
    }
    let j = axis - 1;
    let mut e = vec![0.0; spec.d()];
    e[j] = 1.0;
    let profile = SliceProfile::build(spec, &e, &ProfileOptions::for_dimension(spec.d()))?;
    let ts = log_grid(t_min, t_max, points);
    let env: Vec<f64> = ts.par_iter().map(|&t| profile.local_envelope(t, 32)).collect();
    let fit = log_log_fit(&ts, &env).ok_or_else(|| Error::Degenerate("envelope fit failed".into()))?;

    let step = 1.0 / 64.0;
    let n_steps = (zero_span / step).round() as usize;
    let vals: Vec<(f64, f64)> = (0..=n_steps)
        .map(|i| {
            let t = zero_lo + step * i as f64;
            (t, profile.transform(t).re)
        })
        .collect();
    let mut zeros = Vec::new();
    for w in vals.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa * fb < 0.0 {
            let (mut lo, mut hi, flo) = (a, b, fa);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let fm = profile.transform(mid).re;
                if fm * flo > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
    }
    if zeros.len() < 4 {
        return Err(Error::Degenerate(format!("only {} zero crossings in the window", zeros.len())));
    }
    let spacing = (zeros[zeros.len() - 1] - zeros[0]) / (zeros.len() - 1) as f64;
    let nu = spec.nu(j);
    let (mut cs, mut sn) = (0.0, 0.0);
    for z in &zeros {
        let phi = 2.0 * (PI * nu / 2.0 - 2.0 * PI * z);
        cs += phi.cos();
        sn += phi.sin();
    }
    let phase_offset = 0.5 * sn.atan2(cs);
    let eta = spec.table().eta[j] as f64;
    Ok(AxisAsymptotics {
        axis,
        nu,
        predicted_exponent: -1.0 - nu,
        fitted_exponent: fit.slope,
        fitted_constant: fit.intercept.exp(),
        zero_spacing: spacing,
        zero_spacing_rel_error: (spacing - 0.5).abs() / 0.5,
        phase_offset,
        zeros_used: zeros.len(),
        error_exponent: -1.0 - nu - 1.0 / eta,
    })
}

/// Closed-form transform of the unit ball in `R^3` along any direction.
pub fn ball3_transform(t: f64) -> f64 {
    if t == 0.0 {
        return 4.0 * PI / 3.0;
    }
    let x = 2.0 * PI * t;
    if x < 1e-2 {
        // series avoids cancellation: (4π/3)(1 - x²/10 + x⁴/280)
        return 4.0 * PI / 3.0 * (1.0 - x * x / 10.0 + x.powi(4) / 280.0);
    }
    (x.sin() - x * x.cos()) / (2.0 * PI * PI * t.powi(3))
}
