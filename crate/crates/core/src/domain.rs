//! The block-structured domain family
//! `D = { x : Σ_p (Σ_{l ∈ block p} x_l^{ω_l})^{m_p} ≤ 1 }`
//! with even `ω_l`, together with its exponent tables and closed-form volume.
//!
//! Coordinates and blocks are 0-based throughout the library API.

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SpecError};
use crate::roots::newton_bracketed;
use crate::special::gamma;

/// One block as written in a spec file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawBlock {
    pub omegas: Vec<u32>,
}

/// Unchecked domain parameters, the JSON spec file format:
/// `{"d": 3, "blocks": [{"omegas": [4]}, {"omegas": [4, 4]}], "ms": [2, 2]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpec {
    pub d: usize,
    pub blocks: Vec<RawBlock>,
    pub ms: Vec<u32>,
}

impl RawSpec {
    pub fn new(blocks: &[&[u32]], ms: &[u32]) -> Self {
        Self {
            d: blocks.iter().map(|b| b.len()).sum(),
            blocks: blocks.iter().map(|b| RawBlock { omegas: b.to_vec() }).collect(),
            ms: ms.to_vec(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::SpecFormat(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    /// First coordinate of the block.
    pub start: usize,
    pub omegas: Vec<u32>,
    /// Outer exponent applied to the block sum.
    pub m: u32,
}

impl Block {
    pub fn coords(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.omegas.len()
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

/// Coupling exponents and axis decay data derived from a spec.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentTable {
    /// Block index of each coordinate.
    pub p_of: Vec<usize>,
    /// `m_jl[j][l]`: 1 if `j`, `l` share a block, else the outer exponent of `l`'s block.
    pub m_jl: Vec<Vec<u32>>,
    /// `ν_j = Σ_{l≠j} 1/(m_{j,l} ω_l)`.
    pub nu: Vec<Ratio<u64>>,
    /// `η_j = lcm_{l≠j} m_{j,l} ω_l`.
    pub eta: Vec<u64>,
}

impl ExponentTable {
    fn build(blocks: &[Block], omega: &[u32]) -> Self {
        let d = omega.len();
        let mut p_of = vec![0; d];
        for (p, b) in blocks.iter().enumerate() {
            for l in b.coords() {
                p_of[l] = p;
            }
        }
        let m_jl: Vec<Vec<u32>> = (0..d)
            .map(|j| {
                (0..d)
                    .map(|l| if p_of[j] == p_of[l] { 1 } else { blocks[p_of[l]].m })
                    .collect()
            })
            .collect();
        let mut nu = Vec::with_capacity(d);
        let mut eta = Vec::with_capacity(d);
        for j in 0..d {
            let mut acc = Ratio::from_integer(0u64);
            let mut lcm = 1u64;
            for l in (0..d).filter(|&l| l != j) {
                let w = m_jl[j][l] as u64 * omega[l] as u64;
                acc += Ratio::new(1, w);
                lcm = lcm.lcm(&w);
            }
            nu.push(acc);
            eta.push(lcm);
        }
        Self { p_of, m_jl, nu, eta }
    }

    pub fn nu_f64(&self, j: usize) -> f64 {
        let r = self.nu[j];
        *r.numer() as f64 / *r.denom() as f64
    }

    /// `m_{j,l} ω_l`, the contact order that governs decay along `l` near axis `j`.
    pub fn contact_order(&self, j: usize, l: usize, omega: &[u32]) -> u32 {
        self.m_jl[j][l] * omega[l]
    }
}

/// A validated domain. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainSpec {
    blocks: Vec<Block>,
    omega: Vec<u32>,
    table: ExponentTable,
    warnings: Vec<String>,
}

/// Check raw parameters and build the derived tables.
pub fn validate_spec(raw: &RawSpec) -> std::result::Result<DomainSpec, SpecError> {
    if raw.blocks.is_empty() {
        return Err(SpecError::NoBlocks);
    }
    if raw.blocks.len() != raw.ms.len() {
        return Err(SpecError::BlockCountMismatch { blocks: raw.blocks.len(), ms: raw.ms.len() });
    }
    let mut blocks = Vec::with_capacity(raw.blocks.len());
    let mut omega = Vec::new();
    for (p, (b, &m)) in raw.blocks.iter().zip(&raw.ms).enumerate() {
        if b.omegas.is_empty() {
            return Err(SpecError::EmptyBlock { block: p + 1 });
        }
        for &w in &b.omegas {
            let coord = omega.len() + 1;
            if w < 2 {
                return Err(if w % 2 == 1 {
                    SpecError::OddExponent { coord, value: w }
                } else {
                    SpecError::ExponentTooSmall { coord, value: w }
                });
            }
            if w % 2 == 1 {
                return Err(SpecError::OddExponent { coord, value: w });
            }
            omega.push(w);
        }
        if m < 1 {
            return Err(SpecError::OuterExponentTooSmall { block: p + 1, value: m });
        }
        blocks.push(Block { start: omega.len() - b.omegas.len(), omegas: b.omegas.clone(), m });
    }
    if raw.d != omega.len() {
        return Err(SpecError::DimensionMismatch { declared: raw.d, actual: omega.len() });
    }
    if raw.d < 2 {
        return Err(SpecError::DimensionTooSmall(raw.d));
    }
    let mut warnings = Vec::new();
    if raw.d == 2 {
        warnings.push("d = 2: remainder exponents are only claimed for d >= 3".to_string());
    }
    let table = ExponentTable::build(&blocks, &omega);
    Ok(DomainSpec { blocks, omega, table, warnings })
}

impl DomainSpec {
    pub fn from_raw(raw: &RawSpec) -> std::result::Result<Self, SpecError> {
        validate_spec(raw)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(validate_spec(&RawSpec::from_json(text)?)?)
    }

    /// `{ Σ_l x_l^ω ≤ 1 }` in dimension `d`.
    pub fn supersphere(d: usize, omega: u32) -> std::result::Result<Self, SpecError> {
        validate_spec(&RawSpec { d, blocks: vec![RawBlock { omegas: vec![omega; d] }], ms: vec![1] })
    }

    pub fn ball(d: usize) -> Self {
        Self::supersphere(d, 2).expect("ball is admissible")
    }

    pub fn to_raw(&self) -> RawSpec {
        RawSpec {
            d: self.d(),
            blocks: self.blocks.iter().map(|b| RawBlock { omegas: b.omegas.clone() }).collect(),
            ms: self.blocks.iter().map(|b| b.m).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.omega.len()
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn omegas(&self) -> &[u32] {
        &self.omega
    }

    pub fn table(&self) -> &ExponentTable {
        &self.table
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn block_of(&self, l: usize) -> usize {
        self.table.p_of[l]
    }

    pub fn nu(&self, j: usize) -> f64 {
        self.table.nu_f64(j)
    }

    /// `m_{j,l}` for 0-based coordinates.
    pub fn m_exponent(&self, j: usize, l: usize) -> Result<u32> {
        let d = self.d();
        for idx in [j, l] {
            if idx >= d {
                return Err(Error::IndexOutOfRange { index: idx, d });
            }
        }
        Ok(self.table.m_jl[j][l])
    }

    /// `Σ_p (Σ_l x_l^{ω_l})^{m_p}`; the domain is `{gauge ≤ 1}`.
    #[inline]
    pub fn gauge(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for b in &self.blocks {
            let mut inner = 0.0;
            for (w, &xl) in b.omegas.iter().zip(&x[b.start..]) {
                inner += xl.powi(*w as i32);
            }
            total += inner.powi(b.m as i32);
        }
        total
    }

    /// `F(x) = gauge(x) - 1`: negative inside, zero on the boundary.
    #[inline]
    pub fn eval_f(&self, x: &[f64]) -> f64 {
        self.gauge(x) - 1.0
    }

    /// Analytic gradient of `F`, written into `out`.
    pub fn grad_f_into(&self, x: &[f64], out: &mut [f64]) {
        for b in &self.blocks {
            let mut inner = 0.0;
            for (w, &xl) in b.omegas.iter().zip(&x[b.start..]) {
                inner += xl.powi(*w as i32);
            }
            let outer = b.m as f64 * inner.powi(b.m as i32 - 1);
            for (k, w) in b.omegas.iter().enumerate() {
                let l = b.start + k;
                out[l] = outer * *w as f64 * x[l].powi(*w as i32 - 1);
            }
        }
    }

    pub fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d()];
        self.grad_f_into(x, &mut g);
        g
    }

    /// Boundary distance along the ray through `u`: the `r > 0` with `F(r u/|u|) = 0`.
    pub fn radial_boundary(&self, u: &[f64]) -> f64 {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm > 0.0, "radial_boundary needs a nonzero direction");
        let dir: Vec<f64> = u.iter().map(|v| v / norm).collect();
        self.ray_exit(&vec![0.0; self.d()], &dir)
    }

    /// Largest `r` with `F(base + r·dir) ≤ 0`, for `base` strictly inside.
    pub fn ray_exit(&self, base: &[f64], dir: &[f64]) -> f64 {
        let d = self.d();
        self.ray_exit_with(base, dir, &mut vec![0.0; d], &mut vec![0.0; d])
    }

    /// [`Self::ray_exit`] with caller-provided scratch space of length `d`.
    pub fn ray_exit_with(&self, base: &[f64], dir: &[f64], p: &mut [f64], g: &mut [f64]) -> f64 {
        let at = |r: f64, p: &mut [f64]| {
            for ((pi, b), v) in p.iter_mut().zip(base).zip(dir) {
                *pi = b + r * v;
            }
        };
        let mut hi = 1.0;
        loop {
            at(hi, p);
            if self.eval_f(p) > 0.0 {
                break;
            }
            hi *= 2.0;
        }
        // gauge^{1/N} is close to linear along rays, so Newton converges fast
        let inv = 1.0 / self.top_degree() as f64;
        newton_bracketed(
            |r| {
                at(r, p);
                self.grad_f_into(p, g);
                let slope = g.iter().zip(dir).map(|(a, b)| a * b).sum::<f64>();
                let gauge = self.gauge(p);
                if gauge == 0.0 {
                    return (-1.0, 0.0);
                }
                let root = gauge.powf(inv);
                (root - 1.0, inv * root / gauge * slope)
            },
            0.0,
            hi,
            1e-16,
        )
    }

    /// `max_p (max ω in block p)·m_p`, the top homogeneity degree of the gauge.
    pub fn top_degree(&self) -> u32 {
        self.blocks.iter().map(|b| b.omegas.iter().max().unwrap() * b.m).max().unwrap()
    }

    /// Exact volume via block-wise Dirichlet reduction:
    /// `vol = Π_p (c_p α_p / m_p) Γ(α_p/m_p) / Γ(1 + Σ_p α_p/m_p)`.
    pub fn volume(&self) -> f64 {
        let mut num = 1.0;
        let mut beta_sum = 0.0;
        for b in &self.blocks {
            let (c, alpha) = block_measure(&b.omegas);
            let beta = alpha / b.m as f64;
            num *= c * alpha / b.m as f64 * gamma(beta);
            beta_sum += beta;
        }
        num / gamma(1.0 + beta_sum)
    }

    pub fn predicted_exponents(&self) -> ExponentReport {
        ExponentReport::for_spec(self)
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} ", self.d())?;
        for (p, b) in self.blocks.iter().enumerate() {
            if p > 0 {
                write!(f, "+")?;
            }
            write!(f, "({:?})^{}", b.omegas, b.m)?;
        }
        Ok(())
    }
}

/// `(c, α)` with `|{ y : Σ |y_l|^{ω_l} ≤ u }| = c u^α`.
pub fn block_measure(omegas: &[u32]) -> (f64, f64) {
    let alpha: f64 = omegas.iter().map(|&w| 1.0 / w as f64).sum();
    let mut c = 1.0;
    for &w in omegas {
        c *= 2.0 * gamma(1.0 + 1.0 / w as f64);
    }
    (c / gamma(1.0 + alpha), alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisTerm {
    /// 1-based coordinate label.
    pub axis: usize,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetTerm {
    /// 1-based coordinate label.
    pub axis: usize,
    /// 1-based labels of the subset S (contains `axis`).
    pub subset: Vec<usize>,
    pub exponent: f64,
}

/// Every term of the remainder bound with its label, plus the two-term
/// simplified bound `max{(d-1)(1-1/ω), d-2+2/(d+1)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub d: usize,
    pub axis_terms: Vec<AxisTerm>,
    pub subset_terms: Vec<SubsetTerm>,
    pub omega_max: u32,
    /// `(d-1)(1-1/ω)`.
    pub flat_term: f64,
    /// `d-2+2/(d+1)`.
    pub interior_term: f64,
    /// `max(flat_term, interior_term)`.
    pub simplified: f64,
    /// Maximum over all enumerated terms.
    pub overall: f64,
    pub warnings: Vec<String>,
}

impl ExponentReport {
    fn for_spec(spec: &DomainSpec) -> Self {
        let d = spec.d();
        let df = d as f64;
        let omega = spec.omegas();
        let table = spec.table();
        let inv = |j: usize, l: usize| 1.0 / table.contact_order(j, l, omega) as f64;

        let axis_terms: Vec<AxisTerm> = (0..d)
            .map(|j| AxisTerm { axis: j + 1, exponent: df - 1.0 - spec.nu(j) })
            .collect();

        let mut subset_terms = Vec::new();
        for j in 0..d {
            // every subset of the other coordinates, joined with j
            let others: Vec<usize> = (0..d).filter(|&l| l != j).collect();
            for mask in 1u64..(1u64 << others.len()) {
                let mut subset = vec![j];
                subset.extend(others.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &l)| l));
                subset.sort_unstable();
                let i = subset.len() as f64;
                let outside: f64 = (0..d).filter(|l| !subset.contains(l)).map(|l| inv(j, l)).sum();
                let exponent = df - 1.0 - (i - 1.0) / (df + 1.0) - 2.0 * df / (df + 1.0) * outside;
                subset_terms.push(SubsetTerm {
                    axis: j + 1,
                    subset: subset.iter().map(|l| l + 1).collect(),
                    exponent,
                });
            }
        }

        let omega_max = (0..d)
            .flat_map(|j| (0..d).map(move |l| (j, l)))
            .map(|(j, l)| table.contact_order(j, l, omega))
            .max()
            .unwrap_or(2);
        let flat_term = (df - 1.0) * (1.0 - 1.0 / omega_max as f64);
        let interior_term = df - 2.0 + 2.0 / (df + 1.0);
        let overall = axis_terms
            .iter()
            .map(|t| t.exponent)
            .chain(subset_terms.iter().map(|t| t.exponent))
            .fold(f64::NEG_INFINITY, f64::max);

        Self {
            d,
            axis_terms,
            subset_terms,
            omega_max,
            flat_term,
            interior_term,
            simplified: flat_term.max(interior_term),
            overall,
            warnings: spec.warnings().to_vec(),
        }
    }
}
