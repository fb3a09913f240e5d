//! Exact lattice point counting in `tD` for rational `t`.
//!
//! Membership of an integer point is decided in integer arithmetic after
//! clearing the denominator of `t`; floating point is only used to guess the
//! range of the innermost coordinate, and every guess is confirmed exactly.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::domain::DomainSpec;
use crate::error::{Error, Result};

/// A positive rational scale factor `t = numer/denom`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scale(Ratio<u64>);

impl Scale {
    pub fn new(numer: u64, denom: u64) -> Result<Self> {
        if denom == 0 {
            return Err(Error::InvalidScale(format!("{numer}/0")));
        }
        if numer == 0 {
            return Err(Error::NonPositiveScale(format!("{numer}/{denom}")));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn integer(n: u64) -> Self {
        Self::new(n, 1).expect("positive integer scale")
    }

    /// Nearest rational with the given denominator, e.g. grid points.
    pub fn round_to(t: f64, denom: u64) -> Result<Self> {
        let numer = (t * denom as f64).round();
        if !(numer >= 1.0) || !numer.is_finite() {
            return Err(Error::NonPositiveScale(format!("{t}")));
        }
        Self::new(numer as u64, denom)
    }

    /// The exact value of a finite positive `f64`, when its binary
    /// denominator fits in 64 bits.
    pub fn from_f64_exact(t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::NonPositiveScale(format!("{t}")));
        }
        let r = Ratio::<i128>::approximate_float(t).ok_or_else(|| Error::InvalidScale(format!("{t}")))?;
        if (*r.numer() as f64) / (*r.denom() as f64) != t {
            return Err(Error::InvalidScale(format!("{t} has no exact 64-bit rational form")));
        }
        let n = u64::try_from(*r.numer()).map_err(|_| Error::InvalidScale(format!("{t}")))?;
        let d = u64::try_from(*r.denom()).map_err(|_| Error::InvalidScale(format!("{t}")))?;
        Self::new(n, d)
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }
}

impl FromStr for Scale {
    type Err = Error;

    /// Accepts `"4"`, `"2.5"`, and `"5/2"`; decimals are converted exactly.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidScale(s.to_string());
        if s.starts_with('-') {
            return Err(Error::NonPositiveScale(s.to_string()));
        }
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            return Self::new(n, d);
        }
        let (int_part, frac_part) = s.split_once('.').unwrap_or((s, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) || frac_part.len() > 18 {
            return Err(bad());
        }
        let denom = 10u64.checked_pow(frac_part.len() as u32).ok_or_else(bad)?;
        let int: u64 = if int_part.is_empty() { 0 } else { int_part.parse().map_err(|_| bad())? };
        let frac: u64 = if frac_part.is_empty() { 0 } else { frac_part.parse().map_err(|_| bad())? };
        let numer = int.checked_mul(denom).and_then(|v| v.checked_add(frac)).ok_or_else(bad)?;
        Self::new(numer, denom)
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom() == 1 {
            write!(f, "{}", self.numer())
        } else {
            write!(f, "{}/{}", self.numer(), self.denom())
        }
    }
}

impl Serialize for Scale {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

/// Exact test of `k ∈ tD` for `t = a/b`:
/// `Σ_p I_p^{m_p} a^{N - Ω_p m_p} ≤ a^N` with
/// `I_p = Σ_{l ∈ p} (b|k_l|)^{ω_l} a^{Ω_p - ω_l}`, `Ω_p = max ω` in block `p`,
/// `N = max_p Ω_p m_p`.
#[derive(Debug, Clone)]
pub struct ExactMembership<'a> {
    spec: &'a DomainSpec,
    a: u64,
    b: u64,
    block_top: Vec<u32>,
    n_top: u32,
}

impl<'a> ExactMembership<'a> {
    pub fn new(spec: &'a DomainSpec, t: Scale) -> Self {
        let block_top: Vec<u32> = spec.blocks().iter().map(|b| *b.omegas.iter().max().unwrap()).collect();
        let n_top = spec.blocks().iter().zip(&block_top).map(|(b, w)| w * b.m).max().unwrap();
        Self { spec, a: t.numer(), b: t.denom(), block_top, n_top }
    }

    pub fn contains(&self, k: &[i64]) -> bool {
        self.contains_u128(k).unwrap_or_else(|| self.contains_big(k))
    }

    fn contains_u128(&self, k: &[i64]) -> Option<bool> {
        let a = self.a as u128;
        let b = self.b as u128;
        let limit = a.checked_pow(self.n_top)?;
        let mut total: u128 = 0;
        for (blk, &top) in self.spec.blocks().iter().zip(&self.block_top) {
            let mut inner: u128 = 0;
            for (w, &kl) in blk.omegas.iter().zip(&k[blk.start..]) {
                let v = (kl.unsigned_abs() as u128).checked_mul(b)?;
                let term = v.checked_pow(*w)?.checked_mul(a.checked_pow(top - w)?)?;
                inner = inner.checked_add(term)?;
            }
            let term = inner.checked_pow(blk.m)?.checked_mul(a.checked_pow(self.n_top - top * blk.m)?)?;
            total = total.checked_add(term)?;
            if total > limit {
                return Some(false);
            }
        }
        Some(total <= limit)
    }

    fn contains_big(&self, k: &[i64]) -> bool {
        let a = BigUint::from(self.a);
        let b = BigUint::from(self.b);
        let mut total = BigUint::zero();
        for (blk, &top) in self.spec.blocks().iter().zip(&self.block_top) {
            let mut inner = BigUint::zero();
            for (w, &kl) in blk.omegas.iter().zip(&k[blk.start..]) {
                let v = BigUint::from(kl.unsigned_abs()) * &b;
                inner += v.pow(*w) * a.pow(top - w);
            }
            total += inner.pow(blk.m) * a.pow(self.n_top - top * blk.m);
        }
        total <= a.pow(self.n_top)
    }
}

/// Largest `M ≥ 0` such that the point with coordinate `i` equal to `M`,
/// coordinates above `i` equal to `fixed`, and coordinates below `i` zero
/// lies in `tD`. `None` if even `M = 0` is outside (infeasible prefix).
///
/// By the sign symmetry of `D` the admissible values of coordinate `i` are
/// exactly `[-M, M]`.
pub fn coordinate_range(spec: &DomainSpec, fixed: &[i64], t: Scale) -> Option<i64> {
    let member = ExactMembership::new(spec, t);
    let i = spec.d() - 1 - fixed.len();
    let mut k = vec![0i64; spec.d()];
    k[i + 1..].copy_from_slice(fixed);
    coordinate_range_with(spec, &member, &mut k, i, t.to_f64())
}

fn coordinate_range_with(spec: &DomainSpec, member: &ExactMembership, k: &mut [i64], i: usize, t: f64) -> Option<i64> {
    let guess = range_guess(spec, k, i, t);
    let mut m = guess.max(0);
    k[i] = m;
    if !member.contains(k) {
        loop {
            m -= 1;
            if m < 0 {
                k[i] = 0;
                return None;
            }
            k[i] = m;
            if member.contains(k) {
                break;
            }
        }
    } else {
        loop {
            k[i] = m + 1;
            if !member.contains(k) {
                break;
            }
            m += 1;
        }
    }
    k[i] = 0;
    Some(m)
}

/// Floating-point estimate of the range bound for coordinate `i`, ignoring
/// the current value of `k[i]`.
fn range_guess(spec: &DomainSpec, k: &[i64], i: usize, t: f64) -> i64 {
    let p = spec.block_of(i);
    let mut other = 0.0;
    let mut own = 0.0;
    for (q, blk) in spec.blocks().iter().enumerate() {
        let mut inner = 0.0;
        for (off, w) in blk.omegas.iter().enumerate() {
            let l = blk.start + off;
            if l == i {
                continue;
            }
            inner += (k[l] as f64 / t).powi(*w as i32);
        }
        if q == p {
            own = inner;
        } else {
            other += inner.powi(blk.m as i32);
        }
    }
    let budget = 1.0 - other;
    if budget < 0.0 {
        return -1;
    }
    let rest = budget.powf(1.0 / spec.blocks()[p].m as f64) - own;
    if rest < 0.0 {
        return -1;
    }
    (t * rest.powf(1.0 / spec.omegas()[i] as f64)).floor() as i64
}

#[derive(Debug, Clone, Copy)]
pub struct CountOptions {
    /// Count only the nonnegative orthant and weight by `2^{#nonzero}`.
    pub fold_signs: bool,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self { fold_signs: true }
    }
}

/// `#(tD ∩ Z^d)` for the closed domain.
pub fn count_lattice_points(spec: &DomainSpec, t: Scale) -> BigUint {
    count_lattice_points_with(spec, t, CountOptions::default())
}

pub fn count_lattice_points_with(spec: &DomainSpec, t: Scale, opts: CountOptions) -> BigUint {
    let d = spec.d();
    let member = ExactMembership::new(spec, t);
    let tf = t.to_f64();
    let top = d - 1;
    let mut k = vec![0i64; d];
    let Some(m_top) = coordinate_range_with(spec, &member, &mut k, top, tf) else {
        return BigUint::zero();
    };
    let lo = if opts.fold_signs { 0 } else { -m_top };
    let partial: Vec<u128> = (lo..=m_top)
        .into_par_iter()
        .map(|v| {
            let mut k = vec![0i64; d];
            k[top] = v;
            let weight = if opts.fold_signs && v != 0 { 2 } else { 1 };
            weight * count_below(spec, &member, &mut k, top, tf, opts.fold_signs)
        })
        .collect();
    let total: u128 = partial.iter().sum();
    BigUint::from(total)
}

/// Points with coordinates `>= level` fixed in `k`, summing over the rest.
fn count_below(spec: &DomainSpec, member: &ExactMembership, k: &mut [i64], level: usize, t: f64, fold: bool) -> u128 {
    let i = level - 1;
    let Some(m) = coordinate_range_with(spec, member, k, i, t) else {
        return 0;
    };
    if i == 0 {
        return 2 * m as u128 + 1;
    }
    let mut acc = 0u128;
    let lo = if fold { 0 } else { -m };
    for v in lo..=m {
        k[i] = v;
        let weight = if fold && v != 0 { 2 } else { 1 };
        acc += weight * count_below(spec, member, k, i, t, fold);
    }
    k[i] = 0;
    acc
}

/// Default ceiling on `t` for the brute-force oracle.
pub const ORACLE_CAP: f64 = 20.0;

/// Full scan of `[-⌈t⌉, ⌈t⌉]^d` (every coordinate of `D` is bounded by 1),
/// testing `F(k/t) ≤ 0` in exact rational arithmetic. Test oracle only.
pub fn brute_force_count(spec: &DomainSpec, t: Scale) -> Result<BigUint> {
    brute_force_count_capped(spec, t, ORACLE_CAP)
}

pub fn brute_force_count_capped(spec: &DomainSpec, t: Scale, cap: f64) -> Result<BigUint> {
    if t.to_f64() > cap {
        return Err(Error::OracleCap { t: t.to_f64(), cap });
    }
    let d = spec.d();
    let r = t.numer().div_ceil(t.denom()) as i64;
    let t_big = BigRational::new(BigInt::from(t.numer()), BigInt::from(t.denom()));
    let one = BigRational::one();
    // (v/t)^{ω_l} for every coordinate l and every v in [-r, r]
    let powers: Vec<Vec<BigRational>> = spec
        .omegas()
        .iter()
        .map(|&w| (-r..=r).map(|v| pow_ratio(&(BigRational::from_integer(BigInt::from(v)) / &t_big), w)).collect())
        .collect();
    let counts: Vec<u64> = (-r..=r)
        .into_par_iter()
        .map(|first| {
            let mut k = vec![-r; d];
            k[0] = first;
            let mut n = 0u64;
            loop {
                let mut total = BigRational::zero();
                for blk in spec.blocks() {
                    let mut inner = BigRational::zero();
                    for l in blk.coords() {
                        inner += &powers[l][(k[l] + r) as usize];
                    }
                    total += pow_ratio(&inner, blk.m);
                }
                if total <= one {
                    n += 1;
                }
                // odometer over coordinates 1..d
                let mut pos = 1;
                loop {
                    if pos == d {
                        return n;
                    }
                    if k[pos] < r {
                        k[pos] += 1;
                        break;
                    }
                    k[pos] = -r;
                    pos += 1;
                }
            }
        })
        .collect();
    Ok(BigUint::from(counts.iter().sum::<u64>()))
}

fn pow_ratio(x: &BigRational, e: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// Count, volume term and remainder `R_D(t) = #(tD ∩ Z^d) - vol(D) t^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountResult {
    pub t: Scale,
    #[serde(serialize_with = "serialize_biguint")]
    pub count: BigUint,
    pub volume_term: f64,
    pub remainder: f64,
}

pub(crate) fn serialize_biguint<S: Serializer>(v: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

pub fn remainder(spec: &DomainSpec, t: Scale) -> CountResult {
    remainder_with_volume(spec, t, spec.volume())
}

pub fn remainder_with_volume(spec: &DomainSpec, t: Scale, volume: f64) -> CountResult {
    let count = count_lattice_points(spec, t);
    let volume_term = volume * t.to_f64().powi(spec.d() as i32);
    let remainder = count.to_f64().unwrap_or(f64::INFINITY) - volume_term;
    CountResult { t, count, volume_term, remainder }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RawSpec;

    fn kn() -> DomainSpec {
        DomainSpec::from_raw(&RawSpec::new(&[&[4], &[4, 4]], &[2, 2])).unwrap()
    }

    #[test]
    fn scale_parsing() {
        assert_eq!("2.5".parse::<Scale>().unwrap(), Scale::new(5, 2).unwrap());
        assert_eq!("5/2".parse::<Scale>().unwrap(), Scale::new(5, 2).unwrap());
        assert_eq!("4".parse::<Scale>().unwrap(), Scale::integer(4));
        assert_eq!(".25".parse::<Scale>().unwrap(), Scale::new(1, 4).unwrap());
        assert!(matches!("0".parse::<Scale>(), Err(Error::NonPositiveScale(_))));
        assert!(matches!("-1".parse::<Scale>(), Err(Error::NonPositiveScale(_))));
        assert!(matches!("abc".parse::<Scale>(), Err(Error::InvalidScale(_))));
        assert_eq!(Scale::new(10, 4).unwrap().to_string(), "5/2");
        assert_eq!(Scale::from_f64_exact(2.75).unwrap(), Scale::new(11, 4).unwrap());
        assert_eq!(Scale::from_f64_exact(3.0).unwrap(), Scale::integer(3));
    }

    #[test]
    fn count_examples() {
        let ball = DomainSpec::ball(3);
        assert_eq!(count_lattice_points(&ball, Scale::integer(1)), BigUint::from(7u32));
        assert_eq!(count_lattice_points(&ball, Scale::integer(2)), BigUint::from(33u32));
        assert_eq!(count_lattice_points(&kn(), Scale::integer(1)), BigUint::from(7u32));
    }

    #[test]
    fn brute_force_examples() {
        let half = Scale::new(1, 2).unwrap();
        let ss4 = DomainSpec::supersphere(3, 4).unwrap();
        assert_eq!(brute_force_count(&DomainSpec::ball(3), Scale::integer(1)).unwrap(), BigUint::from(7u32));
        assert_eq!(brute_force_count(&ss4, Scale::integer(1)).unwrap(), BigUint::from(7u32));
        assert_eq!(brute_force_count(&kn(), half).unwrap(), BigUint::from(1u32));
        assert_eq!(brute_force_count(&DomainSpec::ball(3), Scale::integer(2)).unwrap(), BigUint::from(33u32));
        assert!(matches!(brute_force_count(&ss4, Scale::integer(21)), Err(Error::OracleCap { .. })));
    }

    #[test]
    fn coordinate_range_examples() {
        let ss4 = DomainSpec::supersphere(3, 4).unwrap();
        assert_eq!(coordinate_range(&ss4, &[5, 5], Scale::integer(10)), Some(9));
        let ball = DomainSpec::ball(3);
        assert_eq!(coordinate_range(&ball, &[0, 2], Scale::integer(2)), Some(0));
        assert_eq!(coordinate_range(&ball, &[2, 2], Scale::integer(2)), None);
    }

    #[test]
    fn overflow_falls_back_to_big_integers() {
        // a^N with a = 10^6 and N = 16 is far beyond u128
        let ss8 = DomainSpec::supersphere(3, 8).unwrap();
        let t = Scale::new(3_000_001, 1_000_000).unwrap();
        let m = ExactMembership::new(&ss8, t);
        assert!(m.contains_u128(&[3, 0, 0]).is_none());
        assert!(m.contains(&[3, 0, 0]));
        assert!(!m.contains(&[3, 1, 0]));
        assert_eq!(count_lattice_points(&ss8, t), brute_force_count(&ss8, t).unwrap());
    }

    #[test]
    fn remainder_examples() {
        let ball = DomainSpec::ball(3);
        let r = remainder(&ball, Scale::integer(2));
        assert!((r.remainder - (33.0 - 32.0 * std::f64::consts::PI / 3.0)).abs() < 1e-12);
        assert!((r.remainder + 0.510).abs() < 1e-3);
        let r = remainder(&ball, Scale::integer(1));
        assert!((r.remainder - 2.811).abs() < 1e-3);
        let half = Scale::new(1, 2).unwrap();
        let r = remainder(&kn(), half);
        assert_eq!(r.count, BigUint::from(1u32));
        assert!((r.remainder - (1.0 - kn().volume() / 8.0)).abs() < 1e-14);
    }
}
