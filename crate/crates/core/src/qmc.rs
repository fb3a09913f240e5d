//! Low-discrepancy point sets: shifted Halton sequences on the unit cube and
//! equal-area node sets on spheres, plus a membership-integration volume
//! estimate used as an independent check of the closed form.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::domain::DomainSpec;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Van der Corput radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u32) -> f64 {
    let b = b as u64;
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// Halton sequence in `[0,1)^dim` with a Cranley–Patterson random shift.
#[derive(Debug, Clone)]
pub struct ShiftedHalton {
    shift: Vec<f64>,
}

impl ShiftedHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton dimension limited to {}", PRIMES.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self { shift: (0..dim).map(|_| rng.gen::<f64>()).collect() }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// Point `i`, skipping the origin-anchored first point of the sequence.
    pub fn point_into(&self, i: u64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let v = radical_inverse(i + 1, PRIMES[k]) + self.shift[k];
            *o = v - v.floor();
        }
    }
}

/// Monte Carlo estimate of `vol(D)` from `n` shifted-Halton points in
/// `[-1,1]^d` (which contains `D`).
pub fn qmc_volume(spec: &DomainSpec, n: u64, seed: u64) -> f64 {
    let d = spec.d();
    let seq = ShiftedHalton::new(d, seed);
    let chunk = 1u64 << 16;
    let n_chunks = n.div_ceil(chunk);
    let hits: Vec<u64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut u = vec![0.0; d];
            let mut hits = 0u64;
            for i in c * chunk..((c + 1) * chunk).min(n) {
                seq.point_into(i, &mut u);
                for v in u.iter_mut() {
                    *v = 2.0 * *v - 1.0;
                }
                if spec.eval_f(&u) <= 0.0 {
                    hits += 1;
                }
            }
            hits
        })
        .collect();
    let total: u64 = hits.iter().sum();
    total as f64 / n as f64 * 2f64.powi(d as i32)
}

/// Inverse standard normal CDF (Acklam's rational approximation, relative
/// error below 1.2e-9).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383_577_518_672_69e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] =
        [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inverse_normal_cdf(1.0 - p)
    }
}

/// Equal-weight nodes on the unit sphere `S^{k-1} ⊂ R^k`, returned flat
/// (`n` rows of length `k`).
///
/// * `k = 2`: equispaced angles with a random offset.
/// * `k = 3`: Fibonacci lattice pushed through Archimedes' equal-area map.
/// * `k = 4`: Halton points pushed through the Hopf-type equal-area map.
/// * `k ≥ 5`: Halton points mapped to Gaussians and normalized.
///
/// In every case the even-indexed nodes form a node set of the same kind
/// with half the size, which callers use for error estimates.
pub fn sphere_nodes(k: usize, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n * k);
    match k {
        1 => {
            for i in 0..n {
                out.push(if i % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
        2 => {
            let off: f64 = rng.gen();
            for i in 0..n {
                let a = 2.0 * PI * (i as f64 + off) / n as f64;
                out.extend_from_slice(&[a.cos(), a.sin()]);
            }
        }
        3 => {
            let golden = 0.5 * (1.0 + 5f64.sqrt());
            let (oz, oa): (f64, f64) = (rng.gen(), rng.gen());
            for i in 0..n {
                let z = 1.0 - 2.0 * (i as f64 + oz) / n as f64;
                let a = 2.0 * PI * (i as f64 / golden + oa);
                let r = (1.0 - z * z).max(0.0).sqrt();
                out.extend_from_slice(&[r * a.cos(), r * a.sin(), z]);
            }
        }
        4 => {
            let seq = ShiftedHalton::new(3, rng.gen());
            let mut u = [0.0; 3];
            for i in 0..n {
                seq.point_into(prefix_order(i, n), &mut u);
                let (a, b) = ((1.0 - u[0]).sqrt(), u[0].sqrt());
                let (p, q) = (2.0 * PI * u[1], 2.0 * PI * u[2]);
                out.extend_from_slice(&[a * p.sin(), a * p.cos(), b * q.sin(), b * q.cos()]);
            }
        }
        _ => {
            let seq = ShiftedHalton::new(k, rng.gen());
            let mut u = vec![0.0; k];
            for i in 0..n {
                seq.point_into(prefix_order(i, n), &mut u);
                let g: Vec<f64> = u.iter().map(|&v| inverse_normal_cdf(v.clamp(1e-15, 1.0 - 1e-15))).collect();
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                out.extend(g.iter().map(|v| v / norm));
            }
        }
    }
    out
}

/// Interleaves the two halves of a sequence so that even positions hold
/// its first half; a Halton prefix is itself a low-discrepancy set.
fn prefix_order(i: usize, n: usize) -> u64 {
    let first = n.div_ceil(2);
    (if i.is_multiple_of(2) { i / 2 } else { first + i / 2 }) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn inverse_normal_round_trips_known_quantiles() {
        assert!(inverse_normal_cdf(0.5).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.975) - 1.959963984540054).abs() < 1e-8);
        assert!((inverse_normal_cdf(0.001) + 3.090232306167813).abs() < 1e-8);
    }

    #[test]
    fn sphere_nodes_integrate_low_moments() {
        for k in 2..=6 {
            let n = 20000;
            let pts = sphere_nodes(k, n, 7);
            let mut second = vec![0.0; k];
            for p in pts.chunks(k) {
                let norm: f64 = p.iter().map(|v| v * v).sum();
                assert!((norm - 1.0).abs() < 1e-12);
                for (s, v) in second.iter_mut().zip(p) {
                    *s += v * v / n as f64;
                }
            }
            for s in second {
                assert!((s - 1.0 / k as f64).abs() < 5e-3, "k={k}: {s}");
            }
            let mut half = vec![0.0; k];
            for p in pts.chunks(k).step_by(2) {
                for (s, v) in half.iter_mut().zip(p) {
                    *s += v / (n / 2) as f64;
                }
            }
            for s in half {
                assert!(s.abs() < 2e-2, "k={k}: half-set mean {s}");
            }
        }
    }

    #[test]
    fn volume_of_ball() {
        let v = qmc_volume(&DomainSpec::ball(3), 1 << 18, 1);
        assert!((v - 4.0 * PI / 3.0).abs() < 5e-3);
    }
}
