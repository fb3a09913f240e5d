//! Scalar root finding on brackets.

/// Root of `f` on `[lo, hi]` given `f(lo) <= 0 <= f(hi)`.
///
/// `f` returns the value and derivative. Newton steps are taken while they
/// stay inside the bracket and at least halve the step before last,
/// otherwise the bracket is bisected. Stops when the step falls below
/// `x_tol` relative to the root, the bracket collapses to a few ulps, or the
/// value is exactly zero.
pub fn newton_bracketed<F>(mut f: F, lo: f64, hi: f64, x_tol: f64) -> f64
where
    F: FnMut(f64) -> (f64, f64),
{
    let (mut xl, mut xh) = (lo, hi);
    let mut x = 0.5 * (lo + hi);
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    for _ in 0..200 {
        let (v, dv) = f(x);
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            xl = x;
        } else {
            xh = x;
        }
        let step = v / dv;
        let newton_ok = dv != 0.0 && step.is_finite() && x - step > xl && x - step < xh && (2.0 * v).abs() <= (dx_old * dv).abs();
        dx_old = dx;
        if newton_ok {
            dx = step;
            x -= dx;
        } else {
            dx = 0.5 * (xh - xl);
            x = xl + dx;
        }
        let scale = x.abs().max(f64::MIN_POSITIVE);
        if dx.abs() <= x_tol * scale || xh - xl <= 4.0 * f64::EPSILON * scale {
            return x;
        }
    }
    x
}

/// Root of an increasing function by bisection, `f(lo) <= 0 < f(hi)`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    for _ in 0..iters {
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_high_degree_roots() {
        // x^16 - 0.5 has a flat approach; Newton alone from 2 would crawl.
        let r = newton_bracketed(|x| (x.powi(16) - 0.5, 16.0 * x.powi(15)), 0.0, 2.0, 1e-15);
        assert!((r - 0.5_f64.powf(1.0 / 16.0)).abs() < 1e-14);
    }

    #[test]
    fn bisection_converges() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 100);
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
    }
}
