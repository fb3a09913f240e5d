//! Quadrature building blocks: Gauss–Legendre rules, double-exponential
//! (tanh–sinh) integration for endpoint singularities, and a Legendre–Filon
//! rule that integrates `f(s) e^{-iωs}` with cost independent of `ω`.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }

    /// Legendre coefficients `a_k` (k < n) of the degree `n-1` interpolant
    /// through `values` sampled at this rule's nodes.
    pub fn legendre_coefficients(&self, values: &[f64]) -> Vec<f64> {
        let n = self.len();
        debug_assert_eq!(values.len(), n);
        let mut coef = vec![0.0; n];
        for ((&x, &w), &v) in self.nodes.iter().zip(&self.weights).zip(values) {
            let wv = w * v;
            let mut p_prev = 1.0;
            let mut p = x;
            coef[0] += wv;
            if n > 1 {
                coef[1] += wv * x;
            }
            for k in 2..n {
                let kf = k as f64;
                let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
                p_prev = p;
                p = next;
                coef[k] += wv * p;
            }
        }
        for (k, c) in coef.iter_mut().enumerate() {
            *c *= (2 * k + 1) as f64 / 2.0;
        }
        coef
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * p - pm1) / (x * x - 1.0);
    (p, d)
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Tanh–sinh quadrature on `[a, b]`.
///
/// The integrand receives `(x, distance_to_a, distance_to_b)`; the distances
/// are computed without cancellation so integrands with algebraic endpoint
/// singularities can be evaluated accurately right next to the endpoints.
pub fn tanh_sinh<F>(a: f64, b: f64, rel_tol: f64, mut f: F) -> Integral
where
    F: FnMut(f64, f64, f64) -> f64,
{
    if b <= a {
        return Integral { value: 0.0, error: 0.0 };
    }
    let hw = 0.5 * (b - a);
    let half_pi = 0.5 * PI;

    let mut eval = |tau: f64| -> f64 {
        let u = half_pi * tau.sinh();
        let cu = u.cosh();
        let w = half_pi * tau.cosh() / (cu * cu);
        // 1 - |x| = 1 / (e^{|u|} cosh u)
        let gap = 1.0 / (u.abs().exp() * cu);
        if w * hw < 1e-300 || gap == 0.0 {
            return 0.0;
        }
        let (x, da, db) = if u >= 0.0 {
            let db = hw * gap;
            (b - db, b - a - db, db)
        } else {
            let da = hw * gap;
            (a + da, da, b - a - da)
        };
        let v = f(x, da, db);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };

    let tau_max = 6.5;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= tau_max {
        let tau = k as f64 * h;
        sum += eval(tau) + eval(-tau);
        k += 1;
    }
    let mut estimate = sum * h * hw;
    let mut error = f64::INFINITY;
    for _level in 0..9 {
        h *= 0.5;
        let mut add = 0.0;
        let mut k = 1;
        while k as f64 * h <= tau_max {
            let tau = k as f64 * h;
            add += eval(tau) + eval(-tau);
            k += 2;
        }
        sum += add;
        let next = sum * h * hw;
        error = (next - estimate).abs();
        estimate = next;
        if error <= rel_tol * estimate.abs() || error < 1e-300 {
            break;
        }
    }
    Integral { value: estimate, error }
}

/// Spherical Bessel functions `j_0(x) .. j_{n-1}(x)` for `x >= 0`.
pub fn spherical_bessel_j(n: usize, x: f64, out: &mut [f64]) {
    debug_assert!(out.len() >= n);
    if n == 0 {
        return;
    }
    if x == 0.0 {
        out[0] = 1.0;
        for v in out.iter_mut().take(n).skip(1) {
            *v = 0.0;
        }
        return;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    if x > n as f64 {
        // Upward recurrence is stable once x exceeds the order.
        out[0] = j0;
        if n > 1 {
            out[1] = s / (x * x) - c / x;
        }
        for k in 2..n {
            out[k] = (2 * k - 1) as f64 / x * out[k - 1] - out[k - 2];
        }
        return;
    }
    // Miller's downward recurrence, normalized by sum (2k+1) j_k^2 = 1.
    let start = n + 16 + x as usize;
    let mut f_next = 0.0;
    let mut f_cur = 1e-30;
    let tmp = &mut out[..n];
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        if k < n {
            tmp[k] = f_cur;
        }
        norm += (2 * k + 1) as f64 * f_cur * f_cur;
        if k == 0 {
            break;
        }
        let f_prev = (2 * k + 1) as f64 / x * f_cur - f_next;
        f_next = f_cur;
        f_cur = f_prev;
        if f_cur.abs() > 1e100 {
            f_cur *= 1e-200;
            f_next *= 1e-200;
            norm *= 1e-200;
            norm *= 1e-200;
            for v in tmp.iter_mut() {
                *v *= 1e-200;
            }
        }
    }
    let mut scale = 1.0 / norm.sqrt();
    // Fix the sign from whichever of j0, j1 is better conditioned.
    if j0.abs() > 1e-3 {
        if (tmp[0] * scale).signum() != j0.signum() {
            scale = -scale;
        }
    } else if n > 1 {
        let j1 = s / (x * x) - c / x;
        if (tmp[1] * scale).signum() != j1.signum() {
            scale = -scale;
        }
    }
    for v in tmp.iter_mut() {
        *v *= scale;
    }
}

/// `∫_{c-w}^{c+w} p(s) e^{-iωs} ds` where `p` is given by Legendre
/// coefficients on the panel. Returns `(re, im)`.
///
/// Uses `∫_{-1}^{1} P_k(x) e^{-iκx} dx = 2 (-i)^k j_k(κ)`, so the result is
/// exact for the polynomial for every frequency.
pub fn filon_panel(coef: &[f64], center: f64, half_width: f64, omega: f64, bessel: &mut [f64]) -> (f64, f64) {
    let n = coef.len();
    let kappa = (omega * half_width).abs();
    spherical_bessel_j(n, kappa, bessel);
    // Σ a_k (-i)^k j_k, with the sign of ω folded into odd terms.
    let odd_sign = if omega < 0.0 { -1.0 } else { 1.0 };
    let mut re = 0.0;
    let mut im = 0.0;
    for k in 0..n {
        let v = coef[k] * bessel[k];
        match k % 4 {
            0 => re += v,
            1 => im -= odd_sign * v,
            2 => re -= v,
            _ => im += odd_sign * v,
        }
    }
    let (sn, cs) = (omega * center).sin_cos();
    // multiply by 2w e^{-iωc}
    let scale = 2.0 * half_width;
    (scale * (re * cs + im * sn), scale * (im * cs - re * sn))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        let w: f64 = gl.weights.iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
        // ∫_0^2 x^15 dx = 2^16 / 16
        let v = gl.integrate(0.0, 2.0, |x| x.powi(15));
        assert!((v - 4096.0).abs() < 1e-9);
    }

    #[test]
    fn legendre_projection_recovers_polynomial() {
        let gl = GaussLegendre::new(6);
        // P_2 = (3x^2 - 1)/2, so 3x^2 = 2 P_2 + 1
        let vals: Vec<f64> = gl.nodes.iter().map(|x| 3.0 * x * x + x).collect();
        let c = gl.legendre_coefficients(&vals);
        assert!((c[0] - 1.0).abs() < 1e-14);
        assert!((c[1] - 1.0).abs() < 1e-14);
        assert!((c[2] - 2.0).abs() < 1e-14);
        assert!(c[3..].iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        // ∫_0^1 x^{-1/2} dx = 2
        let r = tanh_sinh(0.0, 1.0, 1e-13, |_, da, _| da.powf(-0.5));
        assert!((r.value - 2.0).abs() < 1e-11, "{r:?}");
        // ∫_0^1 (1-x)^{1/8} dx = 8/9
        let r = tanh_sinh(0.0, 1.0, 1e-13, |_, _, db| db.powf(0.125));
        assert!((r.value - 8.0 / 9.0).abs() < 1e-12, "{r:?}");
    }

    fn bessel_reference(n: usize, x: f64) -> f64 {
        // Power series, fine for the moderate arguments used below.
        let mut dfact = 1.0;
        for k in 0..=n {
            dfact *= (2 * k + 1) as f64;
        }
        let mut term = x.powi(n as i32) / dfact;
        let mut sum = term;
        for m in 1..200 {
            term *= -x * x / (2.0 * m as f64 * (2 * (n + m) + 1) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    }

    #[test]
    fn spherical_bessel_matches_series() {
        let mut out = vec![0.0; 16];
        for &x in &[1e-6, 0.3, 1.0, 2.7, 7.5] {
            spherical_bessel_j(16, x, &mut out);
            for (n, &got) in out.iter().enumerate() {
                let want = bessel_reference(n, x);
                let scale = want.abs().max(1e-12);
                assert!((got - want).abs() / scale < 1e-9, "j_{n}({x}) = {got}, want {want}");
            }
        }
        // large arguments on both sides of the recurrence switch (mpmath values)
        let table = [
            (15.9, [-0.012003684363156544, 0.026927291209940918, -0.043269461448377865, 0.06420388467307644]),
            (16.2, [-0.029161851012251036, 0.009239355667548643, -0.05388680528286777, 0.06899889785611694]),
            (25.0, [-0.005294070003910921, -0.036117795989722375, -0.03625328560112857, 0.005516931434839718]),
        ];
        for (x, want) in table {
            spherical_bessel_j(16, x, &mut out);
            for (i, n) in [0, 5, 10, 15].into_iter().enumerate() {
                assert!((out[n] - want[i]).abs() < 1e-13, "j_{n}({x}) = {}, want {}", out[n], want[i]);
            }
        }
    }

    #[test]
    fn filon_matches_direct_integration() {
        // p(s) = 1 + s - s^2 on [0.2, 0.6], several frequencies
        let gl = GaussLegendre::new(8);
        let (c, w) = (0.4, 0.2);
        let vals: Vec<f64> = gl.nodes.iter().map(|x| {
            let s = c + w * x;
            1.0 + s - s * s
        }).collect();
        let coef = gl.legendre_coefficients(&vals);
        let fine = GaussLegendre::new(64);
        let mut buf = vec![0.0; 8];
        for &om in &[0.0, 1.0, 13.0, -40.0, 300.0] {
            let (re, im) = filon_panel(&coef, c, w, om, &mut buf);
            let n = 200;
            let (mut dre, mut dim) = (0.0, 0.0);
            for i in 0..n {
                let a = 0.2 + 0.4 * i as f64 / n as f64;
                let b = a + 0.4 / n as f64;
                dre += fine.integrate(a, b, |s| (1.0 + s - s * s) * (om * s).cos());
                dim -= fine.integrate(a, b, |s| (1.0 + s - s * s) * (om * s).sin());
            }
            assert!((re - dre).abs() < 1e-13 && (im - dim).abs() < 1e-13, "ω={om}: {re},{im} vs {dre},{dim}");
        }
    }
}
