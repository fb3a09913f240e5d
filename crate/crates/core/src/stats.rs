//! Least-squares helpers for log–log exponent estimation.

use serde::{Deserialize, Serialize};

/// Weighted least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn weighted_line_fit(xs: &[f64], ys: &[f64], ws: &[f64]) -> Option<LineFit> {
    let wsum: f64 = ws.iter().sum();
    if xs.len() < 2 || wsum <= 0.0 {
        return None;
    }
    let mx = xs.iter().zip(ws).map(|(x, w)| x * w).sum::<f64>() / wsum;
    let my = ys.iter().zip(ws).map(|(y, w)| y * w).sum::<f64>() / wsum;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for ((x, y), w) in xs.iter().zip(ys).zip(ws) {
        sxx += w * (x - mx) * (x - mx);
        sxy += w * (x - mx) * (y - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some(LineFit { slope, intercept: my - slope * mx })
}

pub fn line_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    weighted_line_fit(xs, ys, &vec![1.0; xs.len()])
}

/// Least-squares line in log–log coordinates, each point weighted by its
/// share of the log-t axis so dense and sparse parts of a grid count alike.
pub fn log_log_fit(ts: &[f64], values: &[f64]) -> Option<LineFit> {
    let pts: Vec<(f64, f64)> = ts
        .iter()
        .zip(values)
        .filter(|(t, v)| **t > 0.0 && **v > 0.0)
        .map(|(t, v)| (t.ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let n = xs.len();
    let ws: Vec<f64> = (0..n)
        .map(|i| {
            let left = if i == 0 { xs[0] } else { 0.5 * (xs[i - 1] + xs[i]) };
            let right = if i + 1 == n { xs[n - 1] } else { 0.5 * (xs[i] + xs[i + 1]) };
            let w = right - left;
            if n == 2 { 1.0 } else { w.max(0.0) }
        })
        .collect();
    weighted_line_fit(&xs, &ys, &ws)
}

pub fn running_max(values: &[f64]) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    values
        .iter()
        .map(|v| {
            best = best.max(*v);
            best
        })
        .collect()
}

/// Log–log slope of `values` restricted to `t ∈ [t_max/10, t_max]`.
///
/// Used as the "trendless" test: a bounded ratio has slope near zero here.
pub fn top_decade_slope(ts: &[f64], values: &[f64]) -> Option<f64> {
    let t_max = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = t_max / 10.0 * (1.0 - 1e-12);
    let (t_sel, v_sel): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= lo)
        .map(|(t, v)| (*t, *v))
        .unzip();
    log_log_fit(&t_sel, &v_sel).map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let ts: Vec<f64> = (0..40).map(|i| 2.0 * 1.13f64.powi(i)).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 3.0 * t.powf(1.5)).collect();
        let f = log_log_fit(&ts, &vs).unwrap();
        assert!((f.slope - 1.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn running_max_is_monotone() {
        assert_eq!(running_max(&[1.0, 3.0, 2.0, 5.0]), vec![1.0, 3.0, 3.0, 5.0]);
    }

    #[test]
    fn top_decade_ignores_early_points() {
        let ts: Vec<f64> = (1..=100).map(|i| i as f64 * 10.0).collect();
        let vs: Vec<f64> = ts.iter().map(|&t| if t < 100.0 { t } else { 7.0 }).collect();
        assert!(top_decade_slope(&ts, &vs).unwrap().abs() < 1e-12);
    }
}
