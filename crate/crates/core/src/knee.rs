//! Knee-point detection on a sampled curve.
//!
//! Four steps: smooth, min-max normalize both axes, form the difference
//! curve `y_d = y_norm - x_norm`, and accept the first local maximum of
//! `y_d` whose threshold (sensitivity times the mean x step) is crossed
//! before the next local maximum.

/// Gaussian smoothing with a symmetric window of `2 * half + 1` samples.
pub fn gaussian_smooth(ys: &[f64], half: usize) -> Vec<f64> {
    if half == 0 {
        return ys.to_vec();
    }
    let sigma = half as f64 / 2.0;
    let n = ys.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let mut num = 0.0;
            let mut den = 0.0;
            for j in lo..=hi {
                let d = j as f64 - i as f64;
                let w = (-d * d / (2.0 * sigma * sigma)).exp();
                num += w * ys[j];
                den += w;
            }
            num / den
        })
        .collect()
}

fn minmax_normalize(v: &[f64]) -> Option<Vec<f64>> {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return None;
    }
    Some(v.iter().map(|&x| (x - lo) / span).collect())
}

/// Index of the detected knee of a sampled curve, or `None` if no local
/// maximum of the difference curve passes the sensitivity test.
pub fn detect_knee(xs: &[f64], ys: &[f64], sensitivity: f64, smooth_half_window: usize) -> Option<usize> {
    let n = ys.len();
    if n < 5 || xs.len() != n {
        return None;
    }
    let smoothed = gaussian_smooth(ys, smooth_half_window);
    let y_norm = minmax_normalize(&smoothed)?;
    let x_norm = minmax_normalize(xs)?;
    let diff: Vec<f64> = y_norm.iter().zip(&x_norm).map(|(y, x)| y - x).collect();

    let mut maxima: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        if diff[i] > diff[i - 1] && diff[i] > diff[i + 1] {
            maxima.push(i);
        }
    }
    // Sensitivity threshold scaled by the mean step between consecutive x.
    let step = sensitivity * (x_norm[n - 1] - x_norm[0]) / (n - 1) as f64;
    for (m, &idx) in maxima.iter().enumerate() {
        let threshold = diff[idx] - step;
        let end = maxima.get(m + 1).copied().unwrap_or(n);
        if diff[idx + 1..end].iter().any(|&d| d < threshold) {
            return Some(idx);
        }
    }
    None
}
