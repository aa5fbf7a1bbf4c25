//! Sample statistics for episode outcomes.

/// Mean and 95% confidence half-width `1.96 · sd / √n` (sample sd).
/// `None` for the half-width when `n < 2`.
pub fn mean_ci95(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len();
    if n == 0 {
        return (0.0, None);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, Some(1.96 * var.sqrt() / (n as f64).sqrt()))
}

/// True when the intervals `m ± ci` do not touch.
pub fn ci_disjoint(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 + a.1 < b.0 - b.1 || b.0 + b.1 < a.0 - a.1
}
