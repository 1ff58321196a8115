//! Small statistical helpers shared by the experiment and control layers.

/// Sample mean and standard error of the mean; SE is None for fewer than two
/// samples (the "missing sentinel" in CSV output).
pub fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    crate::volterra::mean_se(values)
}

/// Least-squares slope of y against x. Returns None when fewer than two
/// distinct abscissae remain.
pub fn linreg_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
