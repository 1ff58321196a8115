//! Shared oracles for the integration suites. These deliberately avoid the
//! crate's own quadrature and solver paths.

/// One-sample Kolmogorov-Smirnov statistic against the unit-rate exponential.
pub fn ks_statistic_exp(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let cdf = 1.0 - (-s).exp();
        d = d.max((cdf - i as f64 / n).abs());
        d = d.max((cdf - (i + 1) as f64 / n).abs());
    }
    d
}

/// Asymptotic KS critical value at significance `alpha`.
pub fn ks_critical(alpha: f64, n: usize) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
