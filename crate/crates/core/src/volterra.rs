//! Simulation of the path-dependent (Volterra) Hawkes jump-diffusion by
//! exact thinning, and Monte Carlo moment summaries.

use crate::diagnostics::{stability_product, SamplingBox};
use crate::driver::NoiseDriver;
use crate::engine::{self, EngineOpts, Excitation, SimOutcome};
use crate::error::{CoreError, Result};
use crate::kernel::KernelSpec;
use crate::model::ModelSpec;
use crate::path::PathRecord;

/// Options shared by the Volterra and lifted simulators.
#[derive(Debug, Clone)]
pub struct SimulateOptions {
    /// Run even when the stability product L * E[b(Y)] * ||phi||_1 is >= 1.
    /// Existence still holds under a bounded jump rate or state-free jump
    /// coefficients, so callers working in that regime set this explicitly.
    pub override_stability: bool,
    /// Evaluate the stability product before simulating (default). Monte
    /// Carlo drivers check once and then disable per-path re-checks.
    pub check_stability: bool,
    /// Record the auxiliary states per grid time (lifted runs only).
    pub record_xi: bool,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        Self { override_stability: false, check_stability: true, record_xi: true }
    }
}

impl SimulateOptions {
    /// Options for inner Monte Carlo loops: stability already checked once.
    pub fn unchecked() -> Self {
        Self { override_stability: false, check_stability: false, record_xi: true }
    }
}

pub(crate) fn stability_gate(
    model: &ModelSpec,
    kernel: &KernelSpec,
    opts: &SimulateOptions,
) -> Result<()> {
    if !opts.check_stability {
        return Ok(());
    }
    let product = stability_product(model, kernel, &SamplingBox::default())?;
    if product >= 1.0 && !opts.override_stability {
        return Err(CoreError::Unstable { product });
    }
    Ok(())
}

pub(crate) fn run_volterra_outcome(
    model: &ModelSpec,
    kernel: &KernelSpec,
    driver: &NoiseDriver,
    record_candidate_x: bool,
) -> Result<SimOutcome> {
    let exc = Excitation::Volterra { kernel, history: Vec::new() };
    engine::run(
        model,
        exc,
        driver,
        EngineOpts { record_candidate_x, ..EngineOpts::default() },
    )
}

/// Simulate the Volterra dynamics: the intensity at each candidate is
/// recomputed from the full jump history through the kernel.
pub fn simulate_volterra(
    model: &ModelSpec,
    kernel: &KernelSpec,
    driver: &NoiseDriver,
    opts: &SimulateOptions,
) -> Result<PathRecord> {
    stability_gate(model, kernel, opts)?;
    Ok(run_volterra_outcome(model, kernel, driver, false)?.record)
}

/// Monte Carlo moment estimates across a collection of paths on a common
/// grid.
#[derive(Debug, Clone)]
pub struct MomentSummary {
    pub p: f64,
    pub n_paths: usize,
    /// E[sup_{t<=T} |X_t|^p] with standard error (None for a single path).
    pub sup_x_p_mean: f64,
    pub sup_x_p_se: Option<f64>,
    /// sup over grid times of the empirical mean of lambda, the time where it
    /// is attained, and the standard error of the mean at that time.
    pub sup_mean_lambda: f64,
    pub sup_mean_lambda_at: f64,
    pub sup_mean_lambda_se: Option<f64>,
    /// Same for the second moment of lambda.
    pub sup_mean_lambda_sq: f64,
    pub sup_mean_lambda_sq_at: f64,
    pub sup_mean_lambda_sq_se: Option<f64>,
    /// Mean number of accepted jumps per path.
    pub mean_jumps: f64,
}

/// Estimate E[sup |X|^p], sup_t E[lambda_t] and sup_t E[lambda_t^2] from
/// simulated paths. All paths must share the same grid.
pub fn estimate_moments(paths: &[PathRecord], p: f64) -> Result<MomentSummary> {
    if paths.is_empty() {
        return Err(CoreError::Domain("estimate_moments needs at least one path".into()));
    }
    if !(p >= 1.0) {
        return Err(CoreError::Domain("moment order p must be >= 1".into()));
    }
    let grid_len = paths[0].times.len();
    if paths.iter().any(|r| r.times.len() != grid_len) {
        return Err(CoreError::Domain("paths must share a common grid".into()));
    }
    let n = paths.len();
    let nf = n as f64;

    let sup_p: Vec<f64> = paths.iter().map(|r| r.sup_abs_x.powf(p)).collect();
    let (sup_x_p_mean, sup_x_p_se) = mean_se(&sup_p);

    // Accumulate per-grid-time first and second moment sums in fixed path
    // order, then locate the sup of each mean curve.
    let mut s1 = vec![0.0; grid_len];
    let mut s2 = vec![0.0; grid_len];
    let mut s2_sq = vec![0.0; grid_len];
    let mut s4 = vec![0.0; grid_len];
    for r in paths {
        for (i, l) in r.lambda.iter().enumerate() {
            s1[i] += l;
            s2[i] += l * l;
            s2_sq[i] += l * l;
            s4[i] += l * l * l * l;
        }
    }
    let pick_sup = |sums: &[f64], sq_sums: &[f64]| -> (f64, f64, Option<f64>) {
        let mut best = f64::NEG_INFINITY;
        let mut at = 0usize;
        for (i, s) in sums.iter().enumerate() {
            if s / nf > best {
                best = s / nf;
                at = i;
            }
        }
        let se = (n > 1).then(|| {
            let mean = sums[at] / nf;
            let var = (sq_sums[at] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
            (var / nf).sqrt()
        });
        (best, paths[0].times[at], se)
    };
    let (sup_mean_lambda, sup_mean_lambda_at, sup_mean_lambda_se) = pick_sup(&s1, &s2);
    let (sup_mean_lambda_sq, sup_mean_lambda_sq_at, sup_mean_lambda_sq_se) =
        pick_sup(&s2_sq, &s4);

    let mean_jumps = paths.iter().map(|r| r.jumps.len() as f64).sum::<f64>() / nf;

    Ok(MomentSummary {
        p,
        n_paths: n,
        sup_x_p_mean,
        sup_x_p_se,
        sup_mean_lambda,
        sup_mean_lambda_at,
        sup_mean_lambda_se,
        sup_mean_lambda_sq,
        sup_mean_lambda_sq_at,
        sup_mean_lambda_sq_se,
        mean_jumps,
    })
}

pub(crate) fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::make_driver;
    use crate::marks::MarkDist;
    use crate::model::{Coeff, ModelSpec};

    fn homogeneous_poisson(lambda0: f64) -> ModelSpec {
        ModelSpec::linear_hawkes(lambda0, 1.0)
    }

    #[test]
    fn zero_model_has_zero_moments() {
        let mut model = homogeneous_poisson(0.0);
        model.gamma = Coeff::zero();
        let driver = make_driver(1, 0.1, 5.0, 1.0, &MarkDist::unit()).unwrap();
        let rec =
            simulate_volterra(&model, &KernelSpec::zero(), &driver, &SimulateOptions::default())
                .unwrap();
        let summary = estimate_moments(std::slice::from_ref(&rec), 1.0).unwrap();
        assert_eq!(summary.sup_x_p_mean, 0.0);
        assert_eq!(summary.sup_mean_lambda, 0.0);
        assert_eq!(summary.sup_mean_lambda_sq, 0.0);
    }

    #[test]
    fn counting_process_counts_points() {
        // phi = 0, lambda_inf = 1, gamma = 1, marks = 1: X_T = N_T, and the
        // accepted points of the unit-intensity thinning are all points with
        // theta <= 1.
        let model = homogeneous_poisson(1.0);
        let driver = make_driver(7, 0.05, 10.0, 3.0, &MarkDist::unit()).unwrap();
        let rec =
            simulate_volterra(&model, &KernelSpec::zero(), &driver, &SimulateOptions::default())
                .unwrap();
        let expected = driver.poisson.iter().filter(|p| p.theta <= 1.0).count();
        assert_eq!(rec.jumps.len(), expected);
        assert_eq!(*rec.x.last().unwrap(), expected as f64);
    }

    #[test]
    fn homogeneous_poisson_mean_count() {
        // Over 10_000 seeds the mean terminal count is within 3 sigma of T.
        let model = homogeneous_poisson(1.0);
        let horizon = 10.0;
        let n_seeds = 10_000u64;
        let mut total = 0usize;
        for seed in 0..n_seeds {
            let driver = make_driver(seed, 0.5, horizon, 2.0, &MarkDist::unit()).unwrap();
            let rec = simulate_volterra(
                &model,
                &KernelSpec::zero(),
                &driver,
                &SimulateOptions::unchecked(),
            )
            .unwrap();
            total += rec.jumps.len();
        }
        let mean = total as f64 / n_seeds as f64;
        let sigma = (horizon / n_seeds as f64).sqrt();
        assert!((mean - horizon).abs() < 3.0 * sigma, "mean {mean} vs {horizon} +- {sigma}");
    }

    #[test]
    fn determinism_bitwise() {
        let model = ModelSpec::paper_hawkes_ou();
        let kernel = KernelSpec::builtin("paper_nonmonotone").unwrap();
        let driver = make_driver(42, 0.01, 5.0, 9.0, &MarkDist::unit()).unwrap();
        let opts = SimulateOptions { override_stability: true, ..Default::default() };
        let a = simulate_volterra(&model, &kernel, &driver, &opts).unwrap();
        let b = simulate_volterra(&model, &kernel, &driver, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn paper_example_runs_without_domination() {
        // lambda <= lambda_inf + sup psi = 8, so lambda_max = 9 dominates.
        let model = ModelSpec::paper_hawkes_ou();
        let kernel = KernelSpec::builtin("paper_nonmonotone").unwrap();
        let driver = make_driver(3, 0.001, 10.0, 9.0, &MarkDist::unit()).unwrap();
        let opts = SimulateOptions { override_stability: true, ..Default::default() };
        let rec = simulate_volterra(&model, &kernel, &driver, &opts).unwrap();
        assert!(rec.lambda.iter().all(|l| (0.0..=8.0 + 1e-9).contains(l)));
    }

    #[test]
    fn unstable_without_override_errors() {
        let model = ModelSpec::paper_hawkes_ou();
        let kernel = KernelSpec::builtin("paper_nonmonotone").unwrap();
        let driver = make_driver(3, 0.01, 1.0, 9.0, &MarkDist::unit()).unwrap();
        let err =
            simulate_volterra(&model, &kernel, &driver, &SimulateOptions::default()).unwrap_err();
        assert!(matches!(err, CoreError::Unstable { product } if product > 1.0));
    }

    #[test]
    fn domination_soundness_psi_bounded() {
        // With lambda_max exactly at the hard bound, no violation can occur.
        let model = ModelSpec::paper_hawkes_ou();
        let kernel = KernelSpec::builtin("paper_nonmonotone").unwrap();
        for seed in 0..20 {
            let driver = make_driver(seed, 0.01, 5.0, 8.0, &MarkDist::unit()).unwrap();
            let opts = SimulateOptions { override_stability: true, ..Default::default() };
            assert!(simulate_volterra(&model, &kernel, &driver, &opts).is_ok());
        }
    }

    #[test]
    fn domination_violation_raises() {
        // Force lambda_max below the reachable intensity.
        let model = homogeneous_poisson(2.0);
        let driver = make_driver(5, 0.1, 5.0, 1.0, &MarkDist::unit()).unwrap();
        let err = simulate_volterra(
            &model,
            &KernelSpec::zero(),
            &driver,
            &SimulateOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::DominationViolated { .. }));
    }

    #[test]
    fn grid_refinement_order_sqrt_dt() {
        // Pure multiplicative diffusion: halving dt changes X_T at strong
        // order 1/2. Compare fine vs coarsened drivers over matched seeds.
        let model = ModelSpec::pure_diffusion(
            Coeff::linear_state(0.1),
            Coeff::new("0.5*x", |_, x| 0.5 * x),
            1.0,
        );
        let kernel = KernelSpec::zero();
        let n_seeds = 400u64;
        let mut err_coarse = 0.0;
        let mut err_mid = 0.0;
        for seed in 0..n_seeds {
            let fine = make_driver(seed, 1.0 / 512.0, 1.0, 1.0, &MarkDist::unit()).unwrap();
            let mid = fine.coarsen(4).unwrap();
            let coarse = fine.coarsen(16).unwrap();
            let opts = SimulateOptions::default();
            let xf = *simulate_volterra(&model, &kernel, &fine, &opts).unwrap().x.last().unwrap();
            let xm = *simulate_volterra(&model, &kernel, &mid, &opts).unwrap().x.last().unwrap();
            let xc =
                *simulate_volterra(&model, &kernel, &coarse, &opts).unwrap().x.last().unwrap();
            err_mid += (xm - xf).abs();
            err_coarse += (xc - xf).abs();
        }
        // dt ratio 4 => error ratio ~ 2 for strong order 1/2.
        let ratio = err_coarse / err_mid;
        assert!(
            (1.3..=3.1).contains(&ratio),
            "strong-order ratio {ratio}, coarse {err_coarse}, mid {err_mid}"
        );
    }

    #[test]
    fn moments_single_path_sup() {
        let model = homogeneous_poisson(1.0);
        let driver = make_driver(11, 0.1, 5.0, 2.0, &MarkDist::unit()).unwrap();
        let rec =
            simulate_volterra(&model, &KernelSpec::zero(), &driver, &SimulateOptions::default())
                .unwrap();
        let s = estimate_moments(std::slice::from_ref(&rec), 1.0).unwrap();
        assert_eq!(s.sup_x_p_mean, rec.sup_abs_x);
        assert!(s.sup_x_p_se.is_none());
    }

    #[test]
    fn moments_reject_empty_and_bad_p() {
        assert!(estimate_moments(&[], 1.0).is_err());
        let model = homogeneous_poisson(1.0);
        let driver = make_driver(1, 0.1, 1.0, 2.0, &MarkDist::unit()).unwrap();
        let rec =
            simulate_volterra(&model, &KernelSpec::zero(), &driver, &SimulateOptions::default())
                .unwrap();
        assert!(estimate_moments(std::slice::from_ref(&rec), 0.5).is_err());
    }
}
