//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantities. Run with `cargo test -p hawkes-lift --test
//! acceptance -- --nocapture` to see them.

mod common;

use common::{ks_critical, ks_statistic_exp, mean_and_se};
use hawkes_lift::control::PortfolioSimConfig;
use hawkes_lift::experiments::DriverConfig;
use hawkes_lift::kernel::{self, FitMethod};
use hawkes_lift::lift::{simulate_lifted_with_dynkin, TestFunction};
use hawkes_lift::{
    convergence_study, estimate_moments, intensity_bound, make_driver, policy_simulation_value,
    psi_hat, resolvent, simulate_lifted, simulate_volterra, value_closed_form, KernelSpec,
    MarkDist, MarketSpec, ModelSpec, PathRecord, Policy, SamplingBox, SimulateOptions,
};
use rayon::prelude::*;
use std::time::Instant;

/// Seed found by scanning 0.. for the first driver on which the order-3 fit
/// accepts exactly the set of Poisson points of the true kernel while the
/// order-2 fit differs (see `scan_figure2_seed`). Committed together with
/// the discretization below.
const FIGURE2_SEED: u64 = 0;
const FIGURE2_DT: f64 = 1e-3;
const FIGURE2_HORIZON: f64 = 10.0;
const FIGURE2_LAMBDA_MAX: f64 = 9.0;

fn paper_kernel() -> KernelSpec {
    KernelSpec::builtin("paper_nonmonotone").unwrap()
}

fn unstable_opts() -> SimulateOptions {
    SimulateOptions { override_stability: true, ..Default::default() }
}

fn fit_ladder_kernel(n: usize) -> KernelSpec {
    kernel::fit(&paper_kernel(), n, 0.5, FitMethod::L1).unwrap().kernel()
}

fn jump_times(rec: &PathRecord) -> Vec<f64> {
    rec.jumps.iter().map(|j| j.t).collect()
}

#[test]
fn acceptance_1_kernel_fit_reproduction() {
    let start = Instant::now();
    let fit2 = kernel::fit(&paper_kernel(), 2, 0.5, FitMethod::L1).unwrap();
    let fit3 = kernel::fit(&paper_kernel(), 3, 0.5, FitMethod::L1).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let expect2 = [-1.16, 2.17];
    let expect3 = [-0.82, 0.58, 1.39];
    for (got, want) in fit2.eta.iter().zip(&expect2) {
        assert!((got - want).abs() <= 0.05, "n=2 eta {:?} vs {:?}", fit2.eta, expect2);
    }
    for (got, want) in fit3.eta.iter().zip(&expect3) {
        assert!((got - want).abs() <= 0.05, "n=3 eta {:?} vs {:?}", fit3.eta, expect3);
    }
    assert!(elapsed < 10.0, "fit took {elapsed:.2} s (budget 10 s)");
    println!(
        "ACCEPTANCE 1 kernel-fit reproduction: PASS (eta2 = {:?}, eta3 = {:?}, {elapsed:.2} s)",
        fit2.eta, fit3.eta
    );
}

#[test]
fn acceptance_2_lift_volterra_exactness() {
    let start = Instant::now();
    let model = ModelSpec::paper_hawkes_ou();
    let phi3 = fit_ladder_kernel(3);
    let opts = unstable_opts();
    let results: Vec<(bool, f64)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let driver =
                make_driver(seed, 1e-3, 10.0, 9.0, &MarkDist::unit()).unwrap();
            let lift = simulate_lifted(&model, &phi3, &driver, &opts).unwrap();
            let volt = simulate_volterra(&model, &phi3, &driver, &opts).unwrap();
            let same_accepts = jump_times(&lift) == jump_times(&volt);
            let sup = lift
                .x
                .iter()
                .zip(&volt.x)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            (same_accepts, sup)
        })
        .collect();
    let elapsed = start.elapsed().as_secs_f64();
    let worst_sup = results.iter().map(|r| r.1).fold(0.0f64, f64::max);
    assert!(results.iter().all(|r| r.0), "acceptance sets differ on some seed");
    assert!(worst_sup <= 1e-10, "sup path difference {worst_sup}");
    assert!(elapsed < 120.0, "took {elapsed:.1} s (budget 120 s)");
    println!(
        "ACCEPTANCE 2 lift/Volterra exactness: PASS (100 seeds, worst sup diff {worst_sup:.2e}, {elapsed:.1} s)"
    );
}

#[test]
fn acceptance_3_thinning_calibration() {
    let model = ModelSpec::linear_hawkes(1.0, 1.0);
    let kernel = KernelSpec::zero();
    let horizon = 100.0;
    let n_seeds = 10_000u64;
    let per_seed: Vec<(usize, Vec<f64>)> = (0..n_seeds)
        .into_par_iter()
        .map(|seed| {
            let driver = make_driver(seed, 0.5, horizon, 2.0, &MarkDist::unit()).unwrap();
            let rec =
                simulate_volterra(&model, &kernel, &driver, &SimulateOptions::unchecked())
                    .unwrap();
            let mut gaps = Vec::with_capacity(rec.jumps.len());
            let mut prev = 0.0;
            for j in &rec.jumps {
                // Gaps opening near the horizon are right-censored (the
                // closing event may fall outside the window), which a KS
                // test at this sample size would detect; keep gaps whose
                // censoring mass is below e^{-40}.
                if prev <= horizon - 40.0 {
                    gaps.push(j.t - prev);
                }
                prev = j.t;
            }
            (rec.jumps.len(), gaps)
        })
        .collect();

    let counts: Vec<f64> = per_seed.iter().map(|(c, _)| *c as f64).collect();
    let (mean, se) = mean_and_se(&counts);
    assert!(
        (mean - horizon).abs() <= 3.0 * se,
        "mean count {mean} vs {horizon} (3 SE = {})",
        3.0 * se
    );

    let mut gaps: Vec<f64> = per_seed.into_iter().flat_map(|(_, g)| g).collect();
    assert!(gaps.len() >= 10_000);
    let d = ks_statistic_exp(&mut gaps);
    let crit = ks_critical(1e-3, gaps.len());
    assert!(d < crit, "KS {d:.3e} >= critical {crit:.3e}");
    println!(
        "ACCEPTANCE 3 thinning calibration: PASS (mean count {mean:.3} +- {se:.3}, KS {d:.2e} < {crit:.2e} on {} gaps)",
        gaps.len()
    );
}

#[test]
fn acceptance_4_linear_hawkes_moment_oracle() {
    // psi = id on the reachable set, phi = 0.5 e^{-t}, lambda0 = 1:
    // E[lambda_t] = 2 - e^{-t/2}, a priori bound (lambda0 + 0)/(1 - 1/2) = 2.
    let model = ModelSpec::linear_hawkes(1.0, 1.0);
    let kernel = KernelSpec::exponential(0.5, 1.0).unwrap();
    let bound = intensity_bound(&model, &kernel, &SamplingBox::default()).unwrap();
    assert!((bound - 2.0).abs() < 1e-9);

    let horizon = 50.0;
    let n_paths = 10_000u64;
    let paths: Vec<PathRecord> = (0..n_paths)
        .into_par_iter()
        .map(|seed| {
            let driver = make_driver(seed, 0.1, horizon, 40.0, &MarkDist::unit()).unwrap();
            simulate_lifted(&model, &kernel, &driver, &SimulateOptions::unchecked()).unwrap()
        })
        .collect();
    let summary = estimate_moments(&paths, 1.0).unwrap();
    let se = summary.sup_mean_lambda_se.unwrap();
    assert!(
        summary.sup_mean_lambda <= bound + 3.0 * se,
        "sup_t E[lambda_t] = {} > bound {bound} + 3 SE",
        summary.sup_mean_lambda
    );

    // Long-run mean: lambda at T across paths vs lambda0 / (1 - ||phi||_1).
    let lam_t: Vec<f64> = paths.iter().map(|p| *p.lambda.last().unwrap()).collect();
    let (mean_t, se_t) = mean_and_se(&lam_t);
    let stationary = 2.0;
    assert!(
        (mean_t - stationary).abs() <= 3.0 * se_t,
        "terminal mean {mean_t} vs {stationary} (3 SE = {})",
        3.0 * se_t
    );
    println!(
        "ACCEPTANCE 4 linear-Hawkes moments: PASS (sup_t mean lambda {:.4} <= {bound} + {:.4}, terminal mean {mean_t:.4} +- {se_t:.4})",
        summary.sup_mean_lambda,
        3.0 * se
    );
}

#[test]
fn acceptance_5_continuity_scaling() {
    let start = Instant::now();
    let model = ModelSpec::state_indep(1.0, 1.0, 1.0, 0.1, 0.2);
    let phi = KernelSpec::builtin("gamma_delay").unwrap().scaled(0.6);
    let cfg = DriverConfig { dt: 0.01, horizon: 10.0, lambda_max: 12.0 };
    let study = convergence_study(
        &model,
        &phi,
        0.5,
        &[1, 2, 3, 4, 5],
        &cfg,
        1000,
        1000,
        FitMethod::L1,
        &SimulateOptions::unchecked(),
    )
    .unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let slope = study.slope_err_lambda.unwrap();
    assert!(
        (0.5..=1.5).contains(&slope),
        "err_lambda log-log slope {slope} outside [0.5, 1.5]; rows: {:?}",
        study
            .rows
            .iter()
            .map(|r| (r.n, r.l1_dist, r.err_lambda))
            .collect::<Vec<_>>()
    );
    for w in study.rows.windows(2) {
        let slack =
            2.0 * (w[0].err_x_se.unwrap().hypot(w[1].err_x_se.unwrap()));
        assert!(
            w[1].err_x <= w[0].err_x + slack,
            "err_x increased: n={} {} -> n={} {} (slack {slack})",
            w[0].n,
            w[0].err_x,
            w[1].n,
            w[1].err_x
        );
    }
    assert!(elapsed < 600.0, "study took {elapsed:.0} s (budget 600 s)");
    println!(
        "ACCEPTANCE 5 continuity scaling: PASS (slope {slope:.3}, err_x = {:?}, {elapsed:.1} s)",
        study.rows.iter().map(|r| r.err_x).collect::<Vec<_>>()
    );
}

#[test]
fn acceptance_6_figure2_golden_seed() {
    let model = ModelSpec::paper_hawkes_ou();
    let phi = paper_kernel();
    let phi2 = fit_ladder_kernel(2);
    let phi3 = fit_ladder_kernel(3);
    let opts = unstable_opts();
    let driver = make_driver(
        FIGURE2_SEED,
        FIGURE2_DT,
        FIGURE2_HORIZON,
        FIGURE2_LAMBDA_MAX,
        &MarkDist::unit(),
    )
    .unwrap();
    let truth = simulate_volterra(&model, &phi, &driver, &opts).unwrap();
    let low = simulate_lifted(&model, &phi2, &driver, &opts).unwrap();
    let high = simulate_lifted(&model, &phi3, &driver, &opts).unwrap();
    assert_eq!(
        jump_times(&truth),
        jump_times(&high),
        "order-3 fit must accept exactly the true kernel's points on seed {FIGURE2_SEED}"
    );
    assert_ne!(
        jump_times(&truth),
        jump_times(&low),
        "order-2 fit must differ on at least one point on seed {FIGURE2_SEED}"
    );
    println!(
        "ACCEPTANCE 6 coupled-path reproduction: PASS (seed {FIGURE2_SEED}: order-3 accepts all {} true points, order-2 accepts {})",
        truth.n_jumps(),
        low.n_jumps()
    );
}

/// One-off scan that located FIGURE2_SEED; kept for provenance.
#[test]
#[ignore]
fn scan_figure2_seed() {
    let model = ModelSpec::paper_hawkes_ou();
    let phi = paper_kernel();
    let phi2 = fit_ladder_kernel(2);
    let phi3 = fit_ladder_kernel(3);
    let opts = unstable_opts();
    for seed in 0..1000u64 {
        let driver = make_driver(
            seed,
            FIGURE2_DT,
            FIGURE2_HORIZON,
            FIGURE2_LAMBDA_MAX,
            &MarkDist::unit(),
        )
        .unwrap();
        let truth = simulate_volterra(&model, &phi, &driver, &opts).unwrap();
        let low = simulate_lifted(&model, &phi2, &driver, &opts).unwrap();
        let high = simulate_lifted(&model, &phi3, &driver, &opts).unwrap();
        let t3 = jump_times(&truth) == jump_times(&high);
        let t2 = jump_times(&truth) == jump_times(&low);
        if t3 && !t2 {
            println!("first matching seed: {seed} ({} true jumps)", truth.n_jumps());
            return;
        }
    }
    panic!("no seed in 0..1000 exhibits the property");
}

#[test]
fn acceptance_7_resolvent_closed_form() {
    let k = KernelSpec::exponential(0.5, 1.0).unwrap();
    let r = resolvent(&k, 1e-3, 10.0).unwrap();
    let sup = r
        .times
        .iter()
        .zip(&r.q)
        .map(|(t, q)| (q - 0.5 * (-0.5 * t).exp()).abs())
        .fold(0.0f64, f64::max);
    assert!(sup <= 1e-6, "sup error {sup}");
    println!("ACCEPTANCE 7 resolvent closed form: PASS (sup error {sup:.2e} on [0, 10])");
}

#[test]
fn acceptance_8_portfolio_sign_and_value() {
    let start = Instant::now();
    let base = MarketSpec {
        mu: 0.15,
        r: 0.02,
        sigma: 0.25,
        gamma: 0.0,
        rho: 0.5,
        x0: 1.0,
        lambda0: 0.8,
        kernel: KernelSpec::exponential(0.35, 0.7).unwrap(),
    };
    let sim = PortfolioSimConfig {
        dt: 0.01,
        horizon_trunc: 30.0,
        n_paths: 10_000,
        seed0: 1,
        lambda_max: 12.0,
        tail_tol: Some(1e-3),
    };

    // (a) gamma = 0: closed form == analytic Merton value == policy sim.
    let closed0 = value_closed_form(&base, &sim).unwrap();
    assert!(closed0.tail_bound < 1e-3);
    let (ph0, omega0) = psi_hat(base.lambda0, &base).unwrap();
    let analytic = (base.x0.ln() + base.rho.ln()) / base.rho
        + (base.r - base.rho) / (base.rho * base.rho)
        + ph0 / base.rho;
    assert!(
        (closed0.value - analytic).abs() <= 1e-3 + closed0.tail_bound,
        "gamma=0 closed form {} vs analytic {analytic}",
        closed0.value
    );
    let sim0 = policy_simulation_value(&base, &Policy::optimal(&base), &sim).unwrap();
    let tol0 = 3.0 * sim0.se.unwrap() + sim0.tail_bound + closed0.tail_bound;
    assert!(
        (closed0.value - sim0.value).abs() <= tol0,
        "gamma=0: closed {} vs simulated {} (tol {tol0})",
        closed0.value,
        sim0.value
    );

    // (b) contagion gamma = -0.1, kernel mass 0.5.
    let contagion = MarketSpec { gamma: -0.1, ..base.clone() };
    let closed = value_closed_form(&contagion, &sim).unwrap();
    let simmed = policy_simulation_value(&contagion, &Policy::optimal(&contagion), &sim).unwrap();
    let tol = 3.0 * closed.se.unwrap().hypot(simmed.se.unwrap())
        + closed.tail_bound
        + simmed.tail_bound;
    assert!(
        (closed.value - simmed.value).abs() <= tol,
        "contagion: closed {} vs simulated {} (tol {tol})",
        closed.value,
        simmed.value
    );

    // (c) V0^n over n = 1..4 is a Cauchy sequence: successive gaps shrink.
    let rows =
        hawkes_lift::control::portfolio_study(&contagion, 0.5, &[1, 2, 3, 4], &sim).unwrap();
    let gaps: Vec<f64> =
        rows.windows(2).map(|w| (w[0].v0n - w[1].v0n).abs()).collect();
    for w in gaps.windows(2) {
        assert!(
            w[1] <= w[0],
            "value gaps must decrease along the ladder: {gaps:?}"
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 900.0, "portfolio suite took {elapsed:.0} s (budget 900 s)");
    println!(
        "ACCEPTANCE 8 portfolio sign/value: PASS (gamma=0: closed {:.6} = analytic {analytic:.6} = sim {:.6}; contagion closed {:.6} vs sim {:.6}; gaps {gaps:?}; omega*(lambda0) = {omega0:.4}; {elapsed:.1} s)",
        closed0.value, sim0.value, closed.value, simmed.value
    );
}

struct QuadTest;

impl TestFunction for QuadTest {
    fn value(&self, _t: f64, x: f64, xi: &[f64]) -> f64 {
        x * x + xi.iter().map(|v| v * v).sum::<f64>()
    }
    fn dt(&self, _: f64, _: f64, _: &[f64]) -> f64 {
        0.0
    }
    fn dx(&self, _: f64, x: f64, _: &[f64]) -> f64 {
        2.0 * x
    }
    fn dxx(&self, _: f64, _: f64, _: &[f64]) -> f64 {
        2.0
    }
    fn dxi(&self, k: usize, _: f64, _: f64, xi: &[f64]) -> f64 {
        2.0 * xi[k]
    }
}

#[test]
fn acceptance_9_generator_dynkin_check() {
    let model = ModelSpec::paper_hawkes_ou();
    let phi3 = fit_ladder_kernel(3);
    let opts = unstable_opts();
    let residuals: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|seed| {
            let driver = make_driver(seed, 5e-3, 2.0, 9.0, &MarkDist::unit()).unwrap();
            let (_, sample) =
                simulate_lifted_with_dynkin(&model, &phi3, &driver, &QuadTest, &opts).unwrap();
            sample.residual()
        })
        .collect();
    let (mean, se) = mean_and_se(&residuals);
    assert!(
        mean.abs() <= 3.0 * se,
        "Dynkin residual mean {mean} exceeds 3 SE = {}",
        3.0 * se
    );
    println!(
        "ACCEPTANCE 9 generator Dynkin check: PASS (mean residual {mean:.5} +- {se:.5} over 10^4 paths)"
    );
}
