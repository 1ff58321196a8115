//! Common-noise coupling experiments: path error versus kernel distance.
//!
//! Two kernels are simulated on the same driver (one Brownian path, one set
//! of dominated Poisson points), so every difference between the paths comes
//! from the kernels alone. With identical acceptance sets the paths coincide
//! exactly; the expected sup-difference tracks the L1 kernel distance.

use crate::driver::make_driver;
use crate::engine::EngineOpts;
use crate::error::{CoreError, Result};
use crate::kernel::{self, FitMethod, FitResult, KernelSpec};
use crate::lift::run_lifted_outcome;
use crate::model::ModelSpec;
use crate::stats::{linreg_slope, mean_se};
use crate::volterra::{run_volterra_outcome, stability_gate, SimulateOptions};
use rayon::prelude::*;

/// Driver parameters shared by every path of a study.
#[derive(Debug, Clone, Copy)]
pub struct DriverConfig {
    pub dt: f64,
    pub horizon: f64,
    pub lambda_max: f64,
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    /// Exponential count of the approximating kernel (0 for a general one).
    pub n: usize,
    pub l1_dist: f64,
    pub l2_dist_sq: f64,
    /// Monte Carlo estimate of E[sup_{t<=T} |X~ - X|] and its standard error.
    pub err_x: f64,
    pub err_x_se: Option<f64>,
    /// Monte Carlo estimate of E|lambda~_T - lambda_T|.
    pub err_lambda: f64,
    pub err_lambda_se: Option<f64>,
    pub horizon: f64,
    pub n_paths: usize,
    /// Domination-violated paths that were deterministically re-seeded.
    pub rejected: usize,
}

impl ConvergenceRow {
    pub fn csv_header() -> &'static str {
        "n,l1_dist,l2_dist_sq,err_x,err_x_se,err_lambda,err_lambda_se,horizon,n_paths,rejected"
    }

    pub fn csv_row(&self) -> String {
        let fmt_se = |se: Option<f64>| se.map_or(String::new(), |v| format!("{v}"));
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.l1_dist,
            self.l2_dist_sq,
            self.err_x,
            fmt_se(self.err_x_se),
            self.err_lambda,
            fmt_se(self.err_lambda_se),
            self.horizon,
            self.n_paths,
            self.rejected
        )
    }
}

/// Per-path coupling sample.
#[derive(Debug, Clone, Copy)]
pub struct CoupledSample {
    pub seed: u64,
    /// sup over grid and candidate times of |X~ - X|.
    pub sup_dx: f64,
    /// |lambda~_T - lambda_T|.
    pub dlambda_t: f64,
    /// Whether the two runs accepted exactly the same Poisson points.
    pub identical_accepts: bool,
}

/// Outcome of one coupled-error run.
#[derive(Debug, Clone)]
pub struct CoupledOutcome {
    pub row: ConvergenceRow,
    pub samples: Vec<CoupledSample>,
}

fn run_pair(
    model: &ModelSpec,
    phi: &KernelSpec,
    phi_tilde: &KernelSpec,
    cfg: &DriverConfig,
    seed: u64,
) -> Result<CoupledSample> {
    let driver = make_driver(seed, cfg.dt, cfg.horizon, cfg.lambda_max, &model.marks)?;
    let run = |k: &KernelSpec| {
        if k.is_exp_sum() {
            run_lifted_outcome(
                model,
                k,
                &driver,
                EngineOpts { record_candidate_x: true, ..EngineOpts::default() },
            )
        } else {
            run_volterra_outcome(model, k, &driver, true)
        }
    };
    let a = run(phi)?;
    let b = run(phi_tilde)?;
    let mut sup_dx = a
        .record
        .x
        .iter()
        .zip(&b.record.x)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    sup_dx = a
        .candidate_x
        .iter()
        .zip(&b.candidate_x)
        .map(|(x, y)| (x - y).abs())
        .fold(sup_dx, f64::max);
    let dlambda_t =
        (a.record.lambda.last().unwrap() - b.record.lambda.last().unwrap()).abs();
    Ok(CoupledSample {
        seed,
        sup_dx,
        dlambda_t,
        identical_accepts: a.accepted == b.accepted,
    })
}

/// Simulate `n_paths` coupled pairs under phi and phi_tilde on shared
/// drivers seeded seed0, seed0+1, ...
///
/// A path whose intensity escapes the dominating level under either kernel
/// is re-seeded deterministically at seed0 + n_paths + i (then stepping by
/// n_paths); the rejection count must stay below 1% of the sample.
pub fn coupled_error(
    model: &ModelSpec,
    phi: &KernelSpec,
    phi_tilde: &KernelSpec,
    cfg: &DriverConfig,
    n_paths: usize,
    seed0: u64,
    opts: &SimulateOptions,
) -> Result<CoupledOutcome> {
    if n_paths == 0 {
        return Err(CoreError::Domain("n_paths must be >= 1".into()));
    }
    stability_gate(model, phi, opts)?;
    stability_gate(model, phi_tilde, opts)?;

    const MAX_ATTEMPTS: u64 = 8;
    let results: Vec<Result<(CoupledSample, usize)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rejections = 0usize;
            for attempt in 0..MAX_ATTEMPTS {
                let seed = if attempt == 0 {
                    seed0 + i
                } else {
                    seed0 + attempt * n_paths as u64 + i
                };
                match run_pair(model, phi, phi_tilde, cfg, seed) {
                    Ok(sample) => return Ok((sample, rejections)),
                    Err(CoreError::DominationViolated { .. }) => rejections += 1,
                    Err(e) => return Err(e),
                }
            }
            Err(CoreError::DominationViolated {
                t: f64::NAN,
                lambda: f64::NAN,
                lambda_max: cfg.lambda_max,
            })
        })
        .collect();

    let mut samples = Vec::with_capacity(n_paths);
    let mut rejected = 0usize;
    for r in results {
        let (sample, rej) = r?;
        rejected += rej;
        samples.push(sample);
    }
    if rejected * 100 >= n_paths {
        return Err(CoreError::RejectionBudget { rejected, total: n_paths });
    }

    let sup: Vec<f64> = samples.iter().map(|s| s.sup_dx).collect();
    let dl: Vec<f64> = samples.iter().map(|s| s.dlambda_t).collect();
    let (err_x, err_x_se) = mean_se(&sup);
    let (err_lambda, err_lambda_se) = mean_se(&dl);
    let n = match phi_tilde {
        KernelSpec::ExpSum { eta, .. } => eta.len(),
        KernelSpec::General { .. } => 0,
    };
    Ok(CoupledOutcome {
        row: ConvergenceRow {
            n,
            l1_dist: kernel::l1_diff(phi, phi_tilde)?,
            l2_dist_sq: kernel::l2_diff_sq(phi, phi_tilde)?,
            err_x,
            err_x_se,
            err_lambda,
            err_lambda_se,
            horizon: cfg.horizon,
            n_paths,
            rejected,
        },
        samples,
    })
}

/// Full fit-ladder study table.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub fits: Vec<FitResult>,
    pub samples: Vec<Vec<CoupledSample>>,
    /// Log-log regression slope of err_x against l1_dist.
    pub slope_err_x: Option<f64>,
    /// Log-log regression slope of err_lambda against l1_dist.
    pub slope_err_lambda: Option<f64>,
}

/// For each n in `n_list`: fit the kernel on the ladder, then measure the
/// coupled path error between the target kernel and its fit.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    model: &ModelSpec,
    phi: &KernelSpec,
    beta_base: f64,
    n_list: &[usize],
    cfg: &DriverConfig,
    n_paths: usize,
    seed0: u64,
    method: FitMethod,
    opts: &SimulateOptions,
) -> Result<ConvergenceStudy> {
    if n_list.is_empty() {
        return Err(CoreError::Domain("n_list must not be empty".into()));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut samples = Vec::new();
    for &n in n_list {
        let fit = kernel::fit(phi, n, beta_base, method)?;
        let approx = fit.kernel();
        let mut out = coupled_error(model, phi, &approx, cfg, n_paths, seed0, opts)?;
        out.row.n = n;
        rows.push(out.row);
        samples.push(out.samples);
        fits.push(fit);
    }
    let pts: Vec<(f64, f64, f64)> = rows
        .iter()
        .filter(|r| r.l1_dist > 0.0 && r.err_x > 0.0 && r.err_lambda > 0.0)
        .map(|r| (r.l1_dist.ln(), r.err_x.ln(), r.err_lambda.ln()))
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let slope_err_x = linreg_slope(&xs, &pts.iter().map(|p| p.1).collect::<Vec<_>>());
    let slope_err_lambda = linreg_slope(&xs, &pts.iter().map(|p| p.2).collect::<Vec<_>>());
    Ok(ConvergenceStudy { rows, fits, samples, slope_err_x, slope_err_lambda })
}

impl ConvergenceStudy {
    /// `convergence.csv` body with `#` metadata lines.
    pub fn to_csv(&self, meta: &[String]) -> String {
        let mut s = String::new();
        for m in meta {
            s.push_str(&format!("# {m}\n"));
        }
        if let Some(sl) = self.slope_err_x {
            s.push_str(&format!("# slope_log_err_x_vs_log_l1 = {sl}\n"));
        }
        if let Some(sl) = self.slope_err_lambda {
            s.push_str(&format!("# slope_log_err_lambda_vs_log_l1 = {sl}\n"));
        }
        s.push_str(ConvergenceRow::csv_header());
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }

    /// Per-seed sup-difference samples for external plotting.
    pub fn samples_csv(&self, meta: &[String]) -> String {
        let mut s = String::new();
        for m in meta {
            s.push_str(&format!("# {m}\n"));
        }
        s.push_str("n,seed,sup_dx,dlambda_t,identical_accepts\n");
        for (row, group) in self.rows.iter().zip(&self.samples) {
            for sm in group {
                s.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.n, sm.seed, sm.sup_dx, sm.dlambda_t, sm.identical_accepts
                ));
            }
        }
        s
    }
}
