//! Subcommand implementations. Each command is a pure function of its config
//! and writes only under the output directory, so repeated runs are
//! byte-identical.

use crate::config::{self, FileConfig};
use anyhow::{bail, Context, Result};
use hawkes_lift::control::{PortfolioSimConfig, PortfolioRow};
use hawkes_lift::experiments::DriverConfig;
use hawkes_lift::kernel::{self, FitMethod, FitResult};
use hawkes_lift::{
    check_assumptions, convergence_study, make_driver, policy_simulation_value, psi_hat,
    simulate_lifted, simulate_volterra, value_closed_form, KernelSpec, MarketSpec, Policy,
    SimulateOptions,
};
use std::fs;
use std::path::Path;

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let path = out_dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn meta_lines(command: &str, config_path: &Path, extra: &[String]) -> Vec<String> {
    let mut v = vec![
        format!("command: {command}"),
        format!("config: {}", config_path.display()),
    ];
    v.extend_from_slice(extra);
    v
}

/// `fit-kernel`: fit the configured kernel for each ladder size and emit the
/// fit table plus plot-ready curves of the kernel and its approximations.
pub fn cmd_fit(cfg: &FileConfig, config_path: &Path, out_dir: &Path) -> Result<()> {
    let kcfg = cfg.require_kernel(config_path)?;
    let fit_cfg = cfg
        .fit
        .as_ref()
        .with_context(|| format!("{}: missing [fit] block", config_path.display()))?;
    if fit_cfg.n_list.is_empty() {
        bail!("fit.n_list must not be empty");
    }
    if !(fit_cfg.beta > 0.0) {
        bail!("fit.beta must be positive");
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let kernel = config::build_kernel(kcfg, base)?;
    let method = config::parse_method(fit_cfg.method.as_deref())?;

    let mut fits: Vec<FitResult> = Vec::new();
    for &n in &fit_cfg.n_list {
        fits.push(kernel::fit(&kernel, n, fit_cfg.beta, method)?);
    }

    let n_max = fit_cfg.n_list.iter().copied().max().unwrap();
    let mut fit_csv = String::new();
    for m in meta_lines("fit-kernel", config_path, &[format!("kernel: {}", kernel.label())]) {
        fit_csv.push_str(&format!("# {m}\n"));
    }
    fit_csv.push_str(&FitResult::csv_header(n_max));
    fit_csv.push('\n');
    for f in &fits {
        fit_csv.push_str(&f.csv_row(n_max));
        fit_csv.push('\n');
    }
    write_file(out_dir, "fit.csv", &fit_csv)?;

    // Curves on a plotting grid.
    let t_max = fit_cfg.curve_t_max.unwrap_or(10.0);
    let dt = fit_cfg.curve_dt.unwrap_or(0.01);
    if !(dt > 0.0 && t_max > dt) {
        bail!("fit.curve_dt and fit.curve_t_max must satisfy 0 < dt < t_max");
    }
    let approx: Vec<KernelSpec> = fits.iter().map(FitResult::kernel).collect();
    let mut curves = String::new();
    for m in meta_lines("fit-kernel", config_path, &[]) {
        curves.push_str(&format!("# {m}\n"));
    }
    curves.push_str("t,phi");
    for f in &fits {
        curves.push_str(&format!(",phi_{}", f.n));
    }
    curves.push('\n');
    let steps = (t_max / dt).round() as usize;
    for i in 0..=steps {
        let t = i as f64 * dt;
        curves.push_str(&format!("{t},{}", kernel.eval(t)));
        for a in &approx {
            curves.push_str(&format!(",{}", a.eval(t)));
        }
        curves.push('\n');
    }
    write_file(out_dir, "kernel_curves.csv", &curves)?;
    Ok(())
}

/// `simulate`: run the configured kernel plus its ladder fits on one shared
/// driver and emit a path file per kernel plus jump logs and the Brownian
/// grid path.
pub fn cmd_simulate(cfg: &FileConfig, config_path: &Path, out_dir: &Path) -> Result<()> {
    let model = config::build_model(cfg.require_model(config_path)?)?;
    let kcfg = cfg.require_kernel(config_path)?;
    let d = cfg.require_driver(config_path)?;
    let sim_cfg = cfg.simulate.clone().unwrap_or(crate::config::SimulateCfg {
        fit_n: None,
        fit_beta: None,
        include_true: None,
        allow_unstable: None,
    });
    let base = config_path.parent().unwrap_or(Path::new("."));
    let kernel = config::build_kernel(kcfg, base)?;

    let opts = SimulateOptions {
        override_stability: sim_cfg.allow_unstable.unwrap_or(false),
        ..Default::default()
    };

    let driver = make_driver(d.seed, d.dt, d.horizon, d.lambda_max, &model.marks)?;

    let mut runs: Vec<(String, KernelSpec)> = Vec::new();
    if sim_cfg.include_true.unwrap_or(true) {
        runs.push(("true".into(), kernel.clone()));
    }
    if let Some(fit_n) = &sim_cfg.fit_n {
        let beta = match sim_cfg.fit_beta.or(cfg.fit.as_ref().map(|f| f.beta)) {
            Some(b) if b > 0.0 => b,
            _ => bail!("simulate.fit_n requires simulate.fit_beta (or a [fit] block) > 0"),
        };
        for &n in fit_n {
            let fit = kernel::fit(&kernel, n, beta, FitMethod::L1)?;
            runs.push((format!("fit{n}"), fit.kernel()));
        }
    }
    if runs.is_empty() {
        bail!("nothing to simulate: include_true = false and simulate.fit_n is empty");
    }

    for (label, k) in &runs {
        let record = if k.is_exp_sum() {
            simulate_lifted(&model, k, &driver, &opts)?
        } else {
            simulate_volterra(&model, k, &driver, &opts)?
        };
        let meta = meta_lines(
            "simulate",
            config_path,
            &[
                format!("kernel: {label}"),
                format!("seed: {}", d.seed),
                format!("dt: {}", driver.dt),
                format!("lambda_max: {}", d.lambda_max),
                format!("jumps: {}", record.n_jumps()),
            ],
        );
        let mut buf = Vec::new();
        record.write_csv(&mut buf, &meta)?;
        write_file(out_dir, &format!("paths_{label}.csv"), &String::from_utf8(buf).unwrap())?;
        let mut jumps = Vec::new();
        record.write_jumps_csv(&mut jumps, &meta)?;
        write_file(out_dir, &format!("jumps_{label}.csv"), &String::from_utf8(jumps).unwrap())?;
    }

    // Shared Brownian grid path: every run above consumed this same driver.
    let mut w_csv = String::new();
    for m in meta_lines("simulate", config_path, &[format!("seed: {}", d.seed)]) {
        w_csv.push_str(&format!("# {m}\n"));
    }
    w_csv.push_str("t,w\n");
    let mut w = 0.0;
    w_csv.push_str("0,0\n");
    for (i, dw) in driver.brownian.iter().enumerate() {
        w += dw;
        w_csv.push_str(&format!("{},{w}\n", driver.grid_time(i + 1)));
    }
    write_file(out_dir, "driver_w.csv", &w_csv)?;
    Ok(())
}

/// `check`: render the assumption report; exit status encodes the verdict.
pub fn cmd_check(cfg: &FileConfig, config_path: &Path, out_dir: &Path) -> Result<i32> {
    let model = config::build_model(cfg.require_model(config_path)?)?;
    let kcfg = cfg.require_kernel(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let kernel = config::build_kernel(kcfg, base)?;
    let sampling = config::build_sampling_box(cfg.check.as_ref());
    let report = check_assumptions(&model, &kernel, &sampling)?;
    println!("{report}");
    write_file(out_dir, "assumptions.csv", &report.to_csv())?;
    Ok(report.exit_code())
}

/// `converge`: fit-ladder convergence study against the true kernel.
pub fn cmd_converge(cfg: &FileConfig, config_path: &Path, out_dir: &Path) -> Result<()> {
    let model = config::build_model(cfg.require_model(config_path)?)?;
    let kcfg = cfg.require_kernel(config_path)?;
    let d = cfg.require_driver(config_path)?;
    let ccfg = cfg
        .converge
        .as_ref()
        .with_context(|| format!("{}: missing [converge] block", config_path.display()))?;
    if ccfg.n_list.is_empty() {
        bail!("converge.n_list must not be empty");
    }
    if ccfg.n_paths == 0 {
        bail!("converge.n_paths must be >= 1");
    }
    if !(ccfg.beta > 0.0) {
        bail!("converge.beta must be positive");
    }
    if ccfg.n_paths == 1 {
        eprintln!("warning: n_paths = 1, standard errors will be reported as missing");
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    let kernel = config::build_kernel(kcfg, base)?;
    let method = config::parse_method(ccfg.method.as_deref())?;
    let opts = SimulateOptions {
        override_stability: ccfg.allow_unstable.unwrap_or(false),
        check_stability: true,
        record_xi: false,
    };
    let study = convergence_study(
        &model,
        &kernel,
        ccfg.beta,
        &ccfg.n_list,
        &DriverConfig { dt: d.dt, horizon: d.horizon, lambda_max: d.lambda_max },
        ccfg.n_paths,
        d.seed,
        method,
        &opts,
    )?;
    let meta = meta_lines(
        "converge",
        config_path,
        &[
            format!("kernel: {}", kernel.label()),
            format!("seed0: {}", d.seed),
            format!("n_paths: {}", ccfg.n_paths),
        ],
    );
    write_file(out_dir, "convergence.csv", &study.to_csv(&meta))?;
    write_file(out_dir, "convergence_samples.csv", &study.samples_csv(&meta))?;
    Ok(())
}

/// `portfolio`: ladder of closed-form values plus the policy-simulation
/// cross-check for the optimal and one suboptimal policy.
pub fn cmd_portfolio(cfg: &FileConfig, config_path: &Path, out_dir: &Path, seed_override: Option<u64>) -> Result<()> {
    let pcfg = cfg
        .portfolio
        .as_ref()
        .with_context(|| format!("{}: missing [portfolio] block", config_path.display()))?;
    let kcfg = cfg.require_kernel(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let kernel = config::build_kernel(kcfg, base)?;
    if !(pcfg.rho > 0.0) {
        bail!("portfolio.rho must be positive");
    }
    if pcfg.n_list.is_empty() {
        bail!("portfolio.n_list must not be empty");
    }
    if pcfg.n_paths == 0 || !(pcfg.dt > 0.0) || !(pcfg.horizon_trunc > pcfg.dt) {
        bail!("portfolio simulation settings must satisfy n_paths >= 1, 0 < dt < horizon_trunc");
    }
    let mkt = MarketSpec {
        mu: pcfg.mu,
        r: pcfg.r,
        sigma: pcfg.sigma,
        gamma: pcfg.gamma,
        rho: pcfg.rho,
        x0: pcfg.x0,
        lambda0: pcfg.lambda0,
        kernel,
    };
    mkt.validate()?;
    let sim = PortfolioSimConfig {
        dt: pcfg.dt,
        horizon_trunc: pcfg.horizon_trunc,
        n_paths: pcfg.n_paths,
        seed0: seed_override.or(pcfg.seed).unwrap_or(1),
        lambda_max: pcfg.lambda_max,
        tail_tol: pcfg.tail_tol,
    };

    let rows = hawkes_lift::control::portfolio_study(&mkt, pcfg.beta, &pcfg.n_list, &sim)?;
    let mut csv = String::new();
    for m in meta_lines(
        "portfolio",
        config_path,
        &[format!("seed0: {}", sim.seed0), format!("n_paths: {}", sim.n_paths)],
    ) {
        csv.push_str(&format!("# {m}\n"));
    }
    csv.push_str(PortfolioRow::csv_header());
    csv.push('\n');
    for r in &rows {
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    write_file(out_dir, "portfolio.csv", &csv)?;

    // Policy cross-check on the configured kernel itself (exponential sums
    // only; ladder markets cover the general case through the fits above).
    if mkt.kernel.is_exp_sum() {
        let closed = value_closed_form(&mkt, &sim)?;
        let optimal = policy_simulation_value(&mkt, &Policy::optimal(&mkt), &sim)?;
        let sub_omega = pcfg.suboptimal_omega.unwrap_or(1.0);
        let sub =
            policy_simulation_value(&mkt, &Policy::constant(mkt.rho, sub_omega), &sim)?;
        let tol = 3.0
            * closed.se.unwrap_or(0.0).hypot(optimal.se.unwrap_or(0.0))
            + closed.tail_bound
            + optimal.tail_bound;
        let agree = (closed.value - optimal.value).abs() <= tol;
        let mut pcsv = String::new();
        for m in meta_lines("portfolio", config_path, &[]) {
            pcsv.push_str(&format!("# {m}\n"));
        }
        pcsv.push_str(&format!("# agreement: {}\n", if agree { "PASS" } else { "FAIL" }));
        pcsv.push_str("policy,value,se,tail_bound\n");
        let se_str = |se: Option<f64>| se.map_or(String::new(), |v| format!("{v}"));
        pcsv.push_str(&format!(
            "closed_form,{},{},{}\n",
            closed.value,
            se_str(closed.se),
            closed.tail_bound
        ));
        pcsv.push_str(&format!(
            "optimal_sim,{},{},{}\n",
            optimal.value,
            se_str(optimal.se),
            optimal.tail_bound
        ));
        pcsv.push_str(&format!(
            "suboptimal_omega_{sub_omega},{},{},{}\n",
            sub.value,
            se_str(sub.se),
            sub.tail_bound
        ));
        write_file(out_dir, "portfolio_policy.csv", &pcsv)?;
        if !agree {
            bail!(
                "closed form {} and optimal-policy simulation {} disagree beyond 3 SE (tol {tol})",
                closed.value,
                optimal.value
            );
        }
    }

    let omega0 = psi_hat(mkt.lambda0, &mkt)?.1;
    eprintln!("omega* at lambda0 = {omega0}");
    Ok(())
}
