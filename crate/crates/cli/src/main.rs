//! Batch front end: kernel fitting, simulation, assumption checks,
//! convergence studies and the portfolio example, all driven by one config
//! file and emitting CSV under the output directory.

mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};
use hawkes_lift::CoreError;
use std::path::PathBuf;
use std::process::ExitCode;

const CONFIG_REFERENCE: &str = "\
CONFIG FILE KEYS (TOML; one block per concern)
  threads                 worker threads; 0 or absent = machine parallelism
  out                     output directory (overridden by --out)

  [model]  builtin        one of: paper_hawkes_ou | linear_hawkes |
                          state_indep | pure_diffusion | portfolio_intensity
           lambda0        baseline intensity, >= 0
           jump_size      constant jump impact gamma
           nu0            constant intensity mark scaling, |nu0| <= 1
           mu0, sigma0    drift / volatility parameters
           x0             initial state

  [kernel] type           expsum | builtin | table
           eta, beta      expsum: coefficients and strictly increasing
                          positive decay rates
           name           builtin: paper_nonmonotone | gamma_delay
           path           table: two-column CSV t,phi (linear interpolation)
           t_cut          truncation point of a general kernel, > 0
           tail_l1        declared L1 mass beyond t_cut, >= 0
           scale          pointwise scaling factor

  [driver] seed           u64 seed of the reproducible noise driver
           dt             grid step, > 0
           horizon        terminal time T, > 0
           lambda_max     dominating intensity, > 0 and >= sup lambda

  [fit]    n_list         ladder sizes, each >= 1
           beta           ladder base decay, > 0 (never optimized)
           method         l1 (default; L2 solve then L1 refinement) | l2
           curve_t_max    plotting grid end (default 10)
           curve_dt       plotting grid step (default 0.01)

  [simulate] fit_n        ladder sizes to fit and co-simulate
             fit_beta     ladder base for fit_n (defaults to fit.beta)
             include_true also simulate the configured kernel (default true)
             allow_unstable  run despite stability product >= 1

  [check]  t_min/t_max, x_min/x_max, psi_min/psi_max, samples
                          sampling box of the assumption estimates

  [converge] n_list       ladder sizes, non-empty
             n_paths      coupled paths per row, >= 1
             beta         ladder base, > 0
             method       l1 | l2
             allow_unstable  as above

  [portfolio] mu, r, sigma(>0), gamma(>-1), rho(>0), x0(>0), lambda0(>=0)
              n_list      ladder sizes for the value sequence
              n_paths     Monte Carlo paths, >= 1
              horizon_trunc  truncation of the discounted integral
              dt, lambda_max, seed
              tail_tol    required bound on the discounted tail
              beta        ladder base for the fits
              suboptimal_omega  constant fraction of the reference policy

EXIT CODES: 0 ok, 1 config/usage, 2 assumption check failed,
            3 assumption check inconclusive, 4 domination violated.";

#[derive(Parser)]
#[command(
    name = "hawkes-lift",
    about = "Hawkes jump-diffusions with general kernels: fitting, simulation, diagnostics, control",
    after_long_help = CONFIG_REFERENCE
)]
struct Cli {
    /// Config file (TOML blocks; see --help for every key).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override the driver / study seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = machine parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit sums of exponentials to the configured kernel.
    FitKernel,
    /// Simulate the kernel and its ladder fits on one shared driver.
    Simulate,
    /// Check the standing assumptions; exit code encodes the verdict.
    Check,
    /// Coupled convergence study along a fit ladder.
    Converge,
    /// Closed-form portfolio values and the policy-simulation cross-check.
    Portfolio,
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if let Some(core) = err.downcast_ref::<CoreError>() {
        if matches!(core, CoreError::DominationViolated { .. }) {
            return 4;
        }
    }
    1
}

fn run(cli: &Cli) -> Result<i32> {
    let config_path = cli
        .config
        .clone()
        .ok_or_else(|| anyhow::anyhow!("--config <path> is required"))?;
    let mut cfg = config::load(&config_path)?;

    if let Some(seed) = cli.seed {
        if let Some(d) = cfg.driver.as_mut() {
            d.seed = seed;
        }
    }
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    match cli.command {
        Command::FitKernel => {
            commands::cmd_fit(&cfg, &config_path, &out_dir)?;
            Ok(0)
        }
        Command::Simulate => {
            commands::cmd_simulate(&cfg, &config_path, &out_dir)?;
            Ok(0)
        }
        Command::Check => commands::cmd_check(&cfg, &config_path, &out_dir),
        Command::Converge => {
            commands::cmd_converge(&cfg, &config_path, &out_dir)?;
            Ok(0)
        }
        Command::Portfolio => {
            commands::cmd_portfolio(&cfg, &config_path, &out_dir, cli.seed)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
