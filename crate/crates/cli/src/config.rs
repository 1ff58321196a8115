//! Config file schema: one TOML document with a named block per concern.
//! Every numeric field is validated against the target module's
//! preconditions before any computation starts.

use anyhow::{bail, Context, Result};
use hawkes_lift::kernel::FitMethod;
use hawkes_lift::model::BuiltinParams;
use hawkes_lift::{KernelSpec, ModelSpec, SamplingBox};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Monte Carlo worker threads (0 or absent: machine parallelism).
    pub threads: Option<usize>,
    /// Output directory; overridden by --out.
    pub out: Option<String>,
    pub model: Option<ModelCfg>,
    pub kernel: Option<KernelCfg>,
    pub driver: Option<DriverCfg>,
    pub fit: Option<FitCfg>,
    pub simulate: Option<SimulateCfg>,
    pub check: Option<CheckCfg>,
    pub converge: Option<ConvergeCfg>,
    pub portfolio: Option<PortfolioCfg>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct ModelCfg {
    pub builtin: String,
    pub lambda0: Option<f64>,
    pub jump_size: Option<f64>,
    pub nu0: Option<f64>,
    pub mu0: Option<f64>,
    pub sigma0: Option<f64>,
    pub x0: Option<f64>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct KernelCfg {
    /// "expsum", "builtin" or "table".
    pub r#type: String,
    pub eta: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub name: Option<String>,
    pub path: Option<String>,
    pub t_cut: Option<f64>,
    pub tail_l1: Option<f64>,
    pub scale: Option<f64>,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct DriverCfg {
    pub seed: u64,
    pub dt: f64,
    pub horizon: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct FitCfg {
    pub n_list: Vec<usize>,
    pub beta: f64,
    /// "l1" (default) or "l2".
    pub method: Option<String>,
    pub curve_t_max: Option<f64>,
    pub curve_dt: Option<f64>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct SimulateCfg {
    /// Ladder sizes to fit and simulate alongside the true kernel.
    pub fit_n: Option<Vec<usize>>,
    pub fit_beta: Option<f64>,
    pub include_true: Option<bool>,
    pub allow_unstable: Option<bool>,
}

#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct CheckCfg {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub psi_min: Option<f64>,
    pub psi_max: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct ConvergeCfg {
    pub n_list: Vec<usize>,
    pub n_paths: usize,
    pub beta: f64,
    pub method: Option<String>,
    pub allow_unstable: Option<bool>,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct PortfolioCfg {
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub rho: f64,
    pub x0: f64,
    pub lambda0: f64,
    pub n_list: Vec<usize>,
    pub n_paths: usize,
    pub horizon_trunc: f64,
    pub dt: f64,
    pub lambda_max: f64,
    pub tail_tol: Option<f64>,
    pub beta: f64,
    pub seed: Option<u64>,
    /// Constant risky fraction of the reference suboptimal policy.
    pub suboptimal_omega: Option<f64>,
}

pub fn load(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("{}: cannot read config", path.display()))?;
    let cfg: FileConfig =
        toml::from_str(&text).with_context(|| format!("{}: bad config", path.display()))?;
    Ok(cfg)
}

impl FileConfig {
    pub fn require_kernel(&self, config_path: &Path) -> Result<&KernelCfg> {
        self.kernel
            .as_ref()
            .with_context(|| format!("{}: missing [kernel] block", config_path.display()))
    }

    pub fn require_model(&self, config_path: &Path) -> Result<&ModelCfg> {
        self.model
            .as_ref()
            .with_context(|| format!("{}: missing [model] block", config_path.display()))
    }

    pub fn require_driver(&self, config_path: &Path) -> Result<DriverCfg> {
        let d = self
            .driver
            .with_context(|| format!("{}: missing [driver] block", config_path.display()))?;
        if !(d.dt > 0.0) {
            bail!("driver.dt must be positive");
        }
        if !(d.horizon > 0.0) {
            bail!("driver.horizon must be positive");
        }
        if !(d.lambda_max > 0.0) {
            bail!("driver.lambda_max must be positive");
        }
        Ok(d)
    }
}

pub fn build_kernel(cfg: &KernelCfg, base_dir: &Path) -> Result<KernelSpec> {
    let kernel = match cfg.r#type.as_str() {
        "expsum" => {
            let eta = cfg.eta.clone().context("kernel.eta required for type = \"expsum\"")?;
            let beta = cfg.beta.clone().context("kernel.beta required for type = \"expsum\"")?;
            KernelSpec::exp_sum(eta, beta)?
        }
        "builtin" => {
            let name = cfg.name.as_deref().context("kernel.name required for type = \"builtin\"")?;
            KernelSpec::builtin_with(name, cfg.t_cut, cfg.tail_l1)?
        }
        "table" => {
            let rel = cfg.path.as_deref().context("kernel.path required for type = \"table\"")?;
            let mut p = PathBuf::from(rel);
            if p.is_relative() {
                p = base_dir.join(p);
            }
            KernelSpec::from_table_csv(&p)?
        }
        other => bail!("kernel.type must be expsum, builtin or table (got `{other}`)"),
    };
    Ok(match cfg.scale {
        Some(c) if c != 1.0 => kernel.scaled(c),
        _ => kernel,
    })
}

pub fn build_model(cfg: &ModelCfg) -> Result<ModelSpec> {
    let params = BuiltinParams {
        lambda0: cfg.lambda0,
        jump_size: cfg.jump_size,
        nu0: cfg.nu0,
        mu0: cfg.mu0,
        sigma0: cfg.sigma0,
        x0: cfg.x0,
    };
    Ok(ModelSpec::builtin(&cfg.builtin, &params)?)
}

pub fn build_sampling_box(cfg: Option<&CheckCfg>) -> SamplingBox {
    let d = SamplingBox::default();
    match cfg {
        None => d,
        Some(c) => SamplingBox {
            t_range: (c.t_min.unwrap_or(d.t_range.0), c.t_max.unwrap_or(d.t_range.1)),
            x_range: (c.x_min.unwrap_or(d.x_range.0), c.x_max.unwrap_or(d.x_range.1)),
            psi_range: (c.psi_min.unwrap_or(d.psi_range.0), c.psi_max.unwrap_or(d.psi_range.1)),
            samples: c.samples.unwrap_or(d.samples),
        },
    }
}

pub fn parse_method(s: Option<&str>) -> Result<FitMethod> {
    match s.unwrap_or("l1") {
        "l1" => Ok(FitMethod::L1),
        "l2" => Ok(FitMethod::L2),
        other => bail!("fit method must be \"l1\" or \"l2\" (got `{other}`)"),
    }
}
