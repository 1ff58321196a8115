//! Model coefficients for the Hawkes jump-diffusion
//!
//! ```text
//! dX_t      = mu(t, X) dt + sigma(t, X) dW_t + y gamma(t, X_-) dN_t
//! lambda_t  = lambda_inf(t, X_-) + psi( sum over past jumps of
//!             phi(t - s) b(y) nu(s, X_-) )
//! ```
//!
//! Coefficients are labeled function objects so that builtin models remain
//! printable and configs can name them, while tests stay free to pass
//! arbitrary closures.

use crate::error::{CoreError, Result};
use crate::marks::MarkDist;
use std::fmt;
use std::sync::Arc;

/// A coefficient (t, x) -> value.
#[derive(Clone)]
pub struct Coeff {
    label: String,
    f: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Coeff {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self { label: label.into(), f: Arc::new(f) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), move |_, _| c)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// a * x (state-proportional, e.g. an Ornstein-Uhlenbeck drift).
    pub fn linear_state(a: f64) -> Self {
        Self::new(format!("linear({a}*x)"), move |_, x| a * x)
    }

    #[inline]
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coeff({})", self.label)
    }
}

/// A scalar function u -> value (jump rate psi, mark transform b).
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarFn {
    pub fn new<F>(label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { label: label.into(), f: Arc::new(f) }
    }

    pub fn zero() -> Self {
        Self::new("zero", |_| 0.0)
    }

    pub fn one() -> Self {
        Self::new("one", |_| 1.0)
    }

    pub fn identity() -> Self {
        Self::new("identity", |u| u)
    }

    pub fn abs() -> Self {
        Self::new("abs", f64::abs)
    }

    /// (u)_+
    pub fn pos_part() -> Self {
        Self::new("pos_part", |u: f64| u.max(0.0))
    }

    /// (u)_+ ∧ cap
    pub fn pos_part_capped(cap: f64) -> Self {
        Self::new(format!("pos_part_capped({cap})"), move |u: f64| u.max(0.0).min(cap))
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

/// Which branch of the well-posedness assumption the model relies on: either
/// the jump rate is bounded, or the jump coefficients gamma and nu are
/// state-free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GronwallCase {
    PsiBounded { bound: f64 },
    StateFree,
}

/// All coefficient functions of the jump-diffusion plus the mark law and the
/// initial state.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub mu: Coeff,
    pub sigma: Coeff,
    pub gamma: Coeff,
    /// Intensity mark scaling; |nu| <= 1 is assumed and checked by
    /// diagnostics.
    pub nu: Coeff,
    /// Baseline intensity, non-negative with Lipschitz constant < 1 in x.
    pub lambda_inf: Coeff,
    /// Jump-rate function, non-decreasing and non-negative.
    pub psi: ScalarFn,
    /// Mark transform applied inside the intensity convolution.
    pub b: ScalarFn,
    pub marks: MarkDist,
    pub x0: f64,
    pub gronwall: GronwallCase,
}

impl ModelSpec {
    /// The worked example: a mean-reverting diffusion whose jumps kick the
    /// state through gamma(x) = -40x / (1 + 16 x^2), with
    /// psi(u) = (u)_+ ∧ 7 and nu(x) = 0.2 + 0.8 exp(-0.1 x^2).
    pub fn paper_hawkes_ou() -> Self {
        Self {
            mu: Coeff::new("ou(-0.5*x)", |_, x| -0.5 * x),
            sigma: Coeff::constant(1.0),
            gamma: Coeff::new("kick(-40x/(1+16x^2))", |_, x| -40.0 * x / (1.0 + 16.0 * x * x)),
            nu: Coeff::new("nu(0.2+0.8exp(-0.1x^2))", |_, x| 0.2 + 0.8 * (-0.1 * x * x).exp()),
            lambda_inf: Coeff::constant(1.0),
            psi: ScalarFn::pos_part_capped(7.0),
            b: ScalarFn::one(),
            marks: MarkDist::unit(),
            x0: 0.0,
            gronwall: GronwallCase::PsiBounded { bound: 7.0 },
        }
    }

    /// Classical linear Hawkes counting process: psi = (u)_+, nu = b = 1,
    /// unit marks, X jumps by `jump_size` per event and has no diffusion.
    pub fn linear_hawkes(lambda0: f64, jump_size: f64) -> Self {
        Self {
            mu: Coeff::zero(),
            sigma: Coeff::zero(),
            gamma: Coeff::constant(jump_size),
            nu: Coeff::constant(1.0),
            lambda_inf: Coeff::constant(lambda0),
            psi: ScalarFn::pos_part(),
            b: ScalarFn::one(),
            marks: MarkDist::unit(),
            x0: 0.0,
            gronwall: GronwallCase::StateFree,
        }
    }

    /// State-independent intensity submodel: constant baseline and nu, so the
    /// intensity path is a function of the driving noise alone.
    pub fn state_indep(lambda0: f64, nu0: f64, gamma0: f64, mu0: f64, sigma0: f64) -> Self {
        Self {
            mu: Coeff::constant(mu0),
            sigma: Coeff::constant(sigma0),
            gamma: Coeff::constant(gamma0),
            nu: Coeff::constant(nu0),
            lambda_inf: Coeff::constant(lambda0),
            psi: ScalarFn::pos_part(),
            b: ScalarFn::one(),
            marks: MarkDist::unit(),
            x0: 0.0,
            gronwall: GronwallCase::StateFree,
        }
    }

    /// Diffusion with the jump part switched off (lambda_inf = 0, psi = 0).
    pub fn pure_diffusion(mu: Coeff, sigma: Coeff, x0: f64) -> Self {
        Self {
            mu,
            sigma,
            gamma: Coeff::zero(),
            nu: Coeff::constant(1.0),
            lambda_inf: Coeff::zero(),
            psi: ScalarFn::zero(),
            b: ScalarFn::one(),
            marks: MarkDist::unit(),
            x0,
            gronwall: GronwallCase::PsiBounded { bound: 0.0 },
        }
    }

    /// Point-process-only model for the portfolio intensity
    /// lambda_t = lambda0 + sum eta_k xi_k: identity jump rate, unit marks,
    /// X frozen at zero.
    pub fn portfolio_intensity(lambda0: f64) -> Self {
        Self {
            mu: Coeff::zero(),
            sigma: Coeff::zero(),
            gamma: Coeff::zero(),
            nu: Coeff::constant(1.0),
            lambda_inf: Coeff::constant(lambda0),
            psi: ScalarFn::identity(),
            b: ScalarFn::one(),
            marks: MarkDist::unit(),
            x0: 0.0,
            gronwall: GronwallCase::StateFree,
        }
    }

    /// Look up a builtin model by config name.
    pub fn builtin(name: &str, params: &BuiltinParams) -> Result<Self> {
        match name {
            "paper_hawkes_ou" => {
                let mut m = Self::paper_hawkes_ou();
                if let Some(x0) = params.x0 {
                    m.x0 = x0;
                }
                Ok(m)
            }
            "linear_hawkes" => Ok(Self::linear_hawkes(
                params.lambda0.unwrap_or(1.0),
                params.jump_size.unwrap_or(1.0),
            )),
            "state_indep" => Ok(Self::state_indep(
                params.lambda0.unwrap_or(1.0),
                params.nu0.unwrap_or(1.0),
                params.jump_size.unwrap_or(1.0),
                params.mu0.unwrap_or(0.0),
                params.sigma0.unwrap_or(0.0),
            )),
            "pure_diffusion" => Ok(Self::pure_diffusion(
                Coeff::linear_state(params.mu0.unwrap_or(0.0)),
                Coeff::constant(params.sigma0.unwrap_or(1.0)),
                params.x0.unwrap_or(1.0),
            )),
            "portfolio_intensity" => Ok(Self::portfolio_intensity(params.lambda0.unwrap_or(1.0))),
            other => Err(CoreError::Domain(format!("unknown builtin model `{other}`"))),
        }
    }
}

/// Parameters accepted by the builtin model registry.
#[derive(Debug, Clone, Default)]
pub struct BuiltinParams {
    pub lambda0: Option<f64>,
    pub jump_size: Option<f64>,
    pub nu0: Option<f64>,
    pub mu0: Option<f64>,
    pub sigma0: Option<f64>,
    pub x0: Option<f64>,
}
