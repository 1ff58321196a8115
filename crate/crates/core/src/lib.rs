//! Hawkes jump-diffusions with general memory kernels.
//!
//! The crate simulates the path-dependent (Volterra) dynamics by exact
//! thinning of a dominated Poisson measure, approximates kernels by sums of
//! exponentials on a fixed decay ladder, simulates the equivalent lifted
//! Markov system, and evaluates the closed-form log-utility portfolio example
//! driven by a contagious jump intensity.

pub mod control;
pub mod diagnostics;
pub mod driver;
mod engine;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod lift;
pub mod marks;
pub mod model;
pub mod path;
pub mod quad;
pub mod stats;
pub mod volterra;

pub use driver::{make_driver, NoiseDriver, PoissonPoint};
pub use error::{CoreError, Result};
pub use kernel::{fit, fit_l1, fit_l2, l1_norm, l2_error_sq, FitMethod, FitOptions, FitResult, KernelSpec};
pub use marks::MarkDist;
pub use model::{Coeff, GronwallCase, ModelSpec, ScalarFn};
pub use path::{JumpEvent, LiftedState, PathRecord};
pub use volterra::{estimate_moments, simulate_volterra, MomentSummary, SimulateOptions};
pub use lift::{apply_generator, simulate_lifted, simulate_lifted_from, TestFunction};
pub use diagnostics::{check_assumptions, intensity_bound, resolvent, AssumptionReport, Resolvent, SamplingBox, Verdict};
pub use experiments::{convergence_study, coupled_error, ConvergenceRow, DriverConfig};
pub use control::{policy_simulation_value, psi_hat, value_closed_form, MarketSpec, Policy, ValueEstimate};
