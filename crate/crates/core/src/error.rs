//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors produced by kernel fitting, simulation and diagnostics.
#[derive(Debug, Error)]
pub enum CoreError {
    /// A kernel evaluated to a non-finite value or failed a structural
    /// invariant (decay rates not strictly increasing, empty table, ...).
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// The Gram matrix of the exponential ladder is too ill-conditioned to
    /// solve reliably.
    #[error("Gram matrix condition {condition:.3e} exceeds threshold {threshold:.3e}; reduce n or change beta")]
    IllConditioned { condition: f64, threshold: f64 },

    /// A precondition on plain numeric inputs was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation that requires an exponential-sum kernel received a
    /// general one.
    #[error("operation requires an exponential-sum kernel")]
    NotExpSum,

    /// The running intensity exceeded the dominating level of the thinning
    /// construction; the realized path is invalid.
    #[error("domination violated at t={t:.6}: lambda={lambda:.6} > lambda_max={lambda_max:.6}; increase lambda_max and re-run")]
    DominationViolated { t: f64, lambda: f64, lambda_max: f64 },

    /// NaN/Inf appeared in a coefficient or state variable.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The resolvent Neumann series does not converge.
    #[error("resolvent series diverges: ||phi||_1 = {l1_norm:.6} >= 1")]
    DivergentSeries { l1_norm: f64 },

    /// The stability product L * E[b(Y)] * ||phi||_1 is not below one and the
    /// caller did not override.
    #[error("stability product {product:.6} >= 1; pass the unstable override to simulate anyway")]
    Unstable { product: f64 },

    /// The requested truncation horizon leaves a discounted tail above the
    /// tolerance.
    #[error("truncation horizon too short: tail bound {tail:.3e} > tolerance {tol:.3e}; need horizon >= {needed:.3}")]
    HorizonTooShort { tail: f64, tol: f64, needed: f64 },

    /// Too many coupled paths hit domination violations even after
    /// deterministic re-seeding.
    #[error("rejected {rejected} of {total} coupled paths (>= 1%); raise lambda_max")]
    RejectionBudget { rejected: usize, total: usize },
}

pub type Result<T> = std::result::Result<T, CoreError>;
