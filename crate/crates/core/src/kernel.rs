//! Memory kernels and their approximation by sums of exponentials.
//!
//! A kernel is either an explicit exponential sum
//!
//! ```text
//! phi(t) = sum_k eta_k * exp(-beta_k * t),    0 < beta_1 < ... < beta_n
//! ```
//!
//! or a general scalar function on [0, t_cut] with an explicit L1 bound for
//! the tail beyond t_cut. Fitting fixes the decay ladder beta, 2*beta, ...,
//! n*beta and solves for the coefficients, first in L2 through the Gram
//! system (a modified Hilbert matrix), then optionally refining in L1 by
//! deterministic coordinate search.

use crate::error::{CoreError, Result};
use crate::quad::{trapezoid, AdaptiveQuad};
use nalgebra::{DMatrix, DVector};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Quantities below exp(-NEG_LOG_EPS) are treated as negligible. This drives
/// the default L1 fitting horizon NEG_LOG_EPS / beta, past which every basis
/// exponential has decayed below that level.
pub const NEG_LOG_EPS: f64 = 5.0;

/// Default condition-number ceiling for the Gram solve.
pub const DEFAULT_CONDITION_THRESHOLD: f64 = 1e12;

type KernelFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A memory kernel phi on [0, infinity).
#[derive(Clone)]
pub enum KernelSpec {
    /// Explicit exponential sum with strictly increasing positive decays.
    ExpSum { eta: Vec<f64>, beta: Vec<f64> },
    /// Black-box kernel evaluated on [0, t_cut]; `tail_l1` is a declared
    /// bound on the L1 mass beyond t_cut (zero if the caller wants the norm
    /// restricted to [0, t_cut]).
    General {
        eval: KernelFn,
        t_cut: f64,
        tail_l1: f64,
        label: String,
    },
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::ExpSum { eta, beta } => f
                .debug_struct("ExpSum")
                .field("eta", eta)
                .field("beta", beta)
                .finish(),
            KernelSpec::General { t_cut, tail_l1, label, .. } => f
                .debug_struct("General")
                .field("label", label)
                .field("t_cut", t_cut)
                .field("tail_l1", tail_l1)
                .finish(),
        }
    }
}

impl KernelSpec {
    /// Exponential-sum kernel. Decay rates must be strictly increasing and
    /// positive; coefficients must be finite.
    pub fn exp_sum(eta: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if eta.is_empty() || eta.len() != beta.len() {
            return Err(CoreError::InvalidKernel(
                "eta and beta must be non-empty and of equal length".into(),
            ));
        }
        if eta.iter().any(|e| !e.is_finite()) {
            return Err(CoreError::InvalidKernel("non-finite coefficient".into()));
        }
        let increasing = beta.windows(2).all(|w| w[0] < w[1]);
        if !increasing || beta[0] <= 0.0 || beta.iter().any(|b| !b.is_finite()) {
            return Err(CoreError::InvalidKernel(
                "decay rates must be finite, positive and strictly increasing".into(),
            ));
        }
        Ok(KernelSpec::ExpSum { eta, beta })
    }

    /// Single exponential eta * exp(-beta t).
    pub fn exponential(eta: f64, beta: f64) -> Result<Self> {
        Self::exp_sum(vec![eta], vec![beta])
    }

    /// The zero kernel (an exponential sum with one vanishing coefficient).
    pub fn zero() -> Self {
        KernelSpec::ExpSum { eta: vec![0.0], beta: vec![1.0] }
    }

    /// General kernel with no declared tail mass beyond `t_cut`.
    pub fn general<F>(label: impl Into<String>, f: F, t_cut: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::general_with_tail(label, f, t_cut, 0.0)
    }

    /// General kernel with an explicit L1 bound for the mass beyond `t_cut`.
    pub fn general_with_tail<F>(
        label: impl Into<String>,
        f: F,
        t_cut: f64,
        tail_l1: f64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(t_cut > 0.0 && t_cut.is_finite()) {
            return Err(CoreError::InvalidKernel("t_cut must be positive and finite".into()));
        }
        if !(tail_l1 >= 0.0 && tail_l1.is_finite()) {
            return Err(CoreError::InvalidKernel("tail_l1 must be finite and >= 0".into()));
        }
        Ok(KernelSpec::General {
            eval: Arc::new(f),
            t_cut,
            tail_l1,
            label: label.into(),
        })
    }

    /// Named builtin kernels. `paper_nonmonotone` is
    /// phi(t) = (1 - t) / (1 + t^2.5) on [0, 200], a non-monotone kernel with
    /// an excitation lobe before t = 1 and a heavy inhibitive tail.
    pub fn builtin(name: &str) -> Result<Self> {
        Self::builtin_with(name, None, None)
    }

    /// Builtin lookup with optional overrides of the truncation point and
    /// the declared tail mass.
    pub fn builtin_with(name: &str, t_cut: Option<f64>, tail_l1: Option<f64>) -> Result<Self> {
        match name {
            "paper_nonmonotone" => Self::general_with_tail(
                "paper_nonmonotone",
                |t: f64| (1.0 - t) / (1.0 + t.powf(2.5)),
                t_cut.unwrap_or(200.0),
                tail_l1.unwrap_or(0.0),
            ),
            "gamma_delay" => {
                // c * t * e^{-t}: smooth delayed excitation with L1 norm c.
                Self::general_with_tail(
                    "gamma_delay",
                    |t: f64| t * (-t).exp(),
                    t_cut.unwrap_or(60.0),
                    tail_l1.unwrap_or(0.0),
                )
            }
            other => Err(CoreError::InvalidKernel(format!("unknown builtin kernel `{other}`"))),
        }
    }

    /// Tabulated kernel from (t, phi) pairs with linear interpolation; zero
    /// beyond the last abscissa.
    pub fn from_table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CoreError::InvalidKernel("table needs at least two points".into()));
        }
        let monotone = points.windows(2).all(|w| w[0].0 < w[1].0);
        if !monotone || points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
            return Err(CoreError::InvalidKernel(
                "table abscissae must be finite and strictly increasing, values finite".into(),
            ));
        }
        let t_cut = points.last().unwrap().0;
        if t_cut <= 0.0 {
            return Err(CoreError::InvalidKernel("table must extend past t = 0".into()));
        }
        let f = move |t: f64| -> f64 {
            if t <= points[0].0 {
                return points[0].1;
            }
            if t >= points[points.len() - 1].0 {
                return 0.0;
            }
            let idx = points.partition_point(|p| p.0 <= t);
            let (t0, v0) = points[idx - 1];
            let (t1, v1) = points[idx];
            v0 + (v1 - v0) * (t - t0) / (t1 - t0)
        };
        Self::general("table", f, t_cut)
    }

    /// Tabulated kernel from a two-column CSV file (`t,phi`; `#` comments and
    /// an optional non-numeric header line are skipped).
    pub fn from_table_csv(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            CoreError::InvalidKernel(format!("cannot read {}: {e}", path.as_ref().display()))
        })?;
        let mut points = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',');
            let a = cols.next().map(str::trim).unwrap_or("");
            let b = cols.next().map(str::trim).unwrap_or("");
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(v)) => points.push((t, v)),
                _ if lineno == 0 => continue, // header line
                _ => {
                    return Err(CoreError::InvalidKernel(format!(
                        "bad table row at line {}: `{line}`",
                        lineno + 1
                    )))
                }
            }
        }
        Self::from_table(points)
    }

    /// Pointwise scaling c * phi.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            KernelSpec::ExpSum { eta, beta } => KernelSpec::ExpSum {
                eta: eta.iter().map(|e| c * e).collect(),
                beta: beta.clone(),
            },
            KernelSpec::General { eval, t_cut, tail_l1, label } => {
                let inner = eval.clone();
                KernelSpec::General {
                    eval: Arc::new(move |t| c * inner(t)),
                    t_cut: *t_cut,
                    tail_l1: c.abs() * tail_l1,
                    label: format!("{label}*{c}"),
                }
            }
        }
    }

    /// Evaluate phi(t) for t >= 0.
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            KernelSpec::ExpSum { eta, beta } => eta
                .iter()
                .zip(beta)
                .map(|(e, b)| e * (-b * t).exp())
                .sum(),
            KernelSpec::General { eval, .. } => eval(t),
        }
    }

    pub fn is_exp_sum(&self) -> bool {
        matches!(self, KernelSpec::ExpSum { .. })
    }

    /// Horizon on which the kernel carries essentially all of its declared
    /// mass: t_cut for general kernels, the slowest-decay negligibility
    /// horizon for exponential sums.
    pub fn support_horizon(&self) -> f64 {
        match self {
            KernelSpec::ExpSum { beta, .. } => 30.0 / beta[0],
            KernelSpec::General { t_cut, .. } => *t_cut,
        }
    }

    pub fn label(&self) -> String {
        match self {
            KernelSpec::ExpSum { eta, .. } => format!("expsum(n={})", eta.len()),
            KernelSpec::General { label, .. } => label.clone(),
        }
    }
}

/// The fixed decay ladder beta, 2 beta, ..., n beta.
pub fn ladder(n: usize, beta_base: f64) -> Vec<f64> {
    (1..=n).map(|k| k as f64 * beta_base).collect()
}

fn expsum_eval(terms: &[(f64, f64)], t: f64) -> f64 {
    terms.iter().map(|(e, b)| e * (-b * t).exp()).sum()
}

/// Antiderivative-based integral of an exponential sum over [a, b].
fn expsum_integral(terms: &[(f64, f64)], a: f64, b: f64) -> f64 {
    terms
        .iter()
        .map(|(e, bb)| e / bb * ((-bb * a).exp() - (-bb * b).exp()))
        .sum()
}

/// Exact L1 norm of an exponential sum: locate the sign changes (at most
/// n - 1 of them), then integrate each constant-sign piece with the exact
/// antiderivative. `terms` need not be sorted or have distinct decays.
fn expsum_l1_exact(terms: &[(f64, f64)]) -> f64 {
    let max_eta = terms.iter().map(|(e, _)| e.abs()).fold(0.0, f64::max);
    if max_eta == 0.0 {
        return 0.0;
    }
    let beta_min = terms.iter().map(|(_, b)| *b).fold(f64::INFINITY, f64::min);
    let t_max = 45.0 / beta_min;
    // Scan for sign changes, refine each by bisection.
    let n_scan = 8192;
    let h = t_max / n_scan as f64;
    let mut roots = Vec::new();
    let mut prev = expsum_eval(terms, 0.0);
    for i in 1..=n_scan {
        let t = i as f64 * h;
        let cur = expsum_eval(terms, t);
        if prev == 0.0 {
            roots.push((i - 1) as f64 * h);
        } else if prev.signum() != cur.signum() && cur != 0.0 {
            let (mut lo, mut hi) = ((i - 1) as f64 * h, t);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                let v = expsum_eval(terms, mid);
                if v == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if v.signum() == prev.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev = cur;
    }
    let mut total = 0.0;
    let mut lo = 0.0;
    for r in roots {
        total += expsum_integral(terms, lo, r).abs();
        lo = r;
    }
    // Last piece: constant sign all the way to infinity.
    total += terms
        .iter()
        .map(|(e, b)| e / b * (-b * lo).exp())
        .sum::<f64>()
        .abs();
    total
}

/// ||phi||_1 = integral of |phi| over [0, infinity).
///
/// Exponential sums are integrated exactly piecewise between sign changes.
/// General kernels use adaptive quadrature on [0, t_cut] plus the declared
/// tail bound.
pub fn l1_norm(kernel: &KernelSpec) -> Result<f64> {
    match kernel {
        KernelSpec::ExpSum { eta, beta } => {
            let terms: Vec<(f64, f64)> = eta.iter().copied().zip(beta.iter().copied()).collect();
            Ok(expsum_l1_exact(&terms))
        }
        KernelSpec::General { eval, t_cut, tail_l1, .. } => {
            let q = AdaptiveQuad::default();
            let v = q.integrate_geometric(|t| eval(t).abs(), 0.0, *t_cut, 1.0)?;
            Ok(v + tail_l1)
        }
    }
}

/// L1 distance || sum_k eta_k e^{-k beta t} - phi ||_1 on the kernel's
/// declared domain (plus declared tail mass, over which the approximation is
/// counted as zero).
pub fn l1_distance(phi: &KernelSpec, eta: &[f64], beta_base: f64) -> Result<f64> {
    match phi {
        KernelSpec::ExpSum { eta: pe, beta: pb } => {
            let mut terms: Vec<(f64, f64)> = eta
                .iter()
                .enumerate()
                .map(|(k, e)| (*e, (k + 1) as f64 * beta_base))
                .collect();
            for (e, b) in pe.iter().zip(pb) {
                // Merge coincident decays so pieces stay well defined.
                if let Some(slot) = terms.iter_mut().find(|(_, bb)| (*bb - b).abs() < 1e-14) {
                    slot.0 -= e;
                } else {
                    terms.push((-e, *b));
                }
            }
            Ok(expsum_l1_exact(&terms))
        }
        KernelSpec::General { eval, t_cut, tail_l1, .. } => {
            let q = AdaptiveQuad::default();
            let approx_terms: Vec<(f64, f64)> = eta
                .iter()
                .enumerate()
                .map(|(k, e)| (*e, (k + 1) as f64 * beta_base))
                .collect();
            let head = q.integrate_geometric(
                |t| (expsum_eval(&approx_terms, t) - eval(t)).abs(),
                0.0,
                *t_cut,
                1.0,
            )?;
            // Beyond t_cut the target is only known through its tail bound.
            let approx_tail = expsum_integral(&approx_terms, *t_cut, f64::INFINITY).abs();
            Ok(head + approx_tail + tail_l1)
        }
    }
}

/// L1 distance between two kernels on the union of their declared domains.
/// Exact for a pair of exponential sums; declared tail masses of general
/// kernels are added (the other side is counted as zero there).
pub fn l1_diff(a: &KernelSpec, b: &KernelSpec) -> Result<f64> {
    match (a, b) {
        (KernelSpec::ExpSum { eta: ea, beta: ba }, KernelSpec::ExpSum { eta: eb, beta: bb }) => {
            let mut terms: Vec<(f64, f64)> =
                ea.iter().copied().zip(ba.iter().copied()).collect();
            for (e, bt) in eb.iter().zip(bb) {
                if let Some(slot) = terms.iter_mut().find(|(_, x)| (*x - bt).abs() < 1e-14) {
                    slot.0 -= e;
                } else {
                    terms.push((-e, *bt));
                }
            }
            Ok(expsum_l1_exact(&terms))
        }
        _ => {
            let horizon = a.support_horizon().max(b.support_horizon());
            let q = AdaptiveQuad::default();
            let head =
                q.integrate_geometric(|t| (a.eval(t) - b.eval(t)).abs(), 0.0, horizon, 1.0)?;
            let tail = |k: &KernelSpec| match k {
                KernelSpec::General { tail_l1, .. } => *tail_l1,
                KernelSpec::ExpSum { .. } => 0.0,
            };
            Ok(head + tail(a) + tail(b))
        }
    }
}

/// Squared L2 distance between two kernels on the union of their declared
/// domains (tails beyond are not included).
pub fn l2_diff_sq(a: &KernelSpec, b: &KernelSpec) -> Result<f64> {
    let horizon = a.support_horizon().max(b.support_horizon());
    let q = AdaptiveQuad::default();
    q.integrate_geometric(
        |t| {
            let d = a.eval(t) - b.eval(t);
            d * d
        },
        0.0,
        horizon,
        1.0,
    )
}

/// I(eta) = integral of (sum_k eta_k e^{-k beta t} - phi(t))^2.
pub fn l2_error_sq(phi: &KernelSpec, eta: &[f64], beta_base: f64) -> Result<f64> {
    if beta_base <= 0.0 || !beta_base.is_finite() {
        return Err(CoreError::Domain("beta_base must be positive".into()));
    }
    let terms: Vec<(f64, f64)> = eta
        .iter()
        .enumerate()
        .map(|(k, e)| (*e, (k + 1) as f64 * beta_base))
        .collect();
    let q = AdaptiveQuad::default();
    match phi {
        KernelSpec::ExpSum { eta: pe, beta: pb } => {
            let horizon = phi.support_horizon().max(30.0 / beta_base);
            q.integrate_geometric(
                |t| {
                    let d = expsum_eval(&terms, t)
                        - pe.iter().zip(pb).map(|(e, b)| e * (-b * t).exp()).sum::<f64>();
                    d * d
                },
                0.0,
                horizon,
                1.0,
            )
        }
        KernelSpec::General { eval, t_cut, .. } => q.integrate_geometric(
            |t| {
                let d = expsum_eval(&terms, t) - eval(t);
                d * d
            },
            0.0,
            *t_cut,
            1.0,
        ),
    }
}

/// Result of a kernel fit on the ladder beta, 2 beta, ..., n beta.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub eta: Vec<f64>,
    pub beta_base: f64,
    pub n: usize,
    /// || phi^n - phi ||_1 over the kernel's full declared domain.
    pub l1_error: f64,
    /// I(eta), the squared L2 error.
    pub l2_error_sq: f64,
    /// Condition-number estimate of the Gram matrix used by the L2 solve.
    pub hilbert_condition: f64,
    /// L1 objective actually minimized (restricted to `fit_horizon`).
    pub objective_l1: f64,
    /// Horizon of the L1 objective; basis exponentials are negligible past it.
    pub fit_horizon: f64,
    /// False when the L1 refinement exhausted its iteration budget before
    /// meeting the stopping rule.
    pub converged: bool,
}

impl FitResult {
    /// The fitted kernel as an explicit exponential sum.
    pub fn kernel(&self) -> KernelSpec {
        KernelSpec::ExpSum {
            eta: self.eta.clone(),
            beta: ladder(self.n, self.beta_base),
        }
    }

    pub fn csv_header(n_max: usize) -> String {
        let etas: Vec<String> = (1..=n_max).map(|k| format!("eta_{k}")).collect();
        format!(
            "n,beta,{},l1_error,l2_error_sq,condition,converged",
            etas.join(",")
        )
    }

    pub fn csv_row(&self, n_max: usize) -> String {
        let mut etas: Vec<String> = self.eta.iter().map(|e| format!("{e}")).collect();
        etas.resize(n_max, String::new());
        format!(
            "{},{},{},{},{},{},{}",
            self.n,
            self.beta_base,
            etas.join(","),
            self.l1_error,
            self.l2_error_sq,
            self.hilbert_condition,
            self.converged
        )
    }
}

/// Tunables for the fitting routines.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Hard ceiling on the Gram condition number (default 1e12).
    pub condition_threshold: f64,
    /// Horizon of the L1 objective; defaults to NEG_LOG_EPS / beta_base
    /// capped at the kernel's own support horizon.
    pub fit_horizon: Option<f64>,
    /// Grid points used to evaluate the L1 objective.
    pub grid_points: usize,
    /// Initial coordinate step.
    pub step0: f64,
    /// Step below which the search stops.
    pub min_step: f64,
    /// Full-sweep budget.
    pub max_cycles: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            condition_threshold: DEFAULT_CONDITION_THRESHOLD,
            fit_horizon: None,
            grid_points: 20_001,
            step0: 0.25,
            min_step: 1e-7,
            max_cycles: 2000,
        }
    }
}

fn fit_horizon(phi: &KernelSpec, beta_base: f64, opts: &FitOptions) -> f64 {
    opts.fit_horizon
        .unwrap_or_else(|| (NEG_LOG_EPS / beta_base).min(phi.support_horizon()))
}

/// Moments v_j = integral of e^{-j beta t} phi(t) dt over [0, infinity).
fn basis_moments(phi: &KernelSpec, n: usize, beta_base: f64) -> Result<Vec<f64>> {
    let q = AdaptiveQuad::default();
    (1..=n)
        .map(|j| {
            let bj = j as f64 * beta_base;
            match phi {
                KernelSpec::ExpSum { eta, beta } => Ok(eta
                    .iter()
                    .zip(beta)
                    .map(|(e, b)| e / (bj + b))
                    .sum()),
                KernelSpec::General { eval, t_cut, .. } => {
                    q.integrate_geometric(|t| (-bj * t).exp() * eval(t), 0.0, *t_cut, 1.0)
                }
            }
        })
        .collect()
}

fn gram_matrix(n: usize, beta_base: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| 1.0 / (beta_base * (i + j + 2) as f64))
}

/// Least-squares fit: solve the Gram system M_H eta = v.
///
/// M_H is the Gram matrix of the ladder basis in L2 on [0, infinity), with
/// entries 1/(beta (i + j)) -- a modified Hilbert matrix, symmetric positive
/// definite but severely ill-conditioned as n grows. The solve uses Cholesky
/// and reports the 2-norm condition estimate; conditions beyond the threshold
/// are a hard error rather than a silently regularized solve.
pub fn fit_l2(phi: &KernelSpec, n: usize, beta_base: f64) -> Result<FitResult> {
    fit_l2_with(phi, n, beta_base, &FitOptions::default())
}

pub fn fit_l2_with(
    phi: &KernelSpec,
    n: usize,
    beta_base: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    if n == 0 {
        return Err(CoreError::Domain("n must be >= 1".into()));
    }
    if !(beta_base > 0.0 && beta_base.is_finite()) {
        return Err(CoreError::Domain("beta_base must be positive".into()));
    }
    // phi must be in L1 and L2; both computations fail on non-finite kernels.
    let _ = l1_norm(phi)?;
    let _ = l2_error_sq(phi, &[], beta_base)?;

    let m = gram_matrix(n, beta_base);
    let eig = m.clone().symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    let min_ev = eig.eigenvalues.iter().cloned().fold(f64::MAX, f64::min);
    let condition = if min_ev > 0.0 { max_ev / min_ev } else { f64::INFINITY };
    if condition > opts.condition_threshold {
        return Err(CoreError::IllConditioned {
            condition,
            threshold: opts.condition_threshold,
        });
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| CoreError::Numeric("Gram matrix Cholesky failed".into()))?;
    let v = DVector::from_vec(basis_moments(phi, n, beta_base)?);
    let eta: Vec<f64> = chol.solve(&v).iter().copied().collect();

    let horizon = fit_horizon(phi, beta_base, opts);
    Ok(FitResult {
        l1_error: l1_distance(phi, &eta, beta_base)?,
        l2_error_sq: l2_error_sq(phi, &eta, beta_base)?,
        objective_l1: objective_on_grid(phi, &eta, beta_base, horizon, opts.grid_points),
        fit_horizon: horizon,
        hilbert_condition: condition,
        converged: true,
        eta,
        beta_base,
        n,
    })
}

/// L1 objective J(eta) on a fixed trapezoid grid over [0, horizon].
fn objective_on_grid(
    phi: &KernelSpec,
    eta: &[f64],
    beta_base: f64,
    horizon: f64,
    points: usize,
) -> f64 {
    let h = horizon / (points - 1) as f64;
    let samples: Vec<f64> = (0..points)
        .map(|i| {
            let t = i as f64 * h;
            let approx: f64 = eta
                .iter()
                .enumerate()
                .map(|(k, e)| e * (-((k + 1) as f64) * beta_base * t).exp())
                .sum();
            (approx - phi.eval(t)).abs()
        })
        .collect();
    trapezoid(&samples, h)
}

/// L1 fit: minimize J(eta) by deterministic coordinate search with shrinking
/// steps, warm-started from the L2 solution (or a caller-supplied start).
///
/// The objective is evaluated on a frozen trapezoid grid over the fit
/// horizon, so the search is fully reproducible. By construction the returned
/// objective never exceeds the initial one.
pub fn fit_l1(
    phi: &KernelSpec,
    n: usize,
    beta_base: f64,
    init: Option<&[f64]>,
) -> Result<FitResult> {
    fit_l1_with(phi, n, beta_base, init, &FitOptions::default())
}

pub fn fit_l1_with(
    phi: &KernelSpec,
    n: usize,
    beta_base: f64,
    init: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let l2 = fit_l2_with(phi, n, beta_base, opts)?;
    let mut eta: Vec<f64> = match init {
        Some(v) => {
            if v.len() != n {
                return Err(CoreError::Domain(format!(
                    "init has length {}, expected {n}",
                    v.len()
                )));
            }
            v.to_vec()
        }
        None => l2.eta.clone(),
    };

    let horizon = fit_horizon(phi, beta_base, opts);
    let points = opts.grid_points;
    let h = horizon / (points - 1) as f64;
    let phi_grid: Vec<f64> = (0..points).map(|i| phi.eval(i as f64 * h)).collect();
    let basis: Vec<Vec<f64>> = (1..=n)
        .map(|k| {
            (0..points)
                .map(|i| (-(k as f64) * beta_base * (i as f64) * h).exp())
                .collect()
        })
        .collect();
    let mut resid: Vec<f64> = (0..points)
        .map(|i| {
            eta.iter().zip(&basis).map(|(e, col)| e * col[i]).sum::<f64>() - phi_grid[i]
        })
        .collect();
    let j_of = |resid: &[f64]| -> f64 {
        let abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
        trapezoid(&abs, h)
    };
    let shifted = |resid: &[f64], col: &[f64], s: f64| -> Vec<f64> {
        resid.iter().zip(col).map(|(r, c)| r + s * c).collect()
    };

    let mut best = j_of(&resid);
    let mut step = opts.step0;
    let mut converged = false;
    let mut cycles = 0;
    while cycles < opts.max_cycles {
        cycles += 1;
        let mut improved = false;
        for k in 0..n {
            for dir in [step, -step] {
                let cand = shifted(&resid, &basis[k], dir);
                let jc = j_of(&cand);
                if jc < best - 1e-15 {
                    eta[k] += dir;
                    resid = cand;
                    best = jc;
                    improved = true;
                    // Greedy walk while the same move keeps improving.
                    loop {
                        let cand = shifted(&resid, &basis[k], dir);
                        let jc = j_of(&cand);
                        if jc < best - 1e-15 {
                            eta[k] += dir;
                            resid = cand;
                            best = jc;
                        } else {
                            break;
                        }
                    }
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
            if step < opts.min_step {
                converged = true;
                break;
            }
        }
    }

    Ok(FitResult {
        l1_error: l1_distance(phi, &eta, beta_base)?,
        l2_error_sq: l2_error_sq(phi, &eta, beta_base)?,
        objective_l1: best,
        fit_horizon: horizon,
        hilbert_condition: l2.hilbert_condition,
        converged,
        eta,
        beta_base,
        n,
    })
}

/// Which objective a fit pipeline should return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    /// Gram-system least squares only.
    L2,
    /// L2 solve followed by L1 coordinate-search refinement (default).
    L1,
}

/// Fit with the requested method; `L1` warm-starts from the L2 solution.
pub fn fit(phi: &KernelSpec, n: usize, beta_base: f64, method: FitMethod) -> Result<FitResult> {
    match method {
        FitMethod::L2 => fit_l2(phi, n, beta_base),
        FitMethod::L1 => fit_l1(phi, n, beta_base, None),
    }
}
