//! Shared event loop for the Volterra and lifted simulators.
//!
//! Time is driven by the merged stream of grid nodes and dominated Poisson
//! candidates. The diffusion part is advanced by Euler sub-steps between
//! consecutive events (the Brownian path is linear between grid nodes);
//! thinning is exact: at each candidate the current intensity is evaluated
//! from the jump history and the point is accepted iff theta <= lambda. At a
//! candidate coinciding with a grid node the jump is resolved first.
//!
//! The two intensity representations differ only in how the excitation term
//! is computed: the Volterra form re-evaluates the kernel over the whole jump
//! history (O(#jumps) per candidate), the lifted form decays the auxiliary
//! states and reads an inner product (O(n) per candidate).

use crate::driver::NoiseDriver;
use crate::error::{CoreError, Result};
use crate::kernel::KernelSpec;
use crate::lift::{GeneratorCtx, TestFunction};
use crate::model::ModelSpec;
use crate::path::{JumpEvent, LiftedState, PathRecord};
use crate::quad::gauss_legendre;

/// Excitation state: the argument of psi in the intensity.
pub(crate) enum Excitation<'k> {
    Volterra {
        kernel: &'k KernelSpec,
        /// Accepted jumps as (time, b(y) * nu(s, X_-)).
        history: Vec<(f64, f64)>,
    },
    Lifted {
        eta: &'k [f64],
        beta: &'k [f64],
        /// Auxiliary states, decayed exactly at every event boundary.
        xi: Vec<f64>,
    },
}

impl Excitation<'_> {
    fn advance(&mut self, delta: f64) {
        if let Excitation::Lifted { beta, xi, .. } = self {
            for (v, b) in xi.iter_mut().zip(*beta) {
                *v *= (-b * delta).exp();
            }
        }
    }

    /// Raw excitation at the current time `t` (states must already be
    /// advanced to `t`). Returns (value, work units).
    fn raw(&self, t: f64) -> (f64, u64) {
        match self {
            Excitation::Volterra { kernel, history } => {
                let v = history
                    .iter()
                    .map(|(s, w)| kernel.eval(t - s) * w)
                    .sum();
                (v, history.len() as u64)
            }
            Excitation::Lifted { eta, xi, .. } => {
                let v = eta.iter().zip(xi).map(|(e, x)| e * x).sum();
                (v, eta.len() as u64)
            }
        }
    }

    fn on_jump(&mut self, t: f64, w: f64) {
        match self {
            Excitation::Volterra { history, .. } => history.push((t, w)),
            Excitation::Lifted { xi, .. } => {
                for v in xi.iter_mut() {
                    *v += w;
                }
            }
        }
    }

    fn xi(&self) -> Option<&[f64]> {
        match self {
            Excitation::Lifted { xi, .. } => Some(xi),
            Excitation::Volterra { .. } => None,
        }
    }
}

/// Optional per-path functional accumulated along the run with per-interval
/// Gauss quadrature on the exactly-known state evolution (x frozen between
/// events, xi in exact exponential decay).
pub(crate) enum Probe<'a> {
    /// Accumulates the generator integral of the Dynkin decomposition.
    Dynkin { g: &'a dyn TestFunction, ctx: &'a GeneratorCtx<'a> },
    /// Accumulates integral of e^{-rho s} f(s, x, lambda_s) ds.
    Discounted { rho: f64, f: &'a (dyn Fn(f64, f64, f64) -> f64 + Sync) },
}

pub(crate) struct EngineOpts<'a> {
    pub record_xi: bool,
    pub record_candidate_x: bool,
    /// Resume from a lifted snapshot whose time lies on a grid node.
    pub start: Option<&'a LiftedState>,
    pub probe: Option<Probe<'a>>,
}

impl Default for EngineOpts<'_> {
    fn default() -> Self {
        Self { record_xi: false, record_candidate_x: false, start: None, probe: None }
    }
}

pub(crate) struct SimOutcome {
    pub record: PathRecord,
    /// Indices of accepted points within `driver.poisson`.
    pub accepted: Vec<usize>,
    /// X right after each candidate (all candidates), if requested.
    pub candidate_x: Vec<f64>,
    /// Number of candidate intensity evaluations (read by cost tests).
    #[allow(dead_code)]
    pub eval_count: u64,
    /// Total excitation work units over all candidate evaluations.
    #[allow(dead_code)]
    pub excitation_work: u64,
    /// Accumulated probe integral, and the probe endpoints for Dynkin.
    pub probe_integral: f64,
    pub g_start: f64,
    pub g_end: f64,
}

struct ProbeAccum {
    nodes: Vec<(f64, f64)>,
    scratch_xi: Vec<f64>,
    scratch_gen: Vec<f64>,
    integral: f64,
}

impl ProbeAccum {
    fn new(n_xi: usize) -> Self {
        let (xs, ws) = gauss_legendre(3);
        Self {
            nodes: xs.into_iter().zip(ws).collect(),
            scratch_xi: vec![0.0; n_xi],
            scratch_gen: vec![0.0; n_xi],
            integral: 0.0,
        }
    }

    fn add_interval(
        &mut self,
        probe: &Probe<'_>,
        model: &ModelSpec,
        exc: &Excitation<'_>,
        t0: f64,
        t1: f64,
        x: f64,
    ) -> Result<()> {
        if t1 <= t0 {
            return Ok(());
        }
        let (eta, beta, xi) = match exc {
            Excitation::Lifted { eta, beta, xi } => (*eta, *beta, xi),
            Excitation::Volterra { .. } => {
                return Err(CoreError::Domain(
                    "path probes require the lifted representation".into(),
                ))
            }
        };
        let c = 0.5 * (t0 + t1);
        let h = 0.5 * (t1 - t0);
        for i in 0..self.nodes.len() {
            let (node, weight) = self.nodes[i];
            let s = c + h * node;
            for k in 0..xi.len() {
                self.scratch_xi[k] = xi[k] * (-beta[k] * (s - t0)).exp();
            }
            let v = match probe {
                Probe::Dynkin { g, ctx } => {
                    ctx.apply_with_scratch(*g, s, x, &self.scratch_xi, &mut self.scratch_gen)?
                }
                Probe::Discounted { rho, f } => {
                    let raw: f64 = eta.iter().zip(&self.scratch_xi).map(|(e, v)| e * v).sum();
                    let lam = model.lambda_inf.eval(s, x) + model.psi.eval(raw);
                    (-rho * s).exp() * f(s, x, lam)
                }
            };
            if !v.is_finite() {
                return Err(CoreError::Numeric(format!("probe integrand not finite at t={s}")));
            }
            self.integral += weight * h * v;
        }
        Ok(())
    }
}

pub(crate) fn run(
    model: &ModelSpec,
    mut exc: Excitation<'_>,
    driver: &NoiseDriver,
    opts: EngineOpts<'_>,
) -> Result<SimOutcome> {
    let n_steps = driver.n_steps();
    let lambda_cap = driver.lambda_max * (1.0 + 1e-12) + 1e-12;

    // Resume point. The snapshot time must sit on a grid node so the Euler
    // sub-step boundaries of the resumed run coincide with an uninterrupted
    // one.
    let (i0, mut x) = match opts.start {
        None => (0usize, model.x0),
        Some(s) => {
            let idx = (s.t / driver.dt).round() as usize;
            if idx > n_steps || (driver.grid_time(idx) - s.t).abs() > 1e-9 {
                return Err(CoreError::Domain(format!(
                    "resume time {} does not lie on the driver grid",
                    s.t
                )));
            }
            if let Excitation::Lifted { xi, eta, .. } = &mut exc {
                if s.xi.len() != eta.len() {
                    return Err(CoreError::Domain(format!(
                        "snapshot has {} auxiliary states, kernel has {}",
                        s.xi.len(),
                        eta.len()
                    )));
                }
                xi.copy_from_slice(&s.xi);
            }
            (idx, s.x)
        }
    };
    let t_start = driver.grid_time(i0);

    let n_xi = exc.xi().map_or(0, <[f64]>::len);
    let mut probe_accum = ProbeAccum::new(n_xi);
    let mut g_start = 0.0;
    if let Some(Probe::Dynkin { g, .. }) = &opts.probe {
        g_start = g.value(t_start, x, exc.xi().unwrap_or(&[]));
    }

    let n_grid = n_steps - i0 + 1;
    let mut record = PathRecord {
        times: Vec::with_capacity(n_grid),
        x: Vec::with_capacity(n_grid),
        lambda: Vec::with_capacity(n_grid),
        jumps: Vec::new(),
        xi: opts.record_xi.then(|| Vec::with_capacity(n_grid)),
        sup_abs_x: x.abs(),
    };
    let mut accepted = Vec::new();
    let mut candidate_x = Vec::new();
    let mut eval_count = 0u64;
    let mut excitation_work = 0u64;

    let mut t_cur = t_start;

    macro_rules! lambda_now {
        ($t:expr, $count_work:expr) => {{
            let (raw, work) = exc.raw($t);
            if $count_work {
                excitation_work += work;
            }
            let lam = model.lambda_inf.eval($t, x) + model.psi.eval(raw);
            if !lam.is_finite() {
                return Err(CoreError::Numeric(format!("intensity not finite at t={}", $t)));
            }
            if lam < -1e-9 {
                return Err(CoreError::Numeric(format!(
                    "negative intensity {lam} at t={}; psi and lambda_inf must be non-negative",
                    $t
                )));
            }
            lam
        }};
    }

    macro_rules! record_grid {
        ($t:expr) => {{
            let lam = lambda_now!($t, false);
            record.times.push($t);
            record.x.push(x);
            record.lambda.push(lam);
            if let (Some(rows), Some(xi)) = (record.xi.as_mut(), exc.xi()) {
                rows.push(xi.to_vec());
            }
        }};
    }

    macro_rules! advance_to {
        ($t:expr) => {{
            let t_next = $t;
            let delta = t_next - t_cur;
            if delta > 0.0 {
                if let Some(p) = &opts.probe {
                    probe_accum.add_interval(p, model, &exc, t_cur, t_next, x)?;
                }
                let mu = model.mu.eval(t_cur, x);
                let sig = model.sigma.eval(t_cur, x);
                if !mu.is_finite() || !sig.is_finite() {
                    return Err(CoreError::Numeric(format!(
                        "non-finite coefficient at t={t_cur}, x={x}"
                    )));
                }
                let dw = driver.w_at(t_next) - driver.w_at(t_cur);
                x += mu * delta + sig * dw;
                if !x.is_finite() {
                    return Err(CoreError::Numeric(format!("state diverged at t={t_next}")));
                }
                exc.advance(delta);
                t_cur = t_next;
                record.sup_abs_x = record.sup_abs_x.max(x.abs());
            }
        }};
    }

    record_grid!(t_start);

    let mut cand = driver.poisson.partition_point(|p| p.t <= t_start);
    for i in (i0 + 1)..=n_steps {
        let t_grid = driver.grid_time(i);
        while cand < driver.poisson.len() && driver.poisson[cand].t <= t_grid {
            let p = driver.poisson[cand];
            advance_to!(p.t);
            let lam = lambda_now!(p.t, true);
            eval_count += 1;
            if lam > lambda_cap {
                return Err(CoreError::DominationViolated {
                    t: p.t,
                    lambda: lam,
                    lambda_max: driver.lambda_max,
                });
            }
            if p.theta <= lam {
                let w = model.b.eval(p.y) * model.nu.eval(p.t, x);
                let dx = p.y * model.gamma.eval(p.t, x);
                if !w.is_finite() || !dx.is_finite() {
                    return Err(CoreError::Numeric(format!("non-finite jump at t={}", p.t)));
                }
                x += dx;
                record.sup_abs_x = record.sup_abs_x.max(x.abs());
                exc.on_jump(p.t, w);
                record.jumps.push(JumpEvent { t: p.t, y: p.y, dx, dw_excitation: w });
                accepted.push(cand);
            }
            if opts.record_candidate_x {
                candidate_x.push(x);
            }
            cand += 1;
        }
        advance_to!(t_grid);
        record_grid!(t_grid);
    }

    let mut g_end = 0.0;
    if let Some(Probe::Dynkin { g, .. }) = &opts.probe {
        g_end = g.value(t_cur, x, exc.xi().unwrap_or(&[]));
    }

    Ok(SimOutcome {
        record,
        accepted,
        candidate_x,
        eval_count,
        excitation_work,
        probe_integral: probe_accum.integral,
        g_start,
        g_end,
    })
}
