//! Reproducible realization of the driving randomness: Brownian increments
//! on a grid plus the points of a dominated Poisson measure on
//! [0, T] x [0, lambda_max] with i.i.d. marks.
//!
//! A driver is a pure function of (seed, dt, horizon, lambda_max, marks), so
//! coupled simulations under different kernels can share one driver exactly.

use crate::error::{CoreError, Result};
use crate::marks::MarkDist;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

/// One point of the dominating Poisson measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonPoint {
    pub t: f64,
    /// Uniform level in [0, lambda_max]; the point is accepted when
    /// theta <= lambda_t.
    pub theta: f64,
    /// Mark drawn from the mark distribution.
    pub y: f64,
}

/// A frozen realization of (W, Pi) on [0, horizon].
#[derive(Debug, Clone)]
pub struct NoiseDriver {
    pub seed: u64,
    /// Effective grid step; the requested dt is rounded so the grid ends
    /// exactly at the horizon.
    pub dt: f64,
    pub horizon: f64,
    pub lambda_max: f64,
    /// Gaussian increments with variance dt, one per grid step.
    pub brownian: Vec<f64>,
    /// Dominated Poisson points sorted by time.
    pub poisson: Vec<PoissonPoint>,
    w_cum: Vec<f64>,
}

/// Build a driver. Identical inputs yield bit-identical drivers.
pub fn make_driver(
    seed: u64,
    dt: f64,
    horizon: f64,
    lambda_max: f64,
    marks: &MarkDist,
) -> Result<NoiseDriver> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CoreError::Domain("dt must be positive".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(CoreError::Domain("horizon must be positive".into()));
    }
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err(CoreError::Domain("lambda_max must be positive".into()));
    }
    marks.validate()?;

    let n_steps = ((horizon / dt).round() as usize).max(1);
    let h = horizon / n_steps as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let sq = h.sqrt();
    let brownian: Vec<f64> = (0..n_steps)
        .map(|_| sq * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();

    let count = Poisson::new(lambda_max * horizon)
        .map_err(|e| CoreError::Domain(format!("bad Poisson mean: {e}")))?
        .sample(&mut rng) as usize;
    let mut poisson: Vec<PoissonPoint> = (0..count)
        .map(|_| {
            let t = rng.gen::<f64>() * horizon;
            let theta = rng.gen::<f64>() * lambda_max;
            let y = marks.sample(&mut rng);
            PoissonPoint { t, theta, y }
        })
        .collect();
    poisson.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite times"));

    let mut w_cum = Vec::with_capacity(n_steps + 1);
    w_cum.push(0.0);
    let mut acc = 0.0;
    for dw in &brownian {
        acc += dw;
        w_cum.push(acc);
    }

    Ok(NoiseDriver { seed, dt: h, horizon, lambda_max, brownian, poisson, w_cum })
}

impl NoiseDriver {
    pub fn n_steps(&self) -> usize {
        self.brownian.len()
    }

    pub fn grid_time(&self, i: usize) -> f64 {
        if i == self.n_steps() {
            self.horizon
        } else {
            i as f64 * self.dt
        }
    }

    /// Brownian path value at an arbitrary time, linear between grid nodes.
    /// Sub-grid events see a proportional share of the step increment, which
    /// keeps coupled runs on the same driver exactly comparable.
    pub fn w_at(&self, t: f64) -> f64 {
        debug_assert!((0.0..=self.horizon + 1e-12).contains(&t));
        let s = (t / self.dt).min(self.n_steps() as f64);
        let i = (s.floor() as usize).min(self.n_steps() - 1);
        let frac = s - i as f64;
        self.w_cum[i] + frac * self.brownian[i]
    }

    /// Merge every `factor` consecutive Brownian increments, keeping the same
    /// Poisson points: the coarse driver realizes the same noise on a
    /// coarser grid (used for step-refinement checks).
    pub fn coarsen(&self, factor: usize) -> Result<NoiseDriver> {
        if factor == 0 || self.n_steps() % factor != 0 {
            return Err(CoreError::Domain(format!(
                "coarsen factor {factor} must divide n_steps = {}",
                self.n_steps()
            )));
        }
        let brownian: Vec<f64> = self
            .brownian
            .chunks(factor)
            .map(|c| c.iter().sum())
            .collect();
        let mut w_cum = Vec::with_capacity(brownian.len() + 1);
        w_cum.push(0.0);
        let mut acc = 0.0;
        for dw in &brownian {
            acc += dw;
            w_cum.push(acc);
        }
        Ok(NoiseDriver {
            seed: self.seed,
            dt: self.dt * factor as f64,
            horizon: self.horizon,
            lambda_max: self.lambda_max,
            brownian,
            poisson: self.poisson.clone(),
            w_cum,
        })
    }
}
