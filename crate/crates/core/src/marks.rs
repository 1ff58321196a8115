//! Mark distributions for the Poisson random measure.

use crate::error::{CoreError, Result};
use crate::model::ScalarFn;
use crate::quad::gauss_legendre;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Distribution m of the marks y attached to Poisson points. All variants
/// are normalized (m(R) = 1).
#[derive(Debug, Clone)]
pub enum MarkDist {
    /// Every mark equals `value` (the unmarked case when value = 1).
    PointMass(f64),
    /// Exponential with the given rate, sampled by inverse CDF.
    Exponential { rate: f64 },
    /// Normal truncated to [lo, hi], which keeps b(Y) integrable for any of
    /// the builtin transforms.
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
    /// Uniform draw from a tabulated empirical sample.
    Empirical { values: Vec<f64> },
}

impl MarkDist {
    pub fn unit() -> Self {
        MarkDist::PointMass(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MarkDist::PointMass(v) => {
                if !v.is_finite() {
                    return Err(CoreError::Domain("point mass must be finite".into()));
                }
            }
            MarkDist::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(CoreError::Domain("exponential rate must be positive".into()));
                }
            }
            MarkDist::TruncatedNormal { mean, sd, lo, hi } => {
                if !(sd.is_finite() && *sd > 0.0 && mean.is_finite()) || !(lo < hi) {
                    return Err(CoreError::Domain("bad truncated normal parameters".into()));
                }
            }
            MarkDist::Empirical { values } => {
                if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(CoreError::Domain("empirical marks must be finite and non-empty".into()));
                }
            }
        }
        Ok(())
    }

    /// Draw one mark. Deterministic given the RNG state.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            MarkDist::PointMass(v) => *v,
            MarkDist::Exponential { rate } => {
                let u: f64 = rng.gen();
                -(1.0 - u).ln() / rate
            }
            MarkDist::TruncatedNormal { mean, sd, lo, hi } => {
                let normal = Normal::new(*mean, *sd).expect("validated");
                loop {
                    let x = normal.sample(rng);
                    if x >= *lo && x <= *hi {
                        return x;
                    }
                }
            }
            MarkDist::Empirical { values } => values[rng.gen_range(0..values.len())],
        }
    }

    /// E[b(Y)], exact for discrete variants, 64-point Gauss-Legendre on the
    /// effective support otherwise.
    pub fn expect(&self, b: &ScalarFn) -> Result<f64> {
        self.validate()?;
        let v = match self {
            MarkDist::PointMass(v) => b.eval(*v),
            MarkDist::Empirical { values } => {
                values.iter().map(|y| b.eval(*y)).sum::<f64>() / values.len() as f64
            }
            MarkDist::Exponential { rate } => {
                let hi = 40.0 / rate;
                self.quad_expect(b, 0.0, hi, |y| rate * (-rate * y).exp(), 1.0)
            }
            MarkDist::TruncatedNormal { mean, sd, lo, hi } => {
                let pdf = |y: f64| {
                    let z = (y - mean) / sd;
                    (-0.5 * z * z).exp()
                };
                let mass = self.quad_expect(&ScalarFn::one(), *lo, *hi, pdf, 1.0);
                self.quad_expect(b, *lo, *hi, pdf, mass)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(CoreError::Numeric("E[b(Y)] is not finite".into()))
        }
    }

    /// Quadrature nodes (y_i, w_i) with weights summing to one, for mark
    /// integrals in the generator. Discrete variants return exact atoms.
    pub fn quadrature(&self, points: usize) -> Vec<(f64, f64)> {
        match self {
            MarkDist::PointMass(v) => vec![(*v, 1.0)],
            MarkDist::Empirical { values } => {
                let w = 1.0 / values.len() as f64;
                values.iter().map(|y| (*y, w)).collect()
            }
            MarkDist::Exponential { rate } => {
                let (xs, ws) = gauss_legendre(points);
                let hi = 40.0 / rate;
                let mut nodes: Vec<(f64, f64)> = xs
                    .iter()
                    .zip(&ws)
                    .map(|(x, w)| {
                        let y = 0.5 * hi * (x + 1.0);
                        (y, 0.5 * hi * w * rate * (-rate * y).exp())
                    })
                    .collect();
                let mass: f64 = nodes.iter().map(|(_, w)| w).sum();
                for n in &mut nodes {
                    n.1 /= mass;
                }
                nodes
            }
            MarkDist::TruncatedNormal { mean, sd, lo, hi } => {
                let (xs, ws) = gauss_legendre(points);
                let mut nodes: Vec<(f64, f64)> = xs
                    .iter()
                    .zip(&ws)
                    .map(|(x, w)| {
                        let y = 0.5 * ((hi - lo) * x + hi + lo);
                        let z = (y - mean) / sd;
                        (y, w * (-0.5 * z * z).exp())
                    })
                    .collect();
                let mass: f64 = nodes.iter().map(|(_, w)| w).sum();
                for n in &mut nodes {
                    n.1 /= mass;
                }
                nodes
            }
        }
    }

    fn quad_expect(
        &self,
        b: &ScalarFn,
        lo: f64,
        hi: f64,
        pdf: impl Fn(f64) -> f64,
        mass: f64,
    ) -> f64 {
        let (xs, ws) = gauss_legendre(64);
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        let raw: f64 = xs
            .iter()
            .zip(&ws)
            .map(|(x, w)| {
                let y = c + h * x;
                w * b.eval(y) * pdf(y)
            })
            .sum::<f64>()
            * h;
        raw / mass
    }
}
