//! Quadrature primitives: Gauss-Legendre rules computed at runtime and an
//! adaptive panel integrator used for all kernel norms and fitting moments.

use crate::error::{CoreError, Result};
use std::sync::OnceLock;

/// Nodes and weights of the m-point Gauss-Legendre rule on [-1, 1].
///
/// Computed by Newton iteration on the Legendre polynomial from Chebyshev
/// initial guesses; accurate to machine precision for the sizes used here.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Chebyshev guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_m and P_m' by the three-term recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pm = if m == 1 { x } else { p1 };
            dp = m as f64 * (x * pm - p0) / (x * x - 1.0);
            let dx = pm / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn rule(cache: &OnceLock<(Vec<f64>, Vec<f64>)>, m: usize) -> &(Vec<f64>, Vec<f64>) {
    cache.get_or_init(|| gauss_legendre(m))
}

static GL10: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
static GL21: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();

fn fixed_panel(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, m: &(Vec<f64>, Vec<f64>)) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in m.0.iter().zip(&m.1) {
        acc += w * f(c + h * x);
    }
    acc * h
}

/// Adaptive integrator over a finite interval.
///
/// Each panel is evaluated with an embedded 10/21-point Gauss-Legendre pair;
/// panels whose estimates disagree are bisected. Non-finite integrand samples
/// are reported as errors rather than propagated.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveQuad {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveQuad {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_depth: 40,
        }
    }
}

impl AdaptiveQuad {
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> Result<f64> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(CoreError::Domain("quadrature bounds must be finite".into()));
        }
        if a == b {
            return Ok(0.0);
        }
        let mut wrapped = |t: f64| f(t);
        self.panel(&mut wrapped, a, b, 0)
    }

    /// Integrate over [a, b] split into geometrically growing initial panels,
    /// the layout used for kernel norms on long half-lines.
    pub fn integrate_geometric<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        first: f64,
    ) -> Result<f64> {
        let mut total = 0.0;
        let mut lo = a;
        let mut len = first.max(1e-6);
        let mut wrapped = |t: f64| f(t);
        while lo < b {
            let hi = (lo + len).min(b);
            total += self.panel(&mut wrapped, lo, hi, 0)?;
            lo = hi;
            len *= 2.0;
        }
        Ok(total)
    }

    fn panel(&self, f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, depth: u32) -> Result<f64> {
        let coarse = fixed_panel(f, a, b, rule(&GL10, 10));
        let fine = fixed_panel(f, a, b, rule(&GL21, 21));
        if !fine.is_finite() || !coarse.is_finite() {
            return Err(CoreError::InvalidKernel(format!(
                "non-finite integrand sample on [{a:.6}, {b:.6}]"
            )));
        }
        let err = (fine - coarse).abs();
        if err <= self.abs_tol + self.rel_tol * fine.abs() || depth >= self.max_depth {
            return Ok(fine);
        }
        let mid = 0.5 * (a + b);
        Ok(self.panel(f, a, mid, depth + 1)? + self.panel(f, mid, b, depth + 1)?)
    }
}

/// Composite trapezoid over a uniform grid of samples with step `h`.
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let inner: f64 = samples[1..samples.len() - 1].iter().sum();
    h * (inner + 0.5 * (samples[0] + samples[samples.len() - 1]))
}
