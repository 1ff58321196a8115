//! Simulated trajectories and their flat-file form.

use crate::error::{CoreError, Result};
use std::io::Write;

/// An accepted jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub t: f64,
    /// Mark y of the accepted Poisson point.
    pub y: f64,
    /// State increment y * gamma(t, X_-).
    pub dx: f64,
    /// Increment of the intensity input, b(y) * nu(t, X_-); every auxiliary
    /// state receives this same amount in the lifted system.
    pub dw_excitation: f64,
}

/// A simulated path sampled at grid times, with the exact jump log.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    /// Intensity at grid times (left limits up to ties of measure zero).
    pub lambda: Vec<f64>,
    pub jumps: Vec<JumpEvent>,
    /// Auxiliary states per grid time, filled by the lifted simulator.
    pub xi: Option<Vec<Vec<f64>>>,
    /// Running sup of |X| over all event boundaries, including post-jump
    /// values between grid nodes.
    pub sup_abs_x: f64,
}

impl PathRecord {
    pub fn n_jumps(&self) -> usize {
        self.jumps.len()
    }

    /// `t, x, lambda[, xi_1..xi_n]` rows, one per grid time.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[String]) -> Result<()> {
        let io = |e: std::io::Error| CoreError::Numeric(format!("write failed: {e}"));
        for line in meta {
            writeln!(w, "# {line}").map_err(io)?;
        }
        let n_xi = self.xi.as_ref().map_or(0, |m| m.first().map_or(0, Vec::len));
        let mut header = String::from("t,x,lambda");
        for k in 1..=n_xi {
            header.push_str(&format!(",xi_{k}"));
        }
        writeln!(w, "{header}").map_err(io)?;
        for i in 0..self.times.len() {
            let mut row = format!("{},{},{}", self.times[i], self.x[i], self.lambda[i]);
            if let Some(xi) = &self.xi {
                for v in &xi[i] {
                    row.push_str(&format!(",{v}"));
                }
            }
            writeln!(w, "{row}").map_err(io)?;
        }
        Ok(())
    }

    /// Jump log rows `t, y, dx`.
    pub fn write_jumps_csv<W: Write>(&self, mut w: W, meta: &[String]) -> Result<()> {
        let io = |e: std::io::Error| CoreError::Numeric(format!("write failed: {e}"));
        for line in meta {
            writeln!(w, "# {line}").map_err(io)?;
        }
        writeln!(w, "t,y,dx").map_err(io)?;
        for j in &self.jumps {
            writeln!(w, "{},{},{}", j.t, j.y, j.dx).map_err(io)?;
        }
        Ok(())
    }
}

/// State of the lifted Markov system at one instant: (t, x, xi_1..xi_n).
/// Serves both as the generator's evaluation point and as a resume snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    pub t: f64,
    pub x: f64,
    pub xi: Vec<f64>,
}

impl LiftedState {
    /// Single CSV row `t,x,xi_1..xi_n`.
    pub fn to_csv_row(&self) -> String {
        let mut row = format!("{},{}", self.t, self.x);
        for v in &self.xi {
            row.push_str(&format!(",{v}"));
        }
        row
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let vals: Vec<f64> = row
            .trim()
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|e| CoreError::Domain(format!("bad snapshot field `{c}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() < 2 {
            return Err(CoreError::Domain("snapshot row needs at least t,x".into()));
        }
        Ok(LiftedState { t: vals[0], x: vals[1], xi: vals[2..].to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_roundtrip() {
        let s = LiftedState { t: 1.5, x: -0.25, xi: vec![0.1, 0.2, 0.3] };
        let row = s.to_csv_row();
        let back = LiftedState::from_csv_row(&row).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn csv_shape() {
        let rec = PathRecord {
            times: vec![0.0, 0.5],
            x: vec![1.0, 2.0],
            lambda: vec![1.0, 1.5],
            jumps: vec![JumpEvent { t: 0.3, y: 1.0, dx: 0.5, dw_excitation: 1.0 }],
            xi: Some(vec![vec![0.0, 0.0], vec![0.1, 0.2]]),
            sup_abs_x: 2.0,
        };
        let mut buf = Vec::new();
        rec.write_csv(&mut buf, &["meta".into()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# meta");
        assert_eq!(lines.next().unwrap(), "t,x,lambda,xi_1,xi_2");
        assert_eq!(lines.next().unwrap(), "0,1,1,0,0");
    }
}
