use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DF: usize = 18;

/// Cubic B-splines on `df` equally spaced knots around the circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicSplineBasis {
    df: usize,
}

impl Default for PeriodicSplineBasis {
    fn default() -> Self {
        PeriodicSplineBasis { df: DEFAULT_DF }
    }
}

impl PeriodicSplineBasis {
    pub fn new(df: usize) -> Result<Self> {
        if df < 4 {
            return Err(Error::invalid(
                "df",
                format!("periodic cubic basis needs df >= 4, got {df}"),
            ));
        }
        Ok(PeriodicSplineBasis { df })
    }

    pub fn df(&self) -> usize {
        self.df
    }

    pub fn degree(&self) -> usize {
        3
    }

    pub fn knot_spacing(&self) -> f64 {
        TAU / self.df as f64
    }

    /// The four nonzero basis values at `phi` and the index of the first;
    /// the others follow cyclically.
    pub fn eval_local(&self, phi: f64) -> (usize, [f64; 4]) {
        let x = phi.rem_euclid(TAU) / self.knot_spacing();
        let mut i = x.floor();
        if i >= self.df as f64 {
            i = 0.0;
        }
        let u = (x - i).clamp(0.0, 1.0);
        let u2 = u * u;
        let u3 = u2 * u;
        let w = [
            (1.0 - u).powi(3) / 6.0,
            (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
            (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
            u3 / 6.0,
        ];
        let first = (i as usize + self.df - 3) % self.df;
        (first, w)
    }

    /// Full length-`df` basis vector at `phi`.
    pub fn eval(&self, phi: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.df];
        let (first, w) = self.eval_local(phi);
        for (k, wk) in w.iter().enumerate() {
            out[(first + k) % self.df] += wk;
        }
        out
    }

    /// `B(φ)ᵀ c`.
    pub fn dot(&self, phi: f64, coefficients: &[f64]) -> f64 {
        let (first, w) = self.eval_local(phi);
        w.iter()
            .enumerate()
            .map(|(k, wk)| wk * coefficients[(first + k) % self.df])
            .sum()
    }
}

/// Basis evaluation at an angle.
pub fn pspline_basis_eval(phi: crate::circstats::Angle, basis: &PeriodicSplineBasis) -> Vec<f64> {
    basis.eval(phi.radians())
}
