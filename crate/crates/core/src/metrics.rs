//! Direction-weighted error metrics for curves sampled on a circular grid.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::circstats::Angle;
use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 629;

/// `m` equally spaced directions `2πi/m`, `i = 0..m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionGrid {
    m: usize,
}

impl DirectionGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("m", "grid needs at least one point"));
        }
        Ok(DirectionGrid { m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn angle(&self, i: usize) -> f64 {
        TAU * i as f64 / self.m as f64
    }

    pub fn angles(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.m).map(|i| self.angle(i))
    }

    pub fn angle_values(&self) -> impl ExactSizeIterator<Item = Angle> + '_ {
        self.angles().map(Angle)
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.m as f64
    }
}

impl Default for DirectionGrid {
    fn default() -> Self {
        DirectionGrid { m: DEFAULT_GRID_SIZE }
    }
}

/// A directional curve discretized on a [`DirectionGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    grid: DirectionGrid,
    values: Vec<f64>,
}

impl CurveSample {
    pub fn new(grid: DirectionGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        Ok(CurveSample { grid, values })
    }

    pub fn from_fn(grid: DirectionGrid, f: impl FnMut(f64) -> f64) -> Self {
        CurveSample {
            grid,
            values: grid.angles().map(f).collect(),
        }
    }

    pub fn try_from_fn(grid: DirectionGrid, f: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        Ok(CurveSample {
            grid,
            values: grid.angles().map(f).collect::<Result<_>>()?,
        })
    }

    pub fn grid(&self) -> DirectionGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Pointwise `self − other`.
    pub fn minus(&self, other: &CurveSample) -> Result<CurveSample> {
        same_grid(self, other)?;
        Ok(CurveSample {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    /// Weighted average `Σ f g / Σ f`.
    pub fn weighted_mean(&self, weight: &CurveSample) -> Result<f64> {
        same_grid(self, weight)?;
        let total = weight_total(weight)?;
        Ok(self.values.iter().zip(&weight.values).map(|(g, f)| g * f).sum::<f64>() / total)
    }
}

fn same_grid(a: &CurveSample, b: &CurveSample) -> Result<()> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch(format!(
            "{}-point grid vs {}-point grid",
            a.grid.len(),
            b.grid.len()
        )));
    }
    Ok(())
}

fn weight_total(weight: &CurveSample) -> Result<f64> {
    if let Some(w) = weight.values.iter().find(|w| !(**w >= 0.0)) {
        return Err(Error::invalid(
            "weight_density",
            format!("weights must be >= 0, got {w}"),
        ));
    }
    let total: f64 = weight.values.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("weight_density", "weights sum to zero"));
    }
    Ok(total)
}

fn relative_errors<'a>(
    estimate: &'a CurveSample,
    truth: &'a CurveSample,
    weight: &'a CurveSample,
) -> Result<impl Iterator<Item = (f64, f64)> + 'a> {
    same_grid(estimate, truth)?;
    same_grid(estimate, weight)?;
    for (i, (&g, &f)) in truth.values.iter().zip(&weight.values).enumerate() {
        if f > 0.0 && g == 0.0 {
            return Err(Error::ZeroTruth {
                direction_rad: truth.grid.angle(i),
            });
        }
    }
    Ok(estimate
        .values
        .iter()
        .zip(&truth.values)
        .zip(&weight.values)
        .filter(|(_, &f)| f > 0.0)
        .map(|((ghat, g), &f)| (f, (ghat - g) / g)))
}

/// Weighted integrated mean relative error,
/// `Σ f(φ_i) |(ĝ(φ_i) − g(φ_i)) / g(φ_i)| / Σ f(φ_i)`.
pub fn wimre(estimate: &CurveSample, truth: &CurveSample, weight_density: &CurveSample) -> Result<f64> {
    let total = weight_total(weight_density)?;
    Ok(relative_errors(estimate, truth, weight_density)?
        .map(|(f, e)| f * e.abs())
        .sum::<f64>()
        / total)
}

/// Same as [`wimre`] without the absolute value.
pub fn signed_mean_relative_difference(
    estimate: &CurveSample,
    truth: &CurveSample,
    weight_density: &CurveSample,
) -> Result<f64> {
    let total = weight_total(weight_density)?;
    Ok(relative_errors(estimate, truth, weight_density)?
        .map(|(f, e)| f * e)
        .sum::<f64>()
        / total)
}

#[derive(Debug, Clone)]
pub struct MseCurve {
    pub pointwise: CurveSample,
    /// Unweighted grid average of the pointwise MSE.
    pub average: f64,
}

/// Pointwise mean squared error over replicates and its grid average.
pub fn mse_curve(replicate_estimates: &[CurveSample], truth: &CurveSample) -> Result<MseCurve> {
    if replicate_estimates.is_empty() {
        return Err(Error::Empty("replicate estimates"));
    }
    for r in replicate_estimates {
        same_grid(r, truth)?;
    }
    let b = replicate_estimates.len() as f64;
    let values: Vec<f64> = (0..truth.values.len())
        .map(|i| {
            replicate_estimates
                .iter()
                .map(|r| (r.values[i] - truth.values[i]).powi(2))
                .sum::<f64>()
                / b
        })
        .collect();
    let average = values.iter().sum::<f64>() / values.len() as f64;
    Ok(MseCurve {
        pointwise: CurveSample {
            grid: truth.grid,
            values,
        },
        average,
    })
}

/// Direction-density-weighted integrated MSE, `Σ f(φ_i)·MSE(φ_i) / Σ f(φ_i)`.
pub fn wimse(replicate_estimates: &[CurveSample], truth: &CurveSample, weight_density: &CurveSample) -> Result<f64> {
    same_grid(truth, weight_density)?;
    let total = weight_total(weight_density)?;
    let mse = mse_curve(replicate_estimates, truth)?;
    Ok(mse
        .pointwise
        .values
        .iter()
        .zip(&weight_density.values)
        .map(|(m, f)| m * f)
        .sum::<f64>()
        / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn curve(values: &[f64]) -> CurveSample {
        CurveSample::new(DirectionGrid::new(values.len()).unwrap(), values.to_vec()).unwrap()
    }

    #[test]
    fn grid_is_uniform() {
        let g = DirectionGrid::default();
        assert_eq!(g.len(), 629);
        let a: Vec<f64> = g.angles().collect();
        for w in a.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - g.spacing()).abs() < 1e-12);
        }
        assert!(DirectionGrid::new(0).is_err());
    }

    #[test]
    fn wimre_examples() {
        let truth = curve(&[2.0, 3.0, 4.0]);
        let w = curve(&[0.2, 0.5, 0.3]);
        assert_eq!(wimre(&truth, &truth, &w).unwrap(), 0.0);
        let doubled = curve(&[4.0, 6.0, 8.0]);
        assert!((wimre(&doubled, &truth, &w).unwrap() - 1.0).abs() < 1e-15);
        // f = (1, 3), relative errors (0.1, 0.2)
        let t = curve(&[10.0, 10.0]);
        let e = curve(&[11.0, 12.0]);
        let f = curve(&[1.0, 3.0]);
        assert!((wimre(&e, &t, &f).unwrap() - 0.175).abs() < 1e-15);
    }

    #[test]
    fn wimre_rejects_zero_truth_under_weight() {
        let t = curve(&[1.0, 0.0]);
        let e = curve(&[1.0, 1.0]);
        assert!(matches!(
            wimre(&e, &t, &curve(&[1.0, 1.0])),
            Err(Error::ZeroTruth { .. })
        ));
        // zero weight excuses a zero truth
        assert_eq!(wimre(&e, &t, &curve(&[1.0, 0.0])).unwrap(), 0.0);
        assert!(matches!(
            wimre(&e, &curve(&[1.0]), &curve(&[1.0, 1.0])),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn mse_examples() {
        let t = curve(&[1.0, 2.0, 3.0]);
        let m = mse_curve(&[t.clone(), t.clone()], &t).unwrap();
        assert_eq!(m.average, 0.0);
        let up = curve(&[2.0, 3.0, 4.0]);
        let m = mse_curve(&[up.clone()], &t).unwrap();
        assert!(m.pointwise.values().iter().all(|&v| v == 1.0));
        let d = 0.25;
        let lo = curve(&[1.0 - d, 2.0 - d, 3.0 - d]);
        let hi = curve(&[1.0 + d, 2.0 + d, 3.0 + d]);
        let m = mse_curve(&[lo, hi], &t).unwrap();
        assert!(m.pointwise.values().iter().all(|&v| (v - d * d).abs() < 1e-15));
        assert!(mse_curve(&[], &t).is_err());
    }

    #[test]
    fn wimse_examples() {
        let t = curve(&[0.0, 0.0]);
        let f = curve(&[1.0, 1.0]);
        assert_eq!(wimse(&[t.clone()], &t, &f).unwrap(), 0.0);
        let e = curve(&[2.0, 0.0]);
        assert!((wimse(&[e], &t, &f).unwrap() - 2.0).abs() < 1e-15);
        // constant weights reduce to the grid-average MSE
        let t = curve(&[1.0, 2.0, 5.0]);
        let reps = vec![curve(&[1.5, 2.0, 4.0]), curve(&[0.0, 2.5, 5.0])];
        let uniform = curve(&[7.0, 7.0, 7.0]);
        let a = wimse(&reps, &t, &uniform).unwrap();
        let b = mse_curve(&reps, &t).unwrap().average;
        assert!((a - b).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn wimre_rescaling_invariance(
            vals in proptest::collection::vec((0.1f64..10.0, 0.1f64..10.0, 0.0f64..5.0), 1..50),
            c in 0.01f64..100.0,
            s in 0.01f64..100.0,
        ) {
            let est = curve(&vals.iter().map(|v| v.0).collect::<Vec<_>>());
            let tru = curve(&vals.iter().map(|v| v.1).collect::<Vec<_>>());
            let mut w: Vec<f64> = vals.iter().map(|v| v.2).collect();
            w[0] += 0.1;
            let wt = curve(&w);
            let base = wimre(&est, &tru, &wt).unwrap();
            let est_c = curve(&est.values().iter().map(|v| v * c).collect::<Vec<_>>());
            let tru_c = curve(&tru.values().iter().map(|v| v * c).collect::<Vec<_>>());
            let wt_s = curve(&w.iter().map(|v| v * s).collect::<Vec<_>>());
            prop_assert!((wimre(&est_c, &tru_c, &wt).unwrap() - base).abs() < 1e-12 * base.max(1.0));
            prop_assert!((wimre(&est, &tru, &wt_s).unwrap() - base).abs() < 1e-12 * base.max(1.0));
        }

        #[test]
        fn squared_metrics_are_nonnegative(
            vals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, 0.0f64..2.0), 2..30),
        ) {
            let e = curve(&vals.iter().map(|v| v.0).collect::<Vec<_>>());
            let t = curve(&vals.iter().map(|v| v.1).collect::<Vec<_>>());
            let mut w: Vec<f64> = vals.iter().map(|v| v.2).collect();
            w[0] += 0.1;
            prop_assert!(wimse(&[e.clone()], &t, &curve(&w)).unwrap() >= 0.0);
            prop_assert!(mse_curve(&[e], &t).unwrap().average >= 0.0);
        }
    }

    #[test]
    fn wimre_is_stable_under_grid_refinement() {
        let make = |m: usize| {
            let g = DirectionGrid::new(m).unwrap();
            let t = CurveSample::from_fn(g, |p| 8.0 + 2.0 * p.sin());
            let e = CurveSample::from_fn(g, |p| 8.3 + 1.7 * p.sin() + 0.2 * (3.0 * p).cos());
            let f = CurveSample::from_fn(g, |p| (1.5 * (p - 1.0).cos()).exp());
            wimre(&e, &t, &f).unwrap()
        };
        let coarse = make(629);
        let fine = make(1258);
        assert!((coarse - fine).abs() / coarse < 0.005);
    }
}
