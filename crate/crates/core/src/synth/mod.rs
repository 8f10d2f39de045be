//! Simulation-study machinery: the wind sample type and coordinate
//! transforms, Gaussian-mixture truths with numeric oracles for the direction
//! density and directional quantiles, and the Monte Carlo study driver.

mod fixtures;
mod gmm;
mod study;
mod truth;

use serde::{Deserialize, Serialize};

use crate::circstats::{wrap, Angle};
use crate::error::{Error, Result};

pub use fixtures::{fixture, FIXTURE_NAMES};
pub use gmm::{fit_gaussian_mixture, select_gaussian_mixture, GaussianMixtureFit};
pub use study::{
    run_study, summarize, AggregateRecord, StudyConfig, StudyFailure, StudyOutput, StudyRecord, StudySummary,
    SummaryCell, TruthPair, FAILURE_FLAG_FRACTION,
};
pub use truth::{
    truth_conditional_cdf, truth_conditional_quantile, truth_direction_density, truth_sample, GaussianComponent,
    GaussianMixtureTruth, TruthCurves,
};

/// One observation: speed (m/s), direction, and the year it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindSample {
    pub speed: f64,
    pub direction: Angle,
    pub year: i32,
}

impl WindSample {
    pub fn new(speed: f64, direction: Angle, year: i32) -> Result<Self> {
        if !(speed >= 0.0) || !speed.is_finite() {
            return Err(Error::Domain(format!(
                "wind speed must be finite and >= 0, got {speed}"
            )));
        }
        Ok(WindSample { speed, direction, year })
    }

    pub fn from_uv(u: f64, v: f64, year: i32) -> Result<Self> {
        let (speed, direction) = to_polar(u, v)?;
        Ok(WindSample { speed, direction, year })
    }

    pub fn uv(&self) -> (f64, f64) {
        cartesian(self.speed, self.direction.radians())
    }
}

/// `(u, v) ↦ (√(u² + v²), atan2(u, v))`: direction is measured from the
/// `v` axis towards the `u` axis. The origin maps to `(0, 0)`.
pub fn to_polar(u: f64, v: f64) -> Result<(f64, Angle)> {
    if !u.is_finite() || !v.is_finite() {
        return Err(Error::NonFinite("wind components"));
    }
    if u == 0.0 && v == 0.0 {
        return Ok((0.0, Angle::ZERO));
    }
    Ok((u.hypot(v), Angle(wrap(u.atan2(v)))))
}

/// `(r, φ) ↦ (r sin φ, r cos φ)`.
pub fn to_cartesian(r: f64, phi: Angle) -> Result<(f64, f64)> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("speed must be finite and >= 0, got {r}")));
    }
    Ok(cartesian(r, phi.radians()))
}

#[inline]
pub(crate) fn cartesian(r: f64, phi: f64) -> (f64, f64) {
    let (s, c) = phi.sin_cos();
    (r * s, r * c)
}
