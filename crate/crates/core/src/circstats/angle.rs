use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A direction in radians, always stored in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(pub(crate) f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Normalizes `theta` into `[0, 2π)`. Rejects non-finite input.
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite("angle"));
        }
        Ok(Angle(wrap(theta)))
    }

    pub fn from_degrees(deg: f64) -> Result<Self> {
        Self::new(deg.to_radians())
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Shortest arc length to `other`, in `[0, π]`.
    #[inline]
    pub fn arc_distance(self, other: Angle) -> f64 {
        arc_distance(self.0, other.0)
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Angle::new(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad", self.0)
    }
}

/// Unit of angles in external data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[serde(alias = "rad")]
    Radians,
    #[serde(alias = "deg")]
    Degrees,
}

impl AngleUnit {
    pub fn to_angle(self, value: f64) -> Result<Angle> {
        match self {
            AngleUnit::Radians => Angle::new(value),
            AngleUnit::Degrees => Angle::from_degrees(value),
        }
    }
}

impl std::str::FromStr for AngleUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rad" | "radians" => Ok(AngleUnit::Radians),
            "deg" | "degrees" => Ok(AngleUnit::Degrees),
            other => Err(Error::invalid("unit", format!("expected rad or deg, got `{other}`"))),
        }
    }
}

/// Free-function form of [`Angle::new`].
pub fn normalize_angle(theta: f64) -> Result<Angle> {
    Angle::new(theta)
}

#[inline]
pub(crate) fn wrap(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid rounds tiny negative inputs up to exactly 2π
    if r >= TAU {
        0.0
    } else {
        r
    }
}

#[inline]
pub(crate) fn arc_distance(a: f64, b: f64) -> f64 {
    PI - (PI - (a - b).abs()).abs()
}
