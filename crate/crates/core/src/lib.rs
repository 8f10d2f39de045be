//! Conditional joint modeling of wind speed and wind direction.
//!
//! The joint law of speed `R` and direction `Φ` is factored as
//! `[R, Φ] = [Φ]·[R | Φ]`:
//!
//! - [`circstats`] fits `[Φ]` with a von Mises mixture (EM, BIC order selection).
//! - [`bwhr`] fits `[R | Φ]` as a Weibull law whose shape and scale are
//!   truncated Fourier series in direction, estimated from per-bin maximum
//!   likelihood fits followed by weighted harmonic regression.
//! - [`bpqr`] is the periodic B-spline quantile regression baseline.
//! - [`resample`] provides year-block bootstrap bands.
//! - [`synth`] and [`metrics`] hold the simulation-study machinery.

pub mod bpqr;
pub mod bwhr;
pub mod circstats;
pub mod error;
pub mod io;
pub mod metrics;
pub mod quadrature;
pub mod resample;
pub mod rng;
pub mod synth;
pub mod weibull;

pub use circstats::{Angle, AngleUnit, VonMisesMixtureModel};
pub use error::{Error, Result};
pub use synth::WindSample;
