//! Circular statistics: angles, Bessel functions, von Mises densities and
//! mixtures, and the circular median.

mod angle;
mod bessel;
mod median;
mod mixture;
mod vonmises;

pub use angle::{normalize_angle, Angle, AngleUnit};
pub use bessel::{bessel_i0, bessel_i0_scaled, bessel_i1_scaled, bessel_ratio, ln_bessel_i0};
pub use median::circular_median;
pub use mixture::{
    em_fit, em_fit_with, mean_direction, mixture_pdf, mixture_sample, select_components, select_components_with,
    CandidateScore, ComponentSelection, EmConfig, EmFit, VonMisesComponent, VonMisesMixtureModel, DEFAULT_CANDIDATES,
};
pub use vonmises::{inverse_bessel_ratio, vm_pdf};

pub(crate) use angle::wrap;
