//! Binned Weibull harmonic regression for `[R | Φ]`.
//!
//! Directions are cut into bins, a Weibull law is fitted by maximum
//! likelihood in each bin, and the per-bin shape and scale estimates are
//! regressed on the bin directions with truncated Fourier series, weighted by
//! their inverse squared standard errors.

mod binning;
mod harmonic;
mod kde;
mod model;
mod simulate;

pub use binning::{
    bin_directions, fit_bins, BinCount, BinFit, BinFitOptions, BinFits, BinScheme, BinSummary, BinningSpec,
    DirectionBin, ExcludedBin, AUTO_POINTS_PER_BIN, DEFAULT_BINS,
};
pub use harmonic::{harmonic_wls, HarmonicCoefficients, HarmonicPoint};
pub use kde::{bandwidths, joint_density_estimate, DensitySurface, Lattice, MIN_KDE_POINTS};
pub use model::{bwhr_fit, conditional_quantile, BwhrConfig, DirectionalWeibullModel, DEFAULT_HARMONIC_ORDER};
pub use simulate::{joint_simulate, joint_simulate_polar};
