//! Periodic B-spline quantile regression: each quantile curve
//! `Q(τ | φ) = B(φ)ᵀ β(τ)` is fitted on its own under the pinball loss.

mod basis;
mod solver;

pub use basis::{pspline_basis_eval, PeriodicSplineBasis, DEFAULT_DF};
pub use solver::{
    bpqr_fit, bpqr_fit_with, bpqr_predict, pinball_loss, quantile_regression, BpqrModel, QuantileFit, SolverConfig,
    SparseDesign,
};
