use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("component collapse: exceeded {max_restarts} restarts")]
    ComponentCollapse { max_restarts: usize },

    #[error("insufficient bins: {usable} usable bins, harmonic order {order} needs at least {needed}")]
    InsufficientBins { usable: usize, needed: usize, order: usize },

    #[error("singular design matrix: rank {rank} < {cols} columns")]
    SingularDesign { rank: usize, cols: usize },

    #[error("fitted {parameter} curve is not positive at direction {direction_rad} rad (value {value})")]
    InvalidCurve {
        parameter: &'static str,
        direction_rad: f64,
        value: f64,
    },

    #[error("underdetermined quantile regression: n = {n} <= {cols} coefficients")]
    Underdetermined { n: usize, cols: usize },

    #[error("solver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize, last_iterate: Vec<f64> },

    #[error("quadrature did not converge: estimated error {error:e} above tolerance {tolerance:e}")]
    Quadrature { error: f64, tolerance: f64 },

    #[error("division by zero: truth is zero at direction {direction_rad} rad under positive weight")]
    ZeroTruth { direction_rad: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unstable statistic: {failed} of {total} bootstrap replicates failed")]
    UnstableStatistic {
        failed: usize,
        total: usize,
        failures: Vec<(usize, String)>,
    },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("angle unit must be given for polar input")]
    MissingUnit,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite(_) => "non_finite",
            Error::Empty(_) => "empty",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Range(_) => "range",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::DegenerateSample(_) => "degenerate_sample",
            Error::Domain(_) => "domain",
            Error::ComponentCollapse { .. } => "component_collapse",
            Error::InsufficientBins { .. } => "insufficient_bins",
            Error::SingularDesign { .. } => "singular_design",
            Error::InvalidCurve { .. } => "invalid_curve",
            Error::Underdetermined { .. } => "underdetermined",
            Error::NoConvergence { .. } => "no_convergence",
            Error::Quadrature { .. } => "quadrature",
            Error::ZeroTruth { .. } => "zero_truth",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::UnstableStatistic { .. } => "unstable_statistic",
            Error::MissingColumn(_) => "missing_column",
            Error::MissingUnit => "missing_unit",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
