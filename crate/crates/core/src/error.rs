use thiserror::Error;

/// Errors raised anywhere in the pricing stack.
///
/// The variants are grouped so the CLI and the C ABI can map them onto a
/// small set of exit/status codes (see [`Error::category`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "bubble feasibility check failed (log margin {margin:.3}); \
         reduce the interpolation level, the transform scale L, or the time step"
    )]
    Infeasible { margin: f64 },

    #[error("bubble value {value:e} at or below machine epsilon at step {step}, point {point}")]
    BubbleUnderflow { step: usize, point: usize, value: f64 },

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("non-finite value at step {step}, grid point {point}")]
    NonFinite { step: usize, point: usize },

    #[error("integrand returned NaN at quadrature point {0}")]
    IntegrandNaN(usize),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error("i/o error: {0}")]
    Io(String),
}

/// Coarse classification used for process exit codes and C status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Feasibility,
    Resource,
    Numerical,
    Io,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidInput(_) | Error::Config(_) => ErrorCategory::Config,
            Error::Infeasible { .. } | Error::BubbleUnderflow { .. } => ErrorCategory::Feasibility,
            Error::ResourceCap(_) => ErrorCategory::Resource,
            Error::NonFinite { .. } | Error::IntegrandNaN(_) | Error::NoConvergence(_) => ErrorCategory::Numerical,
            Error::Io(_) => ErrorCategory::Io,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::Infeasible { .. } => "infeasible",
            Error::BubbleUnderflow { .. } => "bubble_underflow",
            Error::ResourceCap(_) => "resource_cap",
            Error::NonFinite { .. } => "non_finite",
            Error::IntegrandNaN(_) => "integrand_nan",
            Error::NoConvergence(_) => "no_convergence",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
