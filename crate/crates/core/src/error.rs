use thiserror::Error;

/// Errors raised across the crate.
///
/// Variants are grouped by the exit-code class the CLI maps them to:
/// configuration problems, numerical convergence failures and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("windows {i} and {j} overlap: chord distance {distance:.6} < 2*eps = {limit:.6}")]
    Overlap {
        i: usize,
        j: usize,
        distance: f64,
        limit: f64,
    },
    #[error("invalid window roles: {0}")]
    Role(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("kernel evaluated too close to its singularity (r = {0:e})")]
    Singularity(f64),
    #[error("division by zero: {0}")]
    DivisionByZero(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
    #[error("linear system is singular or ill-conditioned (condition estimate {0:e})")]
    SingularSystem(f64),
    #[error("mesh resolution too coarse: {0}")]
    Resolution(String),
    #[error("integrator step size collapsed at t = {t}")]
    Stall { t: f64 },
    #[error("trace exceeded max_time = {0}")]
    MaxTimeExceeded(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse error class, used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Convergence,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Overlap { .. }
            | Error::Role(_)
            | Error::Domain(_)
            | Error::DimensionMismatch { .. }
            | Error::Singularity(_)
            | Error::DivisionByZero(_)
            | Error::InsufficientData(_)
            | Error::Resolution(_) => ErrorClass::Config,
            Error::NonConvergence(_)
            | Error::SingularSystem(_)
            | Error::Stall { .. }
            | Error::MaxTimeExceeded(_) => ErrorClass::Convergence,
            Error::Io(_) => ErrorClass::Io,
            Error::Json(e) if e.is_io() => ErrorClass::Io,
            Error::Json(_) => ErrorClass::Config,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
