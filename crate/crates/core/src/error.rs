use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("Gamma is numerically singular (smallest/largest singular value = {ratio:.3e})")]
    SingularGamma { ratio: f64 },

    #[error("{which}({x}) is not Hermitian: entry ({row},{col}) deviates by {dev:.3e}")]
    NotHermitian {
        which: &'static str,
        x: f64,
        row: usize,
        col: usize,
        dev: f64,
    },

    #[error("problem is not smooth: {0}")]
    NotSmooth(String),

    #[error("eigen-solver failed at x = {x}: {reason}")]
    EigenSolver { x: f64, reason: String },

    #[error("branch tracking: {0}")]
    Branch(String),

    #[error(
        "Jordan-block case near x = {x}: the crossing eigenvectors are linearly dependent \
         (stationary-Schrödinger type); the transition matrix formula does not apply"
    )]
    JordanBlock { x: f64 },

    #[error("degeneracy: {0}")]
    Degeneracy(String),

    #[error("parabolic cylinder function: {0}")]
    Pcf(String),

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("integrator: {0}")]
    Integrator(String),

    #[error("flux drift {drift:.3e} exceeds tolerance {tol:.3e}")]
    FluxDrift { drift: f64, tol: f64 },

    #[error("projection residual {residual:.3e} exceeds {limit:.3e}")]
    Projection { residual: f64, limit: f64 },

    #[error("transition matrix: {0}")]
    Transition(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// The input violates a modelling assumption (crossing structure, Jordan block, ...).
    Assumption,
    /// Bad argument or malformed input.
    Usage,
    /// A numerical routine failed.
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::SingularGamma { .. }
            | Error::NotHermitian { .. }
            | Error::NotSmooth(_)
            | Error::Branch(_)
            | Error::JordanBlock { .. }
            | Error::Degeneracy(_) => ErrorKind::Assumption,
            Error::Dimension(_) | Error::OutOfRange(_) => ErrorKind::Usage,
            Error::EigenSolver { .. }
            | Error::Pcf(_)
            | Error::Quadrature(_)
            | Error::Integrator(_)
            | Error::FluxDrift { .. }
            | Error::Projection { .. }
            | Error::Transition(_) => ErrorKind::Numeric,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
