use thiserror::Error;

/// Errors surfaced by the solver and analysis layers.
///
/// Termination of a simulation by blow-up is *not* an error — it is reported
/// as a [`crate::integrator::TerminationReason`]. The variants here are either
/// genuine faults (a singular linear system), misuse of an operation
/// (degenerate fit windows, malformed series), or invalid input.
#[derive(Debug, Error)]
pub enum Error {
    /// The boundary slope is too close to zero to divide by.
    #[error("boundary slope beta = {beta:e} is within {floor:e} of zero; velocity is undefined")]
    BetaNearZero { beta: f64, floor: f64 },

    /// The banded LU factorization found no usable pivot.
    #[error("banded solve: vanishing pivot in column {column}")]
    SingularMatrix { column: usize },

    /// The step controller was driven below `dt_min`.
    #[error("step size underflow: controller requested below dt_min = {dt_min:e}")]
    DtUnderflow { dt_min: f64 },

    /// A time series is unusable for the requested operation.
    #[error("bad series: {0}")]
    BadSeries(String),

    /// A regression could not be carried out on the selected window.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// The log-log slope cannot be inverted to a blow-up rate.
    #[error("log-log slope q = {q} is not invertible (requires q > 1/4)")]
    InvalidSlope { q: f64 },

    /// The synthetic boundary ODE blew up inside the requested sample grid.
    #[error("synthetic ODE reached blow-up at t = {t} before the end of the sample grid")]
    BlowupReached { t: f64 },

    /// Unparseable configuration or input file content.
    #[error("parse error: {0}")]
    Parse(String),

    /// Structurally valid input that violates a documented invariant.
    #[error("invalid value: {0}")]
    Validation(String),

    /// Filesystem failure while reading inputs or writing artifacts.
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 for input problems, 2 for numerical
    /// faults, 3 for fit failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Validation(_) | Error::Io { .. } => 1,
            Error::SingularMatrix { .. }
            | Error::BetaNearZero { .. }
            | Error::DtUnderflow { .. }
            | Error::BlowupReached { .. } => 2,
            Error::BadSeries(_) | Error::DegenerateFit(_) | Error::InvalidSlope { .. } => 3,
        }
    }
}
