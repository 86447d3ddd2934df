use thiserror::Error;

/// Errors raised by track handling, the speed solver, the GP and the optimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("offset w[{index}] = {value} m outside [-{half_width}, {half_width}] m")]
    OutOfBounds {
        index: usize,
        value: f64,
        half_width: f64,
    },

    #[error("initial speed {v0} m/s exceeds the feasible speed {limit} m/s at the first station")]
    InfeasibleStart { v0: f64, limit: f64 },

    #[error("degenerate path: zero speed limit at station {station}")]
    DegeneratePath { station: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("initialization failed: {0}")]
    Initialization(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures of the numerical machinery (solver, factorization,
    /// optimizer) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::InfeasibleStart { .. }
                | Error::DegeneratePath { .. }
                | Error::Numerical(_)
                | Error::Initialization(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
