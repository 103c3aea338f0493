use thiserror::Error;

/// Errors raised by the factorization kernels, samplers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, expected {expected}, got {got}")]
    Dimension {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("{op}: input contains a non-finite entry at ({row}, {col})")]
    NonFinite {
        op: &'static str,
        row: usize,
        col: usize,
    },

    #[error("singular triangular factor: diagonal entry {index} is {value:e}")]
    Singular { index: usize, value: f64 },

    /// A factor of a chain with exponent -1 is numerically singular.
    #[error("factor {factor} of the chain is numerically singular (sigma_min / sigma_max = {ratio:e})")]
    SingularFactor { factor: usize, ratio: f64 },

    #[error("one-sided Jacobi did not converge after {sweeps} sweeps (off-diagonality {off_diagonality:e})")]
    Convergence { sweeps: usize, off_diagonality: f64 },

    #[error("hypergeometric series did not converge within {terms} terms")]
    SeriesConvergence { terms: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible spectrum: {0}")]
    Constraint(String),

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 config, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 4,
            Error::Singular { .. }
            | Error::SingularFactor { .. }
            | Error::Convergence { .. }
            | Error::SeriesConvergence { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
