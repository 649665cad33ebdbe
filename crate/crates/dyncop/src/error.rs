//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature hit its subdivision cap before reaching tolerance.
    #[error("quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    /// An iterative solver stalled; the best iterate seen is attached.
    #[error("solver did not converge: {message} (best residual {residual:.3e})")]
    NonConvergence {
        message: String,
        residual: f64,
        best: Box<crate::param::ParamFit>,
    },

    /// A linear system arising in a fit is singular or near-singular.
    #[error("singular system: {0}")]
    SingularSystem(String),

    /// Local-linear smoothing window contains fewer than two design points.
    #[error("degenerate smoothing window at s = {s}: {message}")]
    DegenerateWindow { s: f64, message: String },

    /// Invalid experiment or CLI configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed CSV input.
    #[error("csv error at line {line}: {message}")]
    Csv { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
