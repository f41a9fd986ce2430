//! Error type shared by all estimators and the simulation/backtest drivers.

use thiserror::Error;

use crate::rnl::IterationTrace;

/// Errors produced anywhere in the toolkit.
///
/// The variants are grouped so that callers (in particular the CLI) can map
/// them onto coarse classes: bad input data, degenerate problems, and
/// numerical/convergence failures.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the input data was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The input is formally valid but the requested quantity is undefined
    /// for it (e.g. a zero denominator in a ratio statistic).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// The estimator does not support this (p, n) regime.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// The symmetric eigendecomposition backend did not converge.
    #[error("eigendecomposition failed: {0}")]
    Decomposition(String),

    /// A guarded numerical condition failed (non-positive quadratic form,
    /// failed Cholesky factorization, ...).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A fixed-point iteration ran out of iterations.
    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        /// Objective/criterion history of the eigenvector iteration, when the
        /// failing loop was one. `None` for plain fixed-point loops.
        trace: Option<Box<IterationTrace>>,
    },

    /// Covariance estimation inside a larger procedure (backtest month,
    /// simulation replication) failed.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// File I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file or configuration value could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
