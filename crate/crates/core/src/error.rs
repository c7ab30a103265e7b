use thiserror::Error;

/// Errors raised anywhere in the model pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("ill-posed problem: {0}")]
    IllPosed(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("quadrature did not reach tolerance {tol:e}; achieved error estimate {estimate:e}")]
    Quadrature { tol: f64, estimate: f64 },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },
    #[error("{what}: no interior optimum in the search bracket")]
    SearchFailed {
        what: String,
        /// (argument, criterion) pairs over the search grid.
        profile: Vec<(f64, f64)>,
    },
    #[error("weak instrument: first-stage F = {f_stat:.4} below {threshold}")]
    WeakInstrument { f_stat: f64, threshold: f64 },
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative method rather than bad input.
    pub fn is_non_convergence(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. } | Error::SearchFailed { .. } | Error::Quadrature { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
