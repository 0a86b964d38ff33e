use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameter or inconsistent dimensions. The first field names the
    /// offending setting.
    #[error("configuration error in `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// Observed data could not be used (non-finite values, empty inputs).
    #[error("data error: {0}")]
    Data(String),

    /// A plug-in covariance could not be formed.
    #[error("inference error: {0}")]
    Inference(String),

    /// The quadratic constraint could not be met even at the top of the
    /// multiplier bracket. Carries the fit obtained there.
    #[error("constraint unsatisfiable at lambda = {lambda}: value {value} exceeds budget {budget}")]
    ConstraintUnsatisfiable { lambda: f64, theta: Vec<f64>, value: f64, budget: f64 },

    /// Fixed-point or optimizer iteration did not settle.
    #[error("no convergence after {iterations} iterations: {detail}")]
    NoConvergence { iterations: usize, detail: String },

    /// Too many replicates of a study failed for its aggregates to be trusted.
    #[error("{failed} of {total} replicates failed (first failure: {first})")]
    ReplicateFailures { failed: usize, total: usize, first: String },

    /// Violated calling protocol (e.g. asking an action-dependent
    /// environment for a context before reporting the previous action).
    #[error("logic error: {0}")]
    Logic(String),
}

impl Error {
    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { key: key.into(), reason: reason.into() }
    }
}

pub(crate) fn check_dims(key: &str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::config(key, format!("dimension mismatch: expected {expected}, got {got}")));
    }
    Ok(())
}
