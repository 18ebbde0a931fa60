use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("correction constants unavailable for {family}: {reason}")]
    UnsupportedCorrection { family: String, reason: String },

    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error:e} after {intervals} intervals")]
    Quadrature {
        estimate: f64,
        error: f64,
        intervals: usize,
    },

    #[error("singular design: column {column} is (numerically) a combination of the others")]
    SingularDesign { column: usize },

    #[error("invalid design: {0}")]
    Design(String),

    #[error("fit did not converge after {iterations} iterations (last log-likelihood {loglik})")]
    NonConvergence { iterations: usize, loglik: f64 },

    #[error("nonpositive response at rows {rows:?}")]
    NonPositiveResponse { rows: Vec<usize> },

    #[error("refusing to compute statistics: {0}")]
    NotConverged(String),

    #[error("{failed} of {total} replicates failed (limit {limit})")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: usize,
    },

    #[error("invalid configuration:\n{}", .0.join("\n"))]
    Config(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
