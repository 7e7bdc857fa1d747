use thiserror::Error;

use crate::eigen::EigenResult;
use crate::newton::NewtonReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    /// A spectrum fell outside the operator's cone.
    #[error("spectrum {spectrum:?} outside the cone: {violated}")]
    OutsideCone { spectrum: Vec<f64>, violated: String },

    #[error("degenerate linearization at spectrum {spectrum:?}: {violated}")]
    DegenerateLinearization { spectrum: Vec<f64>, violated: String },

    #[error("sampling exhausted after {draws} draws")]
    SamplingExhausted { draws: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("{what} did not converge within {iterations} iterations")]
    Convergence { what: String, iterations: usize },

    #[error("Newton iteration did not converge (residual {:.3e} after {} iterations)", .0.residual, .0.iterations)]
    NewtonNonconvergence(Box<NewtonReport>),

    #[error("iterate left the admissible cone at node {node} and damping could not recover it")]
    Admissibility { node: usize, report: Box<NewtonReport> },

    #[error("homotopy failed after t = {last_good_t}: {source}")]
    Homotopy {
        last_good_t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("eigenvalue estimation failed: {0}")]
    Estimation(String),

    #[error("inverse power refinement did not converge within {} iterations (last estimate {})", .0.iterations, .0.lambda1)]
    EigenNonconvergence(Box<EigenResult>),

    #[error("radial oracle: {0}")]
    Oracle(String),

    #[error("sparse linear solve failed: {0}")]
    LinearSolve(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
