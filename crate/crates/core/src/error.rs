//! Crate-wide error type.
//!
//! Identification failures are typed, not approximated: a query that is not
//! identified from the inputs returns an error here rather than a smoothed
//! or defaulted answer. Bounds for non-identified queries live in
//! [`crate::sensitivity`].

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("table would have {cells} cells, above the {max}-cell cap")]
    TableTooLarge { cells: usize, max: usize },

    /// Conditioning on an event the distribution assigns zero probability.
    /// The conditional is undefined, which is semantically meaningful here
    /// (overlap failure), so this is never silently replaced by a fallback.
    #[error("conditioning event has zero probability: {0}")]
    ZeroProbabilityEvidence(String),

    #[error("inconsistent factors: {0}")]
    InconsistentFactors(String),

    #[error("no confounding at the requested assignment: {0}")]
    NoConfounding(String),

    #[error("row has zero likelihood under every latent class")]
    ZeroLikelihoodRow,

    #[error("overlap violated ({context}): zero-probability strata {offending:?}")]
    OverlapViolation {
        context: String,
        offending: Vec<Vec<usize>>,
    },

    /// The Theorem-8 style counterfactual is only identified when both cause
    /// assignments map to the same reconstructed confounder level.
    #[error("zhat mismatch: zhat(a) = {za} but zhat(a') = {za_prime}; query refused")]
    ZhatMismatch { za: usize, za_prime: usize },

    #[error("infeasible margins: {0}")]
    InfeasibleMargins(String),

    #[error("DAG assumption violated: {0}")]
    DagViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ZhatMismatch { .. } | Error::OverlapViolation { .. } => 3,
            _ => 1,
        }
    }
}
