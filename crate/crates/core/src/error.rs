use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    /// Normal-equations pivot fell below the relative tolerance.
    #[error("rank-deficient normal matrix (pivot {pivot:e} below threshold {threshold:e})")]
    RankDeficient { pivot: f64, threshold: f64 },

    #[error("insufficient rank: requested {requested} modes, attainable rank is {attainable}")]
    InsufficientRank { requested: usize, attainable: usize },

    #[error("insufficient history: scheme needs {needed} previous states, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("time integration diverged at step {step}")]
    Divergence { step: usize },

    #[error("sample-mesh topology error: {0}")]
    Topology(String),

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            found,
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            Error::NonFinite(_) => Error::Divergence { step },
            e @ (Error::Divergence { .. } | Error::StepFailed { .. }) => e,
            e => Error::StepFailed {
                step,
                source: Box::new(e),
            },
        }
    }
}

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::dims(context, expected, found))
    }
}
