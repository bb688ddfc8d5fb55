use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot decode {field}: {reason}")]
    Decode { field: &'static str, reason: String },

    #[error("case {0:?} does not occur in the observation period")]
    CaseNotFound(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("merge needs at least one segment")]
    EmptyMerge,

    #[error("bound is vacuous: denominator {denominator} is not positive at nc = {nc}")]
    VacuousBound { denominator: f64, nc: f64 },

    #[error("frequency guarantee violated for {key}: {reason}")]
    GuaranteeViolated { key: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn decode(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Decode {
            field,
            reason: reason.into(),
        }
    }
}
