use thiserror::Error;

use crate::data::IdxError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("vector is not normalized: norm = {norm}")]
    NotNormalized { norm: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("matrix error: {0}")]
    Matrix(String),

    #[error("value {value} outside the domain of {function}")]
    Domain { function: &'static str, value: f64 },

    #[error("no signal reaches the client (F = 0)")]
    NoSignal,

    #[error("parameter is not identifiable: {0}")]
    NonIdentifiable(String),

    #[error("invariance does not hold: {0}")]
    UnsupportedInvariance(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("logistic fit failed: {reason}")]
    Fit {
        reason: String,
        best: Option<crate::dnn::LogisticFit>,
    },

    #[error(transparent)]
    Idx(#[from] IdxError),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
