use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("context has no sentences")]
    EmptyContext,

    #[error("question is empty")]
    EmptyQuestion,

    #[error("answer is empty")]
    EmptyAnswer,

    #[error("budget of zero tokens (ratio {ratio} of {original_tokens} tokens)")]
    ZeroBudget { ratio: f64, original_tokens: usize },

    #[error("invalid compression request: {0}")]
    InvalidRequest(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid span ({start}, {end}) for {len} token vectors")]
    InvalidSpan { start: usize, end: usize, len: usize },

    #[error("degenerate span: pooled vector has norm {norm:e}")]
    DegenerateSpan { norm: f64 },

    #[error("context of {tokens} tokens exceeds provider limit of {limit}")]
    ContextOverflow { tokens: usize, limit: usize },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("provider cannot expose full next-token distributions: {0}")]
    UnsupportedProvider(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("rate limited by remote provider (after {attempts} attempts)")]
    RateLimited { attempts: usize },

    #[error("malformed provider response: {0}")]
    BadResponse(String),

    #[error("no complete Q/A pair in generator response")]
    QaParse,

    #[error("verification response ends with neither \"Yes\" nor \"No\": {0:?}")]
    AmbiguousVerdict(String),

    #[error("no masked position has a preceding token to predict from")]
    NoPredictablePositions,

    #[error("non-finite loss at step {step}: L_SC={contrastive}, L_MNTP={mntp}")]
    NonFiniteLoss {
        step: usize,
        contrastive: f64,
        mntp: f64,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether a remote call that failed with this error may be retried.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Transport(_) | Error::RateLimited { .. })
    }

    /// Short machine-readable kind, used in structured CLI errors.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyContext => "empty_context",
            Error::EmptyQuestion => "empty_question",
            Error::EmptyAnswer => "empty_answer",
            Error::ZeroBudget { .. } => "zero_budget",
            Error::InvalidRequest(_) => "invalid_request",
            Error::InvalidConfig(_) => "invalid_config",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidSpan { .. } => "invalid_span",
            Error::DegenerateSpan { .. } => "degenerate_span",
            Error::ContextOverflow { .. } => "context_overflow",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::UnsupportedProvider(_) => "unsupported_provider",
            Error::Transport(_) => "transport",
            Error::RateLimited { .. } => "rate_limited",
            Error::BadResponse(_) => "bad_response",
            Error::QaParse => "qa_parse",
            Error::AmbiguousVerdict(_) => "ambiguous_verdict",
            Error::NoPredictablePositions => "no_predictable_positions",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::EmptyDataset => "empty_dataset",
            Error::Validation { .. } => "validation",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
