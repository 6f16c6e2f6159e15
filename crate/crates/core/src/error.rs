use std::path::PathBuf;

/// Errors produced by estimation, observables, null models, statistics and I/O.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidStateSpace(String),

    #[error("state {state} out of range for a space of {size} states{}", line_suffix(*.line))]
    StateOutOfRange {
        state: usize,
        size: usize,
        line: Option<u64>,
    },

    #[error("no retained observations")]
    EmptyData,

    #[error("no session has a consecutive pair of observations")]
    AllSessionsTooShort,

    #[error("one-sided zero flux between states {i} and {j} ({flux_ij} vs {flux_ji})")]
    OneSidedZeroFlux {
        i: usize,
        j: usize,
        flux_ij: f64,
        flux_ji: f64,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("samples have zero variance (mean {mean}) and differ from the reference {reference}")]
    ZeroVariance { mean: f64, reference: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("regressor has zero variance")]
    DegenerateX,

    #[error("parse error at line {line}: {message}")]
    ParseError { line: u64, message: String },

    #[error("mixed state and action encodings at line {line}")]
    MixedEncodings { line: u64 },

    #[error(
        "rounds not strictly increasing in session {session} of treatment {treatment} (round {round} at line {line})"
    )]
    NonMonotoneRounds {
        treatment: String,
        session: String,
        round: u64,
        line: u64,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

fn line_suffix(line: Option<u64>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors that signal a bug rather than bad input.
    pub fn is_internal(&self) -> bool {
        matches!(self, Error::Internal(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
