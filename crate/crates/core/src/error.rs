use std::path::PathBuf;

use thiserror::Error;

/// Reason a model or correspondence file failed to parse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    MissingField,
    NotFinite,
    InvalidRotation,
    DistortionOrderMismatch,
    InvalidValue,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::MissingField => "missing field",
            ParseErrorKind::NotFinite => "non-finite number",
            ParseErrorKind::InvalidRotation => "invalid rotation",
            ParseErrorKind::DistortionOrderMismatch => "distortion order mismatch",
            ParseErrorKind::InvalidValue => "invalid value",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {index} has non-positive camera depth {depth}")]
    NonPositiveDepth { index: usize, depth: f64 },

    #[error("no inlier correspondences")]
    EmptyInput,

    #[error("insufficient data: need at least {required}, got {available}")]
    InsufficientData { required: usize, available: usize },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    Alignment {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("too few samples for {test}: need at least {min}, got {n}")]
    TooFewSamples { test: &'static str, min: usize, n: usize },

    #[error("too many samples for {test}: at most {max}, got {n}")]
    TooManySamples { test: &'static str, max: usize, n: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("sample has zero variance")]
    ZeroVariance,

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("{}:{line}: {kind} in field `{field}`{}", path_display(.path), detail_display(.detail))]
    Parse {
        path: Option<PathBuf>,
        line: usize,
        field: String,
        kind: ParseErrorKind,
        detail: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn path_display(path: &Option<PathBuf>) -> String {
    path.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "<input>".to_owned())
}

fn detail_display(detail: &str) -> String {
    if detail.is_empty() {
        String::new()
    } else {
        format!(" ({detail})")
    }
}

impl Error {
    /// Stable machine-readable identifier, used in CLI error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonPositiveDepth { .. } => "non_positive_depth",
            Error::EmptyInput => "empty_input",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::Alignment { .. } => "alignment",
            Error::TooFewSamples { .. } => "too_few_samples",
            Error::TooManySamples { .. } => "too_many_samples",
            Error::NonFinite { .. } => "non_finite",
            Error::ZeroVariance => "zero_variance",
            Error::ConfigInvalid(_) => "config_invalid",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Parse { kind, .. } => match kind {
                ParseErrorKind::InvalidRotation => "parse_invalid_rotation",
                ParseErrorKind::DistortionOrderMismatch => "parse_distortion_order_mismatch",
                _ => "parse",
            },
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
