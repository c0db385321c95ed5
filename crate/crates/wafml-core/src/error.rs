use std::path::PathBuf;

/// Errors surfaced by parsing, training, and evaluation.
///
/// Each variant maps to one machine-parseable category ([`Error::category`])
/// so callers can emit stable one-line diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Request text that cannot be parsed: unknown method, missing request
    /// line, or a header line without a colon.
    #[error("malformed request{}: {reason}", fmt_id(id))]
    MalformedRequest {
        /// Request id when the container assigned one before parsing failed.
        id: Option<String>,
        reason: String,
    },

    /// Training input with no usable vectors or fields.
    #[error("empty training set: {0}")]
    EmptyTraining(String),

    /// Too few distinct training vectors to fit any mixture.
    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    /// A prior corpus file with no usable lines.
    #[error("empty prior corpus: {0}")]
    EmptyCorpus(PathBuf),

    /// A tokenizer delimiter pattern that does not compile.
    #[error("invalid delimiter regex {pattern:?}: {source}")]
    InvalidRegex {
        pattern: String,
        source: regex::Error,
    },

    /// Inconsistent or unusable configuration (beyond single-line syntax).
    #[error("configuration error: {0}")]
    Config(String),

    /// The same request id appearing twice in a verdict or label file.
    #[error("duplicate id {id:?} at line {line}")]
    DuplicateId { id: String, line: usize },

    /// An unparseable line in a verdict, label, or config file.
    #[error("malformed line {line} in {file}: {reason}")]
    MalformedLine {
        file: String,
        line: usize,
        reason: String,
    },

    /// A token list that is empty or contains duplicates/empties.
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),

    /// A model file whose contents violate the format's invariants.
    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

impl Error {
    /// Stable lower-snake category for one-line diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::MalformedRequest { .. } => "malformed_request",
            Error::EmptyTraining(_) => "empty_training",
            Error::DegenerateData(_) => "degenerate_data",
            Error::EmptyCorpus(_) => "empty_corpus",
            Error::InvalidRegex { .. } => "invalid_regex",
            Error::Config(_) => "config",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::MalformedLine { .. } => "malformed_line",
            Error::InvalidLexicon(_) => "invalid_lexicon",
            Error::InvalidModel(_) => "invalid_model",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}

fn fmt_id(id: &Option<String>) -> String {
    match id {
        Some(id) => format!(" {id}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
