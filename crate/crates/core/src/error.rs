use std::path::PathBuf;

/// Errors raised across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("cannot stratify: class {class} has {count} member(s), need at least 3")]
    Stratification { class: usize, count: usize },

    #[error("augmentation failed: {0}")]
    Augmentation(String),

    #[error("no precomputed embedding for report `{0}`")]
    MissingEmbedding(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("rule {rule}: {message}")]
    RuleLoad { rule: usize, message: String },

    #[error("unsupported label scheme: {0}")]
    UnsupportedScheme(String),

    #[error("invalid metric input: {0}")]
    MetricInput(String),

    #[error("ROC undefined: {0}")]
    UndefinedRoc(String),

    #[error("model selection failed: {0}")]
    Selection(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
