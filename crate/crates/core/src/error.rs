use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("{op} produces an empty output: {detail}")]
    EmptyOutput { op: &'static str, detail: String },

    #[error("unsupported configuration in {op}: {detail}")]
    Unsupported { op: &'static str, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("stage {stage} (resolution {resolution}): {source}")]
    Stage {
        stage: &'static str,
        resolution: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed metadata in {path}: {detail}")]
    Metadata { path: PathBuf, detail: String },

    #[error("payload shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("duplicate sample id {0:?}")]
    DuplicateSample(String),

    #[error("label {label} of sample {sample:?} is out of range for {classes} classes")]
    LabelOutOfRange {
        sample: String,
        label: i64,
        classes: usize,
    },

    #[error("non-finite value in sample {sample:?} at time {time}, channel {channel}")]
    NonFiniteValue {
        sample: String,
        time: usize,
        channel: usize,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("AUROC is undefined: no class has both positive and negative samples")]
    UndefinedAuroc,

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps `self` with the pipeline stage and resolution index it occurred in.
    pub fn in_stage(self, stage: &'static str, resolution: usize) -> Self {
        Error::Stage {
            stage,
            resolution,
            source: Box::new(self),
        }
    }

    /// Short machine-readable category, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::EmptyOutput { .. } => "empty-output",
            Error::Unsupported { .. } => "unsupported",
            Error::Contract(_) => "contract",
            Error::Numeric(_) => "numeric",
            Error::Stage { source, .. } => source.kind(),
            Error::Io { .. } => "io",
            Error::Metadata { .. } => "metadata",
            Error::ShapeMismatch(_) => "shape-mismatch",
            Error::DuplicateSample(_) => "duplicate-sample",
            Error::LabelOutOfRange { .. } => "label-out-of-range",
            Error::NonFiniteValue { .. } => "non-finite",
            Error::Split(_) => "split",
            Error::Config(_) => "config",
            Error::UndefinedAuroc => "undefined-auroc",
            Error::Divergence { .. } => "divergence",
        }
    }
}
