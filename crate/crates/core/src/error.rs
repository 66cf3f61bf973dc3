use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected 3 tab-separated fields, found {found}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        found: usize,
    },
    #[error("train split {path} contains no triples")]
    EmptyTrainSplit { path: PathBuf },
    #[error("unknown entity: {0:?}")]
    UnknownEntity(String),
    #[error("unknown relation: {0:?}")]
    UnknownRelation(String),
    #[error("embedding kind mismatch: expected {expected}, model is {actual}")]
    KindMismatch {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("embedding training diverged at step {step}: loss is not finite")]
    Diverged { step: usize },
    #[error("bad model file {path}: {reason}")]
    BadModelFile { path: PathBuf, reason: String },
    #[error("bad artifact file {path}: {reason}")]
    BadArtifact { path: PathBuf, reason: String },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite margin while boosting (stage {stage}, tree {tree})")]
    NonFiniteMargin { stage: usize, tree: usize },
    #[error("cannot fit a tree on an empty matrix")]
    EmptyMatrix,
    #[error("unknown ablation target: {0:?}")]
    UnknownAblation(String),
    #[error("no scorer available for relation {0}")]
    MissingScorer(u32),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
