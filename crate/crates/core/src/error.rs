use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("corpus has {source_lines} source lines but {target_lines} target lines")]
    MisalignedCorpus {
        source_lines: usize,
        target_lines: usize,
    },

    #[error("need at least 2 parallel pairs to draw negatives (got {0})")]
    TooFewPairs(usize),

    #[error("held-out pool has {available} sentences but {needed} are required")]
    InsufficientHeldout { needed: usize, available: usize },

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("non-finite gradient in parameter `{name}` at epoch {epoch}, batch {batch}")]
    TrainingDiverged {
        name: String,
        epoch: usize,
        batch: usize,
    },

    #[error("backward called before a forward pass was recorded")]
    NoForwardPass,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("empty gold set")]
    EmptyGold,

    #[error("empty precision-recall curve")]
    EmptyCurve,

    #[error("bad magic bytes in {0}")]
    BadMagic(PathBuf),

    #[error("unsupported model file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("truncated model file: missing {0}")]
    Truncated(String),

    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("model file is inconsistent: {0}")]
    Corrupt(String),

    #[error("vocabulary size {vocab} does not match model {side} vocabulary size {model}")]
    VocabMismatch {
        side: &'static str,
        vocab: usize,
        model: usize,
    },

    #[error("parse error in {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
