use thiserror::Error;

use crate::taskio::container::ContainerError;

pub type Result<T, E = RepriError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum RepriError {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("zero-norm vector ({0})")]
    ZeroVector(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("support set contains no foreground pixel")]
    EmptyForeground,

    #[error("perturbation delta must be > -1, got {0}")]
    InvalidDelta(f64),

    #[error("query ground truth required for this mode")]
    MissingGroundTruth,

    #[error("prototype collapsed at iteration {iteration} (norm {norm:e})")]
    PrototypeCollapse { iteration: usize, norm: f64 },

    #[error("class {0} has an empty union; IoU undefined")]
    EmptyClass(u32),

    #[error("true foreground proportion is zero; relative error undefined")]
    DegenerateTruth,

    #[error("class {class} has {available} images, need {needed}")]
    InsufficientImages {
        class: u32,
        available: usize,
        needed: usize,
    },

    #[error("{failed} of {total} tasks failed (limit 1%); first error: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(transparent)]
    Container(#[from] ContainerError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RepriError {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        RepriError::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
