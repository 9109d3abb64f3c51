use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("record {index} does not match the schema: {reason}")]
    SchemaMismatch { index: usize, reason: String },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("row {row}, column {column:?}: {reason}")]
    InvalidCell { row: usize, column: String, reason: String },

    #[error("unknown segment value {0:?}")]
    UnknownSegment(String),

    #[error("category index {index} out of range for column {column:?} (vocabulary size {size})")]
    CategoryOutOfRange { column: String, index: u32, size: usize },

    #[error("non-finite value in {stage} layer {layer}")]
    NonFinite { stage: &'static str, layer: usize },

    #[error("non-finite gradient at {0}")]
    NonFiniteGradient(String),

    #[error("non-finite loss term: {0}")]
    NonFiniteLoss(&'static str),

    #[error("{0} group is empty")]
    EmptyGroup(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{group} group has {size} records, at least {required} required")]
    GroupTooSmall { group: &'static str, size: usize, required: usize },

    #[error("training diverged at epoch {epoch}, step {step} (loss {loss})")]
    Diverged { epoch: usize, step: usize, loss: f64 },

    #[error("parameter shape mismatch for {0}")]
    ShapeMismatch(String),
}
