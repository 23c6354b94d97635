use thiserror::Error;

/// Errors raised by the analysis engines and the file loaders.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed model: {0}")]
    MalformedModel(String),

    #[error("malformed input file: {0}")]
    MalformedInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in layer {layer}")]
    NonFiniteWeight { layer: usize },

    #[error("non-finite value in {0}")]
    NonFiniteInput(String),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("projection order k = {k} outside 1..={categories}")]
    KOutOfRange { k: usize, categories: usize },

    #[error("invalid category space: {0}")]
    InvalidSpace(String),

    #[error("invalid scenario item: {0}")]
    InvalidItem(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("constraints exclude every full assignment")]
    NoFeasibleAssignment,

    #[error("abstract domain is empty")]
    EmptyDomain,

    #[error("layer {0} is not a ReLU output and cannot be monitored")]
    LayerNotMonitorable(i64),

    #[error("bad parameters: {0}")]
    BadParameters(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MalformedModel(_) => "MalformedModel",
            Error::MalformedInput(_) => "MalformedInput",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteWeight { .. } => "NonFiniteWeight",
            Error::NonFiniteInput(_) => "NonFiniteInput",
            Error::LabelOutOfRange { .. } => "LabelOutOfRange",
            Error::KOutOfRange { .. } => "KOutOfRange",
            Error::InvalidSpace(_) => "InvalidSpace",
            Error::InvalidItem(_) => "InvalidItem",
            Error::InvalidConstraint(_) => "InvalidConstraint",
            Error::NoFeasibleAssignment => "NoFeasibleAssignment",
            Error::EmptyDomain => "EmptyDomain",
            Error::LayerNotMonitorable(_) => "LayerNotMonitorable",
            Error::BadParameters(_) => "BadParameters",
            Error::EmptyDataset => "EmptyDataset",
            Error::Io(_) => "Io",
        }
    }

    pub(crate) fn dim(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
