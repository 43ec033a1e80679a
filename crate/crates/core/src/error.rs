use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite logits")]
    NonFiniteLogits,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("row {row} is not a probability vector: {reason}")]
    NotStochastic { row: usize, reason: &'static str },
    #[error("empty matrix")]
    EmptyMatrix,
    #[error("empty input")]
    EmptyInput,
    #[error("empty candidate target")]
    EmptyCandidateTarget,
    #[error("no trainable instances")]
    NoTrainableInstances,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("ground-truth labels are required: {0}")]
    MissingLabels(&'static str),
    #[error("class {class} has {available} instances, {required} required")]
    InsufficientClass {
        class: usize,
        available: usize,
        required: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("diverged")]
    Diverged,
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    /// Strips iteration context, returning the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::Iteration { source, .. } => source.root(),
            other => other,
        }
    }
}
