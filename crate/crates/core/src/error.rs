use alloc::string::String;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error("interpolation mode {0} is not allowed for label masks")]
    Mode(&'static str),
    #[error("label {label} outside the declared vocabulary")]
    LabelVocabulary { label: u8 },
    #[error("subregion masks overlap at voxel {index}")]
    Disjointness { index: usize },
    #[error("region of interest is empty")]
    EmptyRoi,
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("fold {fold} has a single-class training split")]
    FoldDegenerate { fold: usize },
    #[error("cohort of {n} cases is too small (need at least {min})")]
    CohortTooSmall { n: usize, min: usize },
    #[error("nothing to evaluate")]
    EmptyEval,
    #[error("{what} = {value} is out of range")]
    Range { what: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("cannot place {effective} effective cases in a cohort of {n}")]
    Balance { effective: usize, n: usize },
    #[error("case {0} not found")]
    NotFound(String),
    #[error("no external probability for case {0}")]
    MissingProb(String),
    #[error("no image embedding for case {0}")]
    MissingEmbedding(String),
    #[error("duplicate case id {0}")]
    Duplicate(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
