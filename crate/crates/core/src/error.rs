use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("missing column {0:?}")]
    MissingColumn(String),

    #[error("non-numeric cell {value:?} at row {row}, column {column:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at row {row}, column {column:?}")]
    NonFinite { row: usize, column: String },

    #[error("too few rows: need at least {needed}, have {have}")]
    TooFewRows { needed: usize, have: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("singular design: {0}")]
    SingularDesign(String),

    #[error("collinear regressors: {0}")]
    Collinear(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("simplex iteration limit reached after {iterations} pivots ({context})")]
    IterationLimit { iterations: usize, context: String },

    #[error("breakpoint cap of {cap} exceeded; fall back to a grid of per-alpha solves")]
    BreakpointCap { cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds {target:e}")]
    Quadrature { achieved: f64, target: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{failed} of {total} replicates failed; first failure: {first}")]
    StudyAborted {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage labels stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
