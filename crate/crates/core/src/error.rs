use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("state is not normalized: total mass {total}")]
    NotNormalized { total: f64 },

    #[error("duplicate level group (energy {energy}, label {label:?})")]
    DuplicateGroup { energy: f64, label: String },

    #[error("level structures differ: {0}")]
    MismatchedStructure(String),

    #[error("population on level {label:?} has no Gibbs support")]
    UndefinedSupport { label: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("square root of negative radicand {0}")]
    Domain(f64),

    #[error("root not found: {0}")]
    RootNotFound(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("problem too large: {0}")]
    SizeLimit(String),

    #[error("linear program is {0}")]
    Solver(String),

    #[error("feasibility is not monotone near gamma = {gamma}")]
    NonMonotoneFeasibility { gamma: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
