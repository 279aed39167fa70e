//! Error type shared across the crate.

/// Errors produced by model construction, evaluation, and estimation.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("self-loop on actor {actor}: dyads require two distinct actors")]
    SelfLoop { actor: usize },

    #[error("actor index {index} out of range for a network with {n} actors")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("duplicate dyad ({i},{j}) in edge list")]
    DuplicateDyad { i: usize, j: usize },

    #[error("a signed network needs at least 2 actors, got {n}")]
    TooFewActors { n: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("covariate '{name}' not available for period {period}")]
    MissingCovariate { name: String, period: usize },

    #[error("term '{term}' needs a lag network but the series is cross-sectional")]
    MissingLagNetwork { term: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("model specification must contain at least one term")]
    EmptySpec,

    #[error("invalid settings: {0}")]
    InvalidSettings(String),

    #[error(
        "statistic '{term}' is at its boundary (observed {observed}, attainable range \
         [{min}, {max}]); the likelihood maximum does not exist"
    )]
    Boundary {
        term: String,
        observed: f64,
        min: f64,
        max: f64,
    },

    #[error("degenerate model: {0}")]
    Degeneracy(String),

    #[error("estimation did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("chain of length {len} is too short (need at least {min})")]
    ChainTooShort { len: usize, min: usize },

    #[error("enumeration over {states} networks exceeds the budget of {max_states}")]
    BudgetExceeded { states: u128, max_states: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
