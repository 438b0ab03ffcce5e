use thiserror::Error;

/// Errors raised across the simulation and numerics layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("no giant-component regime: m2 - 2*m1 = {gap} <= 0")]
    SubcriticalStructure { gap: f64 },

    #[error("degree sum {0} is odd")]
    OddDegreeSum(u64),

    #[error("half-edge pool is empty")]
    EmptyPool,

    #[error("degenerate state: {0}")]
    DegenerateState(String),

    #[error("walk masses leave [0, 1]: {0}")]
    InvalidRegime(String),

    #[error("tilt equation has no positive root")]
    NoRoot,

    #[error("only {got} survivors, need at least {need}")]
    InsufficientSurvivors { got: usize, need: usize },

    #[error("argument {0} outside the supported range")]
    OutOfRange(f64),

    #[error("iteration did not converge: {0}")]
    ConvergenceFailure(String),

    #[error("series did not reach tolerance within {0} terms")]
    SeriesDivergence(usize),

    #[error("fit needs at least {need} points with >= {min_events} events each, got {got}")]
    InsufficientEvents {
        got: usize,
        need: usize,
        min_events: u64,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
