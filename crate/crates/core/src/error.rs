use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid cost model: {0}")]
    InvalidCost(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("cost density vanishes at interior point theta = {theta}")]
    UndefinedDensity { theta: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("schedule has {values} values but the grid has {grid} points")]
    LengthMismatch { values: usize, grid: usize },
    #[error("schedule increases between theta = {at} and the next grid point")]
    NotDecreasing { at: f64 },
    #[error("quantity {value} at theta = {at} is outside [0, {cap}]")]
    OutOfRange { value: f64, at: f64, cap: f64 },
    #[error("top rent must be nonnegative, got {0}")]
    NegativeTopRent(f64),
    #[error("price schedule decreases at theta = {at}")]
    PricesNotIncreasing { at: f64 },
    #[error("demand index {0} is out of range")]
    UnknownDemand(usize),
    #[error("weights sum to {sum}, expected 1")]
    WeightSum { sum: f64 },
    #[error("weights must be nonnegative")]
    NegativeWeight,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("virtual cost is not increasing near theta = {at}; ironing is not supported")]
    Irregular { at: f64 },
    #[error("solver did not converge after {iterations} iterations (violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },
    #[error("robustness program is infeasible (internal error): {0}")]
    Infeasible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("sampler starved: accepted {accepted} of {draws} draws")]
    SamplerStarved { accepted: usize, draws: usize },
    #[error("invalid adversary grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
}
