pub mod cost;
pub mod curve;
pub mod environment;
pub mod fixtures;

pub use cost::{CostFamily, CostModel};
pub use curve::PiecewiseLinearCurve;
pub use environment::{
    validate_environment, validate_environment_with, Environment, ValidationOptions, CONJECTURED,
    LOWEST,
};
