//! Robustly optimal procurement mechanisms and monopoly regulation.
//!
//! A buyer (regulator) procures output from a seller with private cost
//! `θ ∈ [θ̲, θ̄]` while uncertain about both the gross value of output and
//! the cost distribution. Mechanisms are first screened for the maximal
//! worst-case welfare guarantee `G*`; among those, the buyer picks the one
//! that is best under a conjectured model `(D*, F*)`.
//!
//! * [`model`]: demand curves, cost models and environments.
//! * [`mechanism`]: quantity mechanisms, price regulations and welfare.
//! * [`guarantee`]: worst-case profiles, `G*` and short-list checks.
//! * [`solver`]: Baron–Myerson schedules, the quantity floor and the general
//!   robust program.
//! * [`regulation`]: price caps and the price-versus-quantity ranking.
//! * [`oracle`]: brute-force adversaries and property-test generators.

// `!(x >= 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod guarantee;
pub mod isotonic;
pub mod mechanism;
pub mod model;
pub mod oracle;
pub mod regulation;
pub mod report;
pub mod scenario;
pub mod solver;

pub use error::{MechanismError, ModelError, OracleError, SolverError};
pub use grid::{ThetaGrid, DEFAULT_GRID_POINTS};
pub use mechanism::{PriceRegulation, QuantityMechanism, QuantitySchedule};
pub use model::{CostFamily, CostModel, Environment, PiecewiseLinearCurve};
pub use report::{CheckResult, Status, VerificationReport};
