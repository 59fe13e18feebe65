//! Quantity mechanisms `M = (q, u)`: a weakly decreasing schedule plus the
//! rent left to the least efficient type.

use serde::{Deserialize, Serialize};

use crate::error::MechanismError;
use crate::grid::ThetaGrid;
use crate::mechanism::quadrature::WelfareQuadrature;
use crate::model::curve::PiecewiseLinearCurve;
use crate::model::environment::Environment;

/// Absolute slack tolerated when checking monotonicity of stored values.
const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Deserialize)]
struct RawSchedule {
    grid: ThetaGrid,
    values: Vec<f64>,
}

impl TryFrom<RawSchedule> for QuantitySchedule {
    type Error = MechanismError;

    fn try_from(raw: RawSchedule) -> Result<Self, Self::Error> {
        QuantitySchedule::new(raw.grid, raw.values, f64::INFINITY)
    }
}

/// Grid-sampled quantity schedule, linear between grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule")]
pub struct QuantitySchedule {
    grid: ThetaGrid,
    values: Vec<f64>,
}

impl QuantitySchedule {
    pub fn new(grid: ThetaGrid, values: Vec<f64>, cap: f64) -> Result<Self, MechanismError> {
        if values.len() != grid.len() {
            return Err(MechanismError::LengthMismatch {
                values: values.len(),
                grid: grid.len(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v >= 0.0 && v <= cap) {
                return Err(MechanismError::OutOfRange {
                    value: v,
                    at: grid.point(i),
                    cap,
                });
            }
        }
        if let Some(i) = values.windows(2).position(|w| w[1] > w[0] + MONOTONE_SLACK) {
            return Err(MechanismError::NotDecreasing { at: grid.point(i) });
        }
        Ok(Self { grid, values })
    }

    /// A schedule on the environment's grid, capped at its `q̄`.
    pub fn for_env(env: &Environment, values: Vec<f64>) -> Result<Self, MechanismError> {
        Self::new(env.grid(), values, env.quantity_cap())
    }

    /// Samples `q(θ)` at every grid point of the environment.
    pub fn from_fn(env: &Environment, q: impl Fn(f64) -> f64) -> Result<Self, MechanismError> {
        let grid = env.grid();
        Self::for_env(env, grid.points().into_iter().map(q).collect())
    }

    pub fn grid(&self) -> ThetaGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.grid.points()
    }

    /// Linear interpolation between grid values.
    pub fn value_at(&self, theta: f64) -> f64 {
        let i = self.grid.cell_of(theta);
        let (t0, t1) = (self.grid.point(i), self.grid.point(i + 1));
        let s = ((theta - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.values[i] + s * (self.values[i + 1] - self.values[i])
    }

    /// `∫_{θᵢ}^{θ̄} q` at every grid point (exact for the interpolant).
    pub fn tail_integrals(&self) -> Vec<f64> {
        let n = self.values.len();
        let mut tail = vec![0.0; n];
        for i in (0..n - 1).rev() {
            let h = self.grid.point(i + 1) - self.grid.point(i);
            tail[i] = tail[i + 1] + 0.5 * h * (self.values[i] + self.values[i + 1]);
        }
        tail
    }

    /// `∫_θ^{θ̄} q` at an arbitrary `θ`.
    pub fn integral_from(&self, theta: f64, tails: &[f64]) -> f64 {
        let i = self.grid.cell_of(theta);
        let t1 = self.grid.point(i + 1);
        tails[i + 1] + 0.5 * (t1 - theta) * (self.value_at(theta) + self.values[i + 1])
    }
}

/// `M = (q, u(θ̄))`; rents and transfers are always derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityMechanism {
    pub schedule: QuantitySchedule,
    top_rent: f64,
}

/// One row of the tabular mechanism representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismRow {
    pub theta: f64,
    pub quantity: f64,
    pub rent: f64,
    pub transfer: f64,
}

impl QuantityMechanism {
    pub fn new(schedule: QuantitySchedule, top_rent: f64) -> Result<Self, MechanismError> {
        if !(top_rent >= 0.0 && top_rent.is_finite()) {
            return Err(MechanismError::NegativeTopRent(top_rent));
        }
        Ok(Self { schedule, top_rent })
    }

    /// A mechanism with zero rent at the top.
    pub fn with_zero_top_rent(schedule: QuantitySchedule) -> Self {
        Self {
            schedule,
            top_rent: 0.0,
        }
    }

    pub fn top_rent(&self) -> f64 {
        self.top_rent
    }

    pub fn grid(&self) -> ThetaGrid {
        self.schedule.grid()
    }

    pub fn quantities(&self) -> &[f64] {
        self.schedule.values()
    }

    /// `u(θᵢ) = u(θ̄) + ∫_{θᵢ}^{θ̄} q`.
    pub fn rents(&self) -> Vec<f64> {
        self.schedule
            .tail_integrals()
            .into_iter()
            .map(|t| t + self.top_rent)
            .collect()
    }

    pub fn rent_schedule(&self) -> Vec<(f64, f64)> {
        self.schedule
            .thetas()
            .into_iter()
            .zip(self.rents())
            .collect()
    }

    /// `t(θ) = u(θ) + θ q(θ)`.
    pub fn transfers(&self) -> Vec<(f64, f64)> {
        self.rent_schedule()
            .into_iter()
            .zip(self.quantities())
            .map(|((t, u), q)| (t, u + t * q))
            .collect()
    }

    pub fn rows(&self) -> Vec<MechanismRow> {
        let rents = self.rents();
        self.schedule
            .thetas()
            .into_iter()
            .enumerate()
            .map(|(i, theta)| {
                let quantity = self.quantities()[i];
                MechanismRow {
                    theta,
                    quantity,
                    rent: rents[i],
                    transfer: rents[i] + theta * quantity,
                }
            })
            .collect()
    }

    /// `V(q(θᵢ)) − θᵢ q(θᵢ) − u(θᵢ)` at every grid point.
    pub fn ex_post_welfare(&self, demand: &PiecewiseLinearCurve) -> Vec<f64> {
        let rents = self.rents();
        self.schedule
            .thetas()
            .iter()
            .zip(self.quantities())
            .zip(rents)
            .map(|((&t, &q), u)| demand.gross_value(q) - t * q - u)
            .collect()
    }

    /// Expected welfare `Σᵢ wᵢ [V(q(θᵢ)) − θᵢ q(θᵢ) − u(θᵢ)]` under a
    /// discretised cost distribution.
    pub fn welfare(
        &self,
        demand: &PiecewiseLinearCurve,
        weights: &[f64],
    ) -> Result<f64, MechanismError> {
        check_weights(weights, self.schedule.len())?;
        Ok(self
            .ex_post_welfare(demand)
            .iter()
            .zip(weights)
            .map(|(w, p)| w * p)
            .sum())
    }

    /// Expected welfare under the conjectured model, integrated exactly.
    pub fn conjectured_welfare(&self, env: &Environment) -> f64 {
        conjectured_welfare(self, env)
    }
}

/// `∫ [V*(q) − z* q] dF* − u(θ̄)`.
pub fn conjectured_welfare(mech: &QuantityMechanism, env: &Environment) -> f64 {
    let quad = WelfareQuadrature::new(env.cost(), mech.grid());
    quad.virtual_surplus(env.conjectured(), mech.quantities()) - mech.top_rent()
}

/// `q ≡ q_ℓ` with no rent at the top: pays `θ̄ q_ℓ` to every type.
pub fn constant_mechanism(env: &Environment) -> QuantityMechanism {
    let floor = env.efficient_floor();
    let schedule = QuantitySchedule::for_env(env, vec![floor; env.grid_points()])
        .expect("the floor is within the cap");
    QuantityMechanism::with_zero_top_rent(schedule)
}

pub fn check_weights(weights: &[f64], n: usize) -> Result<(), MechanismError> {
    if weights.len() != n {
        return Err(MechanismError::LengthMismatch {
            values: weights.len(),
            grid: n,
        });
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(MechanismError::NegativeWeight);
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(MechanismError::WeightSum { sum });
    }
    Ok(())
}

/// Probability weights `∫ φᵢ dF*` of the grid's hat functions.
pub fn cost_weights(env: &Environment) -> Vec<f64> {
    WelfareQuadrature::new(env.cost(), env.grid()).hat_masses()
}

/// Point mass on grid index `index`.
pub fn dirac_weights(n: usize, index: usize) -> Vec<f64> {
    let mut w = vec![0.0; n];
    w[index] = 1.0;
    w
}
