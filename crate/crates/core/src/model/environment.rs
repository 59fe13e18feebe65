//! The primitive tuple: costs, conjectured and lowest demand, extra demands
//! and the quantity cap.

use crate::error::{MechanismError, ModelError};
use crate::grid::{ThetaGrid, DEFAULT_GRID_POINTS};
use crate::model::cost::CostModel;
use crate::model::curve::PiecewiseLinearCurve;
use crate::report::{CheckResult, VerificationReport};

/// Index of `D̲` in [`Environment::demands`].
pub const LOWEST: usize = 0;
/// Index of `D*` in [`Environment::demands`].
pub const CONJECTURED: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    cost: CostModel,
    conjectured: PiecewiseLinearCurve,
    lowest: PiecewiseLinearCurve,
    extras: Vec<PiecewiseLinearCurve>,
    quantity_cap: f64,
    grid_points: usize,
}

impl Environment {
    pub fn new(
        cost: CostModel,
        conjectured: PiecewiseLinearCurve,
        lowest: PiecewiseLinearCurve,
        extras: Vec<PiecewiseLinearCurve>,
        quantity_cap: f64,
    ) -> Result<Self, ModelError> {
        if !(quantity_cap.is_finite() && quantity_cap > 0.0) {
            return Err(ModelError::InvalidEnvironment(format!(
                "quantity cap must be positive, got {quantity_cap}"
            )));
        }
        Ok(Self {
            cost,
            conjectured,
            lowest,
            extras,
            quantity_cap,
            grid_points: DEFAULT_GRID_POINTS,
        })
    }

    /// # Panics
    /// If `points < 2`.
    pub fn with_grid_points(mut self, points: usize) -> Self {
        assert!(points >= 2, "a grid needs at least two points");
        self.grid_points = points;
        self
    }

    pub fn with_extra_demands(mut self, extras: Vec<PiecewiseLinearCurve>) -> Self {
        self.extras = extras;
        self
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn conjectured(&self) -> &PiecewiseLinearCurve {
        &self.conjectured
    }

    pub fn lowest(&self) -> &PiecewiseLinearCurve {
        &self.lowest
    }

    pub fn extras(&self) -> &[PiecewiseLinearCurve] {
        &self.extras
    }

    pub fn quantity_cap(&self) -> f64 {
        self.quantity_cap
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn theta_low(&self) -> f64 {
        self.cost.low()
    }

    pub fn theta_high(&self) -> f64 {
        self.cost.high()
    }

    pub fn grid(&self) -> ThetaGrid {
        ThetaGrid::new(self.cost.low(), self.cost.high(), self.grid_points)
    }

    /// Stored demands: `D̲`, then `D*`, then the extras.
    pub fn demands(&self) -> Vec<&PiecewiseLinearCurve> {
        let mut all = vec![&self.lowest, &self.conjectured];
        all.extend(self.extras.iter());
        all
    }

    pub fn demand_count(&self) -> usize {
        2 + self.extras.len()
    }

    pub fn demand(&self, index: usize) -> Result<&PiecewiseLinearCurve, MechanismError> {
        match index {
            LOWEST => Ok(&self.lowest),
            CONJECTURED => Ok(&self.conjectured),
            i => self
                .extras
                .get(i - 2)
                .ok_or(MechanismError::UnknownDemand(i)),
        }
    }

    /// `q_ℓ = D̲(θ̄)`.
    pub fn efficient_floor(&self) -> f64 {
        self.lowest.demand(self.theta_high())
    }

    /// `DWL(θ, q) = ∫_θ^{P̲(q)} (D̲(y) − q) dy` with signed limits.
    pub fn deadweight_loss(&self, theta: f64, q: f64) -> f64 {
        let p = self.lowest.inverse_demand(q);
        let dwl = self.lowest.integral(theta, p) - q * (p - theta);
        dwl.max(0.0)
    }
}

/// Knobs for [`validate_environment`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub regularity_points: usize,
    pub tolerance: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            regularity_points: 2001,
            tolerance: 1e-12,
        }
    }
}

pub fn validate_environment(env: &Environment) -> VerificationReport {
    validate_environment_with(env, ValidationOptions::default())
}

pub fn validate_environment_with(env: &Environment, opts: ValidationOptions) -> VerificationReport {
    let tol = opts.tolerance;
    let low = env.theta_low();
    let high = env.theta_high();
    let mut checks = Vec::new();

    let mut positive = CheckResult::scalar("theta_low_positive", low, 0.0);
    positive.passed = low > 0.0;
    if !positive.passed {
        positive = positive.with_note("theta_low must be positive");
    }
    checks.push(positive);

    let grid = ThetaGrid::new(low, high, opts.regularity_points.max(3));
    let thetas = grid.points();
    let interior = &thetas[1..thetas.len() - 1];
    let density: Vec<(f64, f64)> = interior.iter().map(|&t| (t, env.cost.density(t))).collect();
    let mut density_check = CheckResult::from_slacks("density_positive", density, 0.0);
    density_check.passed = density_check.worst_slack > 0.0;
    density_check.slacks.clear();
    density_check.binding.clear();
    checks.push(density_check);

    let z: Vec<f64> = thetas
        .iter()
        .map(|&t| env.cost.virtual_cost_or_inf(t))
        .collect();
    let increments: Vec<(f64, f64)> = thetas
        .windows(2)
        .zip(z.windows(2))
        .map(|(t, z)| {
            let d = z[1] - z[0];
            (t[0], if d.is_nan() { -f64::INFINITY } else { d })
        })
        .collect();
    let mut regular = CheckResult::from_slacks("regularity", increments, tol);
    regular.binding.clear();
    regular.slacks.clear();
    checks.push(regular);

    let mut gaps = Vec::new();
    for (i, d) in env.demands().into_iter().enumerate().skip(1) {
        let (gap, _) = d.min_gap_over(&env.lowest);
        gaps.push((i as f64, gap));
    }
    let mut minimum = CheckResult::from_slacks("pointwise_minimum", gaps, tol);
    minimum.binding.clear();
    if !minimum.passed {
        minimum = minimum.with_note("lowest demand exceeds another demand somewhere");
    }
    checks.push(minimum);

    checks.push(CheckResult::scalar(
        "gains_from_trade",
        env.lowest.choke_price() - high,
        0.0,
    ));
    let gft = checks.last_mut().unwrap();
    gft.passed = gft.worst_slack > 0.0;

    let largest = env
        .demands()
        .iter()
        .map(|d| d.demand(low))
        .fold(0.0, f64::max);
    let mut cap = CheckResult::scalar("quantity_cap", env.quantity_cap - largest, 0.0);
    cap.passed = cap.worst_slack > 0.0;
    checks.push(cap);

    let mut report = VerificationReport::new("validate_environment", checks);
    for (i, d) in env.demands().into_iter().enumerate() {
        if !d.flat_segments().is_empty() {
            report.warnings.push(format!(
                "demand {i} has flat segments; its gross value is only weakly concave there"
            ));
        }
    }
    report
}
