//! Worst-case welfare guarantees and the robustness constraints.
//!
//! Nature's worst case pairs the lowest demand `D̲` with a point mass on a
//! single cost, so the guarantee of a mechanism is the infimum over `θ` of
//! `W̲(θ, q) = V̲(q(θ)) − θ q(θ) − u(θ)`. A mechanism is on the short list
//! when it has no rent at the top and `W̲(θ, q) ≥ G*` everywhere.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mechanism::{QuantityMechanism, QuantitySchedule};
use crate::model::environment::Environment;
use crate::report::{CheckResult, VerificationReport};

/// Tolerance for checks on closed-form schedules.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Tolerance for checks on solver output.
pub const SOLVER_TOL: f64 = 1e-7;
/// Tie tolerance when locating the largest minimiser of a profile.
pub const ARGMIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeProfile {
    pub thetas: Vec<f64>,
    pub values: Vec<f64>,
    pub minimum: f64,
    /// Largest grid `θ` whose value is within [`ARGMIN_TOL`] of the minimum.
    pub argmin_max: f64,
}

impl GuaranteeProfile {
    fn from_values(thetas: Vec<f64>, values: Vec<f64>) -> Self {
        let minimum = values.iter().copied().fold(f64::INFINITY, f64::min);
        let idx = values
            .iter()
            .rposition(|&v| v <= minimum + ARGMIN_TOL)
            .unwrap_or(0);
        Self {
            argmin_max: thetas[idx],
            thetas,
            values,
            minimum,
        }
    }
}

/// `G* = V̲(q_ℓ) − θ̄ q_ℓ`.
pub fn max_guarantee(env: &Environment) -> f64 {
    let floor = env.efficient_floor();
    env.lowest().gross_value(floor) - env.theta_high() * floor
}

/// `W̲(θᵢ, q)` at every grid point.
pub fn worst_case_profile(mech: &QuantityMechanism, env: &Environment) -> GuaranteeProfile {
    let thetas = mech.schedule.thetas();
    let values = mech.ex_post_welfare(env.lowest());
    GuaranteeProfile::from_values(thetas, values)
}

/// The guarantee `G(M)`, i.e. the minimum of the grid profile.
pub fn guarantee(mech: &QuantityMechanism, env: &Environment) -> f64 {
    worst_case_profile(mech, env).minimum
}

/// Signs of `q − D̲` at the cell ends and at interior kinks of `D̲`.
fn has_upward_crossing(schedule: &QuantitySchedule, env: &Environment, i: usize) -> bool {
    let grid = schedule.grid();
    let (t0, t1) = (grid.point(i), grid.point(i + 1));
    let low = env.lowest();
    let mut ts = vec![t0];
    ts.extend(low.price_breaks_between(t0, t1));
    ts.push(t1);
    ts.windows(2).any(|w| {
        let a = schedule.value_at(w[0]) - low.demand(w[0]);
        let b = schedule.value_at(w[1]) - low.demand(w[1]);
        a <= 0.0 && b > 0.0
    })
}

/// Guarantee computed from the endpoints and the cells where `q` crosses
/// `D̲` from below; between such cells the profile has no interior minimum.
pub fn fast_guarantee(mech: &QuantityMechanism, env: &Environment) -> f64 {
    let q = mech.quantities();
    let n = q.len();
    let rents = mech.rents();
    let grid = mech.grid();
    let low = env.lowest();
    let value = |i: usize| {
        let t = grid.point(i);
        low.gross_value(q[i]) - t * q[i] - rents[i]
    };
    let mut best = value(0).min(value(n - 1));
    for i in 0..n - 1 {
        if has_upward_crossing(&mech.schedule, env, i) {
            best = best.min(value(i)).min(value(i + 1));
        }
    }
    best
}

pub fn shortlist_check(mech: &QuantityMechanism, env: &Environment) -> VerificationReport {
    shortlist_check_with_tolerance(mech, env, CLOSED_FORM_TOL)
}

/// Short-list membership: zero rent at the top and `W̲(θᵢ) ≥ G*` on the grid.
pub fn shortlist_check_with_tolerance(
    mech: &QuantityMechanism,
    env: &Environment,
    tol: f64,
) -> VerificationReport {
    let g_star = max_guarantee(env);
    let profile = worst_case_profile(mech, env);
    let slacks = profile
        .thetas
        .iter()
        .zip(&profile.values)
        .map(|(&t, &v)| (t, v - g_star))
        .collect();
    let checks = vec![
        CheckResult::scalar("top_rent_zero", -mech.top_rent(), 0.0),
        CheckResult::from_slacks("robustness", slacks, tol),
    ];
    VerificationReport::new("shortlist_check", checks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MajorizationForm {
    /// `W̲(θ, q) ≥ G*` at every `θ`.
    Pointwise,
    /// `∫_θ^θ̄ q ≤ ∫_θ^θ̄ D̲ − DWL(θ, q(θ))` at every `θ`.
    Dwl,
    /// The deadweight-loss form at `θ̲` and `θ̄` plus cumulative dominance
    /// `∫_θ^θ̄ q ≤ ∫_θ^θ̄ D̲` in the interior.
    Endpoint,
}

impl fmt::Display for MajorizationForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pointwise => "pointwise",
            Self::Dwl => "dwl",
            Self::Endpoint => "endpoint",
        })
    }
}

impl FromStr for MajorizationForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pointwise" => Ok(Self::Pointwise),
            "dwl" => Ok(Self::Dwl),
            "endpoint" => Ok(Self::Endpoint),
            other => Err(format!("unknown majorization form '{other}'")),
        }
    }
}

/// Grid points plus every point inside a cell where `q − D̲` changes sign.
/// Both the profile and the cumulative gap `∫(D̲ − q)` attain their interior
/// minima only at such crossings, so scanning this set is exact for the
/// piecewise-linear interpolant.
pub fn evaluation_points(schedule: &QuantitySchedule, env: &Environment) -> Vec<f64> {
    let grid = schedule.grid();
    let low = env.lowest();
    let mut pts = Vec::with_capacity(grid.len());
    for i in 0..grid.len() - 1 {
        let (t0, t1) = (grid.point(i), grid.point(i + 1));
        pts.push(t0);
        let mut ts = vec![t0];
        ts.extend(low.price_breaks_between(t0, t1));
        ts.push(t1);
        for w in ts.windows(2) {
            let a = schedule.value_at(w[0]) - low.demand(w[0]);
            let b = schedule.value_at(w[1]) - low.demand(w[1]);
            if a * b < 0.0 {
                pts.push(w[0] + (w[1] - w[0]) * a / (a - b));
            }
        }
    }
    pts.push(grid.high());
    pts
}

struct Pieces {
    theta: f64,
    q: f64,
    tail_q: f64,
    tail_low: f64,
}

fn pieces(schedule: &QuantitySchedule, env: &Environment) -> Vec<Pieces> {
    let tails = schedule.tail_integrals();
    let high = env.theta_high();
    evaluation_points(schedule, env)
        .into_iter()
        .map(|theta| Pieces {
            theta,
            q: schedule.value_at(theta),
            tail_q: schedule.integral_from(theta, &tails),
            tail_low: env.lowest().integral(theta, high),
        })
        .collect()
}

/// `∫_θ^θ̄ q ≤ ∫_θ^θ̄ D̲` at every evaluation point.
pub fn cumulative_dominance(
    schedule: &QuantitySchedule,
    env: &Environment,
    tol: f64,
) -> CheckResult {
    let slacks = pieces(schedule, env)
        .iter()
        .map(|p| (p.theta, p.tail_low - p.tail_q))
        .collect();
    CheckResult::from_slacks("cumulative_dominance", slacks, tol)
}

pub fn majorization_check(
    schedule: &QuantitySchedule,
    env: &Environment,
    form: MajorizationForm,
) -> VerificationReport {
    majorization_check_with_tolerance(schedule, env, form, CLOSED_FORM_TOL)
}

pub fn majorization_check_with_tolerance(
    schedule: &QuantitySchedule,
    env: &Environment,
    form: MajorizationForm,
    tol: f64,
) -> VerificationReport {
    let g_star = max_guarantee(env);
    let low = env.lowest();
    let pts = pieces(schedule, env);
    let dwl_slack = |p: &Pieces| p.tail_low - env.deadweight_loss(p.theta, p.q) - p.tail_q;
    let checks = match form {
        MajorizationForm::Pointwise => {
            let slacks = pts
                .iter()
                .map(|p| {
                    let w = low.gross_value(p.q) - p.theta * p.q - p.tail_q;
                    (p.theta, w - g_star)
                })
                .collect();
            vec![CheckResult::from_slacks("pointwise", slacks, tol)]
        }
        MajorizationForm::Dwl => {
            let slacks = pts.iter().map(|p| (p.theta, dwl_slack(p))).collect();
            vec![CheckResult::from_slacks("dwl", slacks, tol)]
        }
        MajorizationForm::Endpoint => {
            let first = &pts[0];
            let last = &pts[pts.len() - 1];
            let interior = pts[1..pts.len() - 1]
                .iter()
                .map(|p| (p.theta, p.tail_low - p.tail_q))
                .collect();
            vec![
                CheckResult::from_slacks(
                    "endpoint_low",
                    vec![(first.theta, dwl_slack(first))],
                    tol,
                ),
                CheckResult::from_slacks("endpoint_high", vec![(last.theta, dwl_slack(last))], tol),
                CheckResult::from_slacks("interior_dominance", interior, tol),
            ]
        }
    };
    VerificationReport::new(format!("majorization_check ({form})"), checks)
}

/// `q(θ) ≥ q_ℓ` everywhere and `q(θ̄) = q_ℓ`.
pub fn quantity_bound_check(schedule: &QuantitySchedule, env: &Environment) -> VerificationReport {
    let floor = env.efficient_floor();
    let slacks = schedule
        .thetas()
        .into_iter()
        .zip(schedule.values())
        .map(|(t, &q)| (t, q - floor))
        .collect();
    let top = schedule.values()[schedule.len() - 1];
    let mut at_top = CheckResult::scalar("top_equals_floor", -(top - floor).abs(), CLOSED_FORM_TOL);
    at_top.worst_at = Some(env.theta_high());
    VerificationReport::new(
        "quantity_bound_check",
        vec![
            CheckResult::from_slacks("above_floor", slacks, CLOSED_FORM_TOL),
            at_top,
        ],
    )
}
