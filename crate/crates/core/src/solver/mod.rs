//! Baron–Myerson schedules, the quantity-floor mechanism and the general
//! robust program.

mod ropt;

pub use ropt::{solve_ropt, RoptSolution, SolverOptions, SolverStats};

use crate::error::SolverError;
use crate::guarantee::{cumulative_dominance, worst_case_profile, CLOSED_FORM_TOL};
use crate::mechanism::{QuantityMechanism, QuantitySchedule};
use crate::model::environment::Environment;
use crate::report::{CheckResult, VerificationReport};

/// Tolerance for structural checks on solver output.
pub const STRUCTURE_TOL: f64 = 1e-5;

/// Fails when `z*` decreases anywhere on the environment's grid.
pub fn check_regularity(env: &Environment) -> Result<(), SolverError> {
    let grid = env.grid();
    let mut prev = f64::NEG_INFINITY;
    for t in grid.points() {
        let z = env.cost().virtual_cost(t)?;
        if z < prev - 1e-12 {
            return Err(SolverError::Irregular { at: t });
        }
        prev = z;
    }
    Ok(())
}

/// `q^BM(θ) = D*(z*(θ))` clamped to `[0, q̄]`.
pub fn bm_quantity(env: &Environment, theta: f64) -> f64 {
    let z = env.cost().virtual_cost_or_inf(theta);
    env.conjectured().demand(z).min(env.quantity_cap())
}

pub fn baron_myerson(env: &Environment) -> Result<QuantitySchedule, SolverError> {
    check_regularity(env)?;
    Ok(QuantitySchedule::from_fn(env, |t| bm_quantity(env, t))?)
}

/// `q*(θ) = max{q^BM(θ), q_ℓ}` with no rent at the top.
pub fn bm_with_floor(env: &Environment) -> Result<QuantityMechanism, SolverError> {
    check_regularity(env)?;
    let floor = env.efficient_floor();
    let schedule = QuantitySchedule::from_fn(env, |t| bm_quantity(env, t).max(floor))?;
    Ok(QuantityMechanism::with_zero_top_rent(schedule))
}

/// Tests whether the floor mechanism is robustly optimal: the
/// deadweight-loss condition at `θ̲` and cumulative dominance of `q*` by
/// `D̲` everywhere.
pub fn check_floor_optimal(env: &Environment) -> VerificationReport {
    let mech = match bm_with_floor(env) {
        Ok(m) => m,
        Err(e) => {
            return VerificationReport::new(
                "check_floor_optimal",
                vec![CheckResult::flag("regularity", false).with_note(e.to_string())],
            )
        }
    };
    let q = mech.quantities();
    let low = env.theta_low();
    let high = env.theta_high();
    let total = mech.schedule.tail_integrals()[0];
    let rhs = env.lowest().integral(low, high) - env.deadweight_loss(low, q[0]);
    let mut bottom = CheckResult::scalar("dwl_at_bottom", rhs - total, CLOSED_FORM_TOL);
    bottom.worst_at = Some(low);
    let mut dominance = cumulative_dominance(&mech.schedule, env, CLOSED_FORM_TOL);
    dominance.slacks.retain(|&(t, _)| t > low);
    VerificationReport::new("check_floor_optimal", vec![bottom, dominance])
}

/// The cost at which `q^BM` reaches the floor, by bisection; `θ̄` when
/// `q^BM(θ̄) ≥ q_ℓ`.
pub fn theta_star(env: &Environment) -> f64 {
    let floor = env.efficient_floor();
    let (mut lo, mut hi) = (env.theta_low(), env.theta_high());
    if bm_quantity(env, hi) >= floor {
        return hi;
    }
    if bm_quantity(env, lo) <= floor {
        return lo;
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if bm_quantity(env, mid) > floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest grid cost minimising `W̲(·, q*)`.
pub fn theta_m(env: &Environment) -> f64 {
    match bm_with_floor(env) {
        Ok(m) => worst_case_profile(&m, env).argmin_max,
        Err(_) => env.theta_high(),
    }
}

/// Structure of the robust schedule when the floor mechanism is not
/// optimal: pinned to the floor on `[θ*, θ̄]`, below `q^BM` on `(θ̲, θ*)`
/// with a strict gap somewhere in `[θ^m, θ*)`, and equal to `q^BM` on
/// `(θ̲, θ^m)`.
pub fn verify_solution_structure(sol: &RoptSolution, env: &Environment) -> VerificationReport {
    if sol.floor_optimal {
        return VerificationReport::skipped(
            "structure_check",
            "not applicable: the floor mechanism is robustly optimal",
        );
    }
    let tol = STRUCTURE_TOL;
    let floor = env.efficient_floor();
    let low = env.theta_low();
    let q = sol.mechanism.quantities();
    let thetas = sol.mechanism.schedule.thetas();
    let bm: Vec<f64> = thetas.iter().map(|&t| bm_quantity(env, t)).collect();

    let mut pinned = Vec::new();
    let mut below = Vec::new();
    let mut equal = Vec::new();
    let mut strict_run = 0usize;
    let mut best_run = 0usize;
    for (i, &t) in thetas.iter().enumerate() {
        if t >= sol.theta_star {
            pinned.push((t, -(q[i] - floor).abs()));
        }
        if t > low && t < sol.theta_star {
            below.push((t, bm[i] - q[i]));
        }
        if t > low && t < sol.theta_m {
            equal.push((t, -(q[i] - bm[i]).abs()));
        }
        if t >= sol.theta_m && t < sol.theta_star && bm[i] - q[i] > tol {
            strict_run += 1;
            best_run = best_run.max(strict_run);
        } else {
            strict_run = 0;
        }
    }
    let mut strict = CheckResult::flag("strictly_below_somewhere", best_run >= 2);
    strict = strict.with_note(format!("longest strict run: {best_run} grid points"));
    let mut checks = vec![
        CheckResult::from_slacks("floor_after_theta_star", pinned, tol),
        CheckResult::from_slacks("below_bm", below, tol),
        strict,
        CheckResult::from_slacks("equals_bm_before_theta_m", equal, tol),
    ];
    for c in &mut checks {
        c.binding.clear();
    }
    VerificationReport::new("structure_check", checks)
}
