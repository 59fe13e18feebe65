//! Independent cross-checks: a brute-force adversary that enumerates
//! Nature's choices directly, random schedule and environment generators,
//! and numerical probes of the analytic machinery.
//!
//! Nothing here goes through the guarantee formulas; welfare is rebuilt
//! from `V_D`, the schedule and the envelope rent at each cost atom.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::OracleError;
use crate::guarantee::{max_guarantee, shortlist_check};
use crate::mechanism::price::cell_integral;
use crate::mechanism::{PriceRegulation, QuantityMechanism, QuantitySchedule, WelfareQuadrature};
use crate::model::environment::{validate_environment, Environment, LOWEST};
use crate::model::{CostFamily, CostModel, PiecewiseLinearCurve};
use crate::report::{CheckResult, VerificationReport};
use crate::solver::{bm_quantity, bm_with_floor, theta_m};

/// Simplex step for mixture weights.
const MIXTURE_STEP: f64 = 0.25;
/// Draw budget after which a low acceptance rate counts as starvation.
const STARVATION_DRAWS: usize = 1_000_000;
const STARVATION_RATE: f64 = 1e-3;

/// Nature's search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryGrid {
    pub cost_atoms: Vec<f64>,
    pub demand_indices: Vec<usize>,
    /// Largest support size of the cost distribution.
    pub mixture_depth: usize,
}

impl AdversaryGrid {
    /// Every grid point, every stored demand, Dirac distributions only.
    pub fn dirac(env: &Environment) -> Self {
        Self {
            cost_atoms: env.grid().points(),
            demand_indices: (0..env.demand_count()).collect(),
            mixture_depth: 1,
        }
    }

    /// `atoms` evenly spaced costs, every stored demand.
    pub fn coarse(env: &Environment, atoms: usize, mixture_depth: usize) -> Self {
        let (lo, hi) = (env.theta_low(), env.theta_high());
        let cost_atoms = (0..atoms)
            .map(|i| {
                if i + 1 == atoms {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (atoms - 1).max(1) as f64
                }
            })
            .collect();
        Self {
            cost_atoms,
            demand_indices: (0..env.demand_count()).collect(),
            mixture_depth,
        }
    }

    fn validate(&self, env: &Environment) -> Result<(), OracleError> {
        let (lo, hi) = (env.theta_low(), env.theta_high());
        if self.mixture_depth == 0 {
            return Err(OracleError::InvalidGrid(
                "mixture_depth must be at least 1".into(),
            ));
        }
        if self.cost_atoms.is_empty() || self.demand_indices.is_empty() {
            return Err(OracleError::InvalidGrid("no atoms or no demands".into()));
        }
        if let Some(t) = self.cost_atoms.iter().find(|&&t| !(lo..=hi).contains(&t)) {
            return Err(OracleError::InvalidGrid(format!(
                "cost atom {t} outside [{lo}, {hi}]"
            )));
        }
        for &i in &self.demand_indices {
            env.demand(i)?;
        }
        Ok(())
    }
}

/// Nature's best response found by enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryOutcome {
    pub value: f64,
    pub demand_index: usize,
    /// `(θ, weight)` pairs of the minimising distribution.
    pub support: Vec<(f64, f64)>,
}

impl AdversaryOutcome {
    pub fn is_dirac(&self) -> bool {
        self.support.len() == 1
    }
}

/// Minimum of `welfare(M, D, F)` over the stored demands in `grid` and all
/// distributions on `cost_atoms` with at most `mixture_depth` atoms and
/// weights on a 0.25 simplex grid.
pub fn brute_force_guarantee(
    mech: &QuantityMechanism,
    env: &Environment,
    grid: &AdversaryGrid,
) -> Result<AdversaryOutcome, OracleError> {
    grid.validate(env)?;
    let tails = mech.schedule.tail_integrals();
    let table = welfare_table(env, grid, |d, _, t| {
        let q = mech.schedule.value_at(t);
        let u = mech.top_rent() + mech.schedule.integral_from(t, &tails);
        d.gross_value(q) - t * q - u
    });
    Ok(enumerate(&table, grid))
}

/// The same enumeration for a price regulation; each demand sees
/// `D(p(θ))` and its own rent `ũ(θ, D)`.
pub fn brute_force_price_guarantee(
    reg: &PriceRegulation,
    env: &Environment,
    grid: &AdversaryGrid,
) -> Result<AdversaryOutcome, OracleError> {
    grid.validate(env)?;
    let g = reg.grid();
    let prices = reg.prices();
    let rents: Vec<Vec<f64>> = env
        .demands()
        .into_iter()
        .enumerate()
        .map(|(i, d)| reg.rents(d, i))
        .collect();
    let table = welfare_table(env, grid, |d, idx, t| {
        let i = g.cell_of(t);
        let (t0, t1) = (g.point(i), g.point(i + 1));
        let s = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        let p = prices[i] + s * (prices[i + 1] - prices[i]);
        let u = rents[idx][i + 1] + cell_integral(d, t, t1, p, prices[i + 1]);
        let q = d.demand(p);
        d.gross_value(q) - t * q - u
    });
    Ok(enumerate(&table, grid))
}

fn welfare_table(
    env: &Environment,
    grid: &AdversaryGrid,
    welfare: impl Fn(&PiecewiseLinearCurve, usize, f64) -> f64,
) -> Vec<Vec<f64>> {
    grid.demand_indices
        .iter()
        .map(|&idx| {
            let d = env.demand(idx).expect("validated");
            grid.cost_atoms
                .iter()
                .map(|&t| welfare(d, idx, t))
                .collect()
        })
        .collect()
}

/// Positive weight vectors with `k` entries on the simplex grid.
fn compositions(k: usize) -> Vec<Vec<f64>> {
    let units = (1.0 / MIXTURE_STEP).round() as usize;
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(left: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == k {
            if left >= 1 {
                cur.push(left);
                out.push(cur.iter().map(|&u| u as f64 * MIXTURE_STEP).collect());
                cur.pop();
            }
            return;
        }
        for u in 1..left {
            cur.push(u);
            rec(left - u, k, cur, out);
            cur.pop();
        }
    }
    if k >= 1 && k <= units {
        rec(units, k, &mut cur, &mut out);
    }
    out
}

fn enumerate(table: &[Vec<f64>], grid: &AdversaryGrid) -> AdversaryOutcome {
    let mut best = AdversaryOutcome {
        value: f64::INFINITY,
        demand_index: grid.demand_indices[0],
        support: Vec::new(),
    };
    let m = grid.cost_atoms.len();
    // Dirac distributions first, so exact ties keep the simplest witness.
    for k in 1..=grid.mixture_depth.min(m) {
        let weights = compositions(k);
        if weights.is_empty() {
            break;
        }
        for (row, &idx) in table.iter().zip(&grid.demand_indices) {
            let mut atoms: Vec<usize> = (0..k).collect();
            loop {
                for w in &weights {
                    let v: f64 = atoms.iter().zip(w).map(|(&a, &wi)| wi * row[a]).sum();
                    if v < best.value {
                        best = AdversaryOutcome {
                            value: v,
                            demand_index: idx,
                            support: atoms
                                .iter()
                                .zip(w)
                                .map(|(&a, &wi)| (grid.cost_atoms[a], wi))
                                .collect(),
                        };
                    }
                }
                if !next_combination(&mut atoms, m) {
                    break;
                }
            }
        }
    }
    best
}

fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `r(θ)`: a random weakly decreasing profile with values in `[0, 1]`.
fn random_profile(rng: &mut ChaCha8Rng, thetas: &[f64]) -> Vec<f64> {
    let (lo, hi) = (thetas[0], thetas[thetas.len() - 1]);
    let k = rng.gen_range(1..=5);
    let mut xs: Vec<f64> = (0..k).map(|_| rng.gen_range(lo..hi)).collect();
    xs.sort_by(f64::total_cmp);
    let mut ys: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
    ys.sort_by(|a, b| b.total_cmp(a));
    let stepwise = rng.gen_bool(0.3);
    thetas
        .iter()
        .map(|&t| {
            let j = xs.partition_point(|&x| x <= t);
            if j == 0 {
                ys[0]
            } else if j == k || stepwise {
                ys[j - 1]
            } else {
                let s = (t - xs[j - 1]) / (xs[j] - xs[j - 1]);
                ys[j - 1] + s * (ys[j] - ys[j - 1])
            }
        })
        .collect()
}

/// Upper envelope for random schedules: `max{q^BM, D̲}`, capped.
fn envelope(env: &Environment, thetas: &[f64]) -> Vec<f64> {
    let cap = env.quantity_cap();
    thetas
        .iter()
        .map(|&t| bm_quantity(env, t).max(env.lowest().demand(t)).min(cap))
        .collect()
}

/// Random weakly decreasing schedules `q_ℓ + r (E − q_ℓ)` pinned to
/// `q_ℓ` at `θ̄`, where `E = max{q^BM, D̲}` and `r` is a random decreasing
/// profile scaled by up to `stretch`. No robustness filtering.
pub fn random_schedules(
    env: &Environment,
    n: usize,
    seed: u64,
    stretch: f64,
) -> Vec<QuantitySchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = env.grid();
    let thetas = grid.points();
    let upper = envelope(env, &thetas);
    (0..n)
        .map(|_| draw(env, &mut rng, &thetas, &upper, stretch))
        .collect()
}

fn draw(
    env: &Environment,
    rng: &mut ChaCha8Rng,
    thetas: &[f64],
    upper: &[f64],
    stretch: f64,
) -> QuantitySchedule {
    let floor = env.efficient_floor();
    let cap = env.quantity_cap();
    let scale = rng.gen_range(0.0..=stretch.max(0.0));
    let r = random_profile(rng, thetas);
    let mut values: Vec<f64> = r
        .iter()
        .zip(upper)
        .map(|(&r, &e)| (floor + scale * r * (e - floor)).min(cap))
        .collect();
    let last = values.len() - 1;
    values[last] = floor;
    QuantitySchedule::new(env.grid(), values, cap)
        .expect("product of decreasing nonnegative factors")
}

/// `n` schedules on the short list, by rejection against the grid
/// robustness constraints. Deterministic in `seed`.
pub fn random_feasible_schedules(
    env: &Environment,
    n: usize,
    seed: u64,
) -> Result<Vec<QuantitySchedule>, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = env.grid();
    let thetas = grid.points();
    let upper = envelope(env, &thetas);
    let mut out = Vec::with_capacity(n);
    let mut draws = 0usize;
    while out.len() < n {
        if draws >= STARVATION_DRAWS && (out.len() as f64) < STARVATION_RATE * draws as f64 {
            return Err(OracleError::SamplerStarved {
                accepted: out.len(),
                draws,
            });
        }
        draws += 1;
        let s = draw(env, &mut rng, &thetas, &upper, 1.0);
        let mech = QuantityMechanism::with_zero_top_rent(s);
        if shortlist_check(&mech, env).passed() {
            out.push(mech.schedule);
        }
    }
    Ok(out)
}

/// A random regular environment: uniform or power cost on a random support,
/// a random piecewise-linear `D̲` and `D* ≥ D̲`. Always passes validation.
pub fn random_environment(seed: u64, grid_points: usize) -> Environment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(env) = try_environment(&mut rng, grid_points) {
            if validate_environment(&env).passed() {
                return env;
            }
        }
    }
}

fn try_environment(rng: &mut ChaCha8Rng, grid_points: usize) -> Option<Environment> {
    let low = rng.gen_range(0.5..1.5);
    let high = low + rng.gen_range(0.5..1.5);
    let family = if rng.gen_bool(0.5) {
        CostFamily::Uniform
    } else {
        CostFamily::Power {
            exponent: rng.gen_range(1.0..2.5),
        }
    };
    let cost = CostModel::new(low, high, family).ok()?;

    // D̲: decreasing knots with a choke price safely above θ̄.
    let segments = rng.gen_range(1..=3);
    let choke = high + rng.gen_range(0.3..2.0);
    let mut xs: Vec<f64> = (0..segments - 1)
        .map(|_| rng.gen_range(0.0..choke))
        .collect();
    xs.sort_by(f64::total_cmp);
    let top = rng.gen_range(0.8..3.0);
    let mut ys: Vec<f64> = (0..segments - 1)
        .map(|_| rng.gen_range(0.05..top))
        .collect();
    ys.sort_by(|a, b| b.total_cmp(a));
    let mut lowest = vec![(0.0, top)];
    lowest.extend(xs.iter().copied().zip(ys.iter().copied()));
    lowest.push((choke, 0.0));
    dedup_x(&mut lowest);

    // D*: decreasing non-negative bumps on the interior knots, a later choke.
    let mut bumps: Vec<f64> = (0..lowest.len() - 1)
        .map(|_| {
            if rng.gen_bool(0.15) {
                0.0
            } else {
                rng.gen_range(0.0..1.5)
            }
        })
        .collect();
    bumps.sort_by(|a, b| b.total_cmp(a));
    let extend = if rng.gen_bool(0.2) {
        0.0
    } else {
        rng.gen_range(0.0..1.5)
    };
    let mut conjectured: Vec<(f64, f64)> = lowest[..lowest.len() - 1]
        .iter()
        .zip(&bumps)
        .map(|(&(x, y), &b)| (x, y + b))
        .collect();
    conjectured.push((choke + extend, 0.0));

    let cap = 2.0 * conjectured[0].1 + 1.0;
    Environment::new(
        cost,
        PiecewiseLinearCurve::new(conjectured).ok()?,
        PiecewiseLinearCurve::new(lowest).ok()?,
        vec![],
        cap,
    )
    .ok()
    .map(|e| e.with_grid_points(grid_points))
}

fn dedup_x(knots: &mut Vec<(f64, f64)>) {
    knots.dedup_by(|b, a| b.0 - a.0 < 1e-3);
}

/// Monotonicity of `W̲(·, q)` on the maximal intervals where `q − D̲`
/// keeps a sign: weakly decreasing where `q ≤ D̲`, weakly increasing where
/// `q ≥ D̲`. Intervals are split at the kinks of `D̲` so that `q − D̲` is
/// linear between consecutive evaluation points.
pub fn monotonicity_probe(schedule: &QuantitySchedule, env: &Environment) -> VerificationReport {
    const TOL: f64 = 1e-9;
    let low = env.lowest();
    let grid = schedule.grid();
    let tails = schedule.tail_integrals();
    let mut pts = Vec::with_capacity(grid.len());
    for i in 0..grid.len() - 1 {
        let (t0, t1) = (grid.point(i), grid.point(i + 1));
        pts.push(t0);
        let mut kinks: Vec<f64> = low
            .price_breaks_between(t0, t1)
            .filter(|&k| k > t0 && k < t1)
            .collect();
        kinks.sort_by(f64::total_cmp);
        pts.extend(kinks);
    }
    pts.push(grid.high());

    let gap: Vec<f64> = pts
        .iter()
        .map(|&t| schedule.value_at(t) - low.demand(t))
        .collect();
    let w: Vec<f64> = pts
        .iter()
        .map(|&t| {
            let q = schedule.value_at(t);
            low.gross_value(q) - t * q - schedule.integral_from(t, &tails)
        })
        .collect();

    let mut below = Vec::new();
    let mut above = Vec::new();
    let mut intervals: Vec<(f64, f64, bool)> = Vec::new();
    for k in 0..pts.len() - 1 {
        let (a, b) = (gap[k], gap[k + 1]);
        let dw = w[k + 1] - w[k];
        let is_below = a <= TOL && b <= TOL;
        let is_above = a >= -TOL && b >= -TOL;
        if is_below {
            below.push((pts[k], -dw));
        }
        if is_above {
            above.push((pts[k], dw));
        }
        if is_below || is_above {
            let sign = !is_below;
            match intervals.last_mut() {
                Some(last) if last.2 == sign && last.1 == pts[k] => last.1 = pts[k + 1],
                _ => intervals.push((pts[k], pts[k + 1], sign)),
            }
        }
    }
    let describe = |up: bool| {
        intervals
            .iter()
            .filter(|iv| iv.2 == up)
            .map(|iv| format!("[{:.6}, {:.6}]", iv.0, iv.1))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut dec = CheckResult::from_slacks("decreasing_where_below", below, TOL);
    let mut inc = CheckResult::from_slacks("increasing_where_above", above, TOL);
    for c in [&mut dec, &mut inc] {
        c.binding.clear();
    }
    let dec = dec.with_note(describe(false));
    let inc = inc.with_note(describe(true));
    VerificationReport::new("monotonicity_probe", vec![dec, inc])
}

/// Relative-error floor: below this magnitude the two derivatives are
/// compared in absolute terms.
pub const GRADIENT_FLOOR: f64 = 1e-7;
pub const GRADIENT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub analytic: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
    pub report: VerificationReport,
}

/// Directional derivative of conjectured welfare along `direction`: the
/// exact hat-function gradient against a central difference with step `h`.
/// The top rent is held fixed, so only the virtual surplus moves.
pub fn finite_difference_welfare_check(
    mech: &QuantityMechanism,
    env: &Environment,
    direction: &[f64],
    h: f64,
) -> GradientCheck {
    let quad = WelfareQuadrature::new(env.cost(), mech.grid());
    let d = env.conjectured();
    let q = mech.quantities();
    let mut grad = vec![0.0; q.len()];
    quad.virtual_surplus_gradient(d, q, &mut grad);
    let analytic: f64 = grad.iter().zip(direction).map(|(g, v)| g * v).sum();
    let shifted = |sign: f64| -> Vec<f64> {
        q.iter()
            .zip(direction)
            .map(|(x, v)| x + sign * h * v)
            .collect()
    };
    let plus = quad.virtual_surplus(d, &shifted(1.0));
    let minus = quad.virtual_surplus(d, &shifted(-1.0));
    let finite_difference = (plus - minus) / (2.0 * h);
    let scale = analytic
        .abs()
        .max(finite_difference.abs())
        .max(GRADIENT_FLOOR);
    let relative_error = (analytic - finite_difference).abs() / scale;
    let check = CheckResult::scalar("relative_error", GRADIENT_TOL - relative_error, 0.0)
        .with_note(format!(
            "analytic {analytic:e}, central difference {finite_difference:e}"
        ));
    GradientCheck {
        analytic,
        finite_difference,
        relative_error,
        report: VerificationReport::new("finite_difference_welfare_check", vec![check]),
    }
}

/// At the largest minimiser `θ^m` of the floor mechanism's profile, with
/// `θ^m < θ̄`, the floor schedule is at or above `D̲`; with also
/// `θ^m > θ̲` it meets `D̲`. On a grid both hold up to the change of
/// `q* − D̲` across the neighbouring cells.
pub fn theta_m_crossing_check(env: &Environment) -> VerificationReport {
    let Ok(mech) = bm_with_floor(env) else {
        return VerificationReport::skipped("theta_m_crossing_check", "irregular virtual cost");
    };
    let tm = theta_m(env);
    if tm >= env.theta_high() {
        return VerificationReport::skipped("theta_m_crossing_check", "theta_m equals theta_high");
    }
    let grid = mech.grid();
    let thetas = grid.points();
    let gap: Vec<f64> = thetas
        .iter()
        .zip(mech.quantities())
        .map(|(&t, &q)| q - env.lowest().demand(t))
        .collect();
    let i = thetas.iter().position(|&t| t == tm).unwrap_or(0);
    let mut slop = 1e-9;
    if i > 0 {
        slop += (gap[i] - gap[i - 1]).abs();
    }
    if i + 1 < gap.len() {
        slop = slop.max(1e-9 + (gap[i + 1] - gap[i]).abs());
    }
    let mut checks = vec![CheckResult::scalar("at_or_above_lowest", gap[i], slop)];
    if tm > env.theta_low() {
        checks.push(CheckResult::scalar("meets_lowest", -gap[i].abs(), slop));
    }
    for c in &mut checks {
        c.worst_at = Some(tm);
    }
    VerificationReport::new("theta_m_crossing_check", checks)
}

/// Guarantee of every schedule in `schedules`, relative to `G*`; handy for
/// spotting schedules that the rejection sampler should have dropped.
pub fn guarantee_gaps(schedules: &[QuantitySchedule], env: &Environment) -> Vec<f64> {
    let g_star = max_guarantee(env);
    schedules
        .iter()
        .map(|s| {
            let m = QuantityMechanism::with_zero_top_rent(s.clone());
            let w = m.ex_post_welfare(env.demand(LOWEST).expect("always stored"));
            w.into_iter().fold(f64::INFINITY, f64::min) - g_star
        })
        .collect()
}
