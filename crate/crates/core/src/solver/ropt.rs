//! The robust program: maximise conjectured welfare over weakly decreasing
//! schedules with `q(θ̄) = q_ℓ` subject to `W̲(θⱼ, q) ≥ G*` at every grid
//! point.
//!
//! Augmented-Lagrangian outer loop on the robustness constraints; each
//! subproblem is maximised by accelerated projected gradient (FISTA with
//! backtracking and adaptive restart) in a diagonal metric, projecting onto
//! the monotone cone above the floor by pool-adjacent-violators.

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::guarantee::{max_guarantee, worst_case_profile};
use crate::isotonic::project_decreasing_box;
use crate::mechanism::{QuantityMechanism, QuantitySchedule, WelfareQuadrature};
use crate::model::environment::Environment;
use crate::solver::{bm_with_floor, check_floor_optimal, theta_m, theta_star};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Largest tolerated robustness-constraint violation.
    pub tol_constraint: f64,
    /// Relative change of the objective between outer iterations.
    pub tol_objective: f64,
    /// Budget of inner (gradient) iterations.
    pub max_iters: usize,
    /// Run the iterative solver even when the floor mechanism is optimal.
    pub force_iterative: bool,
    /// Starting schedule on the environment's grid; the floor schedule when
    /// absent.
    #[serde(skip)]
    pub initial: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_constraint: 1e-8,
            tol_objective: 1e-10,
            max_iters: 100_000,
            force_iterative: false,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Inner gradient iterations.
    pub iterations: usize,
    pub outer_iterations: usize,
    /// Largest violation of `W̲(θⱼ) ≥ G*` on the grid.
    pub violation: f64,
    /// Complementarity `Σ λⱼ |gⱼ|`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoptSolution {
    pub mechanism: QuantityMechanism,
    pub objective: f64,
    pub theta_star: f64,
    pub theta_m: f64,
    pub floor_optimal: bool,
    pub stats: SolverStats,
    /// Grid costs whose robustness constraint carries a positive multiplier
    /// (or has zero slack, for the floor mechanism).
    pub binding: Vec<f64>,
}

pub fn solve_ropt(env: &Environment, options: &SolverOptions) -> Result<RoptSolution, SolverError> {
    let floor_mech = bm_with_floor(env)?;
    let floor_report = check_floor_optimal(env);
    let floor_optimal = floor_report.passed();
    let t_star = theta_star(env);
    let t_m = theta_m(env);

    if floor_optimal && !options.force_iterative {
        let profile = worst_case_profile(&floor_mech, env);
        let g_star = max_guarantee(env);
        let binding = profile
            .thetas
            .iter()
            .zip(&profile.values)
            .filter(|(_, &v)| (v - g_star).abs() <= 1e-9)
            .map(|(&t, _)| t)
            .collect();
        let violation = (g_star - profile.minimum).max(0.0);
        return Ok(RoptSolution {
            objective: floor_mech.conjectured_welfare(env),
            mechanism: floor_mech,
            theta_star: t_star,
            theta_m: t_m,
            floor_optimal,
            stats: SolverStats {
                iterations: 0,
                outer_iterations: 0,
                violation,
                gap: 0.0,
            },
            binding,
        });
    }

    let start = match &options.initial {
        Some(v) => v.clone(),
        None => floor_mech.quantities().to_vec(),
    };
    let program = Program::new(env);
    let outcome = program.solve(start, options)?;
    let schedule = QuantitySchedule::for_env(env, outcome.x)?;
    let mechanism = QuantityMechanism::with_zero_top_rent(schedule);
    Ok(RoptSolution {
        objective: mechanism.conjectured_welfare(env),
        mechanism,
        theta_star: t_star,
        theta_m: t_m,
        floor_optimal,
        stats: outcome.stats,
        binding: outcome.binding,
    })
}

struct Outcome {
    x: Vec<f64>,
    stats: SolverStats,
    binding: Vec<f64>,
}

struct Program<'a> {
    env: &'a Environment,
    quad: WelfareQuadrature,
    thetas: Vec<f64>,
    /// Cell widths.
    widths: Vec<f64>,
    masses: Vec<f64>,
    floor: f64,
    cap: f64,
    g_star: f64,
    /// Typical `|P*'|`, used where the conjectured inverse demand is flat.
    slope_scale: f64,
}

/// Constraint values, `μ` and the penalised objective at one point.
struct Eval {
    phi: f64,
    grad: Vec<f64>,
}

impl<'a> Program<'a> {
    fn new(env: &'a Environment) -> Self {
        let grid = env.grid();
        let thetas = grid.points();
        let widths = thetas.windows(2).map(|w| w[1] - w[0]).collect();
        let quad = WelfareQuadrature::new(env.cost(), grid);
        let masses = quad.hat_masses();
        let d = env.conjectured();
        let slope_scale = (d.choke_price() / d.saturation()).max(1e-12);
        Self {
            env,
            quad,
            thetas,
            widths,
            masses,
            floor: env.efficient_floor(),
            cap: env.quantity_cap(),
            g_star: max_guarantee(env),
            slope_scale,
        }
    }

    fn n(&self) -> usize {
        self.thetas.len()
    }

    /// `gⱼ = V̲(xⱼ) − θⱼ xⱼ − ∫_{θⱼ}^{θ̄} x − G*` for `j < n − 1`.
    fn constraints(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let low = self.env.lowest();
        let mut tail = 0.0;
        let mut g = vec![0.0; n - 1];
        for j in (0..n - 1).rev() {
            tail += 0.5 * self.widths[j] * (x[j] + x[j + 1]);
            g[j] = low.gross_value(x[j]) - self.thetas[j] * x[j] - tail - self.g_star;
        }
        g
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.quad.virtual_surplus(self.env.conjectured(), x)
    }

    /// Augmented Lagrangian value and gradient (free coordinates only; the
    /// last entry of the gradient is zero).
    fn eval(&self, x: &[f64], lambda: &[f64], rho: f64, with_grad: bool) -> Eval {
        let n = self.n();
        let mut grad = vec![0.0; n];
        let j = if with_grad {
            self.quad
                .virtual_surplus_gradient(self.env.conjectured(), x, &mut grad)
        } else {
            self.objective(x)
        };
        let g = self.constraints(x);
        let mut penalty = 0.0;
        let mut prefix = 0.0;
        let low = self.env.lowest();
        for k in 0..n - 1 {
            let mu = (lambda[k] - rho * g[k]).max(0.0);
            penalty += mu * mu - lambda[k] * lambda[k];
            if with_grad {
                let left = if k > 0 { self.widths[k - 1] } else { 0.0 };
                let own = low.inverse_demand(x[k]) - self.thetas[k] - 0.5 * self.widths[k];
                grad[k] += mu * own - 0.5 * (left + self.widths[k]) * prefix;
            }
            prefix += mu;
        }
        grad[n - 1] = 0.0;
        Eval {
            phi: j - penalty / (2.0 * rho),
            grad,
        }
    }

    fn metric(&self, x: &[f64], lambda: &[f64], rho: f64) -> Vec<f64> {
        let n = self.n();
        let g = self.constraints(x);
        let low = self.env.lowest();
        let d = self.env.conjectured();
        let mut m = vec![0.0; n];
        let mut active = 0.0;
        for k in 0..n - 1 {
            let slope = d.inverse_demand_slope(x[k]).abs().max(self.slope_scale);
            let mut v = self.masses[k] * slope;
            let mu = (lambda[k] - rho * g[k]).max(0.0);
            let left = if k > 0 { self.widths[k - 1] } else { 0.0 };
            let tail = 0.5 * (left + self.widths[k]);
            v += rho * active * tail * tail;
            if mu > 0.0 {
                let own = low.inverse_demand(x[k]) - self.thetas[k] - 0.5 * self.widths[k];
                v += mu * low.inverse_demand_slope(x[k]).abs() + rho * own * own;
                active += 1.0;
            }
            m[k] = v;
        }
        let mean = m[..n - 1].iter().sum::<f64>() / (n - 1) as f64;
        for v in &mut m[..n - 1] {
            *v = v.max(1e-3 * mean);
        }
        m[n - 1] = 1.0;
        m
    }

    fn project(&self, x: &mut [f64], weights: &[f64]) {
        let n = self.n();
        project_decreasing_box(&mut x[..n - 1], &weights[..n - 1], self.floor, self.cap);
        x[n - 1] = self.floor;
    }

    /// FISTA on the augmented Lagrangian; returns the number of iterations.
    fn inner(
        &self,
        x: &mut Vec<f64>,
        lambda: &[f64],
        rho: f64,
        tol: f64,
        budget: usize,
        step_scale: &mut f64,
    ) -> (usize, bool) {
        let n = self.n();
        let metric = self.metric(x, lambda, rho);
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut phi_x = self.eval(x, lambda, rho, false).phi;
        let mut l = (*step_scale * 0.5).max(1e-6);
        let mut iters = 0;
        let mut calm = 0;
        while iters < budget {
            iters += 1;
            let ey = self.eval(&y, lambda, rho, true);
            let (x_new, phi_new) = loop {
                let mut cand: Vec<f64> = (0..n)
                    .map(|k| y[k] + ey.grad[k] / (l * metric[k]))
                    .collect();
                self.project(&mut cand, &metric);
                let phi = self.eval(&cand, lambda, rho, false).phi;
                let mut lin = 0.0;
                let mut quad = 0.0;
                for k in 0..n {
                    let d = cand[k] - y[k];
                    lin += ey.grad[k] * d;
                    quad += metric[k] * d * d;
                }
                let slack = 1e-15 * (1.0 + ey.phi.abs());
                if phi >= ey.phi + lin - 0.5 * l * quad - slack || l > 1e12 {
                    break (cand, phi);
                }
                l *= 2.0;
            };
            // Length of the gradient-mapping step from y.
            let step = x_new
                .iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if step < tol {
                calm += 1;
                if calm >= 3 {
                    if phi_new >= phi_x {
                        *x = x_new;
                    }
                    *step_scale = l;
                    return (iters, true);
                }
            } else {
                calm = 0;
            }
            let noise = 1e-13 * (1.0 + phi_x.abs());
            if phi_new < phi_x - noise {
                // Function restart: drop momentum and retry from x.
                t = 1.0;
                y.clone_from(x);
                continue;
            }
            // Gradient restart when the mapping opposes the last move.
            let opposed: f64 = (0..n)
                .map(|k| metric[k] * (x_new[k] - y[k]) * (x_new[k] - x[k]))
                .sum();
            if opposed < 0.0 {
                t = 1.0;
                y.clone_from(&x_new);
            } else {
                let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_new;
                for k in 0..n {
                    y[k] = x_new[k] + beta * (x_new[k] - x[k]);
                }
                t = t_new;
            }
            *x = x_new;
            phi_x = phi_new;
            l *= 0.98;
        }
        *step_scale = l;
        (iters, false)
    }

    fn solve(&self, start: Vec<f64>, opts: &SolverOptions) -> Result<Outcome, SolverError> {
        let n = self.n();
        if start.len() != n {
            return Err(crate::error::MechanismError::LengthMismatch {
                values: start.len(),
                grid: n,
            }
            .into());
        }
        let mut x = start;
        let ones = vec![1.0; n];
        self.project(&mut x, &ones);

        let mut lambda = vec![0.0; n - 1];
        let mut rho = 10.0;
        let mut iterations = 0;
        let mut prev_violation = f64::INFINITY;
        let mut prev_objective = f64::NAN;
        let mut inner_tol = 1e-6;
        let final_inner_tol = 1e-10;
        let mut step_scale = 1.0;
        let mut violation;
        let mut outer = 0;
        loop {
            outer += 1;
            let budget = opts.max_iters.saturating_sub(iterations);
            if budget == 0 {
                let g = self.constraints(&x);
                violation = g.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
                return Err(SolverError::NotConverged {
                    iterations,
                    violation,
                });
            }
            let (used, inner_ok) =
                self.inner(&mut x, &lambda, rho, inner_tol, budget, &mut step_scale);
            iterations += used;
            let g = self.constraints(&x);
            violation = g.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
            for (l, gj) in lambda.iter_mut().zip(&g) {
                *l = (*l - rho * gj).max(0.0);
            }
            let objective = self.objective(&x);
            let change = (objective - prev_objective).abs() / objective.abs().max(1.0);
            let done = inner_ok
                && inner_tol <= final_inner_tol
                && violation < opts.tol_constraint
                && change <= opts.tol_objective;
            if done {
                let gap = lambda.iter().zip(&g).map(|(l, gj)| l * gj.abs()).sum();
                let binding = lambda
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l > 1e-9)
                    .map(|(j, _)| self.thetas[j])
                    .collect();
                return Ok(Outcome {
                    x,
                    stats: SolverStats {
                        iterations,
                        outer_iterations: outer,
                        violation,
                        gap,
                    },
                    binding,
                });
            }
            if violation > 0.25 * prev_violation && violation >= opts.tol_constraint {
                rho = (rho * 10.0).min(1e9);
            }
            prev_violation = violation;
            prev_objective = objective;
            inner_tol = (inner_tol * 0.1).max(final_inner_tol);
        }
    }
}
