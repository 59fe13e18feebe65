//! Price regulation: the price-cap regulation, its short-list conditions,
//! and the ranking of price against quantity regulation under the
//! conjectured model.

use serde::{Deserialize, Serialize};

use crate::error::MechanismError;
use crate::guarantee::{cumulative_dominance, max_guarantee, CLOSED_FORM_TOL};
use crate::mechanism::{
    conjectured_price_welfare, PriceRegulation, QuantitySchedule, WelfareQuadrature,
};
use crate::model::environment::{Environment, CONJECTURED, LOWEST};
use crate::report::{CheckResult, VerificationReport};
use crate::solver::{bm_quantity, RoptSolution};

/// Welfare differences within this band count as a tie.
pub const RANKING_TOL: f64 = 1e-7;

/// `p(θ) = min{z*(θ), θ̄}` with every top rent at zero.
pub fn bm_with_price_cap(env: &Environment) -> PriceRegulation {
    let grid = env.grid();
    let high = env.theta_high();
    let prices = grid
        .points()
        .into_iter()
        .map(|t| env.cost().virtual_cost_or_inf(t).min(high))
        .collect();
    let rents = (0..env.demand_count()).map(|i| (i, 0.0)).collect();
    PriceRegulation::new(grid, prices, rents)
        .expect("virtual costs are increasing on a regular environment")
}

/// Short-list conditions for a price regulation: increasing prices, rents
/// from the envelope formula with no rent at `(θ̄, D̲)`, a cap at `θ̄`, and
/// ex-post welfare of at least `G*` for every stored demand.
pub fn price_shortlist_check(reg: &PriceRegulation, env: &Environment) -> VerificationReport {
    let tol = CLOSED_FORM_TOL;
    let thetas = reg.grid().points();
    let prices = reg.prices();
    let high = env.theta_high();
    let g_star = max_guarantee(env);

    let increments = thetas
        .windows(2)
        .zip(prices.windows(2))
        .map(|(t, p)| (t[0], p[1] - p[0]))
        .collect();
    let mut monotone = CheckResult::from_slacks("prices_increasing", increments, 0.0);
    monotone.binding.clear();
    monotone.slacks.clear();

    let mut rents = vec![(LOWEST as f64, -reg.top_rent(LOWEST).abs())];
    for i in 1..env.demand_count() {
        rents.push((i as f64, reg.top_rent(i)));
    }
    let mut top_rents = CheckResult::from_slacks("top_rents", rents, 0.0);
    top_rents.binding.clear();
    top_rents.passed = reg.top_rent(LOWEST) == 0.0 && top_rents.worst_slack >= 0.0;

    let mut cap = CheckResult::scalar("cap_at_top", -(prices[prices.len() - 1] - high).abs(), tol);
    cap.worst_at = Some(high);

    let mut welfare = Vec::new();
    let mut ir = Vec::new();
    for (i, d) in env.demands().into_iter().enumerate() {
        let w = reg.ex_post_welfare(d, i);
        let u = reg.rents(d, i);
        for k in 0..thetas.len() {
            welfare.push((thetas[k], w[k] - g_star));
            ir.push((thetas[k], u[k]));
        }
    }
    let mut guarantee = CheckResult::from_slacks("ex_post_guarantee", welfare, tol);
    guarantee.binding.sort_by(f64::total_cmp);
    guarantee.binding.dedup();
    let mut epir = CheckResult::from_slacks("ex_post_ir", ir, tol);
    epir.binding.clear();
    epir.slacks.clear();

    VerificationReport::new(
        "price_shortlist_check",
        vec![
            monotone,
            top_rents,
            cap,
            guarantee,
            epir,
            epic_check(reg, env),
        ],
    )
}

/// Truthful reporting is optimal for every stored demand:
/// `ũ(θᵢ, D) ≥ ũ(θⱼ, D) + (θⱼ − θᵢ) D(p(θⱼ))` on the grid.
pub fn epic_check(reg: &PriceRegulation, env: &Environment) -> CheckResult {
    let thetas = reg.grid().points();
    let mut worst = f64::INFINITY;
    let mut worst_at = None;
    for (idx, d) in env.demands().into_iter().enumerate() {
        let u = reg.rents(d, idx);
        let q = reg.quantities(d);
        for j in 0..thetas.len() {
            for i in 0..thetas.len() {
                let s = u[i] - u[j] - (thetas[j] - thetas[i]) * q[j];
                if s < worst {
                    worst = s;
                    worst_at = Some(thetas[i]);
                }
            }
        }
    }
    let mut c = CheckResult::scalar("ex_post_ic", worst, CLOSED_FORM_TOL);
    c.worst_at = worst_at;
    c
}

/// Feasible range of `ũ(θ̄, D)`:
/// `[0, V_D(D(θ̄)) − θ̄ D(θ̄) − G*]`, collapsing to `{0}` for `D̲` and `D*`.
pub fn rent_band(env: &Environment, demand_index: usize) -> Result<(f64, f64), MechanismError> {
    let d = env.demand(demand_index)?;
    if demand_index == LOWEST || demand_index == CONJECTURED {
        return Ok((0.0, 0.0));
    }
    let high = env.theta_high();
    let q = d.demand(high);
    let upper = d.gross_value(q) - high * q - max_guarantee(env);
    Ok((0.0, upper.max(0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Quantity,
    Price,
    Equivalent,
}

impl std::fmt::Display for Winner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Quantity => "quantity",
            Self::Price => "price",
            Self::Equivalent => "equivalent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trigger {
    QuantityWins,
    PriceWins,
    Neither,
}

/// Primitive sufficient conditions for a strict ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingConditions {
    pub trigger: Trigger,
    /// `D*(θ̲) = D̲(θ̲)`.
    pub vanishing_at_bottom: bool,
    /// `D*(θ̄) = D̲(θ̄)`.
    pub vanishing_at_top: bool,
    /// `∫_θ^θ̄ max{D*(z*), D̲(θ̄)} ≤ ∫_θ^θ̄ D̲` for every `θ`.
    pub dominance_everywhere: bool,
    /// The dominance inequality fails for some `θ`.
    pub dominance_violated_somewhere: bool,
    /// `∫ max{D*(z*), D̲(θ̄)} > ∫ D̲ − DWL(θ̲, D*(θ̲))` over the whole support.
    pub bottom_dwl_violated: bool,
    pub report: VerificationReport,
}

/// Evaluates the primitive conditions on `D*`, `D̲` and `F*` that decide the
/// ranking without solving the robust program.
pub fn ranking_conditions(env: &Environment) -> RankingConditions {
    let tol = CLOSED_FORM_TOL;
    let low = env.theta_low();
    let high = env.theta_high();
    let floor = env.efficient_floor();
    let star = env.conjectured();
    let lowest = env.lowest();

    let grid = env.grid();
    let values = grid
        .points()
        .into_iter()
        .map(|t| star.demand(env.cost().virtual_cost_or_inf(t)).max(floor))
        .collect();
    let schedule = QuantitySchedule::new(grid, values, f64::INFINITY);
    let (dominance, bottom) = match &schedule {
        Ok(s) => {
            let dom = cumulative_dominance(s, env, tol);
            let total = s.tail_integrals()[0];
            let q0 = star.demand(low);
            let rhs = lowest.integral(low, high) - env.deadweight_loss(low, q0);
            (dom, total - rhs)
        }
        Err(_) => (
            CheckResult::flag("cumulative_dominance", false).with_note("irregular virtual cost"),
            f64::NAN,
        ),
    };
    let gap_bottom = star.demand(low) - lowest.demand(low);
    let gap_top = star.demand(high) - lowest.demand(high);
    let vanishing_at_bottom = gap_bottom.abs() <= 1e-12;
    let vanishing_at_top = gap_top.abs() <= 1e-12;
    let dominance_everywhere = dominance.passed;
    let dominance_violated_somewhere = dominance.worst_slack < -tol;
    let bottom_dwl_violated = bottom > tol;

    let quantity_wins = vanishing_at_bottom && dominance_everywhere && gap_top > 1e-12;
    let price_wins = vanishing_at_top && (dominance_violated_somewhere || bottom_dwl_violated);
    let trigger = if quantity_wins {
        Trigger::QuantityWins
    } else if price_wins {
        Trigger::PriceWins
    } else {
        Trigger::Neither
    };

    let mut dom_check = dominance;
    dom_check.name = "floor_dominance".into();
    let mut bottom_check = CheckResult::scalar("bottom_dwl", -bottom, tol);
    bottom_check.worst_at = Some(low);
    let checks = vec![
        CheckResult::flag("vanishing_at_bottom", vanishing_at_bottom)
            .with_note(format!("D*(θ̲) − D̲(θ̲) = {gap_bottom:e}")),
        CheckResult::flag("vanishing_at_top", vanishing_at_top)
            .with_note(format!("D*(θ̄) − D̲(θ̄) = {gap_top:e}")),
        dom_check,
        bottom_check,
    ];
    let mut report = VerificationReport::new("ranking_conditions", checks);
    report.warnings.push(format!(
        "triggered: {}",
        match trigger {
            Trigger::QuantityWins => "quantity-wins",
            Trigger::PriceWins => "price-wins",
            Trigger::Neither => "neither",
        }
    ));
    RankingConditions {
        trigger,
        vanishing_at_bottom,
        vanishing_at_top,
        dominance_everywhere,
        dominance_violated_somewhere,
        bottom_dwl_violated,
        report,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    /// Conjectured welfare of the robustly optimal quantity mechanism.
    pub quantity_welfare: f64,
    /// Conjectured welfare of the price-cap regulation.
    pub price_welfare: f64,
    /// `quantity_welfare − price_welfare`.
    pub margin: f64,
    pub winner: Winner,
    /// `G*`, shared by both regulation forms.
    pub guarantee_both: f64,
    pub floor_optimal: bool,
    pub top_demand_equal: bool,
    /// Neither the floor mechanism is optimal nor `D*(θ̄) = D̲(θ̄)`, so the
    /// ranking is only numerical.
    pub outside_coverage: bool,
    pub ranking_trigger: Trigger,
    /// Welfare of the price-cap regulation under each extra demand
    /// (informational only).
    pub extra_demand_price_welfare: Vec<f64>,
}

/// Ranks price against quantity regulation under `(D*, F*)`.
pub fn compare_regulation(env: &Environment, ropt: &RoptSolution) -> ComparisonReport {
    let reg = bm_with_price_cap(env);
    let quantity_welfare = ropt.objective;
    let price_welfare = conjectured_price_welfare(&reg, env);
    let margin = quantity_welfare - price_welfare;
    let winner = if margin.abs() <= RANKING_TOL {
        Winner::Equivalent
    } else if margin > 0.0 {
        Winner::Quantity
    } else {
        Winner::Price
    };
    let high = env.theta_high();
    let top_demand_equal =
        (env.conjectured().demand(high) - env.lowest().demand(high)).abs() <= 1e-12;
    let quad = WelfareQuadrature::new(env.cost(), reg.grid());
    let prices = reg.prices();
    let extra = env
        .extras()
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let i = k + 2;
            let mut total = 0.0;
            for c in 0..prices.len() - 1 {
                let (p0, p1) = (prices[c], prices[c + 1]);
                let mut cuts: Vec<f64> = if p0 == p1 {
                    Vec::new()
                } else {
                    d.price_breaks_between(p0, p1)
                        .map(|k| (k - p0) / (p1 - p0))
                        .collect()
                };
                cuts.sort_by(f64::total_cmp);
                total += quad.integrate_cell(c, &cuts, |n| {
                    let q = d.demand(p0 + n.s * (p1 - p0));
                    d.gross_value(q) * n.mass - q * n.vmass
                });
            }
            total - reg.top_rent(i)
        })
        .collect();
    ComparisonReport {
        quantity_welfare,
        price_welfare,
        margin,
        winner,
        guarantee_both: max_guarantee(env),
        floor_optimal: ropt.floor_optimal,
        top_demand_equal,
        outside_coverage: !ropt.floor_optimal && !top_demand_equal,
        ranking_trigger: ranking_conditions(env).trigger,
        extra_demand_price_welfare: extra,
    }
}

/// Price-cap quantities `D(min{z*, θ̄})` under a given demand, handy for
/// plotting alongside quantity schedules.
pub fn cap_quantity(
    env: &Environment,
    demand_index: usize,
    theta: f64,
) -> Result<f64, MechanismError> {
    let d = env.demand(demand_index)?;
    let p = env.cost().virtual_cost_or_inf(theta).min(env.theta_high());
    Ok(d.demand(p))
}

/// `q^BM` evaluated on the grid, re-exported for figure output.
pub fn bm_curve(env: &Environment) -> Vec<(f64, f64)> {
    env.grid()
        .points()
        .into_iter()
        .map(|t| (t, bm_quantity(env, t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures, PiecewiseLinearCurve};
    use approx::assert_abs_diff_eq;
    use std::collections::BTreeMap;

    #[test]
    fn cap_prices() {
        let env = fixtures::s1();
        let reg = bm_with_price_cap(&env);
        assert_abs_diff_eq!(reg.prices()[200], 1.4, epsilon = 1e-12);
        assert_eq!(reg.prices()[800], 2.0);
        assert_eq!(reg.prices()[1000], 2.0);
    }

    #[test]
    fn shortlist_examples() {
        for env in [fixtures::s1(), fixtures::s2(), fixtures::s3()] {
            let r = price_shortlist_check(&bm_with_price_cap(&env), &env);
            assert!(r.passed(), "{}", r.render());
        }
        let env = fixtures::s1();
        let grid = env.grid();
        let flat = PriceRegulation::new(grid, vec![2.0; grid.len()], BTreeMap::new()).unwrap();
        assert!(price_shortlist_check(&flat, &env).passed());
        let mut low_cap: Vec<f64> = bm_with_price_cap(&env).prices().to_vec();
        for p in &mut low_cap {
            *p = p.min(1.9);
        }
        let bad = PriceRegulation::new(grid, low_cap, BTreeMap::new()).unwrap();
        let r = price_shortlist_check(&bad, &env);
        assert!(!r.check("cap_at_top").unwrap().passed);
    }

    #[test]
    fn rent_bands() {
        let env = fixtures::s1()
            .with_extra_demands(vec![PiecewiseLinearCurve::linear(3.2, 1.0).unwrap()]);
        assert_eq!(rent_band(&env, 0).unwrap(), (0.0, 0.0));
        assert_eq!(rent_band(&env, 1).unwrap(), (0.0, 0.0));
        let (lo, hi) = rent_band(&env, 2).unwrap();
        assert_eq!(lo, 0.0);
        assert_abs_diff_eq!(hi, 0.22, epsilon = 1e-12);
        assert!(rent_band(&env, 3).is_err());
    }

    #[test]
    fn ranking_triggers() {
        assert_eq!(
            ranking_conditions(&fixtures::s1()).trigger,
            Trigger::Neither
        );
        assert_eq!(
            ranking_conditions(&fixtures::s2()).trigger,
            Trigger::QuantityWins
        );
        let s3 = ranking_conditions(&fixtures::s3());
        assert_eq!(s3.trigger, Trigger::PriceWins);
        assert!(s3.bottom_dwl_violated);
    }
}
