use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use robmech::guarantee::{guarantee, quantity_bound_check, shortlist_check, worst_case_profile};
use robmech::mechanism::{PriceRegulation, QuantityMechanism};
use robmech::model::{fixtures, CostFamily, CostModel, PiecewiseLinearCurve};
use robmech::oracle::{
    brute_force_guarantee, random_environment, random_feasible_schedules, random_schedules,
    AdversaryGrid,
};
use robmech::regulation::{
    bm_with_price_cap, compare_regulation, ranking_conditions, Trigger, Winner,
};
use robmech::solver::{solve_ropt, SolverOptions};

fn curve() -> impl Strategy<Value = PiecewiseLinearCurve> {
    (1usize..5, 0.5f64..5.0, 0.5f64..6.0).prop_flat_map(|(k, top, choke)| {
        (
            prop::collection::vec(0.0f64..1.0, k),
            prop::collection::vec(0.0f64..1.0, k),
        )
            .prop_map(move |(mut xs, mut ys)| {
                xs.sort_by(f64::total_cmp);
                ys.sort_by(|a, b| b.total_cmp(a));
                let mut knots = vec![(0.0, top)];
                for (x, y) in xs.iter().zip(&ys) {
                    let x = x * choke;
                    if x > knots.last().unwrap().0 + 1e-3 && x < choke - 1e-3 {
                        knots.push((x, y * top));
                    }
                }
                knots.push((choke, 0.0));
                PiecewiseLinearCurve::new(knots).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn gross_value_is_increasing_and_concave(c in curve()) {
        let sat = c.saturation();
        let qs: Vec<f64> = (0..=60).map(|i| sat * 1.2 * i as f64 / 60.0).collect();
        let v: Vec<f64> = qs.iter().map(|&q| c.gross_value(q)).collect();
        for w in v.windows(3) {
            prop_assert!(w[1] >= w[0] - 1e-12);
            prop_assert!(w[2] - w[1] <= w[1] - w[0] + 1e-12);
        }
    }

    #[test]
    fn inverse_demand_undoes_demand(c in curve(), t in 0.0f64..1.0) {
        let p = t * c.choke_price();
        let q = c.demand(p);
        // Only where the curve strictly decreases.
        let slope = c.demand(p + 1e-7) < q && c.demand((p - 1e-7).max(0.0)) > q;
        if slope {
            prop_assert!((c.inverse_demand(q) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_integral_matches_fine_trapezoid(c in curve(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let n = 20_000;
        let h = (b - a) / n as f64;
        let trap: f64 = (0..n).map(|i| 0.5 * h * (c.demand(a + i as f64 * h) + c.demand(a + (i + 1) as f64 * h))).sum();
        prop_assert!((c.integral(a, b) - trap).abs() < 1e-6);
    }

    #[test]
    fn deadweight_loss_is_nonnegative(theta in 1.0f64..2.0, q in 0.0f64..4.0) {
        for env in [fixtures::s1(), fixtures::s2(), fixtures::s3()] {
            prop_assert!(env.deadweight_loss(theta, q) >= 0.0);
            let efficient = env.lowest().demand(theta);
            prop_assert!(env.deadweight_loss(theta, efficient).abs() < 1e-12);
        }
    }

    #[test]
    fn virtual_cost_exceeds_cost(t in 0.0f64..1.0, a in 0.5f64..3.0) {
        for family in [CostFamily::Uniform, CostFamily::Power { exponent: a }] {
            let cost = CostModel::new(1.0, 2.0, family).unwrap();
            let theta = 1.0 + t;
            let z = cost.virtual_cost(theta).unwrap();
            prop_assert!(z >= theta - 1e-12);
            if t > 1e-6 {
                prop_assert!(z > theta);
            }
        }
    }
}

#[test]
fn oracle_agrees_with_profile_minimum() {
    for env in [fixtures::s1(), fixtures::s2(), fixtures::s3()] {
        let grid = AdversaryGrid::dirac(&env);
        for s in random_schedules(&env, 100, 31, 1.4) {
            let mech = QuantityMechanism::with_zero_top_rent(s);
            let oracle = brute_force_guarantee(&mech, &env, &grid).unwrap();
            let profile = worst_case_profile(&mech, &env);
            assert_abs_diff_eq!(oracle.value, profile.minimum, epsilon = 1e-7);
            assert_eq!(oracle.demand_index, 0);
            assert!(oracle.is_dirac());
        }
    }
}

#[test]
fn price_schedule_ignores_demand() {
    let a = bm_with_price_cap(&fixtures::s1());
    let shifted =
        fixtures::s1().with_extra_demands(vec![PiecewiseLinearCurve::linear(4.0, 1.0).unwrap()]);
    let b = bm_with_price_cap(&shifted);
    assert_eq!(a.prices(), b.prices());
}

#[test]
fn price_regulation_rents_are_nonnegative() {
    for env in [fixtures::s1(), fixtures::s2(), fixtures::s3()] {
        let reg = bm_with_price_cap(&env);
        for (i, d) in env.demands().into_iter().enumerate() {
            assert!(reg.rents(d, i).iter().all(|&u| u >= 0.0));
        }
    }
}

#[test]
fn cap_guarantee_matches_g_star_with_extra_demands() {
    let env =
        fixtures::s3().with_extra_demands(vec![PiecewiseLinearCurve::linear(3.5, 1.0).unwrap()]);
    let reg = bm_with_price_cap(&env);
    let out = robmech::oracle::brute_force_price_guarantee(&reg, &env, &AdversaryGrid::dirac(&env))
        .unwrap();
    assert_abs_diff_eq!(out.value, 0.5, epsilon = 1e-7);
    assert_eq!(out.demand_index, 0);
    // A price path that never reaches the cap loses the guarantee.
    let grid = env.grid();
    let low_prices = reg.prices().iter().map(|p| p.min(1.8)).collect();
    let capped = PriceRegulation::new(grid, low_prices, Default::default()).unwrap();
    let out =
        robmech::oracle::brute_force_price_guarantee(&capped, &env, &AdversaryGrid::dirac(&env))
            .unwrap();
    assert!(out.value < 0.5 - 1e-3);
}

#[test]
fn solver_dominates_random_feasible_schedules() {
    for env in [fixtures::s1(), fixtures::s2(), fixtures::s3()] {
        let sol = solve_ropt(&env, &SolverOptions::default()).unwrap();
        for s in random_feasible_schedules(&env, 10_000, 11).unwrap() {
            assert!(quantity_bound_check(&s, &env).passed());
            let m = QuantityMechanism::with_zero_top_rent(s);
            assert!(m.conjectured_welfare(&env) <= sol.objective + 1e-6);
        }
    }
}

/// On S3 the robust schedule pools at the bottom and then follows a shifted
/// Baron–Myerson line down to the floor. Searching that two-parameter family
/// directly gives an independent lower bound for the solver.
#[test]
fn solver_beats_pooled_family_on_s3() {
    let env = fixtures::s3();
    let sol = solve_ropt(&env, &SolverOptions::default()).unwrap();
    let mut best = f64::NEG_INFINITY;
    let mut best_at = (0.0, 0.0);
    for i in 0..=60 {
        let a = 1.2 + 0.15 * i as f64 / 60.0;
        for j in 0..=60 {
            let mu = 0.4 * j as f64 / 60.0;
            let s =
                robmech::QuantitySchedule::from_fn(&env, |t| a.min((4.0 - 2.0 * t - mu).max(1.0)))
                    .unwrap();
            let m = QuantityMechanism::with_zero_top_rent(s);
            if shortlist_check(&m, &env).passed() {
                let w = m.conjectured_welfare(&env);
                if w > best {
                    best = w;
                    best_at = (a, mu);
                }
            }
        }
    }
    assert!(best > 0.5, "family search found nothing feasible");
    assert!(
        sol.objective >= best - 1e-6,
        "solver {} < family {best} at {best_at:?}",
        sol.objective
    );
    // The solver's own schedule is close to that family.
    assert!(sol.objective - best < 1e-3);
}

#[test]
fn ranking_follows_premises_on_random_environments() {
    let mut covered = 0;
    for seed in 0..40 {
        let env = random_environment(1000 + seed, 201);
        let sol = solve_ropt(&env, &SolverOptions::default()).unwrap();
        assert!(guarantee(&sol.mechanism, &env) >= robmech::guarantee::max_guarantee(&env) - 1e-7);
        let c = compare_regulation(&env, &sol);
        assert!(c.margin > -1e-7 || !c.floor_optimal, "seed {seed}: {c:?}");
        if c.floor_optimal && !c.top_demand_equal {
            covered += 1;
            assert_eq!(c.winner, Winner::Quantity, "seed {seed}");
        }
        if !c.floor_optimal && c.top_demand_equal {
            covered += 1;
            assert_eq!(c.winner, Winner::Price, "seed {seed}");
        }
        match ranking_conditions(&env).trigger {
            Trigger::QuantityWins => assert_eq!(c.winner, Winner::Quantity, "seed {seed}"),
            Trigger::PriceWins => assert_eq!(c.winner, Winner::Price, "seed {seed}"),
            Trigger::Neither => {}
        }
    }
    assert!(covered > 0);
}
