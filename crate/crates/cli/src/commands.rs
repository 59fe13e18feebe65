use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;

use robmech::guarantee::{
    max_guarantee, shortlist_check_with_tolerance, worst_case_profile, SOLVER_TOL,
};
use robmech::mechanism::QuantityMechanism;
use robmech::model::validate_environment;
use robmech::oracle::random_feasible_schedules;
use robmech::regulation::{
    bm_with_price_cap, compare_regulation, ranking_conditions, ComparisonReport,
};
use robmech::report::Status;
use robmech::scenario::{ScenarioError, ScenarioFile};
use robmech::solver::{
    bm_quantity, bm_with_floor, solve_ropt, verify_solution_structure, RoptSolution, SolverOptions,
};
use robmech::{Environment, OracleError, SolverError};

use crate::output::{num, prepare_dir, write_csv, write_json};
use crate::Global;

const DEFAULT_OUT_DIR: &str = "out";
const DEFAULT_SEED: u64 = 0;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input.
    Parse(String),
    /// The scenario violates a modelling assumption, or a bad argument.
    Domain(String),
    NotConverged(String),
    Precondition(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            Self::Domain(_) => 1,
            Self::Parse(_) => 2,
            Self::NotConverged(_) => 3,
            Self::Precondition(_) => 4,
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::Domain(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse(m) | Self::Domain(m) | Self::NotConverged(m) | Self::Precondition(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } | ScenarioError::Parse { .. } => Self::Parse(e.to_string()),
            ScenarioError::Model(m) => Self::Domain(m.to_string()),
        }
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NotConverged { .. } | SolverError::Infeasible(_) => {
                Self::NotConverged(e.to_string())
            }
            _ => Self::Domain(e.to_string()),
        }
    }
}

struct Loaded {
    file: ScenarioFile,
    env: Environment,
    stem: String,
    out_dir: PathBuf,
    verbose: bool,
}

fn load(path: &Path, g: &Global) -> Result<Loaded, CliError> {
    let file = ScenarioFile::load(path)?;
    let env = file.environment(g.grid_points)?;
    let stem = file.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into())
    });
    let out_dir = g
        .out_dir
        .clone()
        .or_else(|| file.output.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    let verbose = g.verbose || file.output.verbose.unwrap_or(false);
    Ok(Loaded {
        file,
        env,
        stem,
        out_dir,
        verbose,
    })
}

/// Loads and insists on a valid environment.
fn load_valid(path: &Path, g: &Global) -> Result<Loaded, CliError> {
    let l = load(path, g)?;
    let report = validate_environment(&l.env);
    if !report.passed() {
        return Err(CliError::Domain(format!(
            "invalid environment\n{}",
            report.render()
        )));
    }
    Ok(l)
}

fn solver_options(file: &ScenarioFile, g: &Global) -> SolverOptions {
    let mut o = file.solver.options();
    if let Some(t) = g.tol_constraint {
        o.tol_constraint = t;
    }
    if let Some(t) = g.tol_objective {
        o.tol_objective = t;
    }
    if let Some(n) = g.max_iters {
        o.max_iters = n;
    }
    o
}

pub fn validate(path: &Path, g: &Global) -> Result<ExitCode, CliError> {
    let l = load(path, g)?;
    let report = validate_environment(&l.env);
    print!("{}", report.render());
    if l.verbose {
        println!(
            "{}",
            serde_json::to_string_pretty(&report.to_json(true)).expect("report serialises")
        );
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

#[derive(Serialize)]
struct SampleCheck {
    samples: usize,
    seed: u64,
    best_objective: f64,
    solver_dominates: bool,
}

#[derive(Serialize)]
struct Summary {
    scenario: String,
    grid_points: usize,
    g_star: f64,
    objective: f64,
    guarantee: f64,
    theta_star: f64,
    theta_m: f64,
    floor_optimal: bool,
    binding: Vec<f64>,
    iterations: usize,
    outer_iterations: usize,
    violation: f64,
    gap: f64,
    shortlist_passed: bool,
    structure: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    random_check: Option<SampleCheck>,
}

fn run_solver(l: &Loaded, g: &Global) -> Result<RoptSolution, CliError> {
    let opts = solver_options(&l.file, g);
    solve_ropt(&l.env, &opts).map_err(CliError::from)
}

pub fn solve(path: &Path, g: &Global, samples: usize) -> Result<ExitCode, CliError> {
    let l = load_valid(path, g)?;
    let sol = run_solver(&l, g)?;
    let env = &l.env;
    let dir = prepare_dir(&l.out_dir)?;

    let floor = bm_with_floor(env)?;
    let rents = sol.mechanism.rents();
    let profile = worst_case_profile(&sol.mechanism, env);
    let rows: Vec<Vec<String>> = sol
        .mechanism
        .schedule
        .thetas()
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            vec![
                num(t),
                num(bm_quantity(env, t)),
                num(floor.quantities()[i]),
                num(sol.mechanism.quantities()[i]),
                num(rents[i]),
                num(profile.values[i]),
            ]
        })
        .collect();
    let csv_path = dir.join(format!("{}_solution.csv", l.stem));
    write_csv(
        &csv_path,
        &["theta", "q_bm", "q_floor", "q_opt", "rent", "profile"],
        &rows,
    )?;

    let shortlist = shortlist_check_with_tolerance(&sol.mechanism, env, SOLVER_TOL);
    let structure = verify_solution_structure(&sol, env);
    let random_check = if samples > 0 {
        let seed = g.seed.unwrap_or(l.file.solver.seed.unwrap_or(DEFAULT_SEED));
        let best = random_feasible_schedules(env, samples, seed)
            .map_err(|e: OracleError| CliError::Domain(e.to_string()))?
            .into_iter()
            .map(|s| QuantityMechanism::with_zero_top_rent(s).conjectured_welfare(env))
            .fold(f64::NEG_INFINITY, f64::max);
        Some(SampleCheck {
            samples,
            seed,
            best_objective: best,
            solver_dominates: sol.objective >= best - 1e-6,
        })
    } else {
        None
    };
    let summary = Summary {
        scenario: l.stem.clone(),
        grid_points: env.grid_points(),
        g_star: max_guarantee(env),
        objective: sol.objective,
        guarantee: profile.minimum,
        theta_star: sol.theta_star,
        theta_m: sol.theta_m,
        floor_optimal: sol.floor_optimal,
        binding: sol.binding.clone(),
        iterations: sol.stats.iterations,
        outer_iterations: sol.stats.outer_iterations,
        violation: sol.stats.violation,
        gap: sol.stats.gap,
        shortlist_passed: shortlist.passed(),
        structure: structure.status,
        random_check,
    };
    let json_path = dir.join(format!("{}_summary.json", l.stem));
    write_json(&json_path, &summary)?;

    println!("scenario       {}", summary.scenario);
    println!("G*             {:.12}", summary.g_star);
    println!("objective      {:.12}", summary.objective);
    println!("guarantee      {:.12}", summary.guarantee);
    println!("theta*         {:.12}", summary.theta_star);
    println!("theta^m        {:.12}", summary.theta_m);
    println!("floor optimal  {}", summary.floor_optimal);
    println!(
        "iterations     {} ({} outer)",
        summary.iterations, summary.outer_iterations
    );
    println!("violation      {:.3e}", summary.violation);
    if let Some(r) = &summary.random_check {
        println!(
            "random check   best of {} = {:.12} ({})",
            r.samples,
            r.best_objective,
            if r.solver_dominates {
                "dominated"
            } else {
                "NOT dominated"
            }
        );
    }
    if l.verbose {
        print!("{}", shortlist.render());
        print!("{}", structure.render());
    }
    println!("wrote {}", csv_path.display());
    println!("wrote {}", json_path.display());

    for &id in &l.file.output.figures {
        if id == 2 && sol.floor_optimal {
            eprintln!("note: figure 2 skipped, the floor mechanism is robustly optimal");
            continue;
        }
        let p = write_figure(&l, &dir, id, Some(&sol))?;
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn render_comparison(r: &ComparisonReport) -> String {
    let trigger = serde_json::to_value(r.ranking_trigger).expect("enum serialises");
    let mut s = String::new();
    s.push_str(&format!(
        "{:<28}{:.12}\n",
        "quantity regulation", r.quantity_welfare
    ));
    s.push_str(&format!(
        "{:<28}{:.12}\n",
        "price regulation", r.price_welfare
    ));
    s.push_str(&format!("{:<28}{:+.12}\n", "margin", r.margin));
    s.push_str(&format!("{:<28}{}\n", "winner", r.winner));
    s.push_str(&format!(
        "{:<28}{:.12}\n",
        "guarantee (both)", r.guarantee_both
    ));
    s.push_str(&format!(
        "{:<28}{}\n",
        "floor mechanism optimal", r.floor_optimal
    ));
    s.push_str(&format!(
        "{:<28}{}\n",
        "equal demand at the top", r.top_demand_equal
    ));
    s.push_str(&format!(
        "{:<28}{}\n",
        "primitive condition",
        trigger.as_str().unwrap_or("?")
    ));
    if r.outside_coverage {
        s.push_str("note: neither sufficient premise holds; ranking is numerical only\n");
    }
    for (k, w) in r.extra_demand_price_welfare.iter().enumerate() {
        s.push_str(&format!(
            "{:<28}{:.12}\n",
            format!("price welfare, extra {k}"),
            w
        ));
    }
    s
}

pub fn compare(path: &Path, g: &Global) -> Result<ExitCode, CliError> {
    let l = load_valid(path, g)?;
    let sol = run_solver(&l, g)?;
    let report = compare_regulation(&l.env, &sol);
    print!("{}", render_comparison(&report));
    if l.verbose {
        print!("{}", ranking_conditions(&l.env).report.render());
    }
    let dir = prepare_dir(&l.out_dir)?;
    let p = dir.join(format!("{}_comparison.json", l.stem));
    write_json(&p, &report)?;
    println!("wrote {}", p.display());
    Ok(ExitCode::SUCCESS)
}

fn write_figure(
    l: &Loaded,
    dir: &Path,
    id: u8,
    sol: Option<&RoptSolution>,
) -> Result<PathBuf, CliError> {
    let env = &l.env;
    let thetas = env.grid().points();
    let path = dir.join(format!("{}_figure{id}.csv", l.stem));
    match id {
        1 | 2 => {
            let floor = bm_with_floor(env)?;
            let q_opt = if id == 2 {
                sol.map(|s| s.mechanism.quantities().to_vec())
            } else {
                None
            };
            let mut header = vec!["theta", "q_bm", "q_floor", "d_lowest", "d_conjectured"];
            if q_opt.is_some() {
                header.push("q_opt");
            }
            let rows: Vec<Vec<String>> = thetas
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let mut r = vec![
                        num(t),
                        num(bm_quantity(env, t)),
                        num(floor.quantities()[i]),
                        num(env.lowest().demand(t)),
                        num(env.conjectured().demand(t)),
                    ];
                    if let Some(q) = &q_opt {
                        r.push(num(q[i]));
                    }
                    r
                })
                .collect();
            write_csv(&path, &header, &rows)?;
        }
        3 => {
            let reg = bm_with_price_cap(env);
            let high = env.theta_high();
            let rows: Vec<Vec<String>> = thetas
                .iter()
                .zip(reg.prices())
                .map(|(&t, &p)| {
                    let z = env.cost().virtual_cost(t).unwrap_or(f64::INFINITY);
                    vec![num(t), num(z), num(p), num(high)]
                })
                .collect();
            write_csv(&path, &["theta", "virtual_cost", "price", "cap"], &rows)?;
        }
        _ => return Err(CliError::Domain(format!("unknown figure {id}"))),
    }
    Ok(path)
}

pub fn figure(path: &Path, g: &Global, id: u8) -> Result<ExitCode, CliError> {
    let l = load_valid(path, g)?;
    let sol = if id == 2 {
        let sol = run_solver(&l, g)?;
        if sol.floor_optimal {
            return Err(CliError::Precondition(
                "figure 2 shows a robust schedule that departs from the floor mechanism, \
                 but the floor mechanism is robustly optimal for this scenario"
                    .into(),
            ));
        }
        Some(sol)
    } else {
        None
    };
    let dir = prepare_dir(&l.out_dir)?;
    let p = write_figure(&l, &dir, id, sol.as_ref())?;
    println!("wrote {}", p.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
enum SweepParam {
    Knot {
        lowest: bool,
        axis: Axis,
        index: usize,
    },
    CostExponent,
    QuantityCap,
    GridPoints,
}

fn parse_param(name: &str, file: &ScenarioFile) -> Result<SweepParam, CliError> {
    let bad = |why: &str| CliError::Domain(format!("parameter '{name}' is not sweepable: {why}"));
    match name {
        "cost.exponent" => return Ok(SweepParam::CostExponent),
        "quantity_cap" => return Ok(SweepParam::QuantityCap),
        "grid_points" => return Ok(SweepParam::GridPoints),
        _ => {}
    }
    let parts: Vec<&str> = name.split('.').collect();
    let [curve, axis, index] = parts[..] else {
        return Err(bad(
            "expected <curve>.<x|y>.<index>, cost.exponent, quantity_cap or grid_points",
        ));
    };
    let lowest = match curve {
        "lowest" => true,
        "conjectured" => false,
        _ => return Err(bad("curve must be 'lowest' or 'conjectured'")),
    };
    let axis = match axis {
        "x" => Axis::X,
        "y" => Axis::Y,
        _ => return Err(bad("axis must be 'x' or 'y'")),
    };
    let index: usize = index
        .parse()
        .map_err(|_| bad("knot index must be a non-negative integer"))?;
    let knots = if lowest {
        &file.environment.lowest_demand_knots
    } else {
        &file.environment.conjectured_demand_knots
    };
    if index >= knots.len() {
        return Err(bad(&format!("the curve has {} knots", knots.len())));
    }
    Ok(SweepParam::Knot {
        lowest,
        axis,
        index,
    })
}

fn parse_values(values: Option<&str>, range: Option<&str>) -> Result<Vec<f64>, CliError> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Domain(format!("'{s}' is not a number")))
    };
    match (values, range) {
        (Some(v), _) => v
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect(),
        (None, Some(r)) => {
            let parts: Vec<&str> = r.split(':').collect();
            let [a, b, n] = parts[..] else {
                return Err(CliError::Domain(format!(
                    "range '{r}' must be start:end:count"
                )));
            };
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n.trim().parse().map_err(|_| {
                CliError::Domain(format!("count '{n}' is not a non-negative integer"))
            })?;
            Ok((0..n)
                .map(|i| {
                    if n == 1 {
                        a
                    } else if i + 1 == n {
                        b
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                })
                .collect())
        }
        (None, None) => Err(CliError::Domain("sweep needs --values or --range".into())),
    }
}

fn apply(file: &mut ScenarioFile, p: &SweepParam, v: f64) -> Option<usize> {
    let e = &mut file.environment;
    match *p {
        SweepParam::Knot {
            lowest,
            axis,
            index,
        } => {
            let knots = if lowest {
                &mut e.lowest_demand_knots
            } else {
                &mut e.conjectured_demand_knots
            };
            knots[index][if axis == Axis::X { 0 } else { 1 }] = v;
            None
        }
        SweepParam::CostExponent => {
            e.cost_params.exponent = Some(v);
            None
        }
        SweepParam::QuantityCap => {
            e.quantity_cap = v;
            None
        }
        SweepParam::GridPoints => Some(v.round() as usize),
    }
}

pub fn sweep(
    path: &Path,
    g: &Global,
    param: &str,
    values: Option<&str>,
    range: Option<&str>,
) -> Result<ExitCode, CliError> {
    let l = load(path, g)?;
    let p = parse_param(param, &l.file)?;
    let values = parse_values(values, range)?;
    if p == SweepParam::GridPoints {
        if let Some(v) = values.iter().find(|v| v.fract() != 0.0 || **v < 3.0) {
            return Err(CliError::Domain(format!(
                "grid_points value {v} is not an integer of at least 3"
            )));
        }
    }
    let opts = solver_options(&l.file, g);
    let mut rows = Vec::with_capacity(values.len());
    for &v in &values {
        let mut file = l.file.clone();
        let grid = apply(&mut file, &p, v).or(g.grid_points);
        let nan = num(f64::NAN);
        let mut row = |status: &str, cells: [String; 6]| {
            let mut r = vec![num(v), status.to_string()];
            r.extend(cells);
            rows.push(r);
        };
        let blank = || {
            [
                nan.clone(),
                nan.clone(),
                nan.clone(),
                nan.clone(),
                String::new(),
                String::new(),
            ]
        };
        let env = match file.environment(grid) {
            Ok(env) if validate_environment(&env).passed() => env,
            _ => {
                row("invalid", blank());
                continue;
            }
        };
        let sol = match solve_ropt(&env, &opts) {
            Ok(s) => s,
            Err(SolverError::NotConverged { .. }) => {
                row("not_converged", blank());
                continue;
            }
            Err(_) => {
                row("invalid", blank());
                continue;
            }
        };
        let c = compare_regulation(&env, &sol);
        row(
            "ok",
            [
                num(c.guarantee_both),
                num(c.quantity_welfare),
                num(c.price_welfare),
                num(c.margin),
                c.winner.to_string(),
                c.floor_optimal.to_string(),
            ],
        );
    }
    let dir = prepare_dir(&l.out_dir)?;
    let out = dir.join(format!("{}_sweep_{}.csv", l.stem, param.replace('.', "_")));
    write_csv(
        &out,
        &[
            "value",
            "status",
            "g_star",
            "quantity_welfare",
            "price_welfare",
            "margin",
            "winner",
            "floor_optimal",
        ],
        &rows,
    )?;
    for r in &rows {
        println!("{}", r.join(","));
    }
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}
