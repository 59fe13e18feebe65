use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_robmech"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Rows of a CSV file as floats, header dropped; non-numeric cells are NaN.
fn table(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'), "CSV must use LF line endings");
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| {
            l.split(',')
                .map(|c| c.parse().unwrap_or(f64::NAN))
                .collect()
        })
        .collect();
    (header, rows)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_scenario(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(scenario("s1")).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("name");
    edit(&mut v);
    let p = dir.join(format!("{name}.json"));
    fs::write(&p, v.to_string()).unwrap();
    p
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["validate", scenario("s1").to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));

    let zero = write_scenario(dir.path(), "zero", |v| {
        v["environment"]["theta_low"] = 0.0.into()
    });
    let o = run(&["validate", zero.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(
        stdout(&o).contains("theta_low must be positive"),
        "{}",
        stdout(&o)
    );

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\n  \"environment\": {\n    \"theta_low\": ,\n").unwrap();
    let o = run(&["validate", bad.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let typo = write_scenario(dir.path(), "typo", |v| {
        v["environment"]["quantity_cp"] = 1.0.into()
    });
    let o = run(&["validate", typo.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("quantity_cp"), "{}", stderr(&o));

    let o = run(
        &[
            "validate",
            dir.path().join("missing.json").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn solve_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for s in ["s1", "s2", "s3"] {
        let o = run(&["solve", scenario(s).to_str().unwrap()], out);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let s1 = json(&out.join("s1_summary.json"));
    assert!((s1["objective"].as_f64().unwrap() - 7.0 / 12.0).abs() < 1e-7);
    assert_eq!(s1["floor_optimal"], true);
    let s2 = json(&out.join("s2_summary.json"));
    assert!((s2["theta_star"].as_f64().unwrap() - 1.75).abs() < 1e-9);
    let s3 = json(&out.join("s3_summary.json"));
    assert_eq!(s3["floor_optimal"], false);
    assert!((s3["guarantee"].as_f64().unwrap() - 0.5).abs() < 1e-7);
    assert_eq!(s3["shortlist_passed"], true);
    assert_eq!(s3["structure"], "pass");

    let (header, rows) = table(&out.join("s3_solution.csv"));
    assert_eq!(
        header,
        ["theta", "q_bm", "q_floor", "q_opt", "rent", "profile"]
    );
    assert_eq!(rows.len(), 1001);
    assert!(rows.iter().all(|r| r[5] >= 0.5 - 1e-7));
}

#[test]
fn solve_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "solve",
            scenario("s3").to_str().unwrap(),
            "--max-iters",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("did not converge"), "{}", stderr(&o));
}

#[test]
fn solve_random_cross_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        &[
            "solve",
            scenario("s3").to_str().unwrap(),
            "--samples",
            "500",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    let s = json(&dir.path().join("s3_summary.json"));
    assert_eq!(s["random_check"]["solver_dominates"], true);
    assert_eq!(s["random_check"]["seed"], 3);
}

#[test]
fn artifacts_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        assert_eq!(
            code(&run(&["solve", scenario("s3").to_str().unwrap()], d)),
            0
        );
        assert_eq!(
            code(&run(&["compare", scenario("s2").to_str().unwrap()], d)),
            0
        );
    }
    for f in ["s3_solution.csv", "s3_summary.json", "s2_comparison.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn compare_winners() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for (s, winner) in [("s1", "equivalent"), ("s2", "quantity"), ("s3", "price")] {
        let o = run(&["compare", scenario(s).to_str().unwrap()], out);
        assert_eq!(code(&o), 0);
        assert!(stdout(&o).contains(winner), "{}", stdout(&o));
        let r = json(&out.join(format!("{s}_comparison.json")));
        assert_eq!(r["winner"], winner);
    }
    let r = json(&out.join("s2_comparison.json"));
    assert!((r["margin"].as_f64().unwrap() - (21.0 / 32.0 - 7.0 / 12.0)).abs() < 1e-7);
    assert_eq!(r["ranking_trigger"], "quantity-wins");
    assert_eq!(
        json(&out.join("s3_comparison.json"))["ranking_trigger"],
        "price-wins"
    );
}

#[test]
fn figures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();

    assert_eq!(
        code(&run(
            &["figure", scenario("s2").to_str().unwrap(), "--id", "1"],
            out
        )),
        0
    );
    let (header, rows) = table(&out.join("s2_figure1.csv"));
    assert_eq!(
        header,
        ["theta", "q_bm", "q_floor", "d_lowest", "d_conjectured"]
    );
    for r in &rows {
        assert!((r[2] - r[1].max(0.5)).abs() < 1e-12);
    }

    assert_eq!(
        code(&run(
            &["figure", scenario("s3").to_str().unwrap(), "--id", "2"],
            out
        )),
        0
    );
    let (header, rows) = table(&out.join("s3_figure2.csv"));
    assert_eq!(header.last().unwrap(), "q_opt");
    for r in rows.iter().filter(|r| r[0] > 1.0 && r[0] < 1.5) {
        assert!(r[5] <= r[1] + 1e-9, "{r:?}");
    }

    assert_eq!(
        code(&run(
            &["figure", scenario("s1").to_str().unwrap(), "--id", "3"],
            out
        )),
        0
    );
    let (_, rows) = table(&out.join("s1_figure3.csv"));
    for r in &rows {
        assert!((r[2] - (2.0 * r[0] - 1.0).min(2.0)).abs() < 1e-12);
        assert_eq!(r[3], 2.0);
    }

    let o = run(
        &["figure", scenario("s1").to_str().unwrap(), "--id", "2"],
        out,
    );
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("robustly optimal"));
}

#[test]
fn sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let s1 = scenario("s1");
    let s2 = scenario("s2");

    let o = run(
        &[
            "sweep",
            s1.to_str().unwrap(),
            "--param",
            "lowest.y.0",
            "--range",
            "0:1:0",
        ],
        out,
    );
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("s1_sweep_lowest_y_0.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);

    let o = run(
        &[
            "sweep",
            s1.to_str().unwrap(),
            "--param",
            "theta_low",
            "--values",
            "1",
        ],
        out,
    );
    assert_eq!(code(&o), 1);

    let o = run(
        &[
            "sweep",
            s1.to_str().unwrap(),
            "--param",
            "grid_points",
            "--values",
            "251,501,1001",
        ],
        out,
    );
    assert_eq!(code(&o), 0);
    let (_, rows) = table(&out.join("s1_sweep_grid_points.csv"));
    let obj: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    assert!(obj.iter().all(|w| (w - obj[2]).abs() < 1e-6), "{obj:?}");

    // Moving the choke price of D̲ up to that of D* removes the uncertainty.
    let o = run(
        &[
            "sweep",
            s2.to_str().unwrap(),
            "--param",
            "lowest.x.2",
            "--range",
            "2.3333333333333335:3:5",
        ],
        out,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("s2_sweep_lowest_x_2.csv")).unwrap();
    let winners: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(6).unwrap())
        .collect();
    assert_eq!(winners.first(), Some(&"quantity"));
    assert_eq!(winners.last(), Some(&"equivalent"));

    // Values that break an assumption are reported, not fatal.
    let o = run(
        &[
            "sweep",
            s1.to_str().unwrap(),
            "--param",
            "quantity_cap",
            "--values=-1,10",
        ],
        out,
    );
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(out.join("s1_sweep_quantity_cap.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap().contains("invalid"));
    assert!(text.lines().nth(2).unwrap().contains(",ok,"));
}
