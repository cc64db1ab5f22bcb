use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sublinpot::io::{load_grid_function, save_measure};
use sublinpot::potentials::potential_at;
use sublinpot::{KernelSpec, Measure};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sublinpot"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixture(dir: &Path, name: &str) -> PathBuf {
    let out = dir.join(name);
    let o = run(&["make-fixture", name, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    out.join("config.toml")
}

fn edit(config: &Path, from: &str, to: &str) {
    let text = fs::read_to_string(config).unwrap();
    assert!(text.contains(from), "{from} not in config");
    fs::write(config, text.replacen(from, to, 1)).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn solve_fixture_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "one-term");
    let o = run(&["solve", p(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = cfg.parent().unwrap().join("out");
    for f in [
        "solution.toml",
        "solution.f64",
        "solve_report.json",
        "conditions.json",
        "residuals.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("solve_report.json")).unwrap()).unwrap();
    assert_eq!(rep["converged"], true);
    assert!(rep["final_residual_fp"].as_f64().unwrap() <= 1e-8);
    assert_eq!(rep["monotonicity_violations"], 0);
}

#[test]
fn two_term_fixture_converges() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "two-term");
    let o = run(&["solve", p(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rep: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(cfg.parent().unwrap().join("out/solve_report.json")).unwrap(),
    )
    .unwrap();
    assert!(rep["final_residual_fp"].as_f64().unwrap() <= 1e-8);
    assert!(rep["iterate_count"].as_u64().unwrap() <= 200);
}

#[test]
fn repeated_solves_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "one-term");
    let out = cfg.parent().unwrap().join("out");
    assert!(run(&["solve", p(&cfg)]).status.success());
    let first: Vec<Vec<u8>> = ["solution.f64", "solve_report.json", "conditions.json"]
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap())
        .collect();
    assert!(run(&["solve", p(&cfg)]).status.success());
    for (f, bytes) in ["solution.f64", "solve_report.json", "conditions.json"]
        .iter()
        .zip(first)
    {
        assert_eq!(fs::read(out.join(f)).unwrap(), bytes, "{f}");
    }
}

#[test]
fn linear_problem_returns_the_potential_of_omega() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "one-term");
    let base = cfg.parent().unwrap();
    save_measure(&Measure::zero(2), &base.join("zero.toml")).unwrap();
    let omega = Measure::from_atoms(2, vec![(vec![0.3, 0.1], 1.5)]).unwrap();
    save_measure(&omega, &base.join("atom.toml")).unwrap();
    edit(&cfg, "sigma = \"sigma_1.toml\"", "sigma = \"zero.toml\"");
    edit(&cfg, "omega = \"omega.toml\"", "omega = \"atom.toml\"");
    let o = run(&["solve", p(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let u = load_grid_function(&base.join("out/solution.toml")).unwrap();
    let k = KernelSpec::riesz(2, 1.0).unwrap();
    for (i, v) in u.values().iter().enumerate() {
        let expected = potential_at(&k, &omega, &u.grid().point(i));
        assert!((v - expected).abs() <= 1e-12 * expected);
    }
}

#[test]
fn bad_q_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "one-term");
    edit(&cfg, "q = 0.5", "q = 1.5");
    let o = run(&["solve", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(
        e.contains("q must lie in (0,1)") && e.contains("terms[0].q"),
        "{e}"
    );
}

#[test]
fn missing_and_unknown_fields_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "one-term");
    edit(&cfg, "gamma = 1.0\n", "");
    let o = run(&["solve", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gamma"), "{}", stderr(&o));

    let cfg = fixture(dir.path(), "two-term");
    edit(&cfg, "alpha = 1.0\n", "");
    let o = run(&["check", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kernel.alpha"), "{}", stderr(&o));

    let cfg = fixture(dir.path(), "scalar");
    edit(&cfg, "variant = \"matrix\"", "variant = \"gaussian\"");
    let o = run(&["solve", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kernel.variant"), "{}", stderr(&o));
}

#[test]
fn non_convergence_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "one-term");
    edit(&cfg, "max_iter = 200", "max_iter = 2");
    let o = run(&["solve", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "two-term");
    let o = run(&["check", p(&cfg)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(cfg.parent().unwrap().join("out/conditions.json").exists());

    let base = cfg.parent().unwrap();
    save_measure(&Measure::zero(2), &base.join("zero.toml")).unwrap();
    let text = fs::read_to_string(&cfg).unwrap();
    let zeroed = text
        .replace("\"sigma_1.toml\"", "\"zero.toml\"")
        .replace("\"sigma_2.toml\"", "\"zero.toml\"")
        .replace("omega = \"omega.toml\"", "omega = \"zero.toml\"");
    fs::write(&cfg, zeroed).unwrap();
    let o = run(&["check", p(&cfg)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));

    let atoms = Measure::from_atoms(2, vec![(vec![0.0, 0.0], 1.0)]).unwrap();
    save_measure(&atoms, &base.join("atoms.toml")).unwrap();
    fs::write(&cfg, text.replace("\"sigma_1.toml\"", "\"atoms.toml\"")).unwrap();
    let o = run(&["check", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("atoms rejected") && stderr(&o).contains("terms[0].sigma"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn verify_needs_a_solution_and_gamma_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "one-term");
    let o = run(&["verify", p(&cfg), "--estimates"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("no solution artifact found"),
        "{}",
        stderr(&o)
    );

    assert!(run(&["solve", p(&cfg)]).status.success());
    let o = run(&["verify", p(&cfg), "--estimates", "--kernel-axioms"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}{}",
        String::from_utf8_lossy(&o.stdout),
        stderr(&o)
    );
    let v: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(cfg.parent().unwrap().join("out/verify.json")).unwrap(),
    )
    .unwrap();
    for row in v["rows"].as_array().unwrap() {
        assert_eq!(row["pass"], true, "{row}");
    }

    let o = run(&["verify", p(&cfg), "--energy"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    edit(&cfg, "gamma = 1.0", "gamma = 2.0");
    let o = run(&["verify", p(&cfg), "--energy"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("energy identity requires gamma = 1"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn sweep_gamma_rows_follow_the_exponent_formula() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "one-term");
    let o = run(&["sweep", p(&cfg), "--param", "gamma", "--values", "0.5,1,2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(cfg.parent().unwrap().join("out/sweep_gamma.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&o.stdout), csv);
    let mut reader = csv::Reader::from_reader(csv.as_bytes());
    let headers = reader.headers().unwrap().clone();
    let r_col = headers.iter().position(|h| h == "r").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        let gamma: f64 = row[1].parse().unwrap();
        let r: f64 = row[r_col].parse().unwrap();
        assert_eq!(r, 2.0 * (gamma + 1.0) / (2.0 - 1.0));
    }
}

#[test]
fn sweep_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "one-term");
    let o = run(&["sweep", p(&cfg), "--param", "q", "--values"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["sweep", p(&cfg), "--param", "q", "--values", "0.5,0.9,0.99"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 4);
    let o = run(&["sweep", p(&cfg), "--param", "alpha", "--values", "2.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpha"), "{}", stderr(&o));
}

#[test]
fn thread_cap_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "scalar");
    let o = bin()
        .env("RS_THREADS", "1")
        .args(["solve", p(&cfg)])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = bin()
        .env("RS_THREADS", "lots")
        .args(["solve", p(&cfg)])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("RS_THREADS"));
}
