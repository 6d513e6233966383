mod common;

use common::{config, pmc, write_config};
use pmc_cli::summary::RunSummary;

#[test]
fn converged_solve_exits_zero_and_writes_everything() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let r = pmc(&["solve", "--scenario", "euclidean-radial-s2", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for f in ["summary.json", "trace.csv", "fields.csv", "mesh.obj"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let printed = RunSummary::from_json(&r.stdout).unwrap();
    let stored = RunSummary::from_json(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(printed, stored);
    assert!(stored.converged);
    assert!(stored.residual_sup <= stored.curvature_tol);
}

#[test]
fn s1_solve_skips_the_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let r = pmc(&["solve", "--scenario", "euclidean-radial-s1", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(dir.path().join("fields.csv").exists());
    assert!(!dir.path().join("mesh.obj").exists());
}

#[test]
fn swapped_barriers_exit_two_with_margin_report() {
    let dir = tempfile::tempdir().unwrap();
    let r = pmc(
        &["solve", "--config", &config("swapped-barriers.json"), "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("not ordered"), "{}", r.stderr);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("barriers.json")).unwrap()).unwrap();
    assert_eq!(report["ordered"], false);
    assert_eq!(report["pass"], false);
    // H of the circles r = 1.5 and r = 0.5 against f = 1
    assert!((report["lower_margin"].as_f64().unwrap() - (1.0 / 1.5 - 1.0)).abs() < 1e-6);
    assert!((report["upper_margin"].as_f64().unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn ordered_but_wrong_barriers_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{
          "scenario": {"family": "custom", "n": 1, "psi": {"kind": "euclidean"},
                       "f": {"kind": "constant", "value": 1.0},
                       "lower": {"kind": "constant", "radius": 0.5},
                       "upper": {"kind": "constant", "radius": 2.0}},
          "penalty": {"gamma": 10.0, "mu": 2.0}
        }"#,
    );
    let r = pmc(&["check-barriers", "--config", &cfg, "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(r.code, 2);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["ordered"], true);
    assert_eq!(report["lower_pass"], false);
    assert_eq!(report["upper_pass"], false);
}

#[test]
fn check_barriers_passes_on_bundled() {
    let r = pmc(&["check-barriers", "--scenario", "manufactured-zonal-s2"], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(report["pass"], true);
}

#[test]
fn exhausted_outer_budget_exits_three_but_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "short.json",
        r#"{"scenario": {"family": "bundled", "name": "euclidean-radial-s1"},
            "outer": {"outer_tol": 1e-12, "max_outer": 3}}"#,
    );
    let out = dir.path().join("o");
    let r = pmc(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    let s = RunSummary::from_json(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(!s.converged);
    assert_eq!(s.outer_steps, 3);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
}

#[test]
fn malformed_config_exits_four_naming_each_field() {
    let r = pmc(&["solve", "--config", &config("malformed.json")], &[]);
    assert_eq!(r.code, 4);
    for field in ["grid.resolution", "newton.tol", "newton.max_iter", "newton.damping"] {
        assert!(r.stderr.contains(field), "{field} not reported:\n{}", r.stderr);
    }
}

#[test]
fn parse_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "typo.json",
        r#"{"scenario": {"family": "bundled", "name": "euclidean-radial-s1"}, "newton": {"tol": "tiny"}}"#,
    );
    let r = pmc(&["solve", "--config", &cfg], &[]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("newton.tol"), "{}", r.stderr);
}

#[test]
fn usage_errors_and_bad_threads_exit_four() {
    assert_eq!(pmc(&["solve"], &[]).code, 4);
    assert_eq!(pmc(&["frobnicate"], &[]).code, 4);
    assert_eq!(pmc(&["solve", "--scenario", "no-such-thing"], &[]).code, 4);
    assert_eq!(pmc(&["solve", "--config", "/nonexistent/x.json"], &[]).code, 4);
    let r = pmc(&["check-barriers", "--scenario", "euclidean-radial-s1"], &[("PMC_THREADS", "0")]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("PMC_THREADS"));
    assert_eq!(pmc(&["--help"], &[]).code, 0);
}

#[test]
fn probe_reports_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let r = pmc(
        &["probe-minimality", "--scenario", "manufactured-cosine-s1", "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("probe.json")).unwrap()).unwrap();
    assert_eq!(report["trials"], 100);
    assert_eq!(report["violations"], 0);
}

#[test]
fn study_reports_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let r = pmc(
        &["convergence-study", "--scenario", "manufactured-cosine-s1", "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let orders = report["sup_orders"].as_array().unwrap();
    assert_eq!(orders.len(), 2);
    for o in orders {
        assert!((o.as_f64().unwrap() - 2.0).abs() < 0.3, "{o}");
    }
    assert!(dir.path().join("study.json").exists());
}

#[test]
fn study_without_exact_solution_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "noexact.json",
        r#"{"scenario": {"family": "custom", "n": 1, "psi": {"kind": "euclidean"},
                         "f": {"kind": "constant", "value": 1.0},
                         "lower": {"kind": "constant", "radius": 0.8},
                         "upper": {"kind": "constant", "radius": 1.25}},
            "penalty": {"gamma": 10.0, "mu": 2.0}}"#,
    );
    assert_eq!(pmc(&["convergence-study", "--config", &cfg], &[]).code, 4);
}
