use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_theta-selftest"));
    c.env_remove("THETA_SELFTEST_TOL");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("theta-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn theta_for_chsh() {
    let out = run(&["--json", "theta", "--scenario", "chsh"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["alpha"], 3.0);
    assert!((v["theta"].as_f64().unwrap() - (2.0 + 2f64.sqrt())).abs() < 1e-6);
    assert_eq!(v["alpha_star"], 4.0);
    assert_eq!(v["sandwich"], true);

    let text = String::from_utf8(run(&["theta", "--scenario", "chsh"]).stdout).unwrap();
    assert!(text.contains("theta: 3.41421"), "{text}");
}

#[test]
fn theta_from_graph_file() {
    let p = scratch("empty4.json");
    std::fs::write(&p, r#"{"n": 4, "edges": [], "weights": [1, 1, 1, 1]}"#).unwrap();
    let v = json(&run(&["--json", "theta", "--graph", p.to_str().unwrap()]));
    for key in ["alpha", "theta", "alpha_star"] {
        assert!((v[key].as_f64().unwrap() - 4.0).abs() < 1e-6, "{key}: {}", v[key]);
    }
}

#[test]
fn malformed_graph_is_an_input_error() {
    let p = scratch("bad.json");
    std::fs::write(&p, r#"{"n": 2, "edges": [[0, 5]], "weights": [1, 1]}"#).unwrap();
    assert_eq!(run(&["theta", "--graph", p.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(
        run(&["theta", "--graph", "/nonexistent/graph.json"]).status.code(),
        Some(1)
    );
    assert_eq!(run(&["theta"]).status.code(), Some(1));
}

#[test]
fn certify_exit_codes() {
    let out = run(&["--json", "certify", "--scenario", "chained:5"]);
    assert_eq!(out.status.code(), Some(0));
    let want = 5.0 * (1.0 + (std::f64::consts::PI / 10.0).cos());
    assert!((json(&out)["bound"].as_f64().unwrap() - want).abs() < 1e-9);
    assert_eq!(run(&["certify", "--scenario", "chained:1"]).status.code(), Some(1));
    assert_eq!(run(&["certify", "--scenario", "mermin"]).status.code(), Some(1));
}

#[test]
fn uniqueness_verdicts() {
    let v = json(&run(&["--json", "uniqueness", "--scenario", "chsh"]));
    assert_eq!(v["nondegenerate"], true);
    assert_eq!(v["dual"], "closed-form");
    let out = run(&["--json", "uniqueness", "--scenario", "as4"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["nondegenerate"], false);

    let p = scratch("empty2.json");
    std::fs::write(&p, r#"{"n": 2, "edges": [], "weights": [1, 1]}"#).unwrap();
    let out = run(&["--json", "uniqueness", "--graph", p.to_str().unwrap()]);
    // every vertex vector equals the handle, so the optimizer is unique
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["dual"], "numerical");
    assert_eq!(v["nullspace_dim"], 0);
}

#[test]
fn selftest_round_trip_through_files() {
    let out = run(&[
        "--json",
        "scenario",
        "--name",
        "mermin",
        "--candidate",
        "rotated",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let cand = scratch("mermin-rot.json");
    std::fs::write(&cand, json(&out)["realization"].to_string()).unwrap();
    let out = run(&[
        "--json",
        "selftest",
        "--scenario",
        "mermin",
        "--candidate",
        cand.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verified"], true);
    assert_eq!(v["report"]["pipeline"], "tripartite-rank-one");
}

#[test]
fn perturbed_candidate_exits_with_precondition_code() {
    let out = run(&[
        "--json",
        "scenario",
        "--name",
        "chsh",
        "--candidate",
        "perturbed",
        "--angle",
        "0.1",
    ]);
    let cand = scratch("chsh-bad.json");
    std::fs::write(&cand, json(&out)["realization"].to_string()).unwrap();
    let out = run(&[
        "--json",
        "selftest",
        "--scenario",
        "chsh",
        "--candidate",
        cand.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(json(&out)["error"].as_str().unwrap().contains("Gram"));
}

#[test]
fn tolerance_from_environment() {
    let out = run(&[
        "--json",
        "scenario",
        "--name",
        "chsh",
        "--candidate",
        "rotated",
        "--seed",
        "2",
    ]);
    let cand = scratch("chsh-rot.json");
    std::fs::write(&cand, json(&out)["realization"].to_string()).unwrap();
    let args = [
        "--json",
        "selftest",
        "--scenario",
        "chsh",
        "--candidate",
        cand.to_str().unwrap(),
    ];

    let out = bin().args(args).env("THETA_SELFTEST_TOL", "1e-3").output().unwrap();
    assert_eq!(json(&out)["tolerance"], 1e-3);
    assert_eq!(out.status.code(), Some(0));

    // rounding noise in the rotated candidate is far above this
    let out = bin().args(args).env("THETA_SELFTEST_TOL", "1e-30").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["verified"], false);

    let out = bin().args(args).env("THETA_SELFTEST_TOL", "tiny").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // the flag wins over the environment
    let mut with_flag = args.to_vec();
    with_flag.extend(["--tol", "1e-6"]);
    let out = bin()
        .args(&with_flag)
        .env("THETA_SELFTEST_TOL", "1e-30")
        .output()
        .unwrap();
    assert_eq!(json(&out)["tolerance"], 1e-6);
}

#[test]
fn export_dot_and_json() {
    let dot = String::from_utf8(run(&["export", "--scenario", "chsh", "--format", "dot"]).stdout).unwrap();
    assert!(dot.starts_with("graph "));
    assert_eq!(dot.matches(" -- ").count(), 12);

    let p = scratch("as4.json");
    let out = run(&[
        "export",
        "--scenario",
        "as4",
        "--format",
        "json",
        "--output",
        p.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
    let weights = v["graph"]["weights"].as_array().unwrap();
    assert_eq!(weights.iter().filter(|w| w.as_f64() == Some(2.0)).count(), 2);
}

#[test]
fn unknown_scenario_is_rejected() {
    let out = run(&["theta", "--scenario", "nope"]);
    assert_ne!(out.status.code(), Some(0));
}
