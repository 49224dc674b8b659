use std::process::{Command, Output};

fn lqgh(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lqgh"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("LQGH_THREADS", t),
        None => cmd.env_remove("LQGH_THREADS"),
    };
    cmd.output().expect("run lqgh")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

#[test]
fn analyze_reports_positive_bound() {
    let o = lqgh(&["analyze", "--instance", "doyle:sigma=1e-4", "--policy", "optimal+noise:1", "--N", "100", "--T", "500"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["schema_version"], 1);
    assert!(v["bound"].as_f64().unwrap() > 0.0);
    assert_eq!(v["N"], 100);
    assert!(v["FI_finite_T"].is_null());
}

#[test]
fn finite_horizon_fisher_is_reported_on_request() {
    let o = lqgh(&["analyze", "--instance", "doyle", "--T", "50", "--finite-t"], None);
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    let fi_t = v["FI_finite_T"][0][0].as_f64().unwrap();
    assert!(fi_t > 0.0 && fi_t <= 50.0 * v["FI_rate"][0][0].as_f64().unwrap() * 1.05);
}

#[test]
fn lost_excitation_exits_with_domain_code() {
    let o = lqgh(&["analyze", "--instance", "pe_loss", "--policy", "static"], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("singular"));
    let probed = lqgh(&["analyze", "--instance", "pe_loss", "--policy", "static+noise:1"], None);
    assert_eq!(code(&probed), 0);
}

#[test]
fn malformed_instance_json_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"A": [[1.0]], "B": "#).unwrap();
    let o = lqgh(&["analyze", "--instance", path.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("parse"));
}

#[test]
fn json_instance_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scalar.json");
    std::fs::write(
        &path,
        r#"{"A": [[1.2]], "B": [[1.0]], "C": [[1.0]], "Sigma_w": [[1.0]], "Sigma_v": [[0.5]],
            "Q": [[1.0]], "R": [[1.0]], "theta": [1.2], "derivatives": [{"A": [[1.0]]}]}"#,
    )
    .unwrap();
    let o = lqgh(&["analyze", "--instance", path.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["H"][0][0].as_f64().unwrap() > 0.0);
    assert_eq!(v["theta"][0], 1.2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&lqgh(&["frobnicate"], None)), 1);
    assert_eq!(code(&lqgh(&["analyze"], None)), 1);
    assert_eq!(code(&lqgh(&["analyze", "--instance", "nope"], None)), 1);
    assert_eq!(code(&lqgh(&["analyze", "--instance", "doyle", "--policy", "greedy"], None)), 1);
    assert_eq!(code(&lqgh(&["analyze", "--instance", "doyle"], Some("zero"))), 1);
    assert_eq!(code(&lqgh(&["--help"], None)), 0);
}

#[test]
fn sweep_rows_follow_the_grid() {
    let o = lqgh(&["sweep", "--instance", "nmp", "--grid", "log:0.1:0.01:5"], None);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "param,J_star,H,FI_rate,bound,warnings");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("1.0000000000000001e-1,"));
    assert!(lines[5].starts_with("1.0000000000000000e-2,"));
    assert_eq!(code(&lqgh(&["sweep", "--instance", "nmp", "--grid", ""], None)), 1);
    assert_eq!(code(&lqgh(&["sweep", "--instance", "pe_loss", "--grid", "1,2"], None)), 1);
}

#[test]
fn destabilizing_controller_exits_with_domain_code() {
    let o = lqgh(&["youla-check", "--instance", "doyle", "--alpha", "3"], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not stabilize"));
    let ok = lqgh(&["youla-check", "--instance", "doyle"], None);
    assert_eq!(code(&ok), 0);
    assert!(stdout_json(&ok)["excess_residual"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn controller_file_for_youla_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.json");
    // Empty A is a static gain; zero feedback leaves the unstable plant open loop.
    std::fs::write(&path, r#"{"A": [], "B": [], "C": [], "D": [[0.0]]}"#).unwrap();
    let o = lqgh(&["youla-check", "--instance", "doyle", "--controller", path.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn codesign_single_budget_and_boundary_warning() {
    let o = lqgh(&["codesign", "--N", "100"], None);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o)["rows"].as_array().unwrap().len(), 1);
    let b = lqgh(&["codesign", "--N", "10", "--s-min", "5", "--s-max", "20"], None);
    assert_eq!(code(&b), 0);
    let v = stdout_json(&b);
    assert_eq!(v["rows"][0]["at_boundary"], true);
    assert_eq!(v["rows"][0]["s_star"], 5.0);
    assert_eq!(v["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn montecarlo_misspecification_floor() {
    let o = lqgh(&["montecarlo", "--instance", "doyle", "--N", "20", "--T", "200", "--replicates", "8", "--epsilon", "0.02"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["epsilon"], 0.02);
    assert!(v["mean"].as_f64().unwrap() > 10.0 * v["half_trace_h_fi_inv"].as_f64().unwrap() / 20.0);
    assert_eq!(v["excess"].as_array().unwrap().len(), 8);
}

#[test]
fn simulate_writes_dataset_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    let o = lqgh(&["simulate", "--instance", "compounding:s=10", "--N", "2", "--T", "5", "--out", path.to_str().unwrap()], None);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "replicate,t,y_1,u_1");
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn outputs_are_independent_of_thread_count() {
    let runs: &[&[&str]] = &[
        &["montecarlo", "--instance", "doyle", "--N", "10", "--T", "100", "--replicates", "6"],
        &["sweep", "--instance", "doyle", "--grid", "log:1e-3:1e-1:4", "--format", "json"],
    ];
    for args in runs {
        let one = lqgh(args, Some("1"));
        let four = lqgh(args, Some("4"));
        assert_eq!(code(&one), 0);
        assert_eq!(one.stdout, four.stdout, "{args:?}");
    }
}
