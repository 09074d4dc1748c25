use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cacheopt")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn run_json(args: &[&str]) -> Value {
    serde_json::from_str(&run_ok(args)).unwrap()
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    serde_json::from_value(v.clone()).unwrap()
}

fn temp_file(name: &str, content: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("cacheopt-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

#[test]
fn optimize_small_cache() {
    let v = run_json(&["optimize", "--files", "7", "--users", "4", "--cache", "1", "--zipf", "0.56"]);
    for row in matrix(&v["placement"]) {
        assert!((row[0] - 0.4286).abs() < 5e-5);
        assert!((row[1] - 0.1429).abs() < 5e-5);
        assert!(row[2..].iter().all(|x| x.abs() < 1e-12));
    }
    assert_eq!(v["groups"], 1);
    assert!(v["rate_mccs"].as_f64().unwrap() <= v["rate_ccs_opt"].as_f64().unwrap());
}

#[test]
fn optimize_two_groups() {
    let v = run_json(&["optimize", "-N", "9", "-K", "4", "-M", "3", "--zipf", "1.2"]);
    assert_eq!(v["groups"], 2);
    let a = matrix(&v["placement"]);
    assert!(a[..4].iter().all(|r| (r[3] - 0.25).abs() < 5e-4));
    assert!(a[4..].iter().all(|r| (r[0] - 1.0).abs() < 5e-4));
}

#[test]
fn empty_cache_rate_is_expected_distinct_count() {
    let p = [0.4, 0.3, 0.2, 0.1];
    let v = run_json(&["optimize", "-K", "3", "-M", "0", "--popularity", "[0.4,0.3,0.2,0.1]"]);
    let expected: f64 = p.iter().map(|q: &f64| 1.0 - (1.0 - q).powi(3)).sum();
    assert!((v["rate_mccs"].as_f64().unwrap() - expected).abs() < 1e-12);
}

#[test]
fn lp_method_agrees_with_search() {
    let args = ["optimize", "-N", "6", "-K", "3", "-M", "2.3", "--zipf", "0.9"];
    let search = run_json(&args);
    let lp = run_json(&[&args[..], &["--method", "lp"]].concat());
    let (a, b) = (search["rate_mccs"].as_f64().unwrap(), lp["rate_mccs"].as_f64().unwrap());
    assert!((a - b).abs() < 1e-6);
}

#[test]
fn unsorted_popularity_reports_file_order() {
    let v = run_json(&["optimize", "-K", "2", "-M", "1", "--popularity", "[0.2,0.5,0.3]"]);
    assert_eq!(v["file_order"], serde_json::json!([2, 3, 1]));
}

#[test]
fn instance_file_source() {
    let path = temp_file("inst.json", r#"{"users": 4, "cache": 1, "files": 7, "zipf": 0.56}"#);
    let from_file = run_ok(&["optimize", "--instance", path.to_str().unwrap(), "--format", "csv"]);
    let from_flags = run_ok(&["optimize", "-N", "7", "-K", "4", "-M", "1", "--zipf", "0.56", "--format", "csv"]);
    assert_eq!(from_file, from_flags);
}

#[test]
fn sweep_csv_is_stable_and_ordered() {
    let args = ["sweep", "-N", "5", "-K", "3", "--zipf", "0.56", "--start", "0", "--stop", "5", "--step", "0.5"];
    let a = run_ok(&args);
    let b = run_ok(&args);
    let single = Command::new(env!("CARGO_BIN_EXE_cacheopt"))
        .args(args)
        .env("CACHEOPT_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(a, b);
    assert_eq!(a.as_bytes(), single.stdout.as_slice());
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("x,mccs_opt,ccs_opt,lb_p1,lb_p2"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    for w in rows.windows(2) {
        assert!(w[1][0] > w[0][0]);
        for c in 1..5 {
            assert!(w[1][c] <= w[0][c] + 1e-6);
        }
    }
    for r in &rows {
        assert!(r[1] <= r[2] + 1e-6);
        assert!(r[3] <= r[4] + 1e-6 && r[4] <= r[1] + 1e-6);
    }
}

#[test]
fn theta_sweep_keeps_modified_scheme_ahead() {
    let out = run_ok(&["sweep", "-N", "7", "-K", "4", "-M", "1", "--zipf", "0", "--vary", "theta", "--start", "0", "--stop", "1.5", "--step", "0.5"]);
    for line in out.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(v[1] <= v[2]);
    }
}

#[test]
fn single_point_sweep_with_extra_columns() {
    let out = run_ok(&["sweep", "-N", "3", "-K", "2", "--zipf", "0.7", "--start", "1", "--stop", "1", "--step", "1", "--extra"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "x,mccs_opt,ccs_opt,lb_p1,lb_p2,p4,lb_p5");
    assert_eq!(lines.len(), 2);
}

#[test]
fn rate_of_optimized_placement() {
    let report = run_ok(&["optimize", "-N", "7", "-K", "4", "-M", "1", "--zipf", "0.56"]);
    let path = temp_file("table1.json", &report);
    let a = matrix(&serde_json::from_str::<Value>(&report).unwrap()["placement"]);
    let p = path.to_str().unwrap();

    let v = run_json(&["rate", "--placement", p, "--demand", "1,2,3,4"]);
    assert!((v["rate_mccs"].as_f64().unwrap() - v["rlb"].as_f64().unwrap()).abs() < 1e-12);

    let v = run_json(&["rate", "--placement", p, "--demand", "1,1,1,1"]);
    let expected = a[0][0] + 3.0 * a[0][1] + 3.0 * a[0][2] + a[0][3];
    assert!((v["rate_mccs"].as_f64().unwrap() - expected).abs() < 1e-12);
    assert_eq!(v["leader_group"], serde_json::json!([1]));
}

#[test]
fn rate_on_three_user_example() {
    let path = temp_file("k3.json", "[[0.15, 0.2, 0.05, 0.1], [0.55, 0.1, 0.05, 0.0]]");
    let v = run_json(&["rate", "--placement", path.to_str().unwrap(), "--demand", "1,1,2"]);
    let gap = v["rate_mccs"].as_f64().unwrap() - v["rlb"].as_f64().unwrap();
    assert!((gap - (0.2 - 0.1)).abs() < 1e-12);
}

#[test]
fn bound_json_shape() {
    let v = run_json(&["bound", "-N", "4", "-K", "3", "-M", "1", "--zipf", "0.56", "--which", "p2"]);
    assert_eq!(v["which"], "P2");
    assert!(v["value"].as_f64().unwrap() > 0.0);
    assert_eq!(matrix(&v["placement"]).len(), 4);
}

fn assert_fails(args: &[&str], code: i32) {
    let out = run(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error["));
}

#[test]
fn error_exit_codes() {
    assert_fails(&["optimize", "-N", "7", "-K", "4", "-M", "1"], 2);
    assert_fails(&["optimize", "-N", "7", "-K", "4", "-M", "8", "--zipf", "1"], 2);
    assert_fails(&["optimize", "--popularity", "[0.5,", "-K", "2", "-M", "1"], 2);
    assert_fails(&["optimize", "--nonsense"], 2);
    assert_fails(&["sweep", "-N", "3", "-K", "2", "--zipf", "1", "--start", "1", "--stop", "0", "--step", "1"], 2);
    assert_fails(&["optimize", "-N", "40", "-K", "9", "-M", "1", "--zipf", "1"], 3);
    let bad = temp_file("bad.json", "[[0.5, 0.1], [1.0, 0.0]]");
    assert_fails(&["rate", "--placement", bad.to_str().unwrap(), "--demand", "1"], 2);
    let ok = temp_file("ok.json", "[[0.5, 0.25], [1.0, 0.0]]");
    assert_fails(&["rate", "--placement", ok.to_str().unwrap(), "--demand", "3"], 2);
}

#[test]
fn selftest_passes() {
    let out = run_ok(&["selftest"]);
    assert!(out.lines().all(|l| l.starts_with("PASS")));
}
