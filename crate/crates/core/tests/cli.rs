use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const SHORT: &str = r#"{"demand": {"source": "synthetic", "days": 3}}"#;

fn bidsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bidsim"))
        .args(args)
        .env_remove("BIDSIM_SEED")
        .output()
        .expect("binary runs")
}

fn short_config(dir: &Path) -> String {
    let path = dir.join("short.json");
    fs::write(&path, SHORT).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_config_exits_with_two() {
    let o = bidsim(&["run", "--config", "/nonexistent/bidsim.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/bidsim.json"), "{}", stderr(&o));
}

#[test]
fn invalid_values_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"sac": {"gamma": 1.5}}"#).unwrap();
    let o = bidsim(&["validate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sac.gamma"), "{}", stderr(&o));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(bidsim(&["train"]).status.code(), Some(2));
}

#[test]
fn run_writes_metrics_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let o = bidsim(&["run", "--config", &cfg, "--policy", "sac", "--seed", "4", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let metrics: Value = serde_json::from_slice(&fs::read(out_a.join("metrics.json")).unwrap()).unwrap();
    for field in [
        "avg_revenue_per_day",
        "pct_bid_capacity_cleared",
        "pct_preshield_violations",
        "pct_generator_bids",
    ] {
        assert!(metrics[field].is_number(), "missing {field}");
    }
    assert_eq!(metrics["policy"], "sac");
    for file in ["metrics.json", "trace.csv", "cumulative_revenue.csv", "soe.csv", "bids.csv", "clearing_price.csv"] {
        assert_eq!(fs::read(out_a.join(file)).unwrap(), fs::read(out_b.join(file)).unwrap(), "{file}");
    }
}

#[test]
fn compare_matches_standalone_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let cmp = dir.path().join("cmp");
    let solo = dir.path().join("solo");
    let o = bidsim(&["compare", "--config", &cfg, "--seed", "2", "--out", cmp.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bidsim(&["run", "--config", &cfg, "--policy", "mpc", "--seed", "2", "--out", solo.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(cmp.join("mpc").join("trace.csv")).unwrap(),
        fs::read(solo.join("trace.csv")).unwrap()
    );
    assert!(cmp.join("sac").join("metrics.json").exists());
}

#[test]
fn validate_prints_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = short_config(dir.path());
    let o = bidsim(&["validate", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["demand"]["days"], 3);
    assert_eq!(v["mpc"]["horizon"], 48);
}
