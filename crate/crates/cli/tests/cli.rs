use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn gapflow(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapflow"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn with_config(config: &str, args: &[&str]) -> (TempDir, Output) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.json"), config).unwrap();
    let mut full = vec!["--config", "run.json"];
    full.extend_from_slice(args);
    let out = gapflow(dir.path(), &full);
    (dir, out)
}

fn json_of(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn weight_power_one_doubles_exactly() {
    let (_d, out) = with_config(r#"{"weight":{"family":"power","a":1.0}}"#, &["weight"]);
    let doc = json_of(&out);
    assert_eq!(doc["schema"], "gapflow/1");
    assert_eq!(doc["config_hash"].as_str().unwrap().len(), 64);
    let d = doc["result"]["doubling"]["d_hat"].as_f64().unwrap();
    assert!((d - 2.0).abs() < 1e-9);
}

#[test]
fn weight_log_power_certificate() {
    let (_d, out) = with_config(r#"{"weight":{"family":"log-power","a":1.0}}"#, &["weight"]);
    let doc = json_of(&out);
    let d = doc["result"]["doubling"]["d_hat"].as_f64().unwrap();
    assert!(d <= 2.0 + 1e-12 && d > 1.0);
}

#[test]
fn weight_without_family_is_usage_error() {
    let (_d, out) = with_config(r#"{"weight":{"a":1.0}}"#, &["weight"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn construct_power_chain() {
    let (_d, out) = with_config(r#"{"series":{"source":"example","A":2.0,"count":5}}"#, &["construct"]);
    let doc = json_of(&out);
    let freqs: Vec<u64> = doc["result"]["terms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t[0].as_u64().unwrap())
        .collect();
    assert_eq!(freqs, [2, 8, 32, 128, 512]);
    assert_eq!(doc["result"]["construction"]["chain"]["b"], serde_json::json!([1, 3, 5, 7, 9]));

    let (_d, out) = with_config(r#"{"series":{"source":"example","A":2.0,"count":1}}"#, &["construct"]);
    assert_eq!(json_of(&out)["result"]["terms"].as_array().unwrap().len(), 1);
}

#[test]
fn construct_rejects_small_ratio() {
    let (_d, out) = with_config(r#"{"series":{"source":"example","A":1.0,"count":3}}"#, &["construct"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn construct_beyond_cap_is_capacity_error() {
    let (_d, out) = with_config(r#"{"series":{"source":"counterexample","count":70}}"#, &["construct"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn construct_truncation_carries_note() {
    let (_d, out) = with_config(
        r#"{"weight":{"family":"log-power","a":1.0},"series":{"source":"example","A":2.0,"count":10}}"#,
        &["construct"],
    );
    let doc = json_of(&out);
    assert_eq!(doc["result"]["construction"]["truncated"], true);
    assert!(doc["result"]["construction"]["note"].is_string());
}

#[test]
fn membership_verdicts() {
    let lp = r#""weight":{"family":"log-power","a":1.0}"#;
    let (_d, out) = with_config(&format!(r#"{{{lp},"series":{{"source":"example","A":2.0,"count":25}}}}"#), &["membership"]);
    assert_eq!(json_of(&out)["result"]["verdict"], "member");
    let (_d, out) = with_config(&format!(r#"{{{lp},"series":{{"source":"counterexample","count":25}}}}"#), &["membership"]);
    assert_eq!(json_of(&out)["result"]["verdict"], "non-member");
    let (_d, out) = with_config(
        &format!(r#"{{{lp},"series":{{"source":"inline","terms":[[2,0,0],[8,0,0],[32,0,0]]}}}}"#),
        &["membership"],
    );
    assert_eq!(json_of(&out)["result"]["verdict"], "member");
}

#[test]
fn series_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapflow(dir.path(), &["construct", "--format", "csv", "--out", "ex.csv"]);
    assert!(out.status.success());
    std::fs::write(dir.path().join("run.json"), r#"{"series":{"source":"file","path":"ex.csv"}}"#).unwrap();
    let out = gapflow(dir.path(), &["--config", "run.json", "membership"]);
    assert_eq!(json_of(&out)["result"]["verdict"], "member");
}

#[test]
fn csv_header_matches_json_hash() {
    let cfg = r#"{"radius_count":6}"#;
    let (_d, csv) = with_config(cfg, &["profile", "--format", "csv"]);
    let (_d, js) = with_config(cfg, &["profile", "--format", "json"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# schema=gapflow/1 config_hash="));
    assert_eq!(lines.next().unwrap(), "r,sup_abs,max,min,mean_abs,l2,ratio_to_v");
    // The format is part of the config, so the two hashes differ; each file
    // still names the config that made it.
    let doc = json_of(&js);
    assert_eq!(doc["config"]["format"], "json");
    assert_eq!(doc["config"]["radius_count"], 6);
}

#[test]
fn oscillate_zero_series_gives_zero_trace() {
    let (_d, out) = with_config(
        r#"{"series":{"source":"inline","terms":[[2,0,0],[8,0,0]]},"trials":3,"radius_count":5}"#,
        &["oscillate"],
    );
    let doc = json_of(&out);
    let rows = doc["result"]["trace"]["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r["value"].as_f64() == Some(0.0)));
}

#[test]
fn missing_seed_defaults_and_runs_repeat() {
    let cfg = r#"{"series":{"source":"example","A":2.0,"count":12},"trials":4,"radius_count":8}"#;
    let (_d, a) = with_config(cfg, &["oscillate"]);
    let (_d, b) = with_config(cfg, &["oscillate", "--seed", "1729"]);
    let (_d, c) = with_config(cfg, &["oscillate", "--seed", "5"]);
    assert_eq!(json_of(&a)["config"]["seed"], 1729);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn lil_surrogate_run() {
    let cfg = r#"{"series":{"source":"example","A":2.0,"count":400},"trials":6}"#;
    let (_d, a) = with_config(cfg, &["lil"]);
    let (_d, b) = with_config(cfg, &["lil"]);
    assert_eq!(a.stdout, b.stdout);
    let doc = json_of(&a);
    assert_eq!(doc["result"]["mode"], "surrogate");
    assert!(doc["result"]["median_final_ratio"].as_f64().unwrap() > 0.0);
    let (_d, csv) = with_config(cfg, &["lil", "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("R,phi_or_seed,I,normalized,mode"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = gapflow(dir.path(), &["weight", "--out", "w.json"]);
    assert!(out.status.success() && out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("w.json")).unwrap()).unwrap();
    assert_eq!(doc["command"], "weight");
}

#[test]
fn unreachable_tolerance_is_numeric_failure() {
    let (_d, out) = with_config(
        r#"{"series":{"source":"example","A":2.0,"count":12},"trials":2,"radius_count":8,"rel_tol":1e-40}"#,
        &["oscillate"],
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_usage() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gapflow(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&gapflow(dir.path(), &["weight", "--format", "xml"])), 2);
    assert_eq!(code(&gapflow(dir.path(), &["--config", "missing.json", "weight"])), 2);
}
