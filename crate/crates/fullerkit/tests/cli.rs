use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fullerkit")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn scenario_file(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).display().to_string()
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let out = run(&["find-orbits", "--scenario", "no-such-scenario"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(run(&["find-orbits", "--scenario", "hopf-s3", "--bogus"]).status.code(), Some(3));
    assert_eq!(run(&["--set", "newton.no_such_key=1", "list-scenarios"]).status.code(), Some(3));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn morse_bott_index_is_a_domain_error() {
    assert_eq!(run(&["index", "--scenario", "hopf-s3"]).status.code(), Some(2));
}

#[test]
fn list_scenarios_names_every_builtin() {
    let out = run(&["--no-meta", "list-scenarios"]);
    assert!(out.status.success());
    let ids: Vec<String> =
        json(&out)["results"].as_array().unwrap().iter().map(|s| s["id"].as_str().unwrap().to_string()).collect();
    let want: Vec<String> = fullerkit_core::scenarios::BUILTIN_IDS.iter().map(|s| s.to_string()).collect();
    assert_eq!(ids, want);
}

#[test]
fn output_is_deterministic_across_runs_and_thread_counts() {
    let args = ["--no-meta", "find-orbits", "--scenario", "blue-sky-torus", "--cap", "13"];
    let a = run(&[&["--threads", "1"], &args[..]].concat());
    let b = run(&[&["--threads", "4"], &args[..]].concat());
    let c = run(&[&["--threads", "4"], &args[..]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(b.stdout, c.stdout);
}

#[test]
fn meta_is_present_unless_suppressed() {
    let with = json(&run(&["list-scenarios"]));
    assert!(with.get("meta").is_some() && with.get("timings").is_some());
    let without = json(&run(&["--no-meta", "list-scenarios"]));
    assert!(without.get("meta").is_none() && without.get("timings").is_none());
}

#[test]
fn detect_sky_flags_the_blue_sky_family_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("csv");
    let out_file = dir.path().join("report.json");
    let out = run(&[
        "--no-meta",
        "--out",
        out_file.to_str().unwrap(),
        "--csv-dir",
        csv.to_str().unwrap(),
        "detect-sky",
        "--scenario",
        "blue-sky-torus",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(v["results"]["verdict"], "sky-flagged");
    assert_eq!(v["results"]["sky_witnesses"].as_array().unwrap().len(), 1);
    let mut reader = csv::Reader::from_path(csv.join("branch_0.csv")).unwrap();
    assert_eq!(reader.headers().unwrap().iter().take(3).collect::<Vec<_>>(), ["node_index", "t", "p"]);
    assert!(reader.records().count() > 1);
}

#[test]
fn perturbed_hopf_orbits_share_an_index_sign() {
    let out = run(&["--no-meta", "index", "--scenario", "hopf-perturbed", "--cap", "7"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let reports = v["results"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["fp_index"], reports[1]["fp_index"]);
    let cz: Vec<i64> = reports.iter().map(|r| r["cz_index"].as_i64().unwrap()).collect();
    assert_eq!((cz[0] - cz[1]).abs(), 2);
    assert_eq!(v["results"]["fuller"]["kind"]["finite"], serde_json::json!({ "num": 2, "den": 1 }));
}

#[test]
fn reeb_bound_reads_a_continue_report() {
    let dir = tempfile::tempdir().unwrap();
    let branch = dir.path().join("branch.json");
    let cont = run(&["--no-meta", "--out", branch.to_str().unwrap(), "continue", "--scenario", "hopf-rescale", "--t-target", "1"]);
    assert!(cont.status.success(), "{}", String::from_utf8_lossy(&cont.stderr));
    let good = run(&["--no-meta", "reeb-bound", "--scenario", "hopf-rescale", "--branch-file", branch.to_str().unwrap()]);
    assert!(good.status.success());
    assert_eq!(json(&good)["results"]["pass"], true);
    let bad = run(&[
        "--no-meta",
        "reeb-bound",
        "--scenario",
        "hopf-rescale",
        "--branch-file",
        branch.to_str().unwrap(),
        "--k-override",
        "-50",
    ]);
    assert!(bad.status.success());
    let v = json(&bad);
    assert_eq!(v["results"]["pass"], false);
    assert!(!v["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn config_overrides_are_echoed() {
    let v = json(&run(&["--no-meta", "--set", "newton.max_iter=7", "list-scenarios"]));
    assert_eq!(v["config"]["newton"]["max_iter"], 7);
}

#[test]
fn scenario_files_validate() {
    for id in fullerkit_core::scenarios::BUILTIN_IDS {
        let out = run(&["--no-meta", "validate-scenario", &scenario_file(&format!("{id}.json"))]);
        assert!(out.status.success(), "{id}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json(&out)["results"]["valid"], true);
    }
}

#[test]
fn malformed_scenario_files_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.json");
    std::fs::write(&p, r#"{"v": 1, "id": "x"}"#).unwrap();
    assert_eq!(run(&["validate-scenario", p.to_str().unwrap()]).status.code(), Some(3));
}
