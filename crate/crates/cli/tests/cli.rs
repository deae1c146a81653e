//! End-to-end runs of the `orthant` binary.

use std::fs;
use std::process::Command;

use orthant_cli::parse_config;
use serde_json::Value;

fn orthant(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_orthant")).args(args).output().unwrap()
}

fn data_rows(csv_text: &str) -> Vec<Vec<String>> {
    let body: String = csv_text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    csv::Reader::from_reader(body.as_bytes())
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn theta_run_writes_provenance_and_endpoint_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "p_grid = [0.0, 1.0]\nn_list = [1, 2]\nwindow = 6\ntrials = 40\n").unwrap();
    let out = dir.path().join("out");
    let res = orthant(&[
        "theta",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "3",
        "--threads",
        "2",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("theta.csv")).unwrap();
    assert!(text.starts_with("# orthant "));
    assert!(text.contains("# config_hash "));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 4);
    for r in rows {
        let want = if r[0] == "0" { "40" } else { "0" };
        assert_eq!(r[3], want, "row {r:?}");
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "theta");
    assert_eq!(manifest["threads"], 2);
    // The echoed configuration reproduces the hash.
    let echoed = parse_config(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(echoed.seed, 3);
    assert_eq!(manifest["config_hash"], echoed.hash());
}

#[test]
fn flag_overrides_replace_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "p_grid = [0.5]\nn = 1\nwindow = 1\n").unwrap();
    let out = dir.path().join("out");
    let res = orthant(&[
        "oracle",
        "--config",
        cfg.to_str().unwrap(),
        "--p-grid",
        "[0.25, 0.75]",
        "--threads",
        "1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let echoed = parse_config(&fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(echoed.p_grid, vec![0.25, 0.75]);
    let doc: Value = serde_json::from_str(&fs::read_to_string(out.join("oracle.json")).unwrap()).unwrap();
    assert!(doc.get("provenance").is_some() && doc.get("data").is_some());
}

#[test]
fn errors_are_json_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cases: [(&[&str], &str); 2] = [
        (&["theta", "--trials", "0", "--eta", "3/2"], "InvalidConfig"),
        (&["oracle", "--window", "3", "--n", "1"], "EnumerationTooLarge"),
    ];
    for (args, kind) in cases {
        let mut a = args.to_vec();
        a.extend(["--out-dir", out.to_str().unwrap()]);
        let res = orthant(&a);
        assert_eq!(res.status.code(), Some(2), "{args:?}");
        let diag: Value = serde_json::from_slice(&res.stderr).unwrap();
        assert_eq!(diag["kind"], kind, "{args:?}");
    }
}

#[test]
fn invalid_config_reports_every_key() {
    let err = parse_config("d = 9\ntrials = 0\nunknown_key = 1\n").unwrap_err();
    let text = err.to_string();
    assert!(text.contains("unknown_key") || text.contains("unknown"), "{text}");
    let err = parse_config("d = 9\ntrials = 0\n").unwrap_err();
    assert_eq!(err.0.len(), 2, "{err:?}");
}

#[test]
fn explore_trace_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = orthant(&[
        "explore-trace",
        "--p",
        "0.4",
        "--n",
        "2",
        "--k",
        "1",
        "--window",
        "6",
        "--seed",
        "1",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(out.join("trace.jsonl")).unwrap();
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.len() >= 2);
    assert!(lines[0].get("provenance").is_some() || lines[0].get("config_hash").is_some());
}
