use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn coopcache(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coopcache"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = coopcache(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("template.toml"),
        "num_nodes = 6\nlibrary_size = 40\ncache_size = 4\narea_side = 30.0\n",
    )
    .unwrap();
    let scenario = ok(dir.path(), &["generate", "template.toml", "--seed", "4"]);
    fs::write(dir.path().join("scenario.toml"), scenario).unwrap();
    dir
}

#[test]
fn subcommands_are_reproducible() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(
        ok(d, &["generate", "template.toml", "--seed", "4"]),
        fs::read(d.join("scenario.toml")).unwrap()
    );
    for args in [
        &["cluster", "scenario.toml"][..],
        &["place", "scenario.toml", "--scheme", "proposed"],
        &["place", "scenario.toml", "--scheme", "lpc"],
        &["evaluate", "scenario.toml", "--scheme", "gpc"],
        &["oracle", "scenario.toml", "--budget", "1"],
    ] {
        assert_eq!(ok(d, args), ok(d, args), "{args:?}");
    }
}

#[test]
fn placement_file_round_trips_through_evaluate() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["--output", "out", "place", "scenario.toml"]);
    let summary: Value =
        serde_json::from_slice(&fs::read(d.join("out/placement.json")).unwrap()).unwrap();
    let report: Value = serde_json::from_slice(&ok(
        d,
        &[
            "evaluate",
            "scenario.toml",
            "--placement",
            "out/placement.csv",
        ],
    ))
    .unwrap();
    let (a, b) = (
        summary["total"].as_f64().unwrap(),
        report["total"].as_f64().unwrap(),
    );
    assert!((a - b).abs() <= 1e-9 * a);
    let csv = fs::read_to_string(d.join("out/placement.csv")).unwrap();
    assert!(csv.starts_with("node_id,file_id\n"));
    assert_eq!(
        csv.lines().count() - 1,
        summary["cached_files"].as_u64().unwrap() as usize
    );
}

#[test]
fn cluster_json_and_graph_dump() {
    let dir = setup();
    let d = dir.path();
    let json: Value = serde_json::from_slice(&ok(
        d,
        &["cluster", "scenario.toml", "--dump-graph", "g.txt"],
    ))
    .unwrap();
    let clustered: usize = json["clusters"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["members"].as_array().unwrap().len())
        .sum();
    assert_eq!(
        clustered + json["nonclustered"].as_array().unwrap().len(),
        6
    );
    let dump = fs::read_to_string(d.join("g.txt")).unwrap();
    assert_eq!(dump.lines().count(), 6);
    assert!(dump.starts_with("0:"));
}

#[test]
fn exit_codes() {
    let dir = setup();
    let d = dir.path();
    let scenario = fs::read_to_string(d.join("scenario.toml")).unwrap();
    fs::write(
        d.join("bad.toml"),
        scenario.replace("cache_size = 4", "cache_size = 41"),
    )
    .unwrap();
    let out = coopcache(d, &["place", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("K exceeds F"));
    assert_eq!(
        coopcache(d, &["place", "scenario.toml", "--scheme", "best"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(coopcache(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        coopcache(d, &["place", "missing.toml"]).status.code(),
        Some(2)
    );
    assert_eq!(coopcache(d, &["--help"]).status.code(), Some(0));
}

#[test]
fn oracle_reports_gaps_on_tiny_instance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("t.toml"),
        "num_nodes = 3\nlibrary_size = 8\ncache_size = 2\narea_side = 20.0\n",
    )
    .unwrap();
    fs::write(
        d.join("s.toml"),
        ok(d, &["generate", "t.toml", "--seed", "1"]),
    )
    .unwrap();
    let json: Value = serde_json::from_slice(&ok(d, &["oracle", "s.toml"])).unwrap();
    let opt = json["optimum"].as_f64().unwrap();
    for gap in json["schemes"].as_array().unwrap() {
        let ratio = gap["ratio"].as_f64().unwrap();
        assert!(ratio > 0.0 && ratio <= 1.0 + 1e-12);
        assert!((gap["total"].as_f64().unwrap() / opt - ratio).abs() < 1e-12);
    }
    assert!(
        json["greedy_objective"].as_f64().unwrap()
            <= json["exact_objective"].as_f64().unwrap() * (1.0 + 1e-12)
    );
}

#[test]
fn uniform_gpc_sweep_doubles_with_storage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("exp.toml"),
        "seeds = [3]\nschemes = [\"gpc\"]\n[sweep]\nparam = \"K\"\nvalues = [1, 2]\n\
         [base]\nnum_nodes = 5\nlibrary_size = 20\nzipf_z = 0.0\n",
    )
    .unwrap();
    ok(
        d,
        &["sweep", "exp.toml", "--output", "res", "--threads", "2"],
    );
    let rows = fs::read_to_string(d.join("res/rows.csv")).unwrap();
    let mut lines = rows.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_param,value,seed,scheme,T,T_c,T_n,T_d,n_clusters,wall_ms"
    );
    let totals: Vec<f64> = lines
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(totals.len(), 2);
    assert!((totals[1] - 2.0 * totals[0]).abs() <= 1e-12 * totals[1]);
    let summary = fs::read_to_string(d.join("res/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}
