use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use epinet::ingest::write_cases_csv;
use epinet::synthetic::{planted_cases, PlantedConfig};
use tempfile::TempDir;

fn fixture() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cases.csv");
    let cases = planted_cases(&PlantedConfig::default()).unwrap().cases;
    write_cases_csv(&cases, fs::File::create(&path).unwrap()).unwrap();
    (dir, path)
}

fn epinet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epinet"))
        .args(args)
        .env_remove("EPINET_SEED")
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn csv_map(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.rsplit_once(',').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

#[test]
fn pipeline_recovers_planted_groups() {
    let (dir, input) = fixture();
    let out = dir.path().join("run");
    let res = epinet(&["pipeline", "--input", s(&input), "--out", s(&out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let written = files(&out);
    for name in [
        "selected.csv", "network.graphml", "edges.csv", "partition.csv", "summary.json",
        "medians.csv", "trajectory.csv", "smoothed.csv", "peaks.csv",
    ] {
        assert!(written.contains_key(name), "missing {name}");
    }
    let summary: serde_json::Value = serde_json::from_slice(&written["summary.json"]).unwrap();
    assert_eq!(summary["community_sizes"], serde_json::json!([10, 10, 10]));
    assert_eq!(summary["settings_fingerprint"]["seed"], 0);

    // every planted group lands in one community
    let partition = csv_map(std::str::from_utf8(&written["partition.csv"]).unwrap());
    let mut by_group: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (region, label) in partition {
        let group = region.split(':').next().unwrap().to_string();
        by_group.entry(group).or_default().push(label);
    }
    assert_eq!(by_group.len(), 3);
    for labels in by_group.values() {
        assert!(labels.iter().all(|l| l == &labels[0]));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (dir, input) = fixture();
    let out = dir.path().join("run");
    let args = ["pipeline", "--input", s(&input), "--out", s(&out), "--seed", "5"];
    assert!(epinet(&args).status.success());
    let first = files(&out);
    assert!(epinet(&args).status.success());
    assert_eq!(first, files(&out));
}

#[test]
fn missing_input_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let res = epinet(&["pipeline", "--input", s(&dir.path().join("absent.csv")), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&res.stderr);
    let json = stderr.lines().find(|l| l.starts_with('{')).unwrap();
    let v: serde_json::Value = serde_json::from_str(json).unwrap();
    assert_eq!(v["exit_code"], 2);
    assert!(!out.exists());
}

#[test]
fn edgeless_network_exits_3() {
    let (dir, input) = fixture();
    let out = dir.path().join("run");
    let res = epinet(&["pipeline", "--input", s(&input), "--rho", "0.9999", "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(3));
    assert!(!out.exists());
}

#[test]
fn bad_measure_is_a_usage_error() {
    let res = epinet(&["network", "--measure", "spearman"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn single_cell_grid_matches_single_run() {
    let (dir, input) = fixture();
    let config = dir.path().join("grid.conf");
    fs::write(&config, "grid_rho = 0\ngrid_alpha = 7\ngrid_measures = pearson\n").unwrap();
    let grid_out = dir.path().join("grid");
    let run_out = dir.path().join("single");
    let res = epinet(&["grid", "--input", s(&input), "--config", s(&config), "--out", s(&grid_out)]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(epinet(&["pipeline", "--input", s(&input), "--out", s(&run_out)]).status.success());

    let matrix = fs::read_to_string(grid_out.join("membership_matrix.csv")).unwrap();
    assert_eq!(matrix.lines().next().unwrap(), "region,rho0_a7_pearson");
    let grid = csv_map(&matrix);
    let single = csv_map(&fs::read_to_string(run_out.join("partition.csv")).unwrap());
    assert_eq!(grid.len(), single.len());
    for (region, label) in &single {
        // grid labels count from 1, partition labels from 0
        let shifted = label.parse::<usize>().unwrap() + 1;
        assert_eq!(grid[region], shifted.to_string(), "{region}");
    }
}

#[test]
fn grid_output_independent_of_jobs() {
    let (dir, input) = fixture();
    let out = dir.path().join("grid");
    assert!(epinet(&["grid", "--input", s(&input), "--jobs", "1", "--out", s(&out)]).status.success());
    let serial = files(&out);
    assert!(epinet(&["grid", "--input", s(&input), "--jobs", "8", "--out", s(&out)]).status.success());
    assert_eq!(serial, files(&out));

    // only the recorded config mentions the output directory
    let elsewhere = dir.path().join("elsewhere");
    assert!(epinet(&["grid", "--input", s(&input), "--jobs", "3", "--out", s(&elsewhere)]).status.success());
    let mut moved = files(&elsewhere);
    let mut serial = serial;
    assert!(moved.remove("grid_config.json").is_some());
    serial.remove("grid_config.json");
    assert_eq!(serial, moved);
}

#[test]
fn transform_writes_trace() {
    let (dir, input) = fixture();
    let out = dir.path().join("t");
    let res = epinet(&["transform", "--input", s(&input), "--alpha", "5", "--out", s(&out)]);
    assert!(res.status.success());
    let trace = fs::read_to_string(out.join("transform.csv")).unwrap();
    assert!(trace.starts_with("region,date,diff,avg7,exponent,defined\n"));
    // 30 regions x 420 days
    assert_eq!(trace.lines().count(), 1 + 30 * 420);
}

#[test]
fn seed_precedence_flag_over_env_over_default() {
    let (dir, input) = fixture();
    let out = dir.path().join("n");
    let read_seed = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_epinet"));
        cmd.args(["pipeline", "--input", s(&input), "--out", s(&out)]).env_remove("EPINET_SEED");
        if let Some(e) = env {
            cmd.env("EPINET_SEED", e);
        }
        if let Some(f) = flag {
            cmd.args(["--seed", f]);
        }
        assert!(cmd.output().unwrap().status.success());
        let v: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
        v["config"]["seed"].as_u64().unwrap()
    };
    assert_eq!(read_seed(None, None), 0);
    assert_eq!(read_seed(Some("11"), None), 11);
    assert_eq!(read_seed(Some("11"), Some("4")), 4);
}
