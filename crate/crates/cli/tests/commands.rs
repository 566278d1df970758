use std::fs;
use std::path::Path;
use std::process::{Command as Process, Stdio};

use clap::Parser;
use ust_cli::commands::cmd_validate;
use ust_cli::output::{data_section, Header};
use ust_cli::validate::Implementations;
use ust_cli::{Cli, ExperimentConfig};
use ust_core::{LatticePath, LatticePoint, SpanningTree};

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("ust").chain(args.iter().copied())).unwrap()
}

fn fit_value(dir: &Path, key: &str) -> f64 {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(dir.join("beta_fit.csv")).unwrap();
    let headers = r.headers().unwrap().clone();
    let row = r.records().next().unwrap().unwrap();
    let i = headers.iter().position(|h| h == key).unwrap();
    row[i].parse().unwrap()
}

fn small_validate() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    let v = &mut cfg.validate;
    v.loop_erase_traces = 1000;
    v.exhaustive_length = 3;
    v.hitting_pairs = 100;
    v.uniformity_samples = 20_000;
    v.electrical_balls = 4;
    v.electrical_max_radius = 5;
    v.moment_balls = 2;
    v.moment_max_radius = 3;
    v.line_mc_runs = 2000;
    cfg
}

#[test]
fn doubling_samples_shrinks_the_standard_error() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, samples) in [(&a, "1000"), (&b, "2000")] {
        let args = ["beta", "--radii", "8,16,32", "--samples", samples, "--out", dir.path().to_str().unwrap()];
        assert!(ust_cli::run(&cli(&args)).unwrap().passed);
    }
    let ratio = fit_value(b.path(), "slope_se_sampling") / fit_value(a.path(), "slope_se_sampling");
    assert!((ratio - 0.5f64.sqrt()).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn single_radius_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = ust_cli::run(&cli(&["beta", "--radii", "16", "--samples", "200", "--out", dir.path().to_str().unwrap()])).unwrap_err();
    assert!(format!("{err:#}").contains("at least 3 distinct radii"), "{err:#}");
}

#[test]
fn zero_trees_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nothing");
    let outcome = ust_cli::run(&cli(&["collisions", "--trees", "0", "--out", out.to_str().unwrap()])).unwrap();
    assert!(outcome.passed);
    assert!(outcome.files.is_empty());
    assert!(!out.exists());
}

#[test]
fn corrupted_loop_erasure_fails_validation_by_name() {
    fn first_visits(path: &LatticePath) -> LatticePath {
        let mut seen = std::collections::HashSet::new();
        let kept: Vec<LatticePoint> = path.vertices().iter().copied().filter(|p| seen.insert(*p)).collect();
        LatticePath::new(kept).unwrap_or_else(|_| path.clone())
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { out: dir.path().to_path_buf(), ..small_validate() };
    let imp = Implementations { loop_erase: first_visits, ..Implementations::default() };
    let outcome = cmd_validate(&cfg, Header::new("validate", cfg.seed, cfg.to_json()), &imp).unwrap();
    assert!(!outcome.passed);
    let failed: Vec<_> = outcome.summary.iter().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(failed.len(), 1, "{failed:?}");
    assert!(failed[0].starts_with("FAIL loop_erase_naive"));
}

#[test]
fn validation_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let cfg = ExperimentConfig { out: dir.path().join(k.to_string()), ..small_validate() };
        let outcome = cmd_validate(&cfg, Header::new("validate", cfg.seed, cfg.to_json()), &Implementations::default()).unwrap();
        assert!(outcome.passed, "{:?}", outcome.summary);
        texts.push(data_section(&fs::read_to_string(cfg.out.join("validate.jsonl")).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
    assert!(!texts[0].is_empty());
}

#[test]
fn tree_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = ust_cli::run(&cli(&["sample-ust", "--r", "4", "--count", "2", "--seed", "11", "--out", dir.path().to_str().unwrap()])).unwrap();
    assert!(outcome.passed);
    for k in 0..2 {
        let text = fs::read_to_string(dir.path().join(format!("tree_{k:04}.txt"))).unwrap();
        let tree = SpanningTree::from_text(&text).unwrap();
        assert_eq!(tree.to_text(), text);
        assert!(text.contains("# note run seed 11 index"));
    }
}

#[test]
fn every_file_carries_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--seed", "21", "resistance", "--r", "6", "--trees", "4", "--out", dir.path().to_str().unwrap()];
    let outcome = ust_cli::run(&cli(&args)).unwrap();
    assert!(outcome.passed);
    for f in &outcome.files {
        let text = fs::read_to_string(f).unwrap();
        if f.extension().unwrap() == "csv" {
            assert!(text.starts_with("# tool: ust\n"));
            assert!(text.contains("# seed: 21\n"));
            assert!(text.contains("# timestamp: "));
            assert!(text.contains("\"lambda_grid\":[2.0,4.0,8.0,16.0]"));
        } else {
            let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
            assert_eq!(first["header"]["seed"], 21);
            assert_eq!(first["header"]["config"]["resistance"]["radii"][0], 6);
            assert!(first["header"]["version"].is_string());
        }
    }
}

#[test]
fn binary_reports_errors_with_exit_code_two() {
    let bin = env!("CARGO_BIN_EXE_ust");
    let dir = tempfile::tempdir().unwrap();
    let status = Process::new(bin)
        .args(["beta", "--radii", "16", "--out"])
        .arg(dir.path())
        .stderr(Stdio::null())
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Process::new(bin).args(["--workers", "0", "validate"]).arg("--out").arg(dir.path()).stderr(Stdio::null()).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn worker_count_comes_from_the_environment_when_unset() {
    let bin = env!("CARGO_BIN_EXE_ust");
    let dir = tempfile::tempdir().unwrap();
    let status = Process::new(bin)
        .env(ust_cli::WORKERS_ENV, "zero")
        .args(["sample-ust", "--r", "2", "--out"])
        .arg(dir.path())
        .stderr(Stdio::null())
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Process::new(bin)
        .env(ust_cli::WORKERS_ENV, "2")
        .args(["sample-ust", "--r", "2", "--out"])
        .arg(dir.path())
        .stderr(Stdio::null())
        .stdout(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
}
