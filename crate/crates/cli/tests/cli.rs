use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn polyround(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyround")).args(args).output().expect("binary runs")
}

fn structured(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "structured"]);
    let out = polyround(&all);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn same_seed_gives_identical_bytes() {
    let input = fixture("tiny_gap.json");
    let input = input.to_str().unwrap();
    for extra in [&[][..], &["--randomized"][..]] {
        let mut args = vec!["solve-gap-cap", "--input", input, "--seed", "7", "--format", "structured"];
        args.extend(extra);
        let a = polyround(&args);
        let b = polyround(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout);
    }
}

#[test]
fn gap_report_respects_capacities() {
    let input = fixture("tiny_gap.json");
    let r = structured(&["solve-gap-cap", "--input", input.to_str().unwrap()]);
    let counts: Vec<u64> = r["counts"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert!(counts.iter().all(|&c| c <= 2));
    assert!(r["makespan"].as_f64().unwrap() < 2.0 * r["lp_makespan"].as_f64().unwrap());
    assert!(r["cost"].as_f64().unwrap() <= 4.0 + 1e-6);
}

#[test]
fn half_fractional_marginals_stay_in_band() {
    let input = fixture("half_fractional.json");
    let r = structured(&["montecarlo", "--input", input.to_str().unwrap(), "--trials", "10000", "--seed", "3"]);
    assert_eq!(r["trials"], 10000);
    assert_eq!(r["within_band"], true);
    for e in r["edges"].as_array().unwrap() {
        assert!(e["deviation"].as_f64().unwrap() <= 4.0 * (0.25f64 / 10000.0).sqrt());
    }
}

#[test]
fn montecarlo_is_reproducible_across_workers() {
    let input = fixture("outlier.json");
    let args = ["montecarlo", "--input", input.to_str().unwrap(), "--trials", "500", "--seed", "11", "--format", "structured"];
    let a = polyround(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_polyround")).args(args).env("RAYON_NUM_THREADS", "1").output().unwrap();
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn outlier_report_meets_the_floor() {
    let input = fixture("outlier.json");
    let r = structured(&["solve-outlier", "--input", input.to_str().unwrap()]);
    assert!(r["profit"].as_f64().unwrap() >= 12.0);
    assert!(r["cost"].as_f64().unwrap() <= 1.5 * 6.0 + 1e-6);
    assert!(r["makespan"].as_f64().unwrap() <= 2.5 * r["lp_makespan"].as_f64().unwrap() + 1e-6);
}

#[test]
fn maxmin_variants_report_allocations() {
    let plain = fixture("maxmin.json");
    let r = structured(&["solve-maxmin", "--input", plain.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(r["variant"], "configuration");
    assert_eq!(r["owner"].as_array().unwrap().len(), 6);

    let capped = fixture("maxmin_caps.json");
    let r = structured(&["solve-maxmin", "--input", capped.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(r["variant"], "capacitated");
    for c in r["counts"].as_array().unwrap() {
        assert!(c.as_u64().unwrap() <= 2);
    }
}

#[test]
fn oracle_matches_the_derandomized_bound() {
    let input = fixture("tiny_gap.json");
    let exact = structured(&["oracle", "--input", input.to_str().unwrap()]);
    let solved = structured(&["solve-gap-cap", "--input", input.to_str().unwrap()]);
    let opt = exact["optimum"].as_f64().unwrap();
    assert!(solved["lp_makespan"].as_f64().unwrap() <= opt + 1e-9);
    assert!(solved["makespan"].as_f64().unwrap() <= 2.0 * opt + 1e-6);
}

#[test]
fn output_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.txt");
    let input = fixture("maxmin.json");
    let out = polyround(&["oracle", "--input", input.to_str().unwrap(), "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.contains("kind: \"maxmin\""), "{text}");
}

#[test]
fn exit_codes_name_the_failure() {
    let code = |file: &str, cmd: &str| polyround(&[cmd, "--input", fixture(file).to_str().unwrap()]).status.code();
    assert_eq!(code("infeasible_gap.json", "solve-gap-cap"), Some(2));
    assert_eq!(code("bad_dims.json", "solve-gap-cap"), Some(3));
    assert_eq!(code("truncated.json", "solve-gap-cap"), Some(3));
    assert_eq!(code("maxmin.json", "solve-gap-cap"), Some(3));
    assert_eq!(code("oracle_over_budget.json", "oracle"), Some(4));
}

#[test]
fn parse_errors_point_at_the_problem() {
    let out = polyround(&["solve-gap-cap", "--input", fixture("truncated.json").to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
    let out = polyround(&["solve-gap-cap", "--input", fixture("bad_dims.json").to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("`p`"));
}
