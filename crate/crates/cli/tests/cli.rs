use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ltest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ltest"))
        .args(args)
        .env_remove("LTEST_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = ltest(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Small deterministic generator so the fixtures do not depend on the
/// library under test.
struct Lcg(u64);

impl Lcg {
    fn normal(&mut self) -> f64 {
        let mut u = || {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 + 0.5) / (1u64 << 53) as f64
        };
        let (a, b) = (u(), u());
        (-2.0 * a.ln()).sqrt() * (2.0 * std::f64::consts::PI * b).cos()
    }
}

fn write_csv(path: &Path, rows: &[Vec<f64>]) {
    let p = rows[0].len();
    let mut text = (1..=p).map(|j| format!("v{j}")).collect::<Vec<_>>().join(",") + "\n";
    for r in rows {
        text += &(r.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n");
    }
    fs::write(path, text).unwrap();
}

fn gaussian_rows(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut g = Lcg(seed);
    (0..n).map(|_| (0..p).map(|_| g.normal()).collect()).collect()
}

fn result<'a>(report: &'a Value, method: &str) -> &'a Value {
    report["results"].as_array().unwrap().iter().find(|r| r["method"] == method).unwrap()
}

#[test]
fn cauchy_report_lists_components() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    write_csv(&csv, &gaussian_rows(60, 20, 1));
    let text = ok(&["test", "--input", csv.to_str().unwrap(), "--method", "tc", "--B", "100", "--seed", "7", "--alpha", "0.05"]);
    let report: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["seed"], 7);
    assert_eq!(report["B"], 100);
    assert!(report["version"].is_string());
    let tc = result(&report, "tc");
    let p = tc["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    let ks: Vec<u64> = tc["components"].as_array().unwrap().iter().map(|c| c["k"].as_u64().unwrap()).collect();
    assert_eq!(ks, vec![5, 95, 48, 24]);
    assert!(report.get("elapsed_seconds").is_none());
}

#[test]
fn duplicated_column_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dup.csv");
    let mut rows = gaussian_rows(100, 20, 2);
    for r in &mut rows {
        r[11] = r[4];
    }
    write_csv(&csv, &rows);
    let report: Value = serde_json::from_str(&ok(&["test", "--input", csv.to_str().unwrap(), "--B", "400", "--seed", "3"])).unwrap();
    let tc = result(&report, "tc");
    assert!(tc["p_value"].as_f64().unwrap() <= 0.01);
    assert_eq!(tc["reject"], true);
    for m in ["sc", "j", "lx", "f"] {
        assert!(result(&report, m)["p_value"].is_number(), "{m}");
    }
}

#[test]
fn sum_statistic_on_orthogonal_design() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("orth.csv");
    let (n, p) = (32usize, 5usize);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|r| (0..p).map(|j| if (r >> j) & 1 == 0 { 1.0 } else { -1.0 }).collect())
        .collect();
    write_csv(&csv, &rows);
    let report: Value = serde_json::from_str(&ok(&["test", "--input", csv.to_str().unwrap(), "--method", "sc"])).unwrap();
    let t = result(&report, "sc")["statistic"].as_f64().unwrap();
    let (nf, ps) = (n as f64, 10.0);
    let expect = -ps / (2.0 * ps * (nf - 1.0) / (nf + 2.0)).sqrt();
    assert!((t - expect).abs() < 1e-12, "{t} vs {expect}");
    assert_eq!(result(&report, "sc")["calibration"], "asymptotic");
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b,c\n1,2,3\n4,oops,6\n7,8,9\n").unwrap();
    let out = ltest(&["test", "--input", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("row 3") && msg.contains("column 2"), "{msg}");

    let constant = dir.path().join("const.csv");
    fs::write(&constant, "a,b,c\n1,2,3\n1,5,6\n1,8,0\n").unwrap();
    let out = ltest(&["test", "--input", constant.to_str().unwrap(), "--method", "sc"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("column a"));

    let missing = dir.path().join("nope.csv");
    assert_eq!(ltest(&["test", "--input", missing.to_str().unwrap()]).status.code(), Some(2));
    let good = dir.path().join("g.csv");
    write_csv(&good, &gaussian_rows(20, 7, 4));
    let g = good.to_str().unwrap();
    assert_eq!(ltest(&["test", "--input", g, "--method", "bogus"]).status.code(), Some(2));
    assert_eq!(ltest(&["test", "--input", g, "--method", "tc"]).status.code(), Some(2));
    assert_eq!(ltest(&["size", "--alpha", "1.5", "--R", "1"]).status.code(), Some(2));
    assert_eq!(ltest(&["size", "--dist", "t=2", "--R", "1"]).status.code(), Some(2));
}

#[test]
fn size_table_has_one_row_per_method() {
    let csv = ok(&["size", "--n", "40", "--p", "20", "--dist", "gaussian", "--R", "10", "--B", "50", "--seed", "1"]);
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "method,n,p,dist,m,s,alpha,estimate,stderr");
    assert_eq!(rows.len(), 1 + 6);
    for row in &rows[1..] {
        let est: f64 = row.split(',').nth(7).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&est));
    }
    assert!(csv.lines().any(|l| l.starts_with("# config: {")));
}

#[test]
fn power_table_reports_sparsity() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("power.svg");
    let csv = ok(&[
        "power", "--n", "40", "--p", "20", "--m", "3,5,10", "--theta", "1.5", "--R", "5", "--B", "20",
        "--method", "sc,j,tc", "--svg", svg.to_str().unwrap(),
    ]);
    let mut s: Vec<&str> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap())
        .collect();
    s.dedup();
    assert_eq!(s, vec!["3", "10", "45"]);
    let chart = fs::read_to_string(&svg).unwrap();
    assert!(chart.contains("<svg") && chart.matches("<polyline").count() == 3);
}

#[test]
fn config_file_is_merged_and_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 30, "p": 10, "methods": ["sc", "j"], "R": 4, "alphas": [0.1]}"#).unwrap();
    let out = dir.path().join("size.csv");
    ok(&["size", "--config", cfg.to_str().unwrap(), "--n", "35", "--out", out.to_str().unwrap(), "--timing"]);
    let text = fs::read_to_string(&out).unwrap();
    let config_line = text.lines().find(|l| l.starts_with("# config: ")).unwrap();
    let echoed: Value = serde_json::from_str(config_line.trim_start_matches("# config: ")).unwrap();
    assert_eq!(echoed["n"], 35);
    assert_eq!(echoed["p"], 10);
    assert_eq!(echoed["B"], 400);
    assert!(text.contains("# elapsed_seconds: "));
    assert_eq!(text.lines().filter(|l| l.starts_with("sc,") || l.starts_with("j,")).count(), 2);
    fs::write(&cfg, r#"{"n": 30, "unknown": 1}"#).unwrap();
    assert_eq!(ltest(&["size", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn null_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    write_csv(&csv, &gaussian_rows(30, 12, 5));
    let cache = dir.path().join("null.json");
    let args = |seed: &'static str| {
        vec![
            "test".to_string(), "--input".into(), csv.to_str().unwrap().into(), "--method".into(), "tc,lx".into(),
            "--B".into(), "50".into(), "--seed".into(), seed.into(), "--null-cache".into(), cache.to_str().unwrap().into(),
        ]
    };
    let run = |seed| {
        let a = args(seed);
        ok(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let first = run("1");
    let ensemble: Value = serde_json::from_str(&fs::read_to_string(&cache).unwrap()).unwrap();
    assert_eq!(ensemble["B"], 50);
    assert_eq!(ensemble["format"], "ltest.null_ensemble.v1");
    assert_eq!(run("1"), first);
    let built = ok(&["null", "--input", csv.to_str().unwrap(), "--method", "tc,lx", "--B", "50", "--seed", "1"]);
    let fresh: Value = serde_json::from_str(&built).unwrap();
    assert_eq!(fresh, ensemble);
    run("2");
    let rebuilt: Value = serde_json::from_str(&fs::read_to_string(&cache).unwrap()).unwrap();
    assert_eq!(rebuilt["seed"]["master_seed"], 2);
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    write_csv(&csv, &gaussian_rows(40, 16, 6));
    let c = csv.to_str().unwrap();
    for args in [
        vec!["test", "--input", c, "--B", "80", "--seed", "9"],
        vec!["size", "--n", "30", "--p", "12", "--R", "6", "--B", "25", "--seed", "4"],
    ] {
        let one = ok(&[args.as_slice(), &["--threads", "1"]].concat());
        let four = ok(&[args.as_slice(), &["--threads", "4"]].concat());
        assert_eq!(one, four, "{args:?}");
        let env = Command::new(env!("CARGO_BIN_EXE_ltest")).args(&args).env("LTEST_THREADS", "3").output().unwrap();
        assert_eq!(String::from_utf8(env.stdout).unwrap(), one);
    }
}
