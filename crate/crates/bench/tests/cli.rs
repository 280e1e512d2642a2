use std::path::Path;
use std::process::{Command, Output};

use cdqaoa_bench::sweep::{read_rows, strip_wall_clock};
use cdqaoa_core::portfolio::PortfolioInstance;

fn cdqaoa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdqaoa")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn generate_is_deterministic_and_psd() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.txt");
    write(&cfg, "count = 3\nn_assets = 6\nbudget = 2\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let v = stdout_json(&cdqaoa(&["generate", "--config", cfg.to_str().unwrap(), "--seed", "7", "--out", out.to_str().unwrap()]));
        assert_eq!(v["files"].as_array().unwrap().len(), 3);
    }
    for id in ["inst_7", "inst_8", "inst_9"] {
        let (fa, fb) = (a.join(format!("{id}.json")), b.join(format!("{id}.json")));
        assert_eq!(std::fs::read(&fa).unwrap(), std::fs::read(&fb).unwrap());
        let inst = PortfolioInstance::load(&fa).unwrap();
        assert!(inst.sigma_min_eigenvalue() > -1e-12);
    }
}

#[test]
fn oracle_reports_extrema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.json");
    write(&cfg, r#"{"count": 1}"#);
    stdout_json(&cdqaoa(&["generate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]));
    let v = stdout_json(&cdqaoa(&["oracle", dir.path().join("inst_100.json").to_str().unwrap()]));
    assert_eq!(v["scanned"], 495);
    assert!(v["e_min"].as_f64().unwrap() < v["e_max"].as_f64().unwrap());
    assert!((v["e_min"].as_f64().unwrap() - v["argmin_cost"].as_f64().unwrap()).abs() < 1e-9);
    assert!(v["penalty_ground_gap"].as_f64().unwrap() > 0.0);

    let null = dir.path().join("null.json");
    PortfolioInstance::new(vec![0.0; 4], vec![vec![0.0; 4]; 4], 0.5, 2)
        .unwrap()
        .save(&null)
        .unwrap();
    let v = stdout_json(&cdqaoa(&["oracle", null.to_str().unwrap()]));
    assert_eq!(v["degenerate"], true);
    assert_eq!(v["e_min"], 0.0);
    assert_eq!(v["e_max"], 0.0);
}

#[test]
fn sweep_rows_summary_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spec.txt");
    write(
        &cfg,
        "count = 2\nn_assets = 5\nbudget = 2\nmethods = xy, xy_cd, grover, penalty\ndepths = 1, 2\ncvar_alphas = 0.25\nmax_evals = 40\nrestarts = 1\n",
    );
    let mut texts = Vec::new();
    for k in 0..2 {
        let csv = dir.path().join(format!("r{k}.csv"));
        let v = stdout_json(&cdqaoa(&["sweep", "--config", cfg.to_str().unwrap(), "--jobs", "2", "--out", csv.to_str().unwrap()]));
        assert_eq!(v["rows"], 16);
        assert_eq!(v["failed"], 0);
        assert!(Path::new(v["summary"].as_str().unwrap()).exists());
        texts.push(strip_wall_clock(&std::fs::read_to_string(&csv).unwrap()).unwrap());
    }
    assert_eq!(texts[0], texts[1]);

    let csv = dir.path().join("r0.csv");
    for row in read_rows(&csv).unwrap() {
        let r = row.r.unwrap();
        assert!(row.r_unclamped || (0.0..=1.0).contains(&r));
        let fm = row.feasible_mass.unwrap();
        assert!((0.0..=1.0 + 1e-12).contains(&fm));
        if row.method != "penalty" {
            assert!(fm > 1.0 - 1e-9);
        }
    }

    let out = dir.path().join("report");
    let v = stdout_json(&cdqaoa(&["report", csv.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    assert_eq!(v["files"].as_array().unwrap().len(), 4);
    let ratio = std::fs::read_to_string(out.join("ratio_alpha_0p25.csv")).unwrap();
    assert_eq!(ratio.lines().count(), 1 + 8);
    let counts = std::fs::read_to_string(out.join("gate_counts.csv")).unwrap();
    assert!(counts.lines().any(|l| l.starts_with("xy_cd,ring,2,")));
}

#[test]
fn report_on_empty_csv_writes_headers() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("empty.csv");
    cdqaoa_bench::sweep::write_rows(&csv, &[]).unwrap();
    let out = dir.path().join("rep");
    stdout_json(&cdqaoa(&["report", csv.to_str().unwrap(), "--out", out.to_str().unwrap()]));
    let counts = std::fs::read_to_string(out.join("gate_counts.csv")).unwrap();
    assert_eq!(counts.lines().count(), 1);
    let sp = std::fs::read_to_string(out.join("success_probability.csv")).unwrap();
    assert_eq!(sp.lines().count(), 1);
}

#[test]
fn errors_are_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    write(&bad, "not,a,sweep\n1,2,3\n");
    let out = cdqaoa(&["report", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "config");

    let out = cdqaoa(&["oracle", dir.path().join("missing.json").to_str().unwrap()]);
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(v["message"].as_str().unwrap().contains("missing.json"));

    let out = cdqaoa(&["frobnicate"]);
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["error"], "usage");
}
