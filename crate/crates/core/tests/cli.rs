use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cyleig(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cyleig"));
    cmd.args(args);
    if let Some(d) = out_dir {
        cmd.env("CYLEIG_OUTPUT_DIR", d);
    }
    cmd.output().unwrap()
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

#[test]
fn example_config_runs_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = cyleig(&["run", example("model_gap.cfg").to_str().unwrap()], Some(dir.path()));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(dir.path().join("limit_infinity.csv").exists());
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("gap") && summary.contains("PASS"));

    let svg = dir.path().join("gap.svg");
    let plot = cyleig(&["plot", dir.path().join("gap.csv").to_str().unwrap(), "--x", "ell", "--y", "lambda1,mu1", "--out", svg.to_str().unwrap()], None);
    assert_eq!(plot.status.code(), Some(0), "{}", String::from_utf8_lossy(&plot.stderr));
    assert!(fs::read_to_string(&svg).unwrap().matches("<polyline").count() == 2);

    let missing = cyleig(&["plot", dir.path().join("gap.csv").to_str().unwrap(), "--x", "ell", "--y", "nope", "--out", svg.to_str().unwrap()], None);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope"));

    let report = cyleig(&["report", dir.path().to_str().unwrap()], None);
    assert_eq!(report.status.code(), Some(0));
    let text = String::from_utf8_lossy(&report.stdout);
    assert!(text.contains("gap") && text.contains("limit_infinity"));
}

#[test]
fn invalid_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "[run]\nexperiments = gap\n[field]\nkind = model\ndelta = 0.6\n[tolerances]\ntol_disc = -1\n").unwrap();
    let out = cyleig(&["run", cfg.to_str().unwrap()], Some(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tol_disc"));
    assert!(!dir.path().join("gap.csv").exists());

    let absent = cyleig(&["run", dir.path().join("absent.cfg").to_str().unwrap()], None);
    assert_eq!(absent.status.code(), Some(1));
    let report = cyleig(&["report", dir.path().join("empty").to_str().unwrap()], None);
    assert_eq!(report.status.code(), Some(1));
}

#[test]
fn uncoupled_gap_run_fails_with_a_refusal_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("flat.cfg");
    fs::write(&cfg, "[run]\nexperiments = gap\n[field]\nkind = model\ndelta = 0\n[mesh]\ncross = 16\n").unwrap();
    let out = cyleig(&["run", cfg.to_str().unwrap()], Some(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    let csv = fs::read_to_string(dir.path().join("gap.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.contains("ConditionConFails"));
    assert!(csv.contains("condition-con=fail"));

    let report = cyleig(&["report", dir.path().to_str().unwrap()], None);
    assert_eq!(report.status.code(), Some(2));
}
