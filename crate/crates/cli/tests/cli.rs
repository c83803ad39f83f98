use std::path::Path;
use std::process::{Command, Output};

const CASE_STUDY: &str = include_str!("../../../configs/case_study.toml");

fn smpc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smpc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// `k` values with a positive relaxation in a schedule CSV.
fn schedule_support(path: &Path) -> Vec<usize> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap())
        .filter(|rec| rec[1].parse::<f64>().is_ok_and(|a| a > 1e-6))
        .map(|rec| rec[0].parse().unwrap())
        .collect()
}

#[test]
fn case_study_passes_golden_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cs");
    let o = smpc(&["case-study", "--out", out.to_str().unwrap(), "--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("relaxation support: {0,14}"), "{text}");
    let bound: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("static bound: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.22..=0.32).contains(&bound));
    for f in [
        "schedule.csv",
        "trajectory.csv",
        "tube_sections.csv",
        "static_bound.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(schedule_support(&out.join("schedule.csv")), vec![0, 14]);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn golden_check_fails_for_other_template() {
    let dir = tempfile::tempdir().unwrap();
    let o = smpc(&[
        "case-study",
        "--out",
        dir.path().to_str().unwrap(),
        "--generators",
        "8",
        "--check",
        "--steps",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn case_study_outputs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = smpc(&["case-study", "--out", out.to_str().unwrap(), "--seed", "9"]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in [
        "schedule.csv",
        "trajectory.csv",
        "tube_sections.csv",
        "static_bound.csv",
        "manifest.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn synthesize_writes_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CASE_STUDY);
    let out = dir.path().join("out");
    let o = smpc(&[
        "synthesize",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(schedule_support(&out.join("schedule.csv")), vec![0, 14]);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn initial_state_outside_constraints_is_safety_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CASE_STUDY.replace("initial_state = [1.0, 1.0]", "initial_state = [2.5, 1.0]"),
    );
    let o = smpc(&[
        "synthesize",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("safety"));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CASE_STUDY.replace("p_bar_x = 0.6", "p_bar_x = = 0.6"),
    );
    let o = smpc(&[
        "synthesize",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn unknown_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CASE_STUDY.replace("[cost]", "[cost]\nweight = 3"),
    );
    let o = smpc(&[
        "synthesize",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("weight"));
}

#[test]
fn simulate_case_study() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = smpc(&[
        "simulate",
        "--out",
        out.to_str().unwrap(),
        "--steps",
        "100",
        "--trials",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("infeasible trials: 0"));
    let mut r = csv::Reader::from_path(out.join("report.csv")).unwrap();
    assert_eq!(r.records().count(), 101);
    assert!(out.join("trajectory.csv").exists());
}

#[test]
fn simulate_rejects_zero_trials() {
    let dir = tempfile::tempdir().unwrap();
    let o = smpc(&[
        "simulate",
        "--out",
        dir.path().to_str().unwrap(),
        "--trials",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_rejects_moment_only_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CASE_STUDY.replace("family = \"gaussian\"", "family = \"moment-only\""),
    );
    let o = smpc(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
        "--trials",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no sampling distribution"));
}

#[test]
fn unwritable_output_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    let o = smpc(&["case-study", "--out", out.to_str().unwrap(), "--steps", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("export"), "{}", stderr(&o));
}

#[test]
fn tighten_dumps_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let o = smpc(&[
        "tighten",
        "--out",
        dir.path().to_str().unwrap(),
        "--alpha",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(dir.path().join("tightened_vertices.csv")).unwrap();
    let pts: Vec<(f64, f64)> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[2].parse().unwrap(), rec[3].parse().unwrap())
        })
        .collect();
    assert_eq!(pts.len(), 4);
    assert!(pts.iter().all(|(x, y)| x.abs() < 2.0 && y.abs() < 2.0));

    let o = smpc(&[
        "tighten",
        "--out",
        dir.path().to_str().unwrap(),
        "--alpha",
        "1.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
