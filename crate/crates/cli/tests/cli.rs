use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kfp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfp")).args(args).env("KFP_WORKERS", "2").output().unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const QUICK: &str = "name = \"quick\"\nseed = 3\ngrid.refine = false\ninitial.amplitude = 3.0\n";

#[test]
fn run_inspect_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "quick.toml", QUICK);
    let out = tmp.path().join("out");
    let run = kfp(&["run", s(&cfg), "--output", s(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", text(&run));
    assert!(text(&run).contains("energy_slack"));
    for f in ["summary.json", "energy.csv", "truncation.csv", "ladder.csv", "solution.snap"] {
        assert!(out.join(f).exists(), "missing {f}");
    }

    let inspect = kfp(&["inspect", s(&out.join("solution.snap"))]);
    assert_eq!(inspect.status.code(), Some(0), "{}", text(&inspect));
    assert!(text(&inspect).contains("grid 48 x 48"), "{}", text(&inspect));

    let report = kfp(&["report", s(&out)]);
    assert_eq!(report.status.code(), Some(0));
    assert!(text(&report).contains("run quick (seed 3)"), "{}", text(&report));
}

#[test]
fn repeated_runs_write_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "quick.toml", QUICK);
    let out = tmp.path().join("out");
    let mut tables = Vec::new();
    for _ in 0..2 {
        assert!(kfp(&["run", s(&cfg), "--output", s(&out)]).status.success());
        let mut names: Vec<PathBuf> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        names.sort();
        tables.push(names.iter().map(|p| fs::read(p).unwrap()).collect::<Vec<_>>());
        fs::remove_dir_all(&out).unwrap();
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn low_integrability_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "diagnostics.q = 10.0\n");
    let o = kfp(&["run", s(&cfg), "--output", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("diagnostics.q"), "{}", text(&o));
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "grid.cellz = 10\n");
    assert_eq!(kfp(&["run", s(&cfg)]).status.code(), Some(2));
}

#[test]
fn sweep_writes_table_and_pass_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let body = "output = \"unused\"\nseeds = [0, 1]\n\n[[runs]]\nname = \"a\"\ngrid.refine = false\ndiagnostics.stages = [\"degiorgi\"]\n";
    let cfg = write(tmp.path(), "sweep.toml", body);
    let out = tmp.path().join("sweep");
    let o = kfp(&["sweep", s(&cfg), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    assert!(text(&o).contains("2/2 runs passed (100.0%)"), "{}", text(&o));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    assert!(table.starts_with("name,seed,status,passed,energy_slack"));
    let report = kfp(&["report", s(&out)]);
    assert!(text(&report).contains("sweep: 2/2"));
}

#[test]
fn empty_ensemble_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "empty.toml", "output = \"unused\"\nseeds = [0]\nruns = []\n");
    let o = kfp(&["sweep", s(&cfg), "--output", s(&tmp.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("empty"), "{}", text(&o));
}

#[test]
fn report_without_summary_fails() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(kfp(&["report", s(tmp.path())]).status.code(), Some(1));
}
