use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use offroad_twin::harness::{CaseLog, ResultsFile};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_offroad-vv"));
    c.env_remove("OFFROAD_VV_OUT").env_remove("OFFROAD_VV_PORT").env_remove("OFFROAD_VV_TIMEOUT");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn matrix_lists_128_cases() {
    let o = run(&["matrix"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 128);
    assert!(text.lines().nth(14).unwrap().starts_with("015 {C1.2, C2.1, C3.2, P1.1, P2.2}"));
}

#[test]
fn matrix_filter_counts() {
    assert_eq!(stdout(&run(&["matrix", "--filter", "C3=C3.2"])).lines().count(), 64);
    assert_eq!(stdout(&run(&["matrix", "--filter", "C1=C1.2,P2=P2.4"])).lines().count(), 16);
    let json = stdout(&run(&["matrix", "--filter", "15", "--json"]));
    assert!(json.contains("\"case_id\":15"));
    let bad = run(&["matrix", "--filter", "C7=x"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn seed_override_changes_seeds() {
    let a = stdout(&run(&["matrix", "--filter", "1"]));
    let b = stdout(&run(&["matrix", "--filter", "1", "--seed-override", "99"]));
    assert_ne!(a, b);
}

#[test]
fn empty_axis_and_malformed_suite_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "name = \"x\"\n[axes]\ncontrol = []\n").unwrap();
    let o = run(&["matrix", "--suite", empty.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("axis C3 is empty"), "{}", stderr(&o));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"x\"\nbase_seed = 1\n[termination]\nmax_duration = \"long\"\n").unwrap();
    let o = run(&["matrix", "--suite", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn single_case_run_report_replay() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--filter", "15", "--jobs", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("[running 0 | pending 0 | completed 1/1]"));
    assert_eq!(files(&out.join("logs")), vec!["case_015.jsonl"]);
    assert_eq!(files(&out.join("results")), vec!["case_015.json"]);
    let report = fs::read_to_string(out.join("report.md")).unwrap();
    let csv = fs::read_to_string(out.join("scores.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 16);

    // Rerun into the same directory: same bytes everywhere.
    let log = fs::read_to_string(out.join("logs/case_015.jsonl")).unwrap();
    let o = run(&["run", "--filter", "15", "--out", out.to_str().unwrap(), "--transport", "socket"]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("logs/case_015.jsonl")).unwrap(), log);
    assert_eq!(fs::read_to_string(out.join("report.md")).unwrap(), report);

    let o = run(&["report", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out.join("report.md")).unwrap(), report);
    assert_eq!(fs::read_to_string(out.join("scores.csv")).unwrap(), csv);

    let o = run(&["replay", "--out", out.to_str().unwrap(), "--case", "15"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("identical"));
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["run", "--filter", "1"])
        .env("OFFROAD_VV_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("logs/case_001.jsonl").exists());
}

#[test]
fn corrupt_log_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let suite = dir.path().join("short.toml");
    fs::write(&suite, "[termination]\nmax_duration = 2.0\n").unwrap();
    let o = run(&["run", "--suite", suite.to_str().unwrap(), "--filter", "id=1-3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    fs::write(out.join("logs/case_002.jsonl"), "{\"record\":\"header\"\n").unwrap();
    let o = run(&["report", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stderr(&o).lines().filter(|l| l.starts_with("warning:")).count(), 1);
    assert!(stderr(&o).contains("case 002 unscored"));
    let results: ResultsFile = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(results.unscored.len(), 1);
    assert_eq!(results.unscored[0].case_id, 2);
    assert_eq!(results.results.iter().map(|r| r.case_id).collect::<Vec<_>>(), vec![1, 3]);
    assert!(fs::read_to_string(out.join("report.md")).unwrap().contains("Coverage warning"));
}

#[test]
fn aborted_cases_exit_nonzero_and_keep_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let o = run(&["run", "--filter", "id=1-2", "--out", out.to_str().unwrap(), "--fault-at-tick", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(files(&out.join("logs")).len(), 2);
    let results: ResultsFile = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert!(results.results.iter().all(|r| r.fault.is_some() && !r.all_pass));
}

#[test]
fn interrupted_run_leaves_loadable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut child = bin()
        .args(["run", "--jobs", "1", "--out", out.to_str().unwrap()])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let logs = out.join("logs");
    let start = Instant::now();
    while start.elapsed() < Duration::from_secs(120) {
        let n = fs::read_dir(&logs).map(|d| d.filter(|e| e.as_ref().unwrap().path().extension().unwrap() == "jsonl").count());
        if n.unwrap_or(0) >= 2 {
            break;
        }
        std::thread::sleep(Duration::from_millis(20));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    let done: Vec<String> = files(&logs).into_iter().filter(|f| f.ends_with(".jsonl")).collect();
    assert!(done.len() >= 2 && done.len() < 128, "{}", done.len());
    for f in &done {
        CaseLog::parse(&fs::read_to_string(logs.join(f)).unwrap()).unwrap();
    }
    let o = run(&["report", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let results: ResultsFile = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(results.results.len(), done.len());
    assert_eq!(results.unscored.len(), 128 - done.len());
}
