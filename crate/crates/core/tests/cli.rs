use std::path::Path;
use std::process::{Command, Output};

fn spo(args: &[&str], dir: &Path, seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spo"));
    cmd.args(args).current_dir(dir).env_remove("SPO_SEED");
    if let Some(s) = seed_env {
        cmd.env("SPO_SEED", s);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL: &str = "m = 3\nn = 3\nbudget = 20000\ntrials = 2\n";

#[test]
fn run_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.conf", &format!("{SMALL}output = out/trace.csv\n"));
    let out = spo(&["run", "-c", &cfg], dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let trace = std::fs::read_to_string(dir.path().join("out/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next().unwrap(),
        "trial,epoch,f_calls_cum,eta,eta_candidate,gamma_tilde,F_last,G_closed_form,x_norm,y_norm,restarts"
    );
    let mut last = (u64::MAX, 0u64);
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 11);
        let trial: u64 = cols[0].parse().unwrap();
        let calls: u64 = cols[2].parse().unwrap();
        if trial == last.0 {
            assert!(calls >= last.1);
        }
        last = (trial, calls);
    }

    let summary = std::fs::read_to_string(dir.path().join("out/trace_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.starts_with("setting,trial,seed,solver,problem,f_calls,f_calls_to_threshold"));
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.conf", SMALL);
    let mut files = Vec::new();
    for tag in ["a", "b"] {
        let out = format!("{tag}.csv");
        assert_eq!(spo(&["run", "-c", &cfg, "--output", &out], dir.path(), None).status.code(), Some(0));
        files.push(std::fs::read(dir.path().join(&out)).unwrap());
        files.push(std::fs::read(dir.path().join(format!("{tag}_summary.csv"))).unwrap());
    }
    assert_eq!(files[0], files[2]);
    assert_eq!(files[1], files[3]);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.conf", "m = 2\nn = 2\nbudget = 5000\n");
    spo(&["run", "-c", &cfg, "--output", "e.csv"], dir.path(), Some("77"));
    let summary = std::fs::read_to_string(dir.path().join("e_summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "77");

    // an explicit flag wins over the environment
    spo(&["run", "-c", &cfg, "--output", "f.csv", "--seed=5"], dir.path(), Some("77"));
    let summary = std::fs::read_to_string(dir.path().join("f_summary.csv")).unwrap();
    assert_eq!(summary.lines().nth(1).unwrap().split(',').nth(2), Some("5"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.conf", "m = 2\nbudget = -1\n");
    let out = spo(&["run", "-c", &bad], dir.path(), None);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("budget"), "{err}");

    let unknown = write(dir.path(), "u.conf", "# header\nspeed = 3\n");
    let out = spo(&["run", "-c", &unknown], dir.path(), None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2: speed: unknown key"));

    assert_eq!(spo(&["run", "--m"], dir.path(), None).status.code(), Some(1));
    assert_eq!(spo(&["run", "-c", "missing.conf"], dir.path(), None).status.code(), Some(1));
    assert_eq!(spo(&["frobnicate"], dir.path(), None).status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // an output path inside a regular file cannot be created
    write(dir.path(), "blocker", "");
    let out = spo(&["run", "--m", "2", "--n", "2", "--budget", "2000", "--output", "blocker/t.csv"], dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_prints_unit_quadratic_constants() {
    let dir = tempfile::tempdir().unwrap();
    let out = spo(&["verify", "--a", "1", "--b", "1", "--c", "1"], dir.path(), None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for line in ["eta_star = 0.5", "eta_bar = 0.5", "gamma(eta_star) = -0.5", "T_zeta <= 24"] {
        assert!(text.lines().any(|l| l == line), "missing {line:?} in\n{text}");
    }
}

#[test]
fn bench_writes_one_row_per_setting_and_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.conf", "m = 2\nn = 2\nbudget = 20000\ntrials = 2\nsummary = bench.csv\n");
    let out = spo(&["bench", "-c", &cfg, "--sweep", "eta"], dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 13 * 2);
    assert!(text.lines().nth(1).unwrap().starts_with("adapt,0,"));
}
