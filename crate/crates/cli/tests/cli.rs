use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use asris_core::RunConfig;

fn asris(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asris")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

const TINY: &str = r#"
seeds = [4]
[system]
n_bs_antennas = 2
n_ris_elements = 2
n_pairs = 1
harvest_threshold_joules = 0.0
[env]
episode_len = 5
[a3c]
workers = 1
k_steps = 5
[oracle]
steps = 3
tau_steps = 5
[baseline]
channels = 2
"#;

#[test]
fn version_and_help() {
    let o = asris(&["--version"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains(env!("CARGO_PKG_VERSION")));
    let o = asris(&["--help"]);
    assert!(o.status.success());
    for sub in ["train", "sweep", "oracle", "baseline", "report"] {
        assert!(stdout(&o).contains(sub));
    }
}

#[test]
fn bad_invocations() {
    let o = asris(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));

    let o = asris(&["train", "--algo", "dqn", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));

    let o = asris(&["oracle", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/nonexistent/run.toml"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::load(&path).unwrap_or_else(|e| panic!("{e}"));
        n += 1;
    }
    assert!(n >= 3);
}

#[test]
fn train_writes_trace_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("out");
    for algo in ["ppo", "td3", "a3c"] {
        let o = asris(&[
            "train",
            "--algo",
            algo,
            "--config",
            cfg.to_str().unwrap(),
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
            "--episodes",
            "3",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let trace = fs::read_to_string(out.join(format!("trace_{algo}_seed1.csv"))).unwrap();
        assert_eq!(trace.lines().count(), 4);
        assert!(trace.lines().next().unwrap().contains("seed"));
        assert!(out.join(format!("checkpoint_{algo}_seed1.json")).exists());
    }
}

#[test]
fn oracle_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let o = asris(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("optimum min-rate"));

    let out = dir.path().join("base");
    let o = asris(&[
        "baseline",
        "--budget",
        "50",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("seed 4"));
    let csv = fs::read_to_string(out.join("baseline.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let o = asris(&["baseline", "--budget", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{TINY}\n[sweep]\nvariable = \"p_bs_max_watts\"\nvalues = [4.0, 8.0, 16.0, 32.0]\nmethod = \"random\"\nchannels = 2\nbudget = 30\n"
    )
    .replace("seeds = [4]", "seeds = [1, 2, 3]");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("sweep");
    let o = asris(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(summary.lines().next().unwrap().contains("std_min_rate"));

    let o = asris(&["report", "--in", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("monotone check"));
    assert!(out.join("report_long.csv").exists());

    let bare = write_config(dir.path(), TINY);
    let o = asris(&[
        "sweep",
        "--config",
        bare.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("[sweep]"));
}
