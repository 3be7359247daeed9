//! The binary's external contract: exit codes, messages and files.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn simopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simopt"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("simopt-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

const SMALL: &[&str] = &[
    "--override",
    "simopt.rl_iterations_first=3",
    "--override",
    "simopt.rl_iterations_warm=2",
    "--override",
    "simopt.samples_per_update=16",
    "--override",
    "simopt.max_iterations=2",
    "--override",
    "ppo.n_agents=4",
];

#[test]
fn run_then_replay_is_byte_identical() {
    let dir = tmp("run");
    let d = dir.to_str().unwrap();
    let mut args = vec![
        "run",
        "presets/drawer-sim2sim-15",
        "--out",
        d,
        "--workers",
        "2",
        "--seed",
        "5",
    ];
    args.extend_from_slice(SMALL);
    let out = simopt(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let curves = fs::read(dir.join("curves.csv")).unwrap();
    let conf = fs::read_to_string(dir.join("config.conf")).unwrap();
    assert!(conf.contains("simopt.seed = 5"));

    let replayed = tmp("replayed");
    let records = dir.join("records.jsonl");
    let out = simopt(&[
        "replay",
        records.to_str().unwrap(),
        "--out",
        replayed.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read(replayed.join("curves.csv")).unwrap(), curves);
    let _ = fs::remove_dir_all(&dir);
    let _ = fs::remove_dir_all(&replayed);
}

#[test]
fn zero_policy_scores_zero_of_twenty() {
    let dir = tmp("eval");
    let out = simopt(&[
        "eval",
        "zero",
        "drawer-sim2sim-15",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("success 0/20"));
    let t: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("traj_0.json")).unwrap()).unwrap();
    let mut keys: Vec<&String> = t.as_object().unwrap().keys().collect();
    keys.sort();
    assert_eq!(keys, ["act", "obs", "rew", "seed", "success"]);
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn invalid_config_fails_with_a_line_anchored_message() {
    let dir = tmp("badconf");
    fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.conf");
    fs::write(&path, "experiment.task = drawer\nppo.gamma = 1.5\n").unwrap();
    let p = path.to_str().unwrap();
    let out = simopt(&["run", p, "--out", dir.to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("{p}:2:")), "{err}");

    let out = simopt(&["train", "drawer-sim2sim-15", "--override", "ppo.bogus=1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--override:1:"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn missing_files_fail() {
    assert!(!simopt(&["run", "/nonexistent/config"]).status.success());
    assert!(!simopt(&["replay", "/nonexistent/records.jsonl"])
        .status
        .success());
    assert!(
        !simopt(&["eval", "/nonexistent/policy.json", "drawer-sim2sim-15"])
            .status
            .success()
    );
}

#[test]
fn gae_oracle_passes_and_unknown_oracle_fails() {
    let out = simopt(&["oracle", "gae"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS gae"));
    assert!(!simopt(&["oracle", "nope"]).status.success());
}
