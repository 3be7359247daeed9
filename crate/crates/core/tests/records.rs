//! Contracts that can be checked from a run's records alone.

use std::fs;

use simopt::harness::{self, Output};
use simopt::simopt::IterationRecord;

const KL_BOUND: f64 = 1.0 + 1e-6;

fn small_run(dir: &std::path::Path) -> Vec<IterationRecord> {
    let o: Vec<String> = [
        "simopt.rl_iterations_first=4",
        "simopt.rl_iterations_warm=2",
        "simopt.samples_per_update=32",
        "simopt.max_iterations=3",
        "simopt.success_eval_trials=4",
        "ppo.n_agents=6",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let cfg = harness::load_config("drawer-sim2sim-22", &o).unwrap();
    let out = Output::create(dir).unwrap();
    harness::run_simopt(&cfg, Some(&out)).unwrap().records
}

fn tmp(name: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("simopt-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

#[test]
fn records_round_trip_and_respect_the_step_bound() {
    let dir = tmp("records");
    let live = small_run(&dir);
    let back = harness::read_records(&dir.join(harness::RECORDS)).unwrap();
    assert_eq!(back, live);
    for r in &back {
        assert!(!r.passes.is_empty() || r.aborted.is_some());
        for p in &r.passes {
            assert!(
                p.kl <= KL_BOUND,
                "iteration {} pass kl {}",
                r.iteration,
                p.kl
            );
        }
        assert!(r.kl_used >= 0.0);
        assert_eq!(r.warm_start, r.iteration > 0);
        assert_eq!(r.policy, format!("policy_{}.json", r.iteration));
        assert!(dir.join(&r.policy).is_file());
    }
    // each iteration starts where the previous one ended
    for w in back.windows(2) {
        assert_eq!(w[1].dist_before, w[0].dist_after);
    }
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn replay_reproduces_curves_byte_for_byte() {
    let dir = tmp("replay");
    small_run(&dir);
    let written = fs::read(dir.join(harness::CURVES)).unwrap();
    fs::remove_file(dir.join(harness::CURVES)).unwrap();
    harness::replay(&dir.join(harness::RECORDS), None).unwrap();
    assert_eq!(fs::read(dir.join(harness::CURVES)).unwrap(), written);
    let header = String::from_utf8(written).unwrap();
    assert!(header.starts_with("iteration,target_success,median_cost,kl_used\n"));
    let _ = fs::remove_dir_all(&dir);
}

#[test]
fn per_iteration_files_exist_with_their_fixed_layouts() {
    let dir = tmp("layout");
    let recs = small_run(&dir);
    for i in 0..=recs.len() {
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join(format!("dist_{i}.json"))).unwrap())
                .unwrap();
        let mut keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        keys.sort();
        assert_eq!(keys, ["covariance", "mean", "names", "transforms"]);
    }
    let ppo = fs::read_to_string(dir.join("ppo_0.csv")).unwrap();
    assert!(ppo.starts_with("iteration,mean_reward,mean_kl,clip_fraction\n"));
    assert_eq!(ppo.lines().count(), 5);
    let _ = fs::remove_dir_all(&dir);
}
