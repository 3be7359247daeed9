//! Browser bindings: a 2-D distribution update you can step, trajectory
//! smoothing and discrepancy, and a drawer rollout. Every function returns a
//! JSON string so the page needs no generated types.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use simopt::discrepancy::{discrepancy, gaussian_smooth, DiscrepancyConfig};
use simopt::envs::{self, arm, Env, EnvSpec, Trajectory};
use simopt::param_space::{kl_divergence, ParamDistribution, Transform};
use simopt::policy::{PolicyJson, PolicySnapshot};
use simopt::reps::{self, RepsConfig};
use simopt::rng::stream;

use rand_distr::{Distribution, StandardNormal};

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn dist_value(d: &ParamDistribution) -> Value {
    let c = d.covariance();
    json!({
        "mean": [d.mean()[0], d.mean()[1]],
        "cov": [[c[(0, 0)], c[(0, 1)]], [c[(1, 0)], c[(1, 1)]]],
    })
}

/// A 2-D Gaussian refit against the cost `|x - target|²` one pass at a time.
#[wasm_bindgen]
pub struct RepsDemo {
    dist: ParamDistribution,
    target: [f64; 2],
    seed: u64,
    iteration: u64,
}

#[wasm_bindgen]
impl RepsDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(target_x: f64, target_y: f64, std: f64, seed: u64) -> Result<RepsDemo, JsValue> {
        let dist = ParamDistribution::diagonal(
            &["x", "y"],
            &[0.0, 0.0],
            &[std * std, std * std],
            vec![Transform::Identity; 2],
        )
        .map_err(err)?;
        Ok(RepsDemo {
            dist,
            target: [target_x, target_y],
            seed,
            iteration: 0,
        })
    }

    pub fn set_target(&mut self, x: f64, y: f64) {
        self.target = [x, y];
    }

    /// Current mean and covariance.
    pub fn state(&self) -> String {
        dist_value(&self.dist).to_string()
    }

    /// Draws `n` samples, scores them and applies one pass with KL bound `epsilon`.
    pub fn step(&mut self, n: usize, epsilon: f64) -> Result<String, JsValue> {
        let xs: Vec<_> = (0..n.max(2) as u64)
            .map(|k| {
                self.dist
                    .sample_internal_at(self.seed.wrapping_add(self.iteration), k)
            })
            .collect();
        let costs: Vec<f64> = xs
            .iter()
            .map(|x| (x[0] - self.target[0]).powi(2) + (x[1] - self.target[1]).powi(2))
            .collect();
        let config = RepsConfig {
            epsilon,
            ..RepsConfig::default()
        };
        let (next, stats) = reps::update(&self.dist, &xs, &costs, &config).map_err(err)?;
        let kl = kl_divergence(&next, &self.dist).map_err(err)?;
        self.dist = next;
        self.iteration += 1;
        Ok(json!({
            "iteration": self.iteration,
            "samples": xs.iter().map(|x| [x[0], x[1]]).collect::<Vec<_>>(),
            "costs": costs,
            "kl": kl,
            "eta": stats.eta,
            "ess": stats.ess,
            "step": stats.step,
            "dist": dist_value(&self.dist),
        })
        .to_string())
    }
}

/// Two noisy sine tracks offset in phase, their smoothed versions and the
/// discrepancy between them.
#[wasm_bindgen]
pub fn discrepancy_demo(
    phase: f64,
    noise: f64,
    smooth_std: f64,
    w_l1: f64,
    w_l2: f64,
    seed: u64,
) -> Result<String, JsValue> {
    let mut r = stream(seed, "web.noise", 0);
    let n = 120;
    let mut track = |shift: f64| -> Vec<Vec<f64>> {
        (0..n)
            .map(|t| {
                let e: f64 = StandardNormal.sample(&mut r);
                vec![(t as f64 * 0.08 + shift).sin() + noise * e]
            })
            .collect()
    };
    let a = track(0.0);
    let b = track(phase);
    let config = DiscrepancyConfig {
        w_l1,
        w_l2,
        smooth_std,
        ..DiscrepancyConfig::default()
    };
    let cost = discrepancy(&a, &b, &config).map_err(err)?;
    let flat = |s: &[Vec<f64>]| s.iter().map(|v| v[0]).collect::<Vec<_>>();
    Ok(json!({
        "a": flat(&a),
        "b": flat(&b),
        "a_smooth": flat(&gaussian_smooth(&a, smooth_std, config.smooth_trunc)),
        "b_smooth": flat(&gaussian_smooth(&b, smooth_std, config.smooth_trunc)),
        "cost": cost,
    })
    .to_string())
}

fn trajectory_value(env: &Env, t: &Trajectory) -> Value {
    let rows: Vec<Value> = t
        .observations
        .iter()
        .chain(std::iter::once(&t.final_observation))
        .map(|o| {
            let q = [o[0], o[1]];
            json!({
                "elbow": arm::elbow(q),
                "ee": arm::end_effector(q),
                "handle": [o[2], o[3]],
                "extension": o[4],
            })
        })
        .collect();
    json!({
        "frames": rows,
        "reward": t.total_reward(),
        "success": t.success,
        "failed": t.failed,
        "cabinet_x": env.params().get("cabinet_x"),
    })
}

/// Drawer episode at the given cabinet offset. With an empty `policy_json`
/// a scripted controller reaches for the handle and pulls; otherwise the
/// deterministic action of the pasted policy file is used.
#[wasm_bindgen]
pub fn drawer_rollout(
    cabinet_x: f64,
    gain: f64,
    policy_json: &str,
    seed: u64,
) -> Result<String, JsValue> {
    let spec = EnvSpec::drawer();
    let mut params = spec.nominal_params();
    params.set("cabinet_x", cabinet_x).map_err(err)?;
    let env = Env::new(&spec, &params).map_err(err)?;
    let traj = if policy_json.trim().is_empty() {
        let mut pulling = false;
        envs::rollout_with(&env, seed, |_, o, _| {
            let q = [o[0], o[1]];
            let handle = [o[2], o[3]];
            let ee = arm::end_effector(q);
            pulling |= arm::norm(arm::sub(ee, handle)) < 0.02;
            let goal = if pulling {
                [handle[0], handle[1] - 0.25]
            } else {
                handle
            };
            let q_goal = arm::inverse_kinematics(goal);
            (0..2)
                .map(|i| (gain * (q_goal[i] - q[i])).clamp(-1.0, 1.0))
                .collect()
        })
    } else {
        let parsed: PolicyJson = serde_json::from_str(policy_json).map_err(err)?;
        let policy = PolicySnapshot::from_json(&parsed).map_err(err)?;
        envs::rollout(&env, &policy, seed, false)
    };
    Ok(trajectory_value(&env, &traj).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reps_demo_moves_toward_target() {
        let mut d = RepsDemo::new(1.0, -0.5, 0.5, 3).unwrap();
        for _ in 0..30 {
            d.step(64, 0.5).unwrap();
        }
        let s: Value = serde_json::from_str(&d.state()).unwrap();
        assert!((s["mean"][0].as_f64().unwrap() - 1.0).abs() < 0.1);
        assert!((s["mean"][1].as_f64().unwrap() + 0.5).abs() < 0.1);
    }

    #[test]
    fn identical_tracks_cost_nothing() {
        let v: Value =
            serde_json::from_str(&discrepancy_demo(0.0, 0.0, 3.0, 0.5, 1.0, 1).unwrap()).unwrap();
        assert_eq!(v["cost"].as_f64().unwrap(), 0.0);
        let shifted: Value =
            serde_json::from_str(&discrepancy_demo(1.0, 0.0, 3.0, 0.5, 1.0, 1).unwrap()).unwrap();
        assert!(shifted["cost"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn scripted_rollout_has_one_frame_per_step_plus_final() {
        let v: Value = serde_json::from_str(&drawer_rollout(0.1, 3.0, "", 0).unwrap()).unwrap();
        assert_eq!(
            v["frames"].as_array().unwrap().len(),
            EnvSpec::drawer().episode_length + 1
        );
        assert!(v["reward"].as_f64().unwrap().is_finite());
    }
}
