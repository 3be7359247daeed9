//! The outer loop: train on the current parameter distribution, run the
//! policy on the target, cost sampled parameters against what the target
//! showed, and refit the distribution.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::discrepancy::{self, batch_cost, CostMode, DiscrepancyConfig};
use crate::envs::{EnvSpec, ObservationMask, TargetEnv, TargetTrajectory};
use crate::error::{contract, Error, Result};
use crate::param_space::{kl_divergence, ParamDistribution, Randomization, SimParams};
use crate::policy::PolicySnapshot;
use crate::ppo::{self, CurveRow, PpoConfig};
use crate::reps::{self, PassStats, RepsConfig};
use crate::rng::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptConfig {
    pub max_iterations: usize,
    pub samples_per_update: usize,
    pub real_rollouts: usize,
    pub rl_iterations_first: usize,
    pub rl_iterations_warm: usize,
    pub success_eval_trials: usize,
    pub success_threshold: f64,
    pub seed: u64,
}

impl Default for SimOptConfig {
    fn default() -> Self {
        SimOptConfig {
            max_iterations: 8,
            samples_per_update: 512,
            real_rollouts: 3,
            rl_iterations_first: 200,
            rl_iterations_warm: 10,
            success_eval_trials: 20,
            success_threshold: 0.8,
            seed: 0,
        }
    }
}

impl SimOptConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("samples_per_update", self.samples_per_update),
            ("real_rollouts", self.real_rollouts),
            ("rl_iterations_first", self.rl_iterations_first),
            ("rl_iterations_warm", self.rl_iterations_warm),
            ("success_eval_trials", self.success_eval_trials),
        ];
        if let Some((k, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(contract(format!("simopt.{k} must be at least 1")));
        }
        if self.samples_per_update < 2 {
            return Err(contract("simopt.samples_per_update must be at least 2"));
        }
        if !(self.success_threshold > 0.0 && self.success_threshold <= 1.0) {
            return Err(contract("simopt.success_threshold must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Everything one calibration experiment needs.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub spec: EnvSpec,
    /// Values for the parameters the distribution does not cover.
    pub base: SimParams,
    pub initial: ParamDistribution,
    /// Hidden parameters of the target system.
    pub true_params: SimParams,
    pub mask: ObservationMask,
    pub ppo: PpoConfig,
    pub reps: RepsConfig,
    pub discrepancy: DiscrepancyConfig,
    pub simopt: SimOptConfig,
    /// Distribution dimensions left out of the distance-to-truth metric.
    pub distance_exclude: Vec<String>,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.ppo.validate()?;
        self.reps.validate()?;
        self.discrepancy.validate()?;
        self.simopt.validate()?;
        Randomization::new(self.base.clone(), self.initial.clone())?;
        if self.true_params.names != self.base.names {
            return Err(contract(
                "target parameters must name every simulator parameter",
            ));
        }
        for n in &self.distance_exclude {
            if !self.initial.names().contains(n) {
                return Err(contract(format!(
                    "distance exclusion {n} is not a distribution dimension"
                )));
            }
        }
        Ok(())
    }

    pub fn target(&self) -> Result<TargetEnv> {
        let mut spec = self.spec;
        spec.episode_length = self.ppo.episode_length;
        TargetEnv::new(&spec, &self.true_params, self.mask.clone())
    }

    /// Environment spec with the training episode length.
    pub fn rollout_spec(&self) -> EnvSpec {
        let mut spec = self.spec;
        spec.episode_length = self.ppo.episode_length;
        spec
    }

    /// Internal-space image of the true parameters, restricted to the
    /// distribution's dimensions.
    pub fn true_internal(&self, dist: &ParamDistribution) -> Result<DVector<f64>> {
        let values = dist
            .names()
            .iter()
            .map(|n| {
                self.true_params
                    .get(n)
                    .ok_or_else(|| contract(format!("target has no value for {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        dist.from_physical(&SimParams::new(dist.names().to_vec(), values)?)
    }

    /// Euclidean distance from the mean to the truth in internal space.
    pub fn distance_to_truth(&self, dist: &ParamDistribution) -> Result<f64> {
        let t = self.true_internal(dist)?;
        let d2: f64 = dist
            .names()
            .iter()
            .enumerate()
            .filter(|(_, n)| !self.distance_exclude.contains(n))
            .map(|(i, _)| (dist.mean()[i] - t[i]).powi(2))
            .sum();
        Ok(d2.sqrt())
    }
}

/// Loop state between iterations.
#[derive(Clone, Debug)]
pub struct LoopState {
    pub dist: ParamDistribution,
    pub policy: Option<PolicySnapshot>,
    pub iteration: usize,
}

impl LoopState {
    pub fn initial(exp: &Experiment) -> Self {
        LoopState {
            dist: exp.initial.clone(),
            policy: None,
            iteration: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostStats {
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub blowups: usize,
}

impl CostStats {
    pub fn of(batch: &discrepancy::CostBatch) -> Self {
        let c = &batch.costs;
        CostStats {
            median: batch.median(),
            mean: c.iter().sum::<f64>() / c.len().max(1) as f64,
            min: c.iter().copied().fold(f64::INFINITY, f64::min),
            max: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            blowups: batch.blowups.len(),
        }
    }
}

/// Wall-clock seconds per phase. These are the only non-reproducible fields
/// of a record.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub rl: f64,
    pub target: f64,
    /// Cost rollouts plus the distribution update.
    pub calibrate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub dist_before: ParamDistribution,
    pub dist_after: ParamDistribution,
    /// File the deployed policy snapshot is written to.
    pub policy: String,
    pub warm_start: bool,
    pub rl_curve: Vec<CurveRow>,
    pub train_reward: f64,
    pub target_seeds: Vec<u64>,
    pub target_success: f64,
    pub cost: Option<CostStats>,
    pub passes: Vec<PassStats>,
    /// `KL(after ‖ before)` over the whole iteration.
    pub kl_used: f64,
    pub distance_to_truth: f64,
    /// Set when the distribution update was skipped.
    pub aborted: Option<String>,
    pub timings: Timings,
}

impl IterationRecord {
    /// Copy with timings zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        IterationRecord {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

pub fn policy_file(iteration: usize) -> String {
    format!("policy_{iteration}.json")
}

pub fn dist_file(iteration: usize) -> String {
    format!("dist_{iteration}.json")
}

/// Seeds of the target episodes used for costing in iteration `i`.
pub fn target_rollout_seeds(seed: u64, iteration: usize, n: usize) -> Vec<u64> {
    (0..n)
        .map(|k| derive_seed(seed, "simopt.target", (iteration * n + k) as u64))
        .collect()
}

/// Fixed seed set for judging target success, shared by all iterations.
pub fn success_seeds(seed: u64, n: usize) -> Vec<u64> {
    (0..n)
        .map(|k| derive_seed(seed, "simopt.success", k as u64))
        .collect()
}

/// Samples the current distribution, costs each draw and runs the chained
/// KL-bounded passes.
pub fn calibrate(
    exp: &Experiment,
    dist: &ParamDistribution,
    mode: CostMode<'_>,
    real: &[TargetTrajectory],
    sample_seed: u64,
) -> Result<(ParamDistribution, discrepancy::CostBatch, Vec<PassStats>)> {
    let rand = Randomization::new(exp.base.clone(), dist.clone())?;
    let n = exp.simopt.samples_per_update;
    let (internal, params): (Vec<_>, Vec<_>) = (0..n as u64)
        .map(|k| {
            let (x, p, _) = rand.sample_at(sample_seed, k);
            (x, p)
        })
        .unzip();
    let batch = batch_cost(
        &params,
        mode,
        &exp.rollout_spec(),
        real,
        &exp.mask,
        &exp.discrepancy,
    )?;
    let (next, passes) = reps::update_chain(dist, &internal, &batch.costs, &exp.reps)?;
    Ok((next, batch, passes))
}

/// One round: train, deploy on the target, cost and update.
pub fn run_iteration(
    exp: &Experiment,
    state: &LoopState,
) -> Result<(LoopState, IterationRecord, PolicySnapshot)> {
    let i = state.iteration;
    let seed = exp.simopt.seed;
    let rand = Randomization::new(exp.base.clone(), state.dist.clone())?;
    let target = exp.target()?;

    let t0 = Instant::now();
    let warm = state.policy.is_some();
    let ppo_cfg = PpoConfig {
        n_iterations: if warm {
            exp.simopt.rl_iterations_warm
        } else {
            exp.simopt.rl_iterations_first
        },
        ..exp.ppo.clone()
    };
    let trained = ppo::train(
        &exp.spec,
        &rand,
        state.policy.as_ref(),
        &ppo_cfg,
        derive_seed(seed, "simopt.ppo", i as u64),
    )?;
    let policy = trained.best;
    let rl = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let target_success = target.success_rate(
        &policy,
        &success_seeds(seed, exp.simopt.success_eval_trials),
    );
    let target_seeds = target_rollout_seeds(seed, i, exp.simopt.real_rollouts);
    let real: Vec<TargetTrajectory> = target_seeds
        .iter()
        .map(|&s| target.rollout(&policy, s))
        .collect();
    let target_time = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let mode = CostMode::ClosedLoop {
        actor: &policy,
        seed: target_seeds[0],
    };
    let outcome = calibrate(
        exp,
        &state.dist,
        mode,
        &real,
        derive_seed(seed, "simopt.sample", i as u64),
    );
    let cost_time = t2.elapsed().as_secs_f64();

    let (dist_after, cost, passes, aborted) = match outcome {
        Ok((next, batch, passes)) => (next, Some(CostStats::of(&batch)), passes, None),
        Err(e @ (Error::DegenerateBatch(_) | Error::NotPositiveDefinite { .. })) => {
            log::warn!("iteration {i}: distribution update aborted: {e}");
            (state.dist.clone(), None, Vec::new(), Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let kl_used = kl_divergence(&dist_after, &state.dist)?;
    let record = IterationRecord {
        iteration: i,
        dist_before: state.dist.clone(),
        dist_after: dist_after.clone(),
        policy: policy_file(i),
        warm_start: warm,
        rl_curve: trained.curve,
        train_reward: trained.best_reward,
        target_seeds,
        target_success,
        cost,
        passes,
        kl_used,
        distance_to_truth: exp.distance_to_truth(&dist_after)?,
        aborted,
        timings: Timings {
            rl,
            target: target_time,
            calibrate: cost_time,
        },
    };
    log::info!(
        "iteration {i}: target success {:.2}, median cost {:?}, kl {:.3}, distance {:.4}",
        record.target_success,
        record.cost.as_ref().map(|c| c.median),
        record.kl_used,
        record.distance_to_truth
    );
    let next = LoopState {
        dist: dist_after,
        policy: Some(policy.clone()),
        iteration: i + 1,
    };
    Ok((next, record, policy))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Success,
    MaxIterations,
    RepeatedAborts,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    /// Success of the untrained initial policy on the target.
    pub initial_success: f64,
    pub initial_distance: f64,
    pub records: Vec<IterationRecord>,
    pub final_dist: ParamDistribution,
    pub final_policy: Option<PolicySnapshot>,
    pub stop: StopReason,
}

impl RunReport {
    pub fn success_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.target_success).collect()
    }

    /// Index of the first iteration whose policy met the threshold.
    pub fn iterations_to_success(&self, threshold: f64) -> Option<usize> {
        self.records
            .iter()
            .position(|r| r.target_success >= threshold)
    }
}

pub fn run(exp: &Experiment) -> Result<RunReport> {
    run_with(exp, |_, _| Ok(()))
}

/// [`run`] with a callback receiving each record and its deployed policy as
/// soon as the iteration finishes.
pub fn run_with<F>(exp: &Experiment, mut on_record: F) -> Result<RunReport>
where
    F: FnMut(&IterationRecord, &PolicySnapshot) -> Result<()>,
{
    exp.validate()?;
    let target = exp.target()?;
    let seeds = success_seeds(exp.simopt.seed, exp.simopt.success_eval_trials);
    let untrained = ppo::fresh_snapshot(
        &exp.rollout_spec(),
        &exp.ppo,
        derive_seed(exp.simopt.seed, "simopt.ppo", 0),
    );
    let initial_success = target.success_rate(&untrained, &seeds);
    let initial_distance = exp.distance_to_truth(&exp.initial)?;

    let mut state = LoopState::initial(exp);
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIterations;
    let mut consecutive_aborts = 0;
    for _ in 0..exp.simopt.max_iterations {
        let (next, record, policy) = run_iteration(exp, &state)?;
        on_record(&record, &policy)?;
        consecutive_aborts = if record.aborted.is_some() {
            consecutive_aborts + 1
        } else {
            0
        };
        let succeeded = record.target_success >= exp.simopt.success_threshold;
        records.push(record);
        state = next;
        if succeeded {
            stop = StopReason::Success;
            break;
        }
        if consecutive_aborts >= 2 {
            log::error!("two consecutive aborted updates; stopping");
            stop = StopReason::RepeatedAborts;
            break;
        }
    }
    Ok(RunReport {
        initial_success,
        initial_distance,
        records,
        final_dist: state.dist,
        final_policy: state.policy,
        stop,
    })
}

/// Closed- versus open-loop costing from the same target evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub seed: u64,
    pub closed_shift: Vec<f64>,
    pub open_shift: Vec<f64>,
    /// Cosine between each mean shift and the direction to the truth.
    pub closed_cosine: f64,
    pub open_cosine: f64,
    pub closed_cost: CostStats,
    pub open_cost: CostStats,
}

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.norm() * b.norm();
    if n == 0.0 {
        0.0
    } else {
        a.dot(b) / n
    }
}

/// Runs one update from `state.dist` twice, once costing closed-loop policy
/// rollouts and once replaying the target's recorded actions, and compares
/// where each moves the mean. Needs a trained policy in `state`.
pub fn ablation_open_loop(
    exp: &Experiment,
    state: &LoopState,
    seed: u64,
) -> Result<ModeComparison> {
    let policy = state
        .policy
        .as_ref()
        .ok_or_else(|| contract("the comparison needs a trained policy"))?;
    let target = exp.target()?;
    let seeds = target_rollout_seeds(seed, 0, exp.simopt.real_rollouts);
    let real: Vec<TargetTrajectory> = seeds.iter().map(|&s| target.rollout(policy, s)).collect();
    let sample_seed = derive_seed(seed, "simopt.sample", 0);
    let closed = calibrate(
        exp,
        &state.dist,
        CostMode::ClosedLoop {
            actor: policy,
            seed: seeds[0],
        },
        &real,
        sample_seed,
    )?;
    let open = calibrate(exp, &state.dist, CostMode::OpenLoop, &real, sample_seed)?;
    let toward = exp.true_internal(&state.dist)? - state.dist.mean();
    let closed_shift = closed.0.mean() - state.dist.mean();
    let open_shift = open.0.mean() - state.dist.mean();
    Ok(ModeComparison {
        seed,
        closed_cosine: cosine(&closed_shift, &toward),
        open_cosine: cosine(&open_shift, &toward),
        closed_shift: closed_shift.iter().copied().collect(),
        open_shift: open_shift.iter().copied().collect(),
        closed_cost: CostStats::of(&closed.1),
        open_cost: CostStats::of(&open.1),
    })
}
