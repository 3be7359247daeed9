//! Clipped-surrogate PPO with GAE under domain randomization. Every episode
//! runs under its own draw of the simulation parameters.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::envs::{self, Actor, Env, EnvSpec, REWARD_FLOOR};
use crate::error::{contract, Result};
use crate::parallel;
use crate::param_space::{Randomization, SimParams};
use crate::policy::{stack_rows, PolicyGrad, PolicyParams, PolicySnapshot, ValueParams};
use crate::rng::{derive_seed, stream};

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub n_agents: usize,
    pub episode_length: usize,
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub entropy_coef: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub step_size: f64,
    pub value_step_size: f64,
    pub desired_kl: f64,
    pub n_iterations: usize,
    /// Global gradient-norm cap per network; 0 disables it.
    pub max_grad_norm: f64,
    pub init_log_std: f64,
    pub obs_std_floor: f64,
    /// Sample count at which the observation statistics stop accumulating
    /// history; 0 keeps everything.
    pub obs_norm_window: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            n_agents: 32,
            episode_length: 150,
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            entropy_coef: 0.0,
            epochs: 5,
            minibatch_size: 1200,
            step_size: 5e-4,
            value_step_size: 1e-3,
            desired_kl: 0.01,
            n_iterations: 200,
            max_grad_norm: 0.5,
            init_log_std: 0.0,
            obs_std_floor: crate::policy::DEFAULT_STD_FLOOR,
            obs_norm_window: 0.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (
                self.clip > 0.0 && self.clip < 1.0,
                "clip must lie in (0, 1)",
            ),
            (
                self.gamma > 0.0 && self.gamma <= 1.0,
                "gamma must lie in (0, 1]",
            ),
            (
                self.lambda > 0.0 && self.lambda <= 1.0,
                "lambda must lie in (0, 1]",
            ),
            (self.step_size > 0.0, "step_size must be positive"),
            (
                self.value_step_size > 0.0,
                "value_step_size must be positive",
            ),
            (self.n_agents > 0, "n_agents must be positive"),
            (self.episode_length > 0, "episode_length must be positive"),
            (self.minibatch_size > 0, "minibatch_size must be positive"),
            (self.desired_kl > 0.0, "desired_kl must be positive"),
            (
                self.entropy_coef >= 0.0,
                "entropy_coef must be non-negative",
            ),
            (
                self.max_grad_norm >= 0.0,
                "max_grad_norm must be non-negative",
            ),
            (self.obs_std_floor > 0.0, "obs_std_floor must be positive"),
            (
                self.obs_norm_window >= 0.0,
                "obs_norm_window must be non-negative",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(contract(*msg)),
            None => Ok(()),
        }
    }
}

/// `δ_t = r_t + γ V_{t+1} − V_t`, `A_t = Σ_k (γλ)^k δ_{t+k}`, returns `A + V[..T]`.
/// `values` has one entry more than `rewards`; put 0 last for a terminal state.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if values.len() != rewards.len() + 1 {
        return Err(contract(format!(
            "{} rewards need {} values, got {}",
            rewards.len(),
            rewards.len() + 1,
            values.len()
        )));
    }
    let t = rewards.len();
    let mut adv = vec![0.0; t];
    let mut acc = 0.0;
    for i in (0..t).rev() {
        let delta = rewards[i] + gamma * values[i + 1] - values[i];
        acc = delta + gamma * lambda * acc;
        adv[i] = acc;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Shifts and scales to mean 0, std 1 (population std, guarded by 1e-8).
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    for a in adv.iter_mut() {
        *a = (*a - mean) / (std + 1e-8);
    }
}

/// `min(ρA, clip(ρ, 1−ε, 1+ε) A)`
pub fn clipped_surrogate(ratio: f64, adv: f64, clip: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - clip, 1.0 + clip) * adv)
}

/// Derivative of [`clipped_surrogate`] with respect to `log ρ`.
pub fn surrogate_log_ratio_grad(ratio: f64, adv: f64, clip: f64) -> f64 {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * adv;
    if unclipped <= clipped {
        unclipped
    } else {
        0.0
    }
}

/// One collected step; `obs` is already normalised.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub mean: Vec<f64>,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RolloutBatch {
    pub samples: Vec<Sample>,
    /// Raw observations, for the normaliser.
    pub raw_obs: Vec<Vec<f64>>,
    pub episode_returns: Vec<f64>,
    pub successes: usize,
    pub failures: usize,
    pub xi: Vec<SimParams>,
}

impl RolloutBatch {
    pub fn mean_return(&self) -> f64 {
        self.episode_returns.iter().sum::<f64>() / self.episode_returns.len().max(1) as f64
    }

    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.episode_returns.len().max(1) as f64
    }
}

fn obs_matrix(samples: &[Sample]) -> DMatrix<f64> {
    stack_rows(&samples.iter().map(|s| s.obs.as_slice()).collect::<Vec<_>>())
}

fn action_matrix(samples: &[Sample]) -> DMatrix<f64> {
    stack_rows(
        &samples
            .iter()
            .map(|s| s.action.as_slice())
            .collect::<Vec<_>>(),
    )
}

/// Mean clipped surrogate over `samples` (plus the entropy bonus).
pub fn surrogate_objective(
    policy: &PolicyParams,
    samples: &[Sample],
    clip: f64,
    entropy_coef: f64,
) -> f64 {
    let n = samples.len().max(1) as f64;
    let surr: f64 = samples
        .iter()
        .map(|s| {
            let mean = policy.net.forward(&s.obs).out;
            let ratio = (policy.log_prob_of_mean(&mean, &s.action) - s.log_prob).exp();
            clipped_surrogate(ratio, s.advantage, clip)
        })
        .sum();
    surr / n + entropy_coef * policy.log_std.iter().sum::<f64>()
}

/// Gradient of [`surrogate_objective`]; also returns the clipped fraction.
pub fn surrogate_gradient(
    policy: &PolicyParams,
    samples: &[Sample],
    clip: f64,
    entropy_coef: f64,
) -> (PolicyGrad, f64) {
    let n = samples.len().max(1) as f64;
    let mut grad = policy.zero_grad();
    let x = obs_matrix(samples);
    let a = action_matrix(samples);
    let fwd = policy.net.forward_batch(&x);
    let log_probs = policy.log_probs_batch(&fwd.out, &a);
    let mut clipped = 0usize;
    let coefs: Vec<f64> = samples
        .iter()
        .zip(&log_probs)
        .map(|(s, lp)| {
            let ratio = (lp - s.log_prob).exp();
            if (ratio - 1.0).abs() > clip {
                clipped += 1;
            }
            surrogate_log_ratio_grad(ratio, s.advantage, clip) / n
        })
        .collect();
    policy.accumulate_log_prob_grad_batch(&x, &fwd, &a, &coefs, &mut grad);
    for g in &mut grad.log_std {
        *g += entropy_coef;
    }
    (grad, clipped as f64 / n)
}

/// Exact mean `KL(old ‖ new)` over the batch states.
pub fn mean_kl(policy: &PolicyParams, old_log_std: &[f64], samples: &[Sample]) -> f64 {
    let n = samples.len().max(1) as f64;
    let means = policy.net.forward_batch(&obs_matrix(samples)).out;
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (0..means.ncols())
                .map(|j| {
                    let (lo, ln) = (old_log_std[j], policy.log_std[j]);
                    let (vo, vn) = ((2.0 * lo).exp(), (2.0 * ln).exp());
                    ln - lo + (vo + (s.mean[j] - means[(i, j)]).powi(2)) / (2.0 * vn) - 0.5
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        / n
}

/// Squared-error value loss `½ mean (V − R)²` and its gradient.
pub fn value_loss_and_grad(value: &ValueParams, samples: &[Sample]) -> (f64, Vec<f64>) {
    let m = samples.len().max(1) as f64;
    let x = obs_matrix(samples);
    let fwd = value.net.forward_batch(&x);
    let mut g = DMatrix::zeros(samples.len(), 1);
    let mut loss = 0.0;
    for (i, s) in samples.iter().enumerate() {
        let err = fwd.out[(i, 0)] - s.ret;
        loss += 0.5 * err * err / m;
        g[(i, 0)] = err / m;
    }
    let mut grad = vec![0.0; value.net.len()];
    value.net.backward_batch(&x, &fwd, &g, &mut grad);
    (loss, grad)
}

/// Adam moments for one flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// Descent step on `params` along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = ADAM_BETA1 * self.m[i] + (1.0 - ADAM_BETA1) * grad[i];
            self.v[i] = ADAM_BETA2 * self.v[i] + (1.0 - ADAM_BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + ADAM_EPS);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Optimizers {
    net: Adam,
    log_std: Adam,
    value: Adam,
}

impl Optimizers {
    pub fn for_networks(policy: &PolicyParams, value: &ValueParams) -> Self {
        Optimizers {
            net: Adam::new(policy.net.len()),
            log_std: Adam::new(policy.log_std.len()),
            value: Adam::new(value.net.len()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateMetrics {
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub epochs_run: usize,
    pub value_loss: f64,
    pub early_stopped: bool,
    pub aborted: bool,
}

fn clip_norm(grads: &mut [&mut [f64]], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grads
        .iter()
        .flat_map(|g| g.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads
            .iter_mut()
            .for_each(|g| g.iter_mut().for_each(|v| *v *= s));
    }
}

/// Runs `epochs` passes of shuffled minibatch ascent on the clipped surrogate
/// and squared-error value regression. Advantages in `batch` must already
/// be normalised. On a non-finite loss or gradient the inputs are returned
/// unchanged with `aborted` set.
pub fn ppo_update(
    policy: &PolicyParams,
    value: &ValueParams,
    batch: &RolloutBatch,
    config: &PpoConfig,
    opt: &mut Optimizers,
    shuffle_seed: u64,
) -> (PolicyParams, ValueParams, UpdateMetrics) {
    let mut p = policy.clone();
    let mut v = value.clone();
    let opt_before = opt.clone();
    let mut metrics = UpdateMetrics::default();
    let n = batch.samples.len();
    if n == 0 {
        return (p, v, metrics);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = stream(shuffle_seed, "ppo.shuffle", 0);
    let mut clip_sum = 0.0;
    let mut clip_count = 0usize;
    let mut value_loss = 0.0;
    for _epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        value_loss = 0.0;
        for chunk in order.chunks(config.minibatch_size) {
            let mb: Vec<Sample> = chunk.iter().map(|&i| batch.samples[i].clone()).collect();
            let (mut g, clip_frac) = surrogate_gradient(&p, &mb, config.clip, config.entropy_coef);
            clip_sum += clip_frac;
            clip_count += 1;

            let (loss, mut gv) = value_loss_and_grad(&v, &mb);
            value_loss += loss * mb.len() as f64 / n as f64;

            let finite = loss.is_finite()
                && g.net
                    .iter()
                    .chain(&g.log_std)
                    .chain(&gv)
                    .all(|x| x.is_finite());
            if !finite {
                log::warn!("non-finite PPO loss or gradient; update aborted");
                *opt = opt_before;
                metrics.aborted = true;
                return (policy.clone(), value.clone(), metrics);
            }
            // Ascent on the surrogate: the optimiser descends, so negate.
            g.net
                .iter_mut()
                .chain(g.log_std.iter_mut())
                .for_each(|x| *x = -*x);
            clip_norm(&mut [&mut g.net, &mut g.log_std], config.max_grad_norm);
            clip_norm(&mut [&mut gv], config.max_grad_norm);
            opt.net.step(&mut p.net.data, &g.net, config.step_size);
            opt.log_std
                .step(&mut p.log_std, &g.log_std, config.step_size);
            p.clamp_log_std();
            opt.value.step(&mut v.net.data, &gv, config.value_step_size);
        }
        metrics.epochs_run += 1;
        metrics.mean_kl = mean_kl(&p, &policy.log_std, &batch.samples);
        if metrics.mean_kl > 1.5 * config.desired_kl {
            metrics.early_stopped = true;
            break;
        }
    }
    if !p.is_finite() || !metrics.mean_kl.is_finite() {
        log::warn!("PPO update produced non-finite parameters; update aborted");
        *opt = opt_before;
        metrics.aborted = true;
        return (policy.clone(), value.clone(), metrics);
    }
    metrics.clip_fraction = clip_sum / clip_count.max(1) as f64;
    metrics.value_loss = value_loss;
    (p, v, metrics)
}

struct AgentData {
    samples: Vec<Sample>,
    raw_obs: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    last_obs: Vec<f64>,
    terminal: bool,
    total_reward: f64,
    success: bool,
    failed: bool,
    xi: SimParams,
}

/// Collects one stochastic episode per agent and fills in GAE advantages
/// (normalised over the batch) and returns.
pub fn collect(
    spec: &EnvSpec,
    rand: &Randomization,
    snapshot: &PolicySnapshot,
    value: &ValueParams,
    config: &PpoConfig,
    seed: u64,
    iteration: usize,
) -> Result<RolloutBatch> {
    let xi_seed = derive_seed(seed, "ppo.xi", iteration as u64);
    let agents = parallel::map_indexed(config.n_agents, |k| -> Result<AgentData> {
        let (_, xi, _) = rand.sample_at(xi_seed, k as u64);
        let env = Env::new(spec, &xi)?;
        let ep_seed = derive_seed(
            seed,
            "ppo.episode",
            (iteration * config.n_agents + k) as u64,
        );
        let mut samples = Vec::with_capacity(spec.episode_length);
        let mut raw_obs = Vec::with_capacity(spec.episode_length);
        let traj = envs::rollout_with(&env, ep_seed, |_, obs, r| {
            let x = snapshot.obs_norm.normalize(obs);
            let mean = snapshot.policy.net.forward(&x).out;
            let (action, log_prob) = snapshot.policy.sample_with_mean(&mean, r);
            raw_obs.push(obs.to_vec());
            samples.push(Sample {
                obs: x,
                action: action.clone(),
                log_prob,
                mean,
                advantage: 0.0,
                ret: 0.0,
            });
            action
        });
        let valid = samples.len();
        let mut rewards = traj.rewards[..valid].to_vec();
        if traj.failed {
            // The padded floor rewards are charged to the step that blew up.
            rewards[valid - 1] = REWARD_FLOOR * (spec.episode_length - valid + 1) as f64;
        }
        Ok(AgentData {
            samples,
            raw_obs,
            rewards,
            last_obs: snapshot.obs_norm.normalize(&traj.final_observation),
            terminal: traj.failed,
            total_reward: traj.total_reward(),
            success: traj.success,
            failed: traj.failed,
            xi,
        })
    });
    let mut batch = RolloutBatch::default();
    let per_agent = parallel::map_indexed(agents.len(), |k| -> Result<Vec<Sample>> {
        let a = agents[k].as_ref().map_err(|e| contract(e.to_string()))?;
        let mut values = value.values_batch(&obs_matrix(&a.samples));
        values.push(if a.terminal {
            0.0
        } else {
            value.value(&a.last_obs)
        });
        let (adv, ret) = compute_gae(&a.rewards, &values, config.gamma, config.lambda)?;
        Ok(a.samples
            .iter()
            .zip(adv.into_iter().zip(ret))
            .map(|(s, (adv, ret))| Sample {
                advantage: adv,
                ret,
                ..s.clone()
            })
            .collect())
    });
    for (a, samples) in agents.into_iter().zip(per_agent) {
        let a = a?;
        batch.samples.extend(samples?);
        batch.raw_obs.extend(a.raw_obs);
        batch.episode_returns.push(a.total_reward);
        batch.successes += a.success as usize;
        batch.failures += a.failed as usize;
        batch.xi.push(a.xi);
    }
    let mut adv: Vec<f64> = batch.samples.iter().map(|s| s.advantage).collect();
    normalize_advantages(&mut adv);
    for (s, a) in batch.samples.iter_mut().zip(adv) {
        s.advantage = a;
    }
    Ok(batch)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_kl: f64,
    pub clip_fraction: f64,
    pub success_rate: f64,
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from("iteration,mean_reward,mean_kl,clip_fraction\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.iteration, r.mean_reward, r.mean_kl, r.clip_fraction
        );
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    /// Snapshot with the highest mean episode reward seen during training.
    pub best: PolicySnapshot,
    pub best_reward: f64,
    pub last: PolicySnapshot,
    pub curve: Vec<CurveRow>,
}

/// Fresh policy for `spec` with the configured initial exploration noise.
pub fn fresh_snapshot(spec: &EnvSpec, config: &PpoConfig, seed: u64) -> PolicySnapshot {
    let mut r = stream(seed, "ppo.init", 0);
    let mut s = PolicySnapshot::fresh(spec.obs_dim(), spec.act_dim(), &mut r);
    s.policy.log_std = vec![config.init_log_std; spec.act_dim()];
    s.obs_norm.std_floor = config.obs_std_floor;
    s
}

pub fn train(
    spec: &EnvSpec,
    rand: &Randomization,
    init: Option<&PolicySnapshot>,
    config: &PpoConfig,
    seed: u64,
) -> Result<TrainOutput> {
    train_with(spec, rand, init, config, seed, |_, _| {})
}

/// [`train`] with a callback after every iteration, given the curve row and
/// the snapshot that produced it.
pub fn train_with<F>(
    spec: &EnvSpec,
    rand: &Randomization,
    init: Option<&PolicySnapshot>,
    config: &PpoConfig,
    seed: u64,
    mut on_iteration: F,
) -> Result<TrainOutput>
where
    F: FnMut(&CurveRow, &PolicySnapshot),
{
    config.validate()?;
    let mut spec = *spec;
    spec.episode_length = config.episode_length;
    spec.validate()?;
    let mut snap = match init {
        Some(s) => {
            if s.policy.obs_dim() != spec.obs_dim() || s.policy.act_dim() != spec.act_dim() {
                return Err(contract("initial policy does not fit the environment"));
            }
            s.clone()
        }
        None => fresh_snapshot(&spec, config, seed),
    };
    snap.obs_norm.max_count = (config.obs_norm_window > 0.0).then_some(config.obs_norm_window);
    let mut value = match &snap.value {
        Some(v) => v.clone(),
        None => ValueParams::new(spec.obs_dim(), &mut stream(seed, "ppo.init", 1)),
    };
    let mut opt = Optimizers::for_networks(&snap.policy, &value);
    let mut best: Option<(f64, PolicySnapshot)> = None;
    let mut curve = Vec::with_capacity(config.n_iterations);

    for it in 0..config.n_iterations {
        let iter_seed = derive_seed(seed, "ppo.iter", it as u64);
        let batch = collect(&spec, rand, &snap, &value, config, seed, it)?;
        snap.value = Some(value.clone());
        let reward = batch.mean_return();
        if best.as_ref().is_none_or(|(r, _)| reward > *r) {
            best = Some((reward, snap.clone()));
        }
        let (p, v, m) = ppo_update(&snap.policy, &value, &batch, config, &mut opt, iter_seed);
        let row = CurveRow {
            iteration: it,
            mean_reward: reward,
            mean_kl: m.mean_kl,
            clip_fraction: m.clip_fraction,
            success_rate: batch.success_rate(),
        };
        log::debug!(
            "ppo iter {it}: reward {reward:.3} success {:.2} kl {:.4} clip {:.3} epochs {} vloss {:.3} failures {}",
            row.success_rate,
            m.mean_kl,
            m.clip_fraction,
            m.epochs_run,
            m.value_loss,
            batch.failures
        );
        on_iteration(&row, &snap);
        curve.push(row);
        snap.policy = p;
        value = v;
        snap.obs_norm.update(&batch.raw_obs);
    }
    snap.value = Some(value);
    let (best_reward, best) = best.unwrap_or((f64::NEG_INFINITY, snap.clone()));
    Ok(TrainOutput {
        best,
        best_reward,
        last: snap,
        curve,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSummary {
    pub success_rate: f64,
    pub mean_reward: f64,
    pub returns: Vec<f64>,
}

/// Deterministic-policy evaluation, one randomized parameter draw per episode.
pub fn evaluate(
    spec: &EnvSpec,
    rand: &Randomization,
    actor: &dyn Actor,
    n: usize,
    seed: u64,
) -> Result<EvalSummary> {
    let xi_seed = derive_seed(seed, "eval.xi", 0);
    let results = parallel::map_indexed(n, |k| -> Result<(bool, f64)> {
        let (_, xi, _) = rand.sample_at(xi_seed, k as u64);
        let env = Env::new(spec, &xi)?;
        let t = envs::rollout(&env, actor, derive_seed(seed, "eval", k as u64), false);
        Ok((t.success, t.total_reward()))
    });
    let mut ok = 0;
    let mut returns = Vec::with_capacity(n);
    for r in results {
        let (s, ret) = r?;
        ok += s as usize;
        returns.push(ret);
    }
    Ok(EvalSummary {
        success_rate: ok as f64 / n.max(1) as f64,
        mean_reward: returns.iter().sum::<f64>() / n.max(1) as f64,
        returns,
    })
}
