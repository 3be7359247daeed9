//! Reduced-order, deterministic manipulation environments.
//!
//! An [`EnvSpec`] is a pure description; an [`Env`] binds it to one set of
//! physical parameters. All mutable state lives in [`EnvState`] values owned by
//! the caller, so any number of rollouts can run at once.

pub mod arm;
pub mod drawer;
pub mod peg;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::param_space::{Bounds, SimParams};
use crate::rng;

pub use drawer::{DrawerConstants, DrawerParams, DrawerState};
pub use peg::{PegConstants, PegParams, PegState};

/// Reward assigned to every step after a simulation blowup.
pub const REWARD_FLOOR: f64 = -50.0;
const BLOWUP_MAGNITUDE: f64 = 1e6;
const POSE_JITTER: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Drawer,
    Peg,
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "drawer" => Ok(Task::Drawer),
            "peg" => Ok(Task::Peg),
            other => Err(format!("unknown task `{other}` (expected drawer or peg)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TaskConstants {
    Drawer(DrawerConstants),
    Peg(PegConstants),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvSpec {
    pub dt: f64,
    pub episode_length: usize,
    pub constants: TaskConstants,
}

impl EnvSpec {
    pub fn drawer() -> Self {
        EnvSpec {
            dt: 1.0 / 60.0,
            episode_length: 150,
            constants: TaskConstants::Drawer(DrawerConstants::default()),
        }
    }

    pub fn peg() -> Self {
        EnvSpec {
            dt: 1.0 / 60.0,
            episode_length: 150,
            constants: TaskConstants::Peg(PegConstants::default()),
        }
    }

    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Drawer => EnvSpec::drawer(),
            Task::Peg => EnvSpec::peg(),
        }
    }

    pub fn task(&self) -> Task {
        match self.constants {
            TaskConstants::Drawer(_) => Task::Drawer,
            TaskConstants::Peg(_) => Task::Peg,
        }
    }

    pub fn obs_names(&self) -> &'static [&'static str] {
        match self.task() {
            Task::Drawer => &drawer::OBS_NAMES,
            Task::Peg => &peg::OBS_NAMES,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_names().len()
    }

    pub fn act_dim(&self) -> usize {
        2
    }

    pub fn param_names(&self) -> &'static [&'static str] {
        match self.task() {
            Task::Drawer => &drawer::PARAM_NAMES,
            Task::Peg => &peg::PARAM_NAMES,
        }
    }

    pub fn component_names(&self) -> &'static [&'static str] {
        match self.task() {
            Task::Drawer => &drawer::COMPONENT_NAMES,
            Task::Peg => &peg::COMPONENT_NAMES,
        }
    }

    pub fn nominal_params(&self) -> SimParams {
        let values = match self.task() {
            Task::Drawer => drawer::NOMINAL.to_vec(),
            Task::Peg => peg::NOMINAL.to_vec(),
        };
        SimParams {
            names: self.param_names().iter().map(|s| s.to_string()).collect(),
            values,
        }
    }

    /// Physical bounds for `name`.
    pub fn bounds_of(&self, name: &str) -> Option<Bounds> {
        let table: &[(f64, f64)] = match self.task() {
            Task::Drawer => &drawer::BOUNDS,
            Task::Peg => &peg::BOUNDS,
        };
        let i = self.param_names().iter().position(|n| *n == name)?;
        Some(Bounds::new(table[i].0, table[i].1))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.episode_length == 0 {
            return Err(contract(
                "dt must be positive and episode_length at least 1",
            ));
        }
        Ok(())
    }

    fn check_params(&self, params: &SimParams) -> Result<()> {
        let expected = self.param_names();
        if params
            .names
            .iter()
            .map(String::as_str)
            .eq(expected.iter().copied())
        {
            return Ok(());
        }
        let missing: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|n| !params.names.iter().any(|p| p == n))
            .collect();
        let unexpected: Vec<&str> = params
            .names
            .iter()
            .map(String::as_str)
            .filter(|p| !expected.contains(p))
            .collect();
        Err(contract(format!(
            "parameter layout mismatch: missing {missing:?}, unexpected {unexpected:?}, expected order {expected:?}"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum ResolvedParams {
    Drawer(DrawerParams),
    Peg(PegParams),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EnvState {
    Drawer(DrawerState),
    Peg(PegState),
}

impl EnvState {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            EnvState::Drawer(s) => s.to_vec(),
            EnvState::Peg(s) => s.to_vec(),
        }
    }

    fn is_sane(&self) -> bool {
        self.to_vec()
            .iter()
            .all(|v| v.is_finite() && v.abs() <= BLOWUP_MAGNITUDE)
    }
}

pub struct StepOutput {
    pub state: EnvState,
    pub observation: Vec<f64>,
    pub reward: f64,
    pub components: Vec<f64>,
}

/// An environment spec bound to validated physical parameters.
#[derive(Clone, Debug)]
pub struct Env {
    spec: EnvSpec,
    params: SimParams,
    resolved: ResolvedParams,
}

impl Env {
    pub fn new(spec: &EnvSpec, params: &SimParams) -> Result<Self> {
        spec.validate()?;
        spec.check_params(params)?;
        let resolved = match spec.task() {
            Task::Drawer => ResolvedParams::Drawer(DrawerParams::from_values(&params.values)),
            Task::Peg => ResolvedParams::Peg(PegParams::from_values(&params.values)),
        };
        Ok(Env {
            spec: *spec,
            params: params.clone(),
            resolved,
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    /// Initial state with the joints jittered uniformly by up to ±0.05 rad.
    pub fn reset(&self, seed: u64) -> EnvState {
        let mut r = rng::stream(seed, "env.reset", 0);
        let jitter = [
            r.random_range(-POSE_JITTER..=POSE_JITTER),
            r.random_range(-POSE_JITTER..=POSE_JITTER),
        ];
        match (&self.spec.constants, &self.resolved) {
            (TaskConstants::Drawer(c), ResolvedParams::Drawer(_)) => {
                EnvState::Drawer(drawer::reset(c, jitter))
            }
            (TaskConstants::Peg(c), ResolvedParams::Peg(p)) => {
                EnvState::Peg(peg::reset(c, p, jitter))
            }
            _ => unreachable!("params resolved for the spec's task"),
        }
    }

    pub fn observe(&self, state: &EnvState) -> Vec<f64> {
        match (state, &self.spec.constants, &self.resolved) {
            (EnvState::Drawer(s), TaskConstants::Drawer(c), ResolvedParams::Drawer(p)) => {
                s.observation(c, p)
            }
            (EnvState::Peg(s), _, _) => s.observation(),
            _ => unreachable!("state belongs to the spec's task"),
        }
    }

    pub fn step(&self, state: &EnvState, action: &[f64], step_index: usize) -> Result<StepOutput> {
        if action.len() != self.spec.act_dim() {
            return Err(contract(format!(
                "action has {} entries, expected {}",
                action.len(),
                self.spec.act_dim()
            )));
        }
        let dt = self.spec.dt;
        let (next, reward, components) = match (state, &self.spec.constants, &self.resolved) {
            (EnvState::Drawer(s), TaskConstants::Drawer(c), ResolvedParams::Drawer(p)) => {
                let n = drawer::step(c, dt, p, s, action);
                let (r, comps) = drawer::reward(&drawer::DrawerFeatures::of(&n, c, p), action, c);
                (EnvState::Drawer(n), r, comps.to_vec())
            }
            (EnvState::Peg(s), TaskConstants::Peg(c), ResolvedParams::Peg(p)) => {
                let n = peg::step(c, dt, p, s, action);
                let (r, comps) = peg::reward(&peg::PegFeatures::of(&n, c, p), action, c);
                (EnvState::Peg(n), r, comps.to_vec())
            }
            _ => return Err(contract("state does not belong to this environment's task")),
        };
        if !next.is_sane() || !reward.is_finite() {
            return Err(Error::Blowup { step: step_index });
        }
        let observation = self.observe(&next);
        Ok(StepOutput {
            state: next,
            observation,
            reward,
            components,
        })
    }

    pub fn is_success(&self, state: &EnvState) -> bool {
        match (state, &self.spec.constants) {
            (EnvState::Drawer(s), TaskConstants::Drawer(c)) => drawer::is_success(s, c),
            (EnvState::Peg(s), TaskConstants::Peg(c)) => peg::is_success(s, c),
            _ => false,
        }
    }
}

/// Free-function form of [`Env::reset`].
pub fn reset(spec: &EnvSpec, params: &SimParams, seed: u64) -> Result<EnvState> {
    Ok(Env::new(spec, params)?.reset(seed))
}

/// Free-function form of [`Env::step`].
pub fn step(
    spec: &EnvSpec,
    state: &EnvState,
    params: &SimParams,
    action: &[f64],
) -> Result<StepOutput> {
    Env::new(spec, params)?.step(state, action, 0)
}

/// Anything that maps observations to actions.
pub trait Actor: Sync {
    fn mean_action(&self, obs: &[f64]) -> Vec<f64>;

    /// Stochastic action and its log-probability.
    fn sample_action(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64);
}

/// One episode. Observations are recorded before the action of the same row.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub component_names: &'static [&'static str],
    pub reward_components: Vec<Vec<f64>>,
    pub success: bool,
    /// Set when the integration blew up; later rows are padding.
    pub failed: bool,
    /// Observation after the last step.
    pub final_observation: Vec<f64>,
    pub seed: u64,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn to_json(&self) -> TrajectoryJson {
        TrajectoryJson {
            obs: self.observations.clone(),
            act: self.actions.clone(),
            rew: self.rewards.clone(),
            success: self.success,
            seed: self.seed,
        }
    }
}

/// `{"obs": [[...]], "act": [[...]], "rew": [...], "success": bool, "seed": int}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub obs: Vec<Vec<f64>>,
    pub act: Vec<Vec<f64>>,
    pub rew: Vec<f64>,
    pub success: bool,
    pub seed: u64,
}

/// Runs one episode, asking `act(t, obs, rng)` for every action.
pub fn rollout_with<F>(env: &Env, seed: u64, mut act: F) -> Trajectory
where
    F: FnMut(usize, &[f64], &mut ChaCha8Rng) -> Vec<f64>,
{
    let t_max = env.spec.episode_length;
    let mut r = rng::stream(seed, "env.policy", 0);
    let mut state = env.reset(seed);
    let mut obs = env.observe(&state);
    let mut traj = Trajectory {
        observations: Vec::with_capacity(t_max),
        actions: Vec::with_capacity(t_max),
        rewards: Vec::with_capacity(t_max),
        component_names: env.spec.component_names(),
        reward_components: Vec::with_capacity(t_max),
        success: false,
        failed: false,
        final_observation: Vec::new(),
        seed,
    };
    for t in 0..t_max {
        let action = act(t, &obs, &mut r);
        match env.step(&state, &action, t) {
            Ok(out) => {
                traj.observations
                    .push(std::mem::replace(&mut obs, out.observation));
                traj.actions.push(action);
                traj.rewards.push(out.reward);
                traj.reward_components.push(out.components);
                state = out.state;
            }
            Err(e) => {
                log::warn!("episode seed {seed}: {e}; padding with floor reward");
                let n_comp = env.spec.component_names().len();
                for _ in t..t_max {
                    traj.observations.push(obs.clone());
                    traj.actions.push(vec![0.0; env.spec.act_dim()]);
                    traj.rewards.push(REWARD_FLOOR);
                    let mut comps = vec![0.0; n_comp];
                    comps[0] = REWARD_FLOOR;
                    traj.reward_components.push(comps);
                }
                traj.failed = true;
                traj.final_observation = obs;
                return traj;
            }
        }
    }
    traj.success = env.is_success(&state);
    traj.final_observation = obs;
    traj
}

pub fn rollout(env: &Env, actor: &dyn Actor, seed: u64, stochastic: bool) -> Trajectory {
    rollout_with(env, seed, |_, obs, r| {
        if stochastic {
            actor.sample_action(obs, r).0
        } else {
            actor.mean_action(obs)
        }
    })
}

/// Replays a fixed action sequence, ignoring observations.
pub fn rollout_open_loop(env: &Env, actions: &[Vec<f64>], seed: u64) -> Trajectory {
    let act_dim = env.spec.act_dim();
    rollout_with(env, seed, |t, _, _| {
        actions
            .get(t)
            .cloned()
            .unwrap_or_else(|| vec![0.0; act_dim])
    })
}

/// Observation dimensions withheld from the target's output.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationMask {
    hidden: Vec<usize>,
}

impl ObservationMask {
    pub fn none() -> Self {
        ObservationMask::default()
    }

    pub fn hiding(mut hidden: Vec<usize>) -> Self {
        hidden.sort_unstable();
        hidden.dedup();
        ObservationMask { hidden }
    }

    pub fn from_names(spec: &EnvSpec, names: &[String]) -> Result<Self> {
        let obs = spec.obs_names();
        let idx = names
            .iter()
            .map(|n| {
                obs.iter().position(|o| o == n).ok_or_else(|| {
                    contract(format!(
                        "unknown observation `{n}`, expected one of {obs:?}"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ObservationMask::hiding(idx))
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn visible(&self, obs_dim: usize) -> Vec<usize> {
        (0..obs_dim).filter(|i| !self.hidden.contains(i)).collect()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .filter(|(i, _)| !self.hidden.contains(i))
            .map(|(_, v)| *v)
            .collect()
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

/// What an experimenter records on the target system: masked observations and
/// the commands that were sent. There is no reward, state or parameter here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetTrajectory {
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub seed: u64,
}

/// The hidden-parameter stand-in for the real system.
pub struct TargetEnv {
    env: Env,
    mask: ObservationMask,
}

impl TargetEnv {
    pub fn new(spec: &EnvSpec, true_params: &SimParams, mask: ObservationMask) -> Result<Self> {
        if let Some(&i) = mask.hidden().iter().find(|&&i| i >= spec.obs_dim()) {
            return Err(contract(format!(
                "mask index {i} beyond observation width {}",
                spec.obs_dim()
            )));
        }
        Ok(TargetEnv {
            env: Env::new(spec, true_params)?,
            mask,
        })
    }

    pub fn mask(&self) -> &ObservationMask {
        &self.mask
    }

    pub fn spec(&self) -> &EnvSpec {
        self.env.spec()
    }

    /// Deterministic-policy execution on the target.
    pub fn rollout(&self, actor: &dyn Actor, seed: u64) -> TargetTrajectory {
        let t = rollout(&self.env, actor, seed, false);
        TargetTrajectory {
            observations: self.mask.apply_all(&t.observations),
            actions: t.actions,
            seed,
        }
    }

    /// Unmasked episode with rewards: the evaluator's view, not the calibrator's.
    pub fn evaluation_rollout(&self, actor: &dyn Actor, seed: u64) -> Trajectory {
        rollout(&self.env, actor, seed, false)
    }

    /// Ground-truth success rate, for judging transfer only. Never fed back
    /// into the distribution update.
    pub fn success_rate(&self, actor: &dyn Actor, seeds: &[u64]) -> f64 {
        if seeds.is_empty() {
            return 0.0;
        }
        let hits = seeds
            .iter()
            .filter(|&&s| rollout(&self.env, actor, s, false).success)
            .count();
        hits as f64 / seeds.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Zero;

    impl Actor for Zero {
        fn mean_action(&self, _: &[f64]) -> Vec<f64> {
            vec![0.0, 0.0]
        }
        fn sample_action(&self, _: &[f64], _: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
            (vec![0.0, 0.0], 0.0)
        }
    }

    struct Constant(Vec<f64>);

    impl Actor for Constant {
        fn mean_action(&self, _: &[f64]) -> Vec<f64> {
            self.0.clone()
        }
        fn sample_action(&self, _: &[f64], r: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
            (
                self.0
                    .iter()
                    .map(|a| a + r.random_range(-0.1..0.1))
                    .collect(),
                0.0,
            )
        }
    }

    fn state_at_rest(spec: &EnvSpec) -> EnvState {
        match spec.constants {
            TaskConstants::Drawer(c) => EnvState::Drawer(drawer::reset(&c, [0.0; 2])),
            TaskConstants::Peg(c) => {
                let p = PegParams::from_values(&peg::NOMINAL);
                EnvState::Peg(peg::reset(&c, &p, [0.0; 2]))
            }
        }
    }

    #[test]
    fn reset_is_deterministic_and_starts_closed() {
        let spec = EnvSpec::drawer();
        let p = spec.nominal_params();
        let a = reset(&spec, &p, 5).unwrap();
        assert_eq!(a, reset(&spec, &p, 5).unwrap());
        assert_ne!(a, reset(&spec, &p, 6).unwrap());
        let EnvState::Drawer(s) = a else { panic!() };
        assert_eq!(s.extension, 0.0);
        assert!(!s.grasped);
        let rest = DrawerConstants::default().rest_pose();
        assert!((s.arm.q[0] - rest[0]).abs() <= 0.05 && (s.arm.q[1] - rest[1]).abs() <= 0.05);
    }

    #[test]
    fn cabinet_position_shifts_handle_observation() {
        let spec = EnvSpec::drawer();
        let mut p = spec.nominal_params();
        let env0 = Env::new(&spec, &p).unwrap();
        p.set("cabinet_x", 0.15).unwrap();
        let env1 = Env::new(&spec, &p).unwrap();
        let o0 = env0.observe(&env0.reset(1));
        let o1 = env1.observe(&env1.reset(1));
        assert!((o1[2] - o0[2] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn layout_mismatch_lists_the_diff() {
        let spec = EnvSpec::drawer();
        let mut p = spec.nominal_params();
        p.names.swap(0, 1);
        let err = reset(&spec, &p, 0).unwrap_err().to_string();
        assert!(err.contains("expected order"), "{err}");
        let p = SimParams::from_pairs(&[("cabinet_x", 0.0)]).unwrap();
        let err = reset(&spec, &p, 0).unwrap_err().to_string();
        assert!(err.contains("joint1_compliance"), "{err}");
    }

    #[test]
    fn equilibrium_is_preserved() {
        for spec in [EnvSpec::drawer(), EnvSpec::peg()] {
            let p = spec.nominal_params();
            let s = state_at_rest(&spec);
            let out = step(&spec, &s, &p, &[0.0, 0.0]).unwrap();
            for (a, b) in s.to_vec().iter().zip(out.state.to_vec()) {
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn torque_is_linear_in_action_scaling() {
        let spec = EnvSpec::drawer();
        let mut p = spec.nominal_params();
        let s = state_at_rest(&spec);
        let a = step(&spec, &s, &p, &[0.5, -0.3]).unwrap().state.to_vec();
        p.values[4] *= 2.0;
        p.values[5] *= 2.0;
        let b = step(&spec, &s, &p, &[0.5, -0.3]).unwrap().state.to_vec();
        for i in 2..4 {
            assert!((b[i] - 2.0 * a[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn peak_speed_does_not_grow_with_damping() {
        let spec = EnvSpec::drawer();
        let script: Vec<Vec<f64>> = (0..150)
            .map(|t| {
                let ph = t as f64 / 25.0;
                vec![ph.sin(), (1.3 * ph).cos()]
            })
            .collect();
        let mut last = f64::INFINITY;
        for damping in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let mut p = spec.nominal_params();
            p.values[2] = damping;
            p.values[3] = damping;
            let env = Env::new(&spec, &p).unwrap();
            let mut s = env.reset(0);
            let mut peak: f64 = 0.0;
            for (t, a) in script.iter().enumerate() {
                s = env.step(&s, a, t).unwrap().state;
                let v = s.to_vec();
                peak = peak.max(v[2].abs()).max(v[3].abs());
            }
            assert!(peak <= last, "damping {damping}: {peak} > {last}");
            last = peak;
        }
    }

    #[test]
    fn undamped_pendulum_conserves_energy() {
        let spec = EnvSpec::peg();
        let TaskConstants::Peg(c) = spec.constants else {
            unreachable!()
        };
        let mut p = spec.nominal_params();
        p.set("rope_damping", 0.0).unwrap();
        let pp = PegParams::from_values(&p.values);
        let env = Env::new(&spec, &p).unwrap();
        let mut s = peg::reset(&c, &pp, [0.0; 2]);
        // Swing: displace the peg sideways, keeping the rope length.
        let ee = arm::end_effector(s.arm.q);
        let len = arm::norm(arm::sub(s.peg, ee));
        s.peg = [ee[0] + len * 0.4f64.sin(), ee[1] - len * 0.4f64.cos()];
        // The stored velocity lags half a step; synchronise it before measuring.
        let synced = |s: &PegState| {
            let a = peg::peg_acceleration(s, &pp);
            let mut m = *s;
            m.peg_velocity = [
                s.peg_velocity[0] + 0.5 * spec.dt * a[0],
                s.peg_velocity[1] + 0.5 * spec.dt * a[1],
            ];
            peg::energy(&m, &c, &pp)
        };
        let e0 = synced(&s);
        let swing = e0 - peg::energy(&peg::reset(&c, &pp, [0.0; 2]), &c, &pp);
        let mut state = EnvState::Peg(s);
        for t in 0..150 {
            state = env.step(&state, &[0.0, 0.0], t).unwrap().state;
            let EnvState::Peg(ps) = state else {
                unreachable!()
            };
            let drift = (synced(&ps) - e0).abs();
            assert!(
                drift <= 0.01 * swing,
                "step {t}: drift {drift} of swing energy {swing}"
            );
        }
    }

    #[test]
    fn rollout_is_repeatable_and_sized() {
        let spec = EnvSpec::drawer();
        let env = Env::new(&spec, &spec.nominal_params()).unwrap();
        let actor = Constant(vec![0.3, -0.2]);
        let a = rollout(&env, &actor, 3, true);
        let b = rollout(&env, &actor, 3, true);
        assert_eq!(a, b);
        assert_eq!(a.observations.len(), 150);
        assert_eq!(a.actions.len(), 150);
        for (r, comps) in a.rewards.iter().zip(&a.reward_components) {
            assert!((r - comps.iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_policy_does_not_open_the_drawer() {
        let spec = EnvSpec::drawer();
        let env = Env::new(&spec, &spec.nominal_params()).unwrap();
        assert!(!rollout(&env, &Zero, 0, false).success);
    }

    #[test]
    fn blowup_becomes_a_flagged_failure() {
        let spec = EnvSpec::drawer();
        let mut p = spec.nominal_params();
        // Negative stiffness; the arm runs away exponentially.
        p.set("joint1_compliance", -9.0).unwrap();
        p.set("joint1_damping", 1e-3).unwrap();
        let env = Env::new(&spec, &p).unwrap();
        let t = rollout(&env, &Constant(vec![1.0, 1.0]), 0, false);
        assert_eq!(t.observations.len(), 150);
        assert!(t.observations.iter().flatten().all(|v| v.is_finite()));
        assert!(t.rewards.iter().all(|r| r.is_finite()));
    }

    #[test]
    fn target_matches_simulation_and_masks() {
        let spec = EnvSpec::drawer();
        let mut p = spec.nominal_params();
        p.set("cabinet_x", 0.07).unwrap();
        let actor = Constant(vec![0.4, -0.6]);
        let sim = rollout(&Env::new(&spec, &p).unwrap(), &actor, 9, false);
        let target = TargetEnv::new(&spec, &p, ObservationMask::none()).unwrap();
        assert_eq!(target.rollout(&actor, 9).observations, sim.observations);
        let masked = TargetEnv::new(&spec, &p, ObservationMask::hiding(vec![2])).unwrap();
        let t = masked.rollout(&actor, 9);
        assert_eq!(t.observations[0].len(), spec.obs_dim() - 1);
    }

    #[test]
    fn trajectory_json_layout() {
        let spec = EnvSpec::peg();
        let env = Env::new(&spec, &spec.nominal_params()).unwrap();
        let t = rollout(&env, &Zero, 4, false);
        let v = serde_json::to_value(t.to_json()).unwrap();
        for key in ["obs", "act", "rew", "success", "seed"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["obs"].as_array().unwrap().len(), 150);
    }
}
