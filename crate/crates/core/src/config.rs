//! Flat, line-oriented experiment configuration.
//!
//! One `section.key = value` per line, `#` starts a comment, arrays are
//! bracketed comma lists (`[a, b]`). Unknown keys, duplicate keys and invalid
//! values are rejected with the origin and line of the offending entry.

use std::collections::HashMap;
use std::fmt::{self, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::discrepancy::DiscrepancyConfig;
use crate::envs::{EnvSpec, ObservationMask, Task};
use crate::error::{Error, Result};
use crate::param_space::{ParamDistribution, SimParams, Transform};
use crate::ppo::PpoConfig;
use crate::reps::RepsConfig;
use crate::simopt::{Experiment, SimOptConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// The full train / deploy / calibrate loop.
    Simopt,
    /// PPO under fixed distributions of several widths, no calibration.
    Ablation,
    /// Closed- versus open-loop costing of one update, over many seeds.
    Compare,
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "simopt" => Ok(ExperimentKind::Simopt),
            "ablation" => Ok(ExperimentKind::Ablation),
            "compare" => Ok(ExperimentKind::Compare),
            other => Err(format!(
                "unknown experiment kind `{other}` (expected simopt, ablation or compare)"
            )),
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Simopt => "simopt",
            ExperimentKind::Ablation => "ablation",
            ExperimentKind::Compare => "compare",
        })
    }
}

/// Initial diagonal Gaussian over a subset of the simulator parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct DistConfig {
    pub names: Vec<String>,
    /// Mean in physical units.
    pub mean: Vec<f64>,
    /// Standard deviation in internal (transformed) units.
    pub std: Vec<f64>,
    pub transforms: Vec<Transform>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationConfig {
    /// Internal-space standard deviations applied to every distribution dimension.
    pub sigmas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eval_trials: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            sigmas: vec![0.02, 0.04, 0.07, 0.10],
            seeds: vec![0, 1, 2],
            eval_trials: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareConfig {
    pub seeds: Vec<u64>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            seeds: (0..20).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: String,
    pub task: Task,
    pub dt: f64,
    pub episode_length: usize,
    /// Simulator parameters not covered by the distribution.
    pub base: SimParams,
    /// Hidden parameters of the target system.
    pub target: SimParams,
    /// Observation names the target withholds.
    pub mask: Vec<String>,
    pub dist: DistConfig,
    /// `episode_length` and `n_iterations` mirror `env.episode_length` and
    /// `simopt.rl_iterations_first`.
    pub ppo: PpoConfig,
    pub reps: RepsConfig,
    pub discrepancy: DiscrepancyConfig,
    pub simopt: SimOptConfig,
    pub distance_exclude: Vec<String>,
    pub ablation: AblationConfig,
    pub compare: CompareConfig,
}

impl ExperimentConfig {
    /// Defaults for `task`.
    pub fn for_task(task: Task) -> Self {
        let spec = EnvSpec::for_task(task);
        let base = spec.nominal_params();
        let (dist, reps_updates, rl_first) = match task {
            Task::Drawer => (
                DistConfig {
                    names: vec!["cabinet_x".into()],
                    mean: vec![base.get("cabinet_x").unwrap_or(0.0)],
                    std: vec![0.02],
                    transforms: vec![Transform::Identity],
                },
                20,
                200,
            ),
            Task::Peg => (
                DistConfig {
                    names: vec!["rope_length".into(), "peg_mass".into()],
                    mean: vec![
                        base.get("rope_length").unwrap_or(0.3),
                        base.get("peg_mass").unwrap_or(0.1),
                    ],
                    std: vec![0.1, 0.1],
                    transforms: vec![Transform::Log, Transform::Log],
                },
                3,
                100,
            ),
        };
        let simopt = SimOptConfig {
            rl_iterations_first: rl_first,
            ..SimOptConfig::default()
        };
        let mut cfg = ExperimentConfig {
            kind: ExperimentKind::Simopt,
            name: task_name(task).to_string(),
            task,
            dt: spec.dt,
            episode_length: spec.episode_length,
            target: base.clone(),
            base,
            mask: Vec::new(),
            dist,
            ppo: PpoConfig::default(),
            reps: RepsConfig {
                updates_per_iteration: reps_updates,
                ..RepsConfig::default()
            },
            discrepancy: DiscrepancyConfig::default(),
            simopt,
            distance_exclude: Vec::new(),
            ablation: AblationConfig::default(),
            compare: CompareConfig::default(),
        };
        cfg.sync();
        cfg
    }

    fn sync(&mut self) {
        self.ppo.episode_length = self.episode_length;
        self.ppo.n_iterations = self.simopt.rl_iterations_first;
    }

    /// Parses config text; `origin` labels error messages (usually the path).
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        Self::parse_with_overrides(text, origin, &[])
    }

    /// Parses `text`, then applies `section.key=value` overrides on top.
    pub fn parse_with_overrides(text: &str, origin: &str, overrides: &[String]) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let Some(e) = parse_line(raw, origin, line)? else {
                continue;
            };
            if let Some(&first) = seen.get(&e.key) {
                return Err(at(
                    origin,
                    line,
                    format!("duplicate key `{}` (first set on line {first})", e.key),
                ));
            }
            seen.insert(e.key.clone(), line);
            entries.push(e);
        }
        for (i, raw) in overrides.iter().enumerate() {
            let e = parse_line(raw, "--override", i + 1)?
                .ok_or_else(|| at("--override", i + 1, "empty override"))?;
            entries.retain(|x| x.key != e.key);
            entries.push(e);
        }

        let task = match entries.iter().find(|e| e.key == "experiment.task") {
            Some(e) => e.value.parse::<Task>().map_err(|m| e.error(m))?,
            None => Task::Drawer,
        };
        let mut cfg = ExperimentConfig::for_task(task);
        let (targets, rest): (Vec<&Entry>, Vec<&Entry>) = entries
            .iter()
            .partition(|e| e.key.starts_with("target.") && e.key != "target.mask");
        for e in &rest {
            cfg.apply(&e.key, &e.value).map_err(|m| e.error(m))?;
        }
        cfg.target = cfg.base.clone();
        for e in &targets {
            cfg.apply(&e.key, &e.value).map_err(|m| e.error(m))?;
        }
        cfg.sync();

        let anchors: Vec<(&str, &str, usize)> = entries
            .iter()
            .map(|e| (e.key.as_str(), e.origin.as_str(), e.line))
            .collect();
        cfg.check()
            .map_err(|(key, msg)| anchor(&anchors, origin, &key, msg))?;
        Ok(cfg)
    }

    /// Sets one key from its text value.
    fn apply(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| format!("key `{key}` has no section"))?;
        match (section, name) {
            ("experiment", "kind") => self.kind = v.parse()?,
            ("experiment", "name") => self.name = v.to_string(),
            ("experiment", "task") => self.task = v.parse()?,
            ("env", "dt") => self.dt = num(v)?,
            ("env", "episode_length") => self.episode_length = num(v)?,
            ("base", p) => set_param(&mut self.base, p, num(v)?)?,
            ("target", "mask") => self.mask = strings(v)?,
            ("target", p) => set_param(&mut self.target, p, num(v)?)?,
            ("dist", "names") => self.dist.names = strings(v)?,
            ("dist", "mean") => self.dist.mean = nums(v)?,
            ("dist", "std") => self.dist.std = nums(v)?,
            ("dist", "transforms") => {
                self.dist.transforms = list(v)?
                    .iter()
                    .map(|t| transform(t))
                    .collect::<std::result::Result<_, _>>()?
            }
            ("ppo", k) => {
                let p = &mut self.ppo;
                match k {
                    "n_agents" => p.n_agents = num(v)?,
                    "clip" => p.clip = num(v)?,
                    "gamma" => p.gamma = num(v)?,
                    "lambda" => p.lambda = num(v)?,
                    "entropy_coef" => p.entropy_coef = num(v)?,
                    "epochs" => p.epochs = num(v)?,
                    "minibatch_size" => p.minibatch_size = num(v)?,
                    "step_size" => p.step_size = num(v)?,
                    "value_step_size" => p.value_step_size = num(v)?,
                    "desired_kl" => p.desired_kl = num(v)?,
                    "max_grad_norm" => p.max_grad_norm = num(v)?,
                    "init_log_std" => p.init_log_std = num(v)?,
                    "obs_std_floor" => p.obs_std_floor = num(v)?,
                    "obs_norm_window" => p.obs_norm_window = num(v)?,
                    _ => return Err(unknown(key)),
                }
            }
            ("reps", k) => {
                let r = &mut self.reps;
                match k {
                    "epsilon" => r.epsilon = num(v)?,
                    "eta_min" => r.eta_min = num(v)?,
                    "updates_per_iteration" => r.updates_per_iteration = num(v)?,
                    "cov_jitter_floor" => r.cov_jitter_floor = num(v)?,
                    "normalize_costs" => r.normalize_costs = boolean(v)?,
                    _ => return Err(unknown(key)),
                }
            }
            ("discrepancy", k) => {
                let d = &mut self.discrepancy;
                match k {
                    "w_l1" => d.w_l1 = num(v)?,
                    "w_l2" => d.w_l2 = num(v)?,
                    "dim_weights" => d.dim_weights = nums(v)?,
                    "smooth_std" => d.smooth_std = num(v)?,
                    "smooth_trunc" => d.smooth_trunc = num(v)?,
                    "stack_previous" => d.stack_previous = boolean(v)?,
                    _ => return Err(unknown(key)),
                }
            }
            ("simopt", k) => {
                let s = &mut self.simopt;
                match k {
                    "max_iterations" => s.max_iterations = num(v)?,
                    "samples_per_update" => s.samples_per_update = num(v)?,
                    "real_rollouts" => s.real_rollouts = num(v)?,
                    "rl_iterations_first" => s.rl_iterations_first = num(v)?,
                    "rl_iterations_warm" => s.rl_iterations_warm = num(v)?,
                    "success_eval_trials" => s.success_eval_trials = num(v)?,
                    "success_threshold" => s.success_threshold = num(v)?,
                    "seed" => s.seed = num(v)?,
                    "distance_exclude" => self.distance_exclude = strings(v)?,
                    _ => return Err(unknown(key)),
                }
            }
            ("ablation", "sigmas") => self.ablation.sigmas = nums(v)?,
            ("ablation", "seeds") => self.ablation.seeds = nums(v)?,
            ("ablation", "eval_trials") => self.ablation.eval_trials = num(v)?,
            ("compare", "seeds") => self.compare.seeds = nums(v)?,
            _ => return Err(unknown(key)),
        }
        Ok(())
    }

    /// Every key with its current value, in canonical order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("experiment.kind", self.kind.to_string());
        put("experiment.name", self.name.clone());
        put("experiment.task", task_name(self.task).to_string());
        put("env.dt", fnum(self.dt));
        put("env.episode_length", self.episode_length.to_string());
        for (n, v) in self.base.names.iter().zip(&self.base.values) {
            put(&format!("base.{n}"), fnum(*v));
        }
        for (n, v) in self.target.names.iter().zip(&self.target.values) {
            put(&format!("target.{n}"), fnum(*v));
        }
        put("target.mask", slist(&self.mask));
        put("dist.names", slist(&self.dist.names));
        put("dist.mean", flist(&self.dist.mean));
        put("dist.std", flist(&self.dist.std));
        put(
            "dist.transforms",
            format!(
                "[{}]",
                self.dist
                    .transforms
                    .iter()
                    .map(transform_text)
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        );
        let p = &self.ppo;
        put("ppo.n_agents", p.n_agents.to_string());
        put("ppo.clip", fnum(p.clip));
        put("ppo.gamma", fnum(p.gamma));
        put("ppo.lambda", fnum(p.lambda));
        put("ppo.entropy_coef", fnum(p.entropy_coef));
        put("ppo.epochs", p.epochs.to_string());
        put("ppo.minibatch_size", p.minibatch_size.to_string());
        put("ppo.step_size", fnum(p.step_size));
        put("ppo.value_step_size", fnum(p.value_step_size));
        put("ppo.desired_kl", fnum(p.desired_kl));
        put("ppo.max_grad_norm", fnum(p.max_grad_norm));
        put("ppo.init_log_std", fnum(p.init_log_std));
        put("ppo.obs_std_floor", fnum(p.obs_std_floor));
        put("ppo.obs_norm_window", fnum(p.obs_norm_window));
        let r = &self.reps;
        put("reps.epsilon", fnum(r.epsilon));
        put("reps.eta_min", fnum(r.eta_min));
        put(
            "reps.updates_per_iteration",
            r.updates_per_iteration.to_string(),
        );
        put("reps.cov_jitter_floor", fnum(r.cov_jitter_floor));
        put("reps.normalize_costs", r.normalize_costs.to_string());
        let d = &self.discrepancy;
        put("discrepancy.w_l1", fnum(d.w_l1));
        put("discrepancy.w_l2", fnum(d.w_l2));
        put("discrepancy.dim_weights", flist(&d.dim_weights));
        put("discrepancy.smooth_std", fnum(d.smooth_std));
        put("discrepancy.smooth_trunc", fnum(d.smooth_trunc));
        put("discrepancy.stack_previous", d.stack_previous.to_string());
        let s = &self.simopt;
        put("simopt.max_iterations", s.max_iterations.to_string());
        put(
            "simopt.samples_per_update",
            s.samples_per_update.to_string(),
        );
        put("simopt.real_rollouts", s.real_rollouts.to_string());
        put(
            "simopt.rl_iterations_first",
            s.rl_iterations_first.to_string(),
        );
        put(
            "simopt.rl_iterations_warm",
            s.rl_iterations_warm.to_string(),
        );
        put(
            "simopt.success_eval_trials",
            s.success_eval_trials.to_string(),
        );
        put("simopt.success_threshold", fnum(s.success_threshold));
        put("simopt.seed", s.seed.to_string());
        put("simopt.distance_exclude", slist(&self.distance_exclude));
        put("ablation.sigmas", flist(&self.ablation.sigmas));
        put("ablation.seeds", ilist(&self.ablation.seeds));
        put(
            "ablation.eval_trials",
            self.ablation.eval_trials.to_string(),
        );
        put("compare.seeds", ilist(&self.compare.seeds));
        out
    }

    /// Canonical text form; parsing it yields `self` again.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut section = String::new();
        for (k, v) in self.entries() {
            let sec = k.split_once('.').map_or("", |(a, _)| a);
            if sec != section && !section.is_empty() {
                s.push('\n');
            }
            section = sec.to_string();
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn spec(&self) -> EnvSpec {
        let mut spec = EnvSpec::for_task(self.task);
        spec.dt = self.dt;
        spec.episode_length = self.episode_length;
        spec
    }

    /// Initial distribution with physical bounds taken from the environment.
    pub fn initial_dist(&self) -> Result<ParamDistribution> {
        self.dist_with_std(&self.dist.std)
    }

    /// The configured distribution with every dimension's standard deviation
    /// replaced by `sigma`.
    pub fn dist_with_sigma(&self, sigma: f64) -> Result<ParamDistribution> {
        self.dist_with_std(&vec![sigma; self.dist.names.len()])
    }

    fn dist_with_std(&self, std: &[f64]) -> Result<ParamDistribution> {
        let d = &self.dist;
        let spec = self.spec();
        let mean = d
            .names
            .iter()
            .zip(&d.mean)
            .zip(&d.transforms)
            .map(|((n, m), t)| t.to_internal(*m, n))
            .collect::<Result<Vec<_>>>()?;
        let var: Vec<f64> = std.iter().map(|s| s * s).collect();
        let bounds = d
            .names
            .iter()
            .map(|n| {
                spec.bounds_of(n)
                    .ok_or_else(|| crate::error::contract(format!("unknown parameter {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ParamDistribution::new(
            d.names.clone(),
            DVector::from_vec(mean),
            DMatrix::from_diagonal(&DVector::from_vec(var)),
            d.transforms.clone(),
        )?
        .with_bounds(bounds)
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let spec = self.spec();
        Ok(Experiment {
            spec,
            base: self.base.clone(),
            initial: self.initial_dist()?,
            true_params: self.target.clone(),
            mask: ObservationMask::from_names(&spec, &self.mask)?,
            ppo: self.ppo.clone(),
            reps: self.reps.clone(),
            discrepancy: self.discrepancy.clone(),
            simopt: self.simopt.clone(),
            distance_exclude: self.distance_exclude.clone(),
        })
    }

    /// Semantic checks; errors carry the key to blame.
    fn check(&self) -> std::result::Result<(), (String, String)> {
        let fail = |k: &str, m: String| Err((k.to_string(), m));
        let spec = self.spec();
        if let Err(e) = spec.validate() {
            return fail("env.dt", bare(e));
        }
        for (sec, params) in [("base", &self.base), ("target", &self.target)] {
            for (n, v) in params.names.iter().zip(&params.values) {
                let b = spec.bounds_of(n).expect("layout from spec");
                if !b.contains(*v) {
                    return fail(
                        &format!("{sec}.{n}"),
                        format!("{n} = {v} lies outside [{}, {}]", b.lo, b.hi),
                    );
                }
            }
        }
        if let Err(e) = ObservationMask::from_names(&spec, &self.mask) {
            return fail("target.mask", bare(e));
        }
        let d = &self.dist;
        if d.names.is_empty() {
            return fail(
                "dist.names",
                "the distribution needs at least one dimension".into(),
            );
        }
        for (k, len) in [
            ("dist.mean", d.mean.len()),
            ("dist.std", d.std.len()),
            ("dist.transforms", d.transforms.len()),
        ] {
            if len != d.names.len() {
                return fail(
                    k,
                    format!(
                        "{len} entries for {} distribution dimensions",
                        d.names.len()
                    ),
                );
            }
        }
        for (i, n) in d.names.iter().enumerate() {
            if spec.bounds_of(n).is_none() {
                return fail(
                    "dist.names",
                    format!("`{n}` is not a {} parameter", task_name(self.task)),
                );
            }
            if d.names[..i].contains(n) {
                return fail("dist.names", format!("`{n}` listed twice"));
            }
        }
        if let Some(s) = d.std.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return fail(
                "dist.std",
                format!("standard deviations must be positive, got {s}"),
            );
        }
        if let Err(e) = self.initial_dist() {
            return fail("dist.mean", bare(e));
        }
        for (sec, r) in [
            ("ppo", self.ppo.validate()),
            ("reps", self.reps.validate()),
            ("discrepancy", self.discrepancy.validate()),
            ("simopt", self.simopt.validate()),
        ] {
            if let Err(e) = r {
                let msg = bare(e);
                let word = msg.split_whitespace().next().unwrap_or("");
                let word = word.strip_prefix(&format!("{sec}.")).unwrap_or(word);
                return fail(&format!("{sec}.{word}"), msg);
            }
        }
        let visible = spec.obs_dim()
            - ObservationMask::from_names(&spec, &self.mask).map_or(0, |m| m.hidden().len());
        let expected = if self.discrepancy.stack_previous {
            2 * visible
        } else {
            visible
        };
        let w = self.discrepancy.dim_weights.len();
        if w != 0 && w != expected {
            return fail(
                "discrepancy.dim_weights",
                format!("{w} weights for {expected} compared dimensions"),
            );
        }
        if let Some(n) = self.distance_exclude.iter().find(|n| !d.names.contains(n)) {
            return fail(
                "simopt.distance_exclude",
                format!("`{n}` is not a distribution dimension"),
            );
        }
        let a = &self.ablation;
        if a.sigmas.is_empty() || a.sigmas.iter().any(|s| !(*s > 0.0)) {
            return fail(
                "ablation.sigmas",
                "sigmas must be a non-empty list of positive values".into(),
            );
        }
        if a.seeds.is_empty() {
            return fail("ablation.seeds", "at least one seed is needed".into());
        }
        if a.eval_trials == 0 {
            return fail(
                "ablation.eval_trials",
                "eval_trials must be at least 1".into(),
            );
        }
        if self.compare.seeds.is_empty() {
            return fail("compare.seeds", "at least one seed is needed".into());
        }
        if let Err(e) = self.experiment().and_then(|x| x.validate()) {
            return fail("experiment.task", bare(e));
        }
        Ok(())
    }
}

/// Values with a fixed reference, checked against every preset.
pub fn reference_values(task: Task) -> Vec<(&'static str, f64)> {
    let (updates, rl_first) = match task {
        Task::Drawer => (20.0, 200.0),
        Task::Peg => (3.0, 100.0),
    };
    vec![
        ("env.dt", 1.0 / 60.0),
        ("env.episode_length", 150.0),
        ("ppo.clip", 0.2),
        ("ppo.gamma", 0.99),
        ("ppo.lambda", 0.95),
        ("ppo.entropy_coef", 0.0),
        ("ppo.step_size", 5e-4),
        ("ppo.desired_kl", 0.01),
        ("reps.epsilon", 1.0),
        ("reps.eta_min", 1e-3),
        ("reps.updates_per_iteration", updates),
        ("reps.cov_jitter_floor", 1e-8),
        ("discrepancy.w_l1", 0.5),
        ("discrepancy.w_l2", 1.0),
        ("discrepancy.smooth_std", 5.0),
        ("discrepancy.smooth_trunc", 4.0),
        ("simopt.samples_per_update", 512.0),
        ("simopt.real_rollouts", 3.0),
        ("simopt.rl_iterations_first", rl_first),
        ("simopt.rl_iterations_warm", 10.0),
        ("simopt.success_eval_trials", 20.0),
        ("simopt.success_threshold", 0.8),
    ]
}

/// Reference keys whose value in `cfg` differs from the reference.
pub fn reference_diff(cfg: &ExperimentConfig) -> Vec<(&'static str, f64, String)> {
    let values: HashMap<String, String> = cfg.entries().into_iter().collect();
    reference_values(cfg.task)
        .into_iter()
        .filter_map(|(k, r)| {
            let v = &values[k];
            let same = v
                .parse::<f64>()
                .is_ok_and(|x| (x - r).abs() <= 1e-12 * r.abs().max(1.0));
            (!same).then(|| (k, r, v.clone()))
        })
        .collect()
}

/// Markdown table of every key with its default per task.
pub fn defaults_table() -> String {
    let drawer = ExperimentConfig::for_task(Task::Drawer).entries();
    let peg: HashMap<String, String> = ExperimentConfig::for_task(Task::Peg)
        .entries()
        .into_iter()
        .collect();
    let drawer_map: HashMap<&str, &str> = drawer
        .iter()
        .map(|(k, v)| (k.as_str(), v.as_str()))
        .collect();
    let mut keys: Vec<String> = drawer.iter().map(|(k, _)| k.clone()).collect();
    for (k, _) in ExperimentConfig::for_task(Task::Peg).entries() {
        if !drawer_map.contains_key(k.as_str()) {
            keys.push(k);
        }
    }
    let mut s = String::from("| key | drawer | peg |\n|---|---|---|\n");
    for k in &keys {
        let d = drawer_map.get(k.as_str()).copied().unwrap_or("-");
        let p = peg.get(k).map_or("-", String::as_str);
        let _ = writeln!(s, "| `{k}` | `{d}` | `{p}` |");
    }
    s
}

fn task_name(task: Task) -> &'static str {
    match task {
        Task::Drawer => "drawer",
        Task::Peg => "peg",
    }
}

struct Entry {
    key: String,
    value: String,
    origin: String,
    line: usize,
}

impl Entry {
    fn error(&self, msg: String) -> Error {
        at(&self.origin, self.line, format!("{}: {msg}", self.key))
    }
}

fn at(origin: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        origin: origin.to_string(),
        line,
        msg: msg.into(),
    }
}

fn anchor(entries: &[(&str, &str, usize)], origin: &str, key: &str, msg: String) -> Error {
    let section = key.split_once('.').map_or(key, |(s, _)| s);
    let hit = entries.iter().find(|(k, _, _)| *k == key).or_else(|| {
        entries
            .iter()
            .find(|(k, _, _)| k.starts_with(&format!("{section}.")))
    });
    match hit {
        Some((k, o, l)) => at(o, *l, format!("{k}: {msg}")),
        None => at(origin, 0, format!("{key}: {msg}")),
    }
}

fn bare(e: Error) -> String {
    match e {
        Error::Contract(m) => m,
        other => other.to_string(),
    }
}

fn parse_line(raw: &str, origin: &str, line: usize) -> Result<Option<Entry>> {
    let text = raw.split_once('#').map_or(raw, |(a, _)| a).trim();
    if text.is_empty() {
        return Ok(None);
    }
    let (k, v) = text.split_once('=').ok_or_else(|| {
        at(
            origin,
            line,
            format!("expected `section.key = value`, got `{text}`"),
        )
    })?;
    let (k, v) = (k.trim(), v.trim());
    if !k.contains('.') || k.contains(char::is_whitespace) {
        return Err(at(origin, line, format!("malformed key `{k}`")));
    }
    if v.is_empty() {
        return Err(at(origin, line, format!("{k}: missing value")));
    }
    Ok(Some(Entry {
        key: k.to_string(),
        value: v.to_string(),
        origin: origin.to_string(),
        line,
    }))
}

fn unknown(key: &str) -> String {
    format!("unknown key `{key}`")
}

fn set_param(params: &mut SimParams, name: &str, v: f64) -> std::result::Result<(), String> {
    if params.get(name).is_none() {
        return Err(format!(
            "unknown parameter `{name}` (expected one of {:?})",
            params.names
        ));
    }
    params.set(name, v).map_err(bare)
}

fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse()
        .map_err(|_| format!("cannot parse `{v}` as {}", std::any::type_name::<T>()))
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn list(v: &str) -> std::result::Result<Vec<&str>, String> {
    let inner = v
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("expected a bracketed list, got `{v}`"))?
        .trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner
        .split(',')
        .map(|s| match s.trim() {
            "" => Err(format!("empty list element in `{v}`")),
            t => Ok(t),
        })
        .collect()
}

fn nums<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String> {
    list(v)?.into_iter().map(num).collect()
}

fn strings(v: &str) -> std::result::Result<Vec<String>, String> {
    Ok(list(v)?.into_iter().map(str::to_string).collect())
}

fn transform(t: &str) -> std::result::Result<Transform, String> {
    match t {
        "identity" => Ok(Transform::Identity),
        "log" => Ok(Transform::Log),
        _ => {
            let parts: Vec<&str> = t.split(':').collect();
            match parts.as_slice() {
                ["affine", lo, hi] => {
                    let (lo, hi): (f64, f64) = (num(lo)?, num(hi)?);
                    if lo < hi {
                        Ok(Transform::Affine { lo, hi })
                    } else {
                        Err(format!("affine bounds must satisfy lo < hi in `{t}`"))
                    }
                }
                _ => Err(format!(
                    "unknown transform `{t}` (expected identity, log or affine:lo:hi)"
                )),
            }
        }
    }
}

fn transform_text(t: &Transform) -> String {
    match t {
        Transform::Identity => "identity".into(),
        Transform::Log => "log".into(),
        Transform::Affine { lo, hi } => format!("affine:{}:{}", fnum(*lo), fnum(*hi)),
    }
}

/// Shortest text that parses back to the same `f64`.
fn fnum(v: f64) -> String {
    format!("{v:?}")
}

fn flist(v: &[f64]) -> String {
    format!(
        "[{}]",
        v.iter().map(|x| fnum(*x)).collect::<Vec<_>>().join(", ")
    )
}

fn ilist(v: &[u64]) -> String {
    format!(
        "[{}]",
        v.iter().map(u64::to_string).collect::<Vec<_>>().join(", ")
    )
}

fn slist(v: &[String]) -> String {
    format!("[{}]", v.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_of(e: Error) -> (String, usize) {
        match e {
            Error::Config { origin, line, .. } => (origin, line),
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn defaults_round_trip_for_every_task() {
        for task in [Task::Drawer, Task::Peg] {
            let cfg = ExperimentConfig::for_task(task);
            let back = ExperimentConfig::parse(&cfg.to_text(), "t").unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn empty_text_gives_drawer_defaults() {
        let cfg = ExperimentConfig::parse("# nothing\n\n", "t").unwrap();
        assert_eq!(cfg, ExperimentConfig::for_task(Task::Drawer));
    }

    #[test]
    fn unknown_key_is_rejected_at_its_line() {
        let e = ExperimentConfig::parse("ppo.clip = 0.2\nppo.clipp = 0.3\n", "cfg").unwrap_err();
        assert_eq!(line_of(e), ("cfg".into(), 2));
        let e = ExperimentConfig::parse("\n\nnosuch.key = 1\n", "cfg").unwrap_err();
        assert_eq!(line_of(e), ("cfg".into(), 3));
    }

    #[test]
    fn malformed_and_duplicate_lines_are_anchored() {
        let e = ExperimentConfig::parse("ppo.clip 0.2\n", "c").unwrap_err();
        assert_eq!(line_of(e).1, 1);
        let e = ExperimentConfig::parse("ppo.clip = 0.2\n\nppo.clip = 0.3\n", "c").unwrap_err();
        assert!(e.to_string().contains("first set on line 1"));
        assert_eq!(line_of(e).1, 3);
        let e = ExperimentConfig::parse("reps.epsilon = abc\n", "c").unwrap_err();
        assert_eq!(line_of(e).1, 1);
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        let e = ExperimentConfig::parse("simopt.seed = 3\nppo.clip = 1.5\n", "c").unwrap_err();
        assert_eq!(line_of(e).1, 2);
        let e = ExperimentConfig::parse("dist.names = [cabinet_x]\ndist.mean = [0.0, 1.0]\n", "c")
            .unwrap_err();
        assert_eq!(line_of(e).1, 2);
        let e = ExperimentConfig::parse("target.mask = [nope]\n", "c").unwrap_err();
        assert_eq!(line_of(e).1, 1);
        let e = ExperimentConfig::parse("x.y = 1\n", "c").unwrap_err();
        assert!(e.to_string().starts_with("c:1:"));
        let e = ExperimentConfig::parse("simopt.samples_per_update = 0\n", "c").unwrap_err();
        assert_eq!(line_of(e).1, 1);
    }

    #[test]
    fn overrides_replace_file_values_and_report_their_index() {
        let o = vec!["ppo.clip=0.3".to_string(), "simopt.seed = 7".to_string()];
        let cfg = ExperimentConfig::parse_with_overrides("ppo.clip = 0.2\n", "c", &o).unwrap();
        assert_eq!(cfg.ppo.clip, 0.3);
        assert_eq!(cfg.simopt.seed, 7);
        let bad = vec!["simopt.seed=1".to_string(), "ppo.nope=1".to_string()];
        let e = ExperimentConfig::parse_with_overrides("", "c", &bad).unwrap_err();
        assert_eq!(line_of(e), ("--override".into(), 2));
    }

    #[test]
    fn target_defaults_to_base() {
        let cfg =
            ExperimentConfig::parse("base.cabinet_x = 0.05\ntarget.drawer_damping = 2.5\n", "c")
                .unwrap();
        assert_eq!(cfg.target.get("cabinet_x"), Some(0.05));
        assert_eq!(cfg.target.get("drawer_damping"), Some(2.5));
        assert_eq!(cfg.base.get("drawer_damping"), Some(2.0));
    }

    #[test]
    fn task_switch_changes_parameter_layout() {
        let cfg =
            ExperimentConfig::parse("experiment.task = peg\ntarget.rope_length = 0.35\n", "c")
                .unwrap();
        assert_eq!(cfg.reps.updates_per_iteration, 3);
        assert_eq!(cfg.target.get("rope_length"), Some(0.35));
        assert!(
            ExperimentConfig::parse("experiment.task = peg\nbase.cabinet_x = 0.1\n", "c").is_err()
        );
    }

    #[test]
    fn lists_and_transforms_parse() {
        let text = "dist.names = [cabinet_x, drawer_damping]\ndist.mean = [0.0, 2.0]\n\
                    dist.std = [0.02, 0.1]\ndist.transforms = [identity, log]\n";
        let cfg = ExperimentConfig::parse(text, "c").unwrap();
        let d = cfg.initial_dist().unwrap();
        assert_eq!(d.dim(), 2);
        assert!((d.mean()[1] - 2f64.ln()).abs() < 1e-15);
        assert_eq!(
            transform("affine:0:1").unwrap(),
            Transform::Affine { lo: 0.0, hi: 1.0 }
        );
        assert!(transform("affine:1:0").is_err());
        assert_eq!(list("[]").unwrap(), Vec::<&str>::new());
        assert!(list("[a,,b]").is_err());
        assert!(list("a, b").is_err());
    }

    #[test]
    fn every_emitted_key_is_accepted() {
        for task in [Task::Drawer, Task::Peg] {
            let mut cfg = ExperimentConfig::for_task(task);
            for (k, v) in cfg.clone().entries() {
                cfg.apply(&k, &v).unwrap_or_else(|m| panic!("{k}: {m}"));
            }
        }
    }

    #[test]
    fn defaults_match_reference_values() {
        for task in [Task::Drawer, Task::Peg] {
            assert!(reference_diff(&ExperimentConfig::for_task(task)).is_empty());
        }
    }

    proptest! {
        #[test]
        fn numeric_values_round_trip(
            clip in 0.01f64..0.99,
            eps in 1e-6f64..10.0,
            mean in -0.3f64..0.3,
            std in 1e-4f64..0.5,
            seed in any::<u64>(),
            samples in 2usize..10_000,
            weights in proptest::collection::vec(0.0f64..5.0, 5),
        ) {
            let mut cfg = ExperimentConfig::for_task(Task::Drawer);
            cfg.ppo.clip = clip;
            cfg.reps.epsilon = eps;
            cfg.dist.mean = vec![mean];
            cfg.dist.std = vec![std];
            cfg.simopt.seed = seed;
            cfg.simopt.samples_per_update = samples;
            cfg.discrepancy.dim_weights = weights;
            let text = cfg.to_text();
            let back = ExperimentConfig::parse(&text, "p").unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.to_text(), text);
        }
    }
}
