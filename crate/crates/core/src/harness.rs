//! Presets, output files and the drivers behind the command line.
//!
//! Output layout of a calibration run:
//! - `config.conf`: the fully resolved configuration
//! - `records.jsonl`: one [`IterationRecord`] per line
//! - `curves.csv`: `iteration,target_success,median_cost,kl_used`
//! - `dist_i.json`: the distribution iteration `i` trained on (`dist_0` is the
//!   initial one, the last file is the final distribution)
//! - `policy_i.json`: the policy deployed in iteration `i`
//! - `ppo_i.csv`: `iteration,mean_reward,mean_kl,clip_fraction` of iteration `i`

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::envs::{Actor, TrajectoryJson};
use crate::error::{contract, Error, Result};
use crate::param_space::{DistributionJson, ParamDistribution, Randomization};
use crate::policy::{PolicyJson, PolicySnapshot};
use crate::ppo::{self, curve_csv, TrainOutput};
use crate::rng::derive_seed;
use crate::simopt::{
    self, ablation_open_loop, IterationRecord, LoopState, ModeComparison, RunReport, StopReason,
};

pub const PRESETS: &[(&str, &str)] = &[
    (
        "drawer-sim2sim-15",
        include_str!("../../../presets/drawer-sim2sim-15.conf"),
    ),
    (
        "drawer-sim2sim-22",
        include_str!("../../../presets/drawer-sim2sim-22.conf"),
    ),
    (
        "peg-sim2sim",
        include_str!("../../../presets/peg-sim2sim.conf"),
    ),
    (
        "wide-randomization-ablation",
        include_str!("../../../presets/wide-randomization-ablation.conf"),
    ),
    (
        "openloop-vs-closedloop",
        include_str!("../../../presets/openloop-vs-closedloop.conf"),
    ),
];

pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Reads a config from `source`: a file, the file with `.conf` appended, or
/// a built-in preset name (a leading `presets/` is ignored).
pub fn load_config(source: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let path = Path::new(source);
    let with_ext = PathBuf::from(format!("{source}.conf"));
    let text = if path.is_file() {
        fs::read_to_string(path)?
    } else if with_ext.is_file() {
        fs::read_to_string(&with_ext)?
    } else {
        let name = source.strip_prefix("presets/").unwrap_or(source);
        let name = name.strip_suffix(".conf").unwrap_or(name);
        match preset(name) {
            Some(t) => t.to_string(),
            None => {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("no config file or preset named `{source}`"),
                )))
            }
        }
    };
    ExperimentConfig::parse_with_overrides(&text, source, overrides)
}

/// An output directory.
#[derive(Clone, Debug)]
pub struct Output {
    dir: PathBuf,
}

impl Output {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Output { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.path(name), text)?;
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write_text(name, &s)
    }

    /// Starts `records.jsonl` afresh.
    pub fn reset_records(&self) -> Result<()> {
        self.write_text(RECORDS, "")
    }

    pub fn append_record(&self, record: &IterationRecord) -> Result<()> {
        let mut f = fs::OpenOptions::new()
            .append(true)
            .create(true)
            .open(self.path(RECORDS))?;
        writeln!(f, "{}", serde_json::to_string(record)?)?;
        Ok(())
    }
}

pub const RECORDS: &str = "records.jsonl";
pub const CURVES: &str = "curves.csv";

/// `{"names","mean","covariance","transforms"}`; bounds follow from the task.
pub fn dist_json(dist: &ParamDistribution) -> DistributionJson {
    DistributionJson {
        bounds: None,
        ..dist.to_json()
    }
}

pub fn read_policy(path: &Path) -> Result<PolicySnapshot> {
    let j: PolicyJson = serde_json::from_str(&fs::read_to_string(path)?)?;
    PolicySnapshot::from_json(&j)
}

pub fn read_records(path: &Path) -> Result<Vec<IterationRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Config {
                origin: path.display().to_string(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

/// `iteration,target_success,median_cost,kl_used`; the cost is empty for an
/// aborted update.
pub fn curves_csv(records: &[IterationRecord]) -> String {
    let mut s = String::from("iteration,target_success,median_cost,kl_used\n");
    for r in records {
        let cost = r
            .cost
            .as_ref()
            .map_or(String::new(), |c| c.median.to_string());
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.iteration, r.target_success, cost, r.kl_used
        );
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub stop: StopReason,
    pub iterations: usize,
    /// Index of the first iteration whose deployed policy met the threshold.
    pub success_iteration: Option<usize>,
    pub initial_success: f64,
    pub success: Vec<f64>,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub median_cost: Vec<Option<f64>>,
}

impl RunSummary {
    pub fn of(cfg: &ExperimentConfig, report: &RunReport) -> Self {
        RunSummary {
            name: cfg.name.clone(),
            stop: report.stop,
            iterations: report.records.len(),
            success_iteration: report.iterations_to_success(cfg.simopt.success_threshold),
            initial_success: report.initial_success,
            success: report.success_series(),
            initial_distance: report.initial_distance,
            final_distance: report
                .records
                .last()
                .map_or(report.initial_distance, |r| r.distance_to_truth),
            median_cost: report
                .records
                .iter()
                .map(|r| r.cost.as_ref().map(|c| c.median))
                .collect(),
        }
    }
}

/// The calibration loop, writing every artifact as soon as it exists.
pub fn run_simopt(cfg: &ExperimentConfig, out: Option<&Output>) -> Result<RunReport> {
    let exp = cfg.experiment()?;
    if let Some(o) = out {
        o.write_text("config.conf", &cfg.to_text())?;
        o.reset_records()?;
        o.write_json(&simopt::dist_file(0), &dist_json(&exp.initial))?;
    }
    let report = simopt::run_with(&exp, |record, policy| {
        if let Some(o) = out {
            o.append_record(record)?;
            o.write_json(&record.policy, &policy.to_json())?;
            o.write_json(
                &simopt::dist_file(record.iteration + 1),
                &dist_json(&record.dist_after),
            )?;
            o.write_text(
                &format!("ppo_{}.csv", record.iteration),
                &curve_csv(&record.rl_curve),
            )?;
        }
        Ok(())
    })?;
    if let Some(o) = out {
        o.write_text(CURVES, &curves_csv(&report.records))?;
        o.write_json("summary.json", &RunSummary::of(cfg, &report))?;
    }
    Ok(report)
}

/// Regenerates `curves.csv` from the records alone, into `out` or next to
/// `records`. Returns the file written and the number of rows.
pub fn replay(records: &Path, out: Option<&Output>) -> Result<(PathBuf, usize)> {
    let recs = read_records(records)?;
    let path = match out {
        Some(o) => o.path(CURVES),
        None => records.with_file_name(CURVES),
    };
    fs::write(&path, curves_csv(&recs))?;
    Ok((path, recs.len()))
}

/// Training seed of the first iteration of a run with top-level `seed`.
pub fn first_training_seed(seed: u64) -> u64 {
    derive_seed(seed, "simopt.ppo", 0)
}

/// PPO alone on the configured initial distribution.
pub fn run_train(cfg: &ExperimentConfig, out: Option<&Output>) -> Result<TrainOutput> {
    let exp = cfg.experiment()?;
    let rand = Randomization::new(exp.base.clone(), exp.initial.clone())?;
    let trained = ppo::train(
        &exp.spec,
        &rand,
        None,
        &exp.ppo,
        first_training_seed(cfg.simopt.seed),
    )?;
    if let Some(o) = out {
        o.write_text("config.conf", &cfg.to_text())?;
        o.write_json("policy.json", &trained.best.to_json())?;
        o.write_text("ppo.csv", &curve_csv(&trained.curve))?;
    }
    Ok(trained)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_reward: f64,
}

/// Deterministic episodes on the target, on the run's fixed success seeds.
/// Writes `traj_k.json` for every episode.
pub fn run_eval(
    cfg: &ExperimentConfig,
    actor: &dyn Actor,
    out: Option<&Output>,
) -> Result<EvalReport> {
    let exp = cfg.experiment()?;
    let target = exp.target()?;
    let seeds = simopt::success_seeds(cfg.simopt.seed, cfg.simopt.success_eval_trials);
    let mut successes = 0;
    let mut total = 0.0;
    for (k, &s) in seeds.iter().enumerate() {
        let t = target.evaluation_rollout(actor, s);
        successes += t.success as usize;
        total += t.total_reward();
        if let Some(o) = out {
            let j: TrajectoryJson = t.to_json();
            o.write_json(&format!("traj_{k}.json"), &j)?;
        }
    }
    let n = seeds.len();
    let report = EvalReport {
        trials: n,
        successes,
        success_rate: successes as f64 / n as f64,
        mean_reward: total / n as f64,
    };
    if let Some(o) = out {
        o.write_json("eval.json", &report)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub sigma: f64,
    pub seed: u64,
    /// Deterministic success on draws from the training distribution.
    pub success_rate: f64,
    pub eval_reward: f64,
    /// Best mean training reward.
    pub train_reward: f64,
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("sigma,seed,success_rate,eval_reward,train_reward\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.sigma, r.seed, r.success_rate, r.eval_reward, r.train_reward
        );
    }
    s
}

/// One cell of the width study: train from scratch at `sigma`, then evaluate.
pub fn ablation_cell(
    cfg: &ExperimentConfig,
    sigma: f64,
    seed: u64,
) -> Result<(AblationRow, TrainOutput)> {
    let exp = cfg.experiment()?;
    let rand = Randomization::new(exp.base.clone(), cfg.dist_with_sigma(sigma)?)?;
    let trained = ppo::train(&exp.spec, &rand, None, &exp.ppo, first_training_seed(seed))?;
    let eval = ppo::evaluate(
        &exp.rollout_spec(),
        &rand,
        &trained.best,
        cfg.ablation.eval_trials,
        derive_seed(seed, "ablation.eval", 0),
    )?;
    let row = AblationRow {
        sigma,
        seed,
        success_rate: eval.success_rate,
        eval_reward: eval.mean_reward,
        train_reward: trained.best_reward,
    };
    log::info!("sigma {sigma} seed {seed}: success {:.2}", row.success_rate);
    Ok((row, trained))
}

pub fn run_ablation(cfg: &ExperimentConfig, out: Option<&Output>) -> Result<Vec<AblationRow>> {
    if let Some(o) = out {
        o.write_text("config.conf", &cfg.to_text())?;
    }
    let mut rows = Vec::new();
    for &sigma in &cfg.ablation.sigmas {
        for &seed in &cfg.ablation.seeds {
            let (row, trained) = ablation_cell(cfg, sigma, seed)?;
            if let Some(o) = out {
                o.write_text(
                    &format!("ppo_sigma{sigma}_seed{seed}.csv"),
                    &curve_csv(&trained.curve),
                )?;
                o.write_json(
                    &format!("policy_sigma{sigma}_seed{seed}.json"),
                    &trained.best.to_json(),
                )?;
                o.write_text("ablation.csv", &ablation_csv(&rows))?;
            }
            rows.push(row);
        }
    }
    if let Some(o) = out {
        o.write_text("ablation.csv", &ablation_csv(&rows))?;
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub comparisons: Vec<ModeComparison>,
    /// Seeds whose closed-loop mean shift points toward the truth.
    pub closed_positive: usize,
    pub open_positive: usize,
    pub train_reward: f64,
}

/// Trains one policy on the initial distribution, then compares closed- and
/// open-loop updates from it for every configured seed.
pub fn run_compare(cfg: &ExperimentConfig, out: Option<&Output>) -> Result<CompareReport> {
    let exp = cfg.experiment()?;
    let trained = run_train(cfg, out)?;
    let state = LoopState {
        policy: Some(trained.best.clone()),
        ..LoopState::initial(&exp)
    };
    let mut comparisons = Vec::new();
    for &seed in &cfg.compare.seeds {
        let c = ablation_open_loop(&exp, &state, seed)?;
        log::info!(
            "seed {seed}: closed cosine {:.3}, open cosine {:.3}",
            c.closed_cosine,
            c.open_cosine
        );
        comparisons.push(c);
    }
    let report = CompareReport {
        closed_positive: comparisons.iter().filter(|c| c.closed_cosine > 0.0).count(),
        open_positive: comparisons.iter().filter(|c| c.open_cosine > 0.0).count(),
        comparisons,
        train_reward: trained.best_reward,
    };
    if let Some(o) = out {
        let mut lines = String::new();
        for c in &report.comparisons {
            lines.push_str(&serde_json::to_string(c)?);
            lines.push('\n');
        }
        o.write_text("comparison.jsonl", &lines)?;
        o.write_json("compare.json", &report)?;
    }
    Ok(report)
}

/// What `simopt run` did.
#[derive(Clone, Debug)]
pub enum RunOutcome {
    Simopt(Box<RunReport>),
    Ablation(Vec<AblationRow>),
    Compare(CompareReport),
}

pub fn run(cfg: &ExperimentConfig, out: Option<&Output>) -> Result<RunOutcome> {
    Ok(match cfg.kind {
        ExperimentKind::Simopt => RunOutcome::Simopt(Box::new(run_simopt(cfg, out)?)),
        ExperimentKind::Ablation => RunOutcome::Ablation(run_ablation(cfg, out)?),
        ExperimentKind::Compare => RunOutcome::Compare(run_compare(cfg, out)?),
    })
}

/// The zero policy for `cfg`'s task, or a snapshot read from `path`.
pub fn policy_source(cfg: &ExperimentConfig, path: &str) -> Result<PolicySnapshot> {
    if path == "zero" {
        let spec = cfg.spec();
        return Ok(PolicySnapshot::zero(spec.obs_dim(), spec.act_dim()));
    }
    let p = read_policy(Path::new(path))?;
    let spec = cfg.spec();
    if p.policy.obs_dim() != spec.obs_dim() || p.policy.act_dim() != spec.act_dim() {
        return Err(contract("policy does not fit the configured task"));
    }
    Ok(p)
}

/// `docs/defaults.md`: every key's default, and each preset checked against
/// the reference values.
pub fn defaults_doc() -> String {
    let mut s = String::from(
        "# Configuration defaults\n\n\
         Generated by `simopt::harness::defaults_doc`; a unit test keeps this file in sync.\n\n\
         ## Keys\n\n",
    );
    s.push_str(&crate::config::defaults_table());
    s.push_str("\n## Presets against reference values\n\n");
    for (name, text) in PRESETS {
        let cfg = ExperimentConfig::parse(text, name).expect("presets parse");
        let values: std::collections::HashMap<String, String> = cfg.entries().into_iter().collect();
        let diff = crate::config::reference_diff(&cfg);
        let _ = writeln!(s, "### {name}\n");
        let _ = writeln!(s, "| key | reference | preset | |\n|---|---|---|---|");
        for (k, r) in crate::config::reference_values(cfg.task) {
            let mark = if diff.iter().any(|(d, _, _)| *d == k) {
                "differs"
            } else {
                ""
            };
            let _ = writeln!(s, "| `{k}` | `{r:?}` | `{}` | {mark} |", values[k]);
        }
        s.push('\n');
    }
    s
}
