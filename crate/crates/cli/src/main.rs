use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use simopt::config::ExperimentConfig;
use simopt::harness::{self, Output, RunOutcome, RunSummary};
use simopt::{oracles, parallel};

/// Adaptive simulation randomization: PPO training under a parameter
/// distribution that is refit against target-system trajectories.
#[derive(Parser, Debug)]
#[command(name = "simopt", version)]
struct Cli {
    /// Top-level seed (overrides `simopt.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for rollouts (default: SIMOPT_WORKERS or all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory (default: out/<experiment name>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `section.key=value`, applied after the config file; repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment a config describes (calibration loop, width ablation
    /// or closed/open-loop comparison).
    Run { config: String },
    /// PPO only, on the configured initial distribution.
    Train { config: String },
    /// Deterministic success evaluation on the target; `zero` is the all-zero policy.
    Eval { policy: String, config: String },
    /// Brute-force reference checks: gae, reps-grid, mc-kl, finite-difference or all.
    Oracle { name: String },
    /// Rebuild curves.csv from a records.jsonl.
    Replay { records: PathBuf },
}

impl Cli {
    fn config(&self, source: &str) -> Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(s) = self.seed {
            overrides.push(format!("simopt.seed={s}"));
        }
        Ok(harness::load_config(source, &overrides)?)
    }

    fn output(&self, default: String) -> Result<Output> {
        let dir = self
            .out
            .clone()
            .unwrap_or_else(|| Path::new("out").join(default));
        Output::create(&dir).with_context(|| format!("creating {}", dir.display()))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        if w == 0 {
            bail!("--workers must be at least 1");
        }
        parallel::set_workers(w);
    }
    match &cli.command {
        Command::Run { config } => {
            let cfg = cli.config(config)?;
            let out = cli.output(cfg.name.clone())?;
            match harness::run(&cfg, Some(&out))? {
                RunOutcome::Simopt(report) => {
                    let s = RunSummary::of(&cfg, &report);
                    println!(
                        "{}: {} iterations, stop {:?}, success {:?}",
                        s.name, s.iterations, s.stop, s.success
                    );
                    println!(
                        "distance to truth {:.4} -> {:.4}",
                        s.initial_distance, s.final_distance
                    );
                }
                RunOutcome::Ablation(rows) => {
                    for r in rows {
                        println!(
                            "sigma {} seed {}: success {:.2}",
                            r.sigma, r.seed, r.success_rate
                        );
                    }
                }
                RunOutcome::Compare(r) => {
                    println!(
                        "closed-loop cosine > 0 on {}/{} seeds, open-loop on {}/{}",
                        r.closed_positive,
                        r.comparisons.len(),
                        r.open_positive,
                        r.comparisons.len()
                    );
                }
            }
            println!("outputs in {}", out.path("").display());
        }
        Command::Train { config } => {
            let cfg = cli.config(config)?;
            let out = cli.output(format!("{}-train", cfg.name))?;
            let t = harness::run_train(&cfg, Some(&out))?;
            println!(
                "best mean reward {:.3}; policy in {}",
                t.best_reward,
                out.path("policy.json").display()
            );
        }
        Command::Eval { policy, config } => {
            let cfg = cli.config(config)?;
            let actor = harness::policy_source(&cfg, policy)?;
            let out = cli.output(format!("{}-eval", cfg.name))?;
            let r = harness::run_eval(&cfg, &actor, Some(&out))?;
            println!(
                "success {}/{} (mean reward {:.3})",
                r.successes, r.trials, r.mean_reward
            );
        }
        Command::Oracle { name } => {
            let reports = oracles::run_named(name, cli.seed.unwrap_or(0)).with_context(|| {
                format!(
                    "unknown oracle `{name}` (expected {} or all)",
                    oracles::ORACLE_NAMES.join(", ")
                )
            })?;
            let mut ok = true;
            for r in &reports {
                println!("{}", r.summary());
                ok &= r.pass;
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Replay { records } => {
            let out = cli.out.as_ref().map(Output::create).transpose()?;
            let (path, rows) = harness::replay(records, out.as_ref())
                .with_context(|| format!("replaying {}", records.display()))?;
            println!("{rows} rows -> {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
