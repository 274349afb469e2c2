use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use schedleak::experiment::{builtin_checks, run_experiment, ExperimentConfig, ExperimentKind};
use schedleak::Result;

#[derive(Parser)]
#[command(
    name = "schedleak",
    version,
    about = "Timing side-channel experiments on shared schedulers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimation error of an attacker against one policy.
    Privacy(Common),
    /// Mean job delay under one policy.
    Delay(Common),
    /// Privacy and delay ratios over a sweep of batching periods.
    Tradeoff(Common),
    /// Probe-by-probe reconstruction on a short FCFS run.
    AttackDemo(Common),
    /// Runs a config (or the built-in suite) and fails if any band is violated.
    Check(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit non-zero when an acceptance band is violated.
    #[arg(long)]
    check: bool,
}

impl Common {
    fn load(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| schedleak::Error::Config("--config is required".into()))?;
        let mut cfg = ExperimentConfig::load(path)?;
        if cfg.experiment != kind {
            return Err(schedleak::Error::Config(format!(
                "config describes a {:?} experiment",
                cfg.experiment
            )));
        }
        self.apply(&mut cfg);
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.replications {
            cfg.replications = n;
        }
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let (configs, enforce) = match &cli.command {
        Command::Privacy(c) => (vec![c.load(ExperimentKind::Privacy)?], c.check),
        Command::Delay(c) => (vec![c.load(ExperimentKind::Delay)?], c.check),
        Command::Tradeoff(c) => (vec![c.load(ExperimentKind::Tradeoff)?], c.check),
        Command::AttackDemo(c) => (vec![c.load(ExperimentKind::AttackDemo)?], c.check),
        Command::Check(c) => {
            let configs = match &c.config {
                Some(path) => {
                    let mut cfg = ExperimentConfig::load(path)?;
                    c.apply(&mut cfg);
                    vec![cfg]
                }
                None => builtin_checks(c.seed.unwrap_or(1), c.replications.unwrap_or(30), 20_000.0),
            };
            (configs, true)
        }
    };
    let mut all = true;
    for cfg in &configs {
        let outcome = run_experiment(cfg)?;
        print!("{}", outcome.summary);
        all &= outcome.passed;
    }
    Ok(all || !enforce)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("acceptance band violated");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
