use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use sublinear_harness::config::ScenarioConfig;
use sublinear_harness::hide_and_seek::{run_hide_and_seek, write_detection_csv, HideAndSeekSpec};
use sublinear_harness::scenario::{run_scenario, sweep, write_csv, TrialRecord};
use sublinear_harness::verify::run_suite;

/// Simulator for sparsified distributed mirror descent.
#[derive(Parser)]
#[command(name = "sublin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Overrides {
    /// Replace `[scenario] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace `[scenario] trials`.
    #[arg(long)]
    trials: Option<u64>,
    /// CSV destination; defaults to `[scenario] output`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of one scenario.
    Run {
        config: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Run the scenario at every point of its `[sweep]` grid.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Run a property suite: mirror, maurey, wire, losses, datagen, protocols or all.
    Verify { suite: String },
    /// Detection rate of the planted coordinate over the budget grid.
    HideAndSeek {
        config: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
}

fn load(path: &PathBuf, o: &Overrides) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = o.seed {
        cfg.scenario.seed = s;
    }
    if let Some(t) = o.trials {
        anyhow::ensure!(t >= 1, "--trials must be at least 1");
        cfg.scenario.trials = t;
    }
    Ok(cfg)
}

fn sink(cfg: &ScenarioConfig, o: &Overrides) -> Result<Box<dyn Write>> {
    match o.out.clone().or_else(|| cfg.scenario.output.clone().map(PathBuf::from)) {
        Some(p) => Ok(Box::new(File::create(&p).with_context(|| format!("creating {}", p.display()))?)),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn report_margins(records: &[TrialRecord]) -> bool {
    let worst = records.iter().filter_map(|r| r.min_regret_margin).reduce(f64::min);
    match worst {
        Some(m) if m < -1e-8 => {
            eprintln!("regret inequality violated: worst margin {m:.3e}");
            false
        }
        _ => true,
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, o } => {
            let cfg = load(&config, &o)?;
            let records = run_scenario(&cfg)?;
            write_csv(&records, sink(&cfg, &o)?)?;
            Ok(report_margins(&records))
        }
        Command::Sweep { config, o } => {
            let cfg = load(&config, &o)?;
            let records = sweep(&cfg)?;
            write_csv(&records, sink(&cfg, &o)?)?;
            Ok(report_margins(&records))
        }
        Command::Verify { suite } => {
            let reports = run_suite(&suite)?;
            let mut ok = true;
            for r in &reports {
                println!("{r}");
                ok &= r.passed();
            }
            Ok(ok)
        }
        Command::HideAndSeek { config, o } => {
            let cfg = load(&config, &o)?;
            let cells = run_hide_and_seek(&HideAndSeekSpec::from_config(&cfg)?)?;
            write_detection_csv(&cells, sink(&cfg, &o)?)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
