//! Command-line front end for the Monte Carlo experiments.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
//! 3 a trial failed to converge while `--strict` was given.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emdoa::harness::output::{
    create, write_crlb, write_rmse, write_scatter, write_snapshots, write_summary, write_trace,
};
use emdoa::harness::runner::{run_algorithm, trial_snapshots};
use emdoa::harness::{
    crlb_curve, run_experiment, ConfigError, Execution, ExperimentConfig, ExperimentResult,
    HarnessError, SweepAxis,
};

#[derive(Parser)]
#[command(name = "emdoa", version, about = "EM-type DOA estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the snapshots of one trial to snapshots.csv.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pick: Pick,
    },
    /// Run every configured algorithm on one trial and write trace.csv.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        pick: Pick,
    },
    /// Run all trials and write scatter.csv and summary.csv.
    Scatter {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        batch: Batch,
    },
    /// Run the sweep and write rmse.csv and summary.csv.
    RmseSweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        batch: Batch,
    },
    /// Write the bound curve of the configured sweep to crlb.csv.
    Crlb {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Exit with status 3 if any run stops on the iteration cap.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct Pick {
    /// Trial index.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Sweep point index, in ascending sweep order.
    #[arg(long, default_value_t = 0)]
    point: usize,
}

#[derive(Args)]
struct Batch {
    /// Override the configured number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
}

enum Outcome {
    Done,
    NotConverged,
}

fn load(common: &Common, trials: Option<usize>) -> Result<ExperimentConfig, HarnessError> {
    let mut config = ExperimentConfig::from_path(&common.config)?;
    if let Some(trials) = trials {
        if trials == 0 {
            return Err(ConfigError {
                line: None,
                message: "--trials must be positive".into(),
            }
            .into());
        }
        config.evaluation.trials = trials;
    }
    Ok(config)
}

fn check_pick(config: &ExperimentConfig, pick: &Pick) -> Result<(), HarnessError> {
    let points = config.sweep_points().len();
    if pick.point >= points {
        return Err(ConfigError {
            line: None,
            message: format!(
                "--point {} out of range, the sweep has {points} points",
                pick.point
            ),
        }
        .into());
    }
    Ok(())
}

fn batch(common: &Common, batch: &Batch) -> Result<ExperimentResult, HarnessError> {
    let config = load(common, batch.trials)?;
    let execution = if batch.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let result = run_experiment(&config, execution)?;
    for point in &result.points {
        for algo in &config.algorithm.names {
            let s = point.summary(*algo);
            eprintln!(
                "{} = {}: {algo} rmse {:.4} deg, {}/{} converged, {} wanted",
                axis_name(&config),
                point.point.value,
                s.rmse_deg,
                s.converged,
                s.trials,
                s.wanted
            );
        }
    }
    Ok(result)
}

fn axis_name(config: &ExperimentConfig) -> &'static str {
    match config.sweep.axis {
        SweepAxis::Power => "power",
        SweepAxis::Snapshots => "snapshots",
        SweepAxis::None => "point",
    }
}

fn converged(result: &ExperimentResult, strict: bool) -> Outcome {
    if strict && !result.all_converged() {
        Outcome::NotConverged
    } else {
        Outcome::Done
    }
}

fn write_to(dir: &Path, name: &str) -> Result<std::fs::File, HarnessError> {
    create(dir, name)
}

fn run(cli: Cli) -> Result<Outcome, HarnessError> {
    match cli.command {
        Command::Simulate { common, pick } => {
            let config = load(&common, None)?;
            check_pick(&config, &pick)?;
            let v = trial_snapshots(&config, pick.point, pick.trial)?;
            write_snapshots(write_to(&common.out, "snapshots.csv")?, &v)?;
            Ok(Outcome::Done)
        }
        Command::Estimate { common, pick } => {
            let config = load(&common, None)?;
            check_pick(&config, &pick)?;
            let v = trial_snapshots(&config, pick.point, pick.trial)?;
            let mut records = Vec::new();
            for &algo in &config.algorithm.names {
                let record = run_algorithm(&config, algo, &v)?;
                let theta: Vec<String> = record
                    .final_theta_deg()
                    .iter()
                    .map(|x| format!("{x:.4}"))
                    .collect();
                println!(
                    "{algo}: {} iterations, converged {}, llf {:.6}, theta_deg [{}]",
                    record.iterations,
                    record.converged,
                    record.llf.last().copied().unwrap_or(f64::NAN),
                    theta.join(", ")
                );
                records.push((algo, record));
            }
            let runs: Vec<_> = records.iter().map(|(a, r)| (*a, r)).collect();
            write_trace(write_to(&common.out, "trace.csv")?, &runs)?;
            let all = records.iter().all(|(_, r)| r.converged);
            Ok(if common.strict && !all {
                Outcome::NotConverged
            } else {
                Outcome::Done
            })
        }
        Command::Scatter { common, batch: b } => {
            let result = batch(&common, &b)?;
            write_scatter(write_to(&common.out, "scatter.csv")?, &result)?;
            write_summary(write_to(&common.out, "summary.csv")?, &result)?;
            Ok(converged(&result, common.strict))
        }
        Command::RmseSweep { common, batch: b } => {
            let result = batch(&common, &b)?;
            write_rmse(write_to(&common.out, "rmse.csv")?, &result)?;
            write_summary(write_to(&common.out, "summary.csv")?, &result)?;
            Ok(converged(&result, common.strict))
        }
        Command::Crlb { common } => {
            let config = load(&common, None)?;
            let curve = crlb_curve(&config);
            write_crlb(write_to(&common.out, "crlb.csv")?, &curve, config.sources())?;
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("error: at least one run did not converge");
            ExitCode::from(3)
        }
        Err(err @ HarnessError::Config(_)) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
