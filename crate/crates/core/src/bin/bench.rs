//! Command-line front end for the experiment harness.

use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lie_mpc::bench::runner::{aggregates_from_summaries, write_results};
use lie_mpc::bench::scenario::{self, BUNDLED};
use lie_mpc::bench::sweep::{error_scale_sweep, write_sweep};
use lie_mpc::bench::run_scenario;
use lie_mpc::mpc::Variant;

#[derive(Parser)]
#[command(name = "bench", about = "Run SE(3) tracking MPC experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or bundled scenario name) and write CSV results.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory. Defaults to the scenario's `output`, then `bench-out/<name>`.
        #[arg(long, env = "BENCH_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        controller: Option<Controller>,
    },
    /// Tabulate ‖e_R‖ against ‖log R‖ over [0, π].
    SweepErrorScale {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the bundled scenario names.
    ListScenarios,
}

#[derive(Clone, Copy, ValueEnum)]
enum Controller {
    Proposed,
    Simplified,
}

fn run(cli: Cli) -> lie_mpc::Result<bool> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            trials,
            out,
            controller,
        } => {
            let mut s = scenario::load(&scenario)?;
            if let Some(seed) = seed {
                s.experiment.seed = seed;
            }
            if let Some(n) = trials {
                s.experiment.trials = n;
            }
            if let Some(c) = controller {
                s.mpc.variant = match c {
                    Controller::Proposed => Variant::Proposed,
                    Controller::Simplified => Variant::Simplified,
                };
            }
            s.validate()?;
            let dir = out
                .or_else(|| s.experiment.output.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("bench-out").join(&s.name));
            let results = run_scenario(&s)?;
            write_results(&dir, &s, &results)?;

            let (rot_tol, pos_tol) = (s.experiment.settle_rot_tol, s.experiment.settle_pos_tol);
            let summaries: Vec<_> = results.iter().map(|r| r.summary(rot_tol, pos_tol)).collect();
            for row in aggregates_from_summaries(&summaries) {
                println!(
                    "{:<14} mean {:>10.4}  median {:>10.4}  max {:>10.4}",
                    row.metric, row.mean, row.median, row.max
                );
            }
            let failed: Vec<_> = results.iter().filter(|r| !r.status.is_ok()).collect();
            for r in &failed {
                eprintln!("trial {}: {:?}", r.trial, r.status);
            }
            println!(
                "{} trials, {} failed, results in {}",
                results.len(),
                failed.len(),
                dir.display()
            );
            Ok(failed.is_empty())
        }
        Command::SweepErrorScale { out } => {
            let rows = error_scale_sweep();
            match out {
                Some(path) => write_sweep(&rows, BufWriter::new(File::create(path)?))?,
                None => write_sweep(&rows, io::stdout().lock())?,
            }
            Ok(true)
        }
        Command::ListScenarios => {
            for (name, text) in BUNDLED {
                let description = scenario::Scenario::from_toml_str(text).map(|s| s.description).unwrap_or_default();
                println!("{name:<20} {description}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
