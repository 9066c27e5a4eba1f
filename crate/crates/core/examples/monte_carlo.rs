//! Runs a scenario file (or bundled name) and writes the CSV results.
//!
//! ```text
//! cargo run --release --example monte_carlo -- spiral 8 /tmp/spiral-out
//! ```

use std::path::PathBuf;

use lie_mpc::bench::runner::{aggregates_from_summaries, write_results};
use lie_mpc::bench::{run_scenario, scenario};

fn main() -> lie_mpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "spiral".into());
    let trials: Option<usize> = args.next().and_then(|a| a.parse().ok());
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("lie-mpc-monte-carlo"));

    let mut s = scenario::load(&name)?;
    if let Some(n) = trials {
        s.experiment.trials = n;
    }
    let results = run_scenario(&s)?;
    write_results(&out, &s, &results)?;

    let summaries: Vec<_> = results
        .iter()
        .map(|r| r.summary(s.experiment.settle_rot_tol, s.experiment.settle_pos_tol))
        .collect();
    for row in aggregates_from_summaries(&summaries) {
        println!("{:<14} {:10.4} (median {:.4})", row.metric, row.mean, row.median);
    }
    println!("wrote {} trials to {}", results.len(), out.display());
    Ok(())
}
