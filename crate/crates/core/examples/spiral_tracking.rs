//! Closed-loop helix tracking from random initial poses.
//!
//! ```text
//! cargo run --release --example spiral_tracking -- [trials] [simplified]
//! ```

use std::time::Instant;

use lie_mpc::bench::{run_scenario, scenario};
use lie_mpc::mpc::Variant;

fn main() -> lie_mpc::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let simplified = args.next().as_deref() == Some("simplified");

    let mut s = scenario::bundled("spiral").expect("bundled")?;
    s.experiment.trials = trials;
    if simplified {
        s.mpc.variant = Variant::Simplified;
    }

    let clock = Instant::now();
    let results = run_scenario(&s)?;
    let elapsed = clock.elapsed();

    let mut converged_rot = 0;
    let mut converged_pos = 0;
    for r in &results {
        let sm = r.summary(0.05, 0.05);
        let rot_ok = sm.settle_rot.is_some_and(|t| t <= 5.0);
        let pos_ok = sm.settle_pos.is_some_and(|t| t <= 10.0);
        converged_rot += rot_ok as usize;
        converged_pos += pos_ok as usize;
        println!(
            "trial {:3}  start angle {:5.2} rad  acc rot {:8.3}  acc pos {:8.3}  settle rot {:>6}  settle pos {:>6}  max iters {:5}  {:?}",
            r.trial,
            lie_mpc::lie::log_so3(&r.initial.rotation).norm(),
            sm.acc_psi_rot,
            sm.acc_pos_err,
            sm.settle_rot.map_or("-".into(), |t| format!("{t:.2}")),
            sm.settle_pos.map_or("-".into(), |t| format!("{t:.2}")),
            sm.max_qp_iters,
            r.status,
        );
    }
    println!(
        "{} trials in {:.2?}: rotation settled by 5 s in {}, position settled by 10 s in {}",
        results.len(),
        elapsed,
        converged_rot,
        converged_pos
    );
    Ok(())
}
