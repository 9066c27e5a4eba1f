//! Terminal weight from the discrete Riccati equation of the last horizon stage.

use nalgebra::DMatrix;

use lie_mpc::dynamics::InertiaParams;
use lie_mpc::lie::Vec6;
use lie_mpc::mpc::{build_ct_system, dare_residual, discretize, riccati_terminal, solve_dare, MpcConfig, TerminalMode};

fn main() -> lie_mpc::Result<()> {
    let cfg = MpcConfig::spiral_defaults();
    let inertia = InertiaParams::diagonal(0.1, 0.15, 0.2, 1.0)?;
    let xi_d = Vec6::new(0.0, 0.0, 1.0, 2.0, 0.0, 0.2);
    let xi_bar = xi_d + Vec6::new(0.2, -0.1, 0.0, 0.0, 0.3, 0.0);

    let ct = build_ct_system(&xi_d, &xi_bar, &inertia, false);
    let model = discretize(&ct, cfg.dt, cfg.discretization)?;
    let a = DMatrix::from_column_slice(12, 12, model.a.as_slice());
    let q = DMatrix::from_column_slice(12, 12, cfg.q.as_slice());

    let dare = solve_dare(&a, &model.b, &q, &cfg.r)?;
    println!("DARE converged in {} iterations (last step {:.2e})", dare.iterations, dare.step);
    println!("residual {:.2e}", dare_residual(&a, &model.b, &q, &cfg.r, &dare.p)?);
    println!("diag P = {:.3?}", dare.p.diagonal().as_slice());

    let mut p = q.clone();
    for cycle in 1..=5 {
        p = riccati_terminal(&a, &model.b, &q, &cfg.r, TerminalMode::OneStep, Some(&p))?;
        println!("one-step after {cycle} cycles: distance to DARE {:.3e}", (&p - &dare.p).abs().max());
    }
    Ok(())
}
