//! Four-legged stance: standing forces, then a closed-loop −74.5° roll step.

use lie_mpc::bench::{run_scenario, scenario};
use lie_mpc::dynamics::{InertiaParams, RigidBodyState};
use lie_mpc::lie::Pose;
use lie_mpc::mpc::ControllerMemory;
use lie_mpc::quadruped::{build_quadruped_mpc_step, quadruped_mpc_defaults, ContactConfig};

fn main() -> lie_mpc::Result<()> {
    let mass = 9.0;
    let inertia = InertiaParams::diagonal(0.07, 0.26, 0.242, mass)?;
    let contact = ContactConfig::mini_cheetah(mass);
    let cfg = quadruped_mpc_defaults(contact.num_feet());
    let hold = lie_mpc::bench::PoseSteps {
        initial: Pose::identity(),
        steps: vec![],
    };
    let mut memory = ControllerMemory::new(cfg.qp.clone());
    let state = RigidBodyState::at_rest(Pose::identity());
    let (forces, _) = build_quadruped_mpc_step(&state, &hold, 0.0, &cfg, &contact, &inertia, &mut memory)?;
    println!("first-cycle foot forces at a level stance:");
    for (k, f) in forces.as_slice().chunks(3).enumerate() {
        println!("  foot {k}: ({:6.2}, {:6.2}, {:6.2}) N", f[0], f[1], f[2]);
    }

    let mut s = scenario::bundled("quadruped_roll").expect("bundled")?;
    s.reference.knots.truncate(1);
    s.experiment.duration = 4.0;
    let result = run_scenario(&s)?.remove(0);
    println!("\nroll step at t = 1 s ({:?}):", result.status);
    for (row, pose) in result.rows.iter().zip(&result.poses).step_by(8) {
        let (roll, _, _) = pose.rotation.rpy();
        println!("  t {:5.2}  roll {:7.2} deg  position error {:.4} m", row.t, roll.to_degrees(), row.pos_err_norm);
    }
    println!("largest friction violation {:.2e}", result.max_friction_violation.unwrap_or(0.0));
    Ok(())
}
