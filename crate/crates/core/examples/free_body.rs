//! Torque-free tumbling: energy and world-frame momentum drift of the integrator.

use lie_mpc::dynamics::{simulate, spatial_momentum, InertiaParams, RigidBodyState};
use lie_mpc::lie::{Pose, Vec6};

fn main() -> lie_mpc::Result<()> {
    let inertia = InertiaParams::diagonal(0.1, 0.15, 0.2, 1.0)?;
    // spin near the unstable intermediate axis
    let start = RigidBodyState::new(Pose::identity(), Vec6::new(0.05, 3.0, 0.05, 0.2, 0.0, 0.1));
    let dt = 1e-3;
    let steps = 20_000;
    let traj = simulate::<_, lie_mpc::Error>(start, |_, _| Ok(Vec6::zeros()), &inertia, dt, steps, None)?;

    let e0 = inertia.kinetic_energy(&start.twist);
    let m0 = spatial_momentum(&start, &inertia);
    for s in traj.samples.iter().step_by(2000) {
        println!(
            "t {:5.1}  omega {:7.3?}  energy drift {:9.2e}  momentum drift {:9.2e}",
            s.time,
            s.state.twist.fixed_rows::<3>(0).as_slice(),
            inertia.kinetic_energy(&s.state.twist) - e0,
            (spatial_momentum(&s.state, &inertia) - m0).amax()
        );
    }
    let last = traj.final_state.expect("ran");
    println!("orthogonality defect after {steps} steps: {:.2e}", last.pose.rotation.orthogonality_defect());
    Ok(())
}
