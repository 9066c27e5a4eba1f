//! Exponential and logarithm maps, adjoints and the two rotation error measures.

use lie_mpc::lie::{ad_se3, adjoint_SE3, exp_se3, exp_so3, log_se3, log_so3, Vec3, Vec6};
use lie_mpc::mpc::{compatible_error, tracking_error};

fn main() {
    let xi = Vec6::new(0.3, -0.2, 1.1, 0.5, 0.0, -0.4);
    let x = exp_se3(&xi);
    println!("exp(xi) =\n{:.6}", x.matrix());
    println!("log(exp(xi)) - xi = {:.2e}", (log_se3(&x) - xi).amax());

    let eta = Vec6::new(0.0, 0.1, 0.0, 1.0, 2.0, 3.0);
    // X exp(eta) X⁻¹ = exp(Ad_X eta)
    let lhs = x * exp_se3(&eta) * x.inverse();
    let rhs = exp_se3(&(adjoint_SE3(&x) * eta));
    println!("conjugation vs adjoint: {:.2e}", (lhs.matrix() - rhs.matrix()).amax());
    println!("ad_xi eta = {:.4?}", (ad_se3(&xi) * eta).as_slice());

    println!("\n angle  |log R|   |e_R|");
    let axis = Vec3::new(1.0, 2.0, 2.0) / 3.0;
    for deg in [10.0_f64, 45.0, 90.0, 135.0, 170.0, 180.0] {
        let r = exp_so3(&(axis * deg.to_radians()));
        let id = lie_mpc::lie::Rotation::identity();
        println!(
            "{deg:6.1}  {:6.4}   {:6.4}",
            log_so3(&r).norm(),
            compatible_error(&r, &id).norm()
        );
    }

    let desired = exp_se3(&Vec6::new(0.0, 0.0, 0.5, 1.0, 0.0, 0.0));
    let err = tracking_error(&desired, &x);
    println!("\ntracking error psi = {:.4?}", err.psi.as_slice());
}
