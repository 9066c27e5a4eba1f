//! How the compatible error saturates while the logarithm keeps growing.

use lie_mpc::bench::sweep::error_scale_sweep;

fn main() {
    println!("theta    |e_R|    |log R|");
    for row in error_scale_sweep().iter().step_by(15) {
        println!("{:5.3}  {:7.4}  {:7.4}", row.theta, row.e_r_norm, row.log_norm);
    }
}
