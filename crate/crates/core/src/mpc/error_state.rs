//! Group tracking error `Ψ = X_d⁻¹X` and its dynamics.

use crate::lie::{
    ad_se3, adjoint_SE3, exp_se3, hat6, log_se3, vee3_unchecked, Mat4, Pose, Rotation, Vec3, Vec6,
};

/// Tracking error on the group and in exponential coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackingError {
    /// `Ψ = X_d⁻¹ X`.
    pub group: Pose,
    /// `ψ = log(Ψ)`.
    pub psi: Vec6,
}

impl TrackingError {
    /// Norm of the rotational part of `ψ` (radians).
    pub fn rotation_norm(&self) -> f64 {
        self.psi.fixed_rows::<3>(0).norm()
    }

    pub fn reconstruct(&self) -> Pose {
        exp_se3(&self.psi)
    }
}

pub fn tracking_error(desired: &Pose, actual: &Pose) -> TrackingError {
    let group = desired.inverse() * *actual;
    TrackingError {
        group,
        psi: log_se3(&group),
    }
}

/// `Ψ̇ = Ψ(ξ − Ad_{Ψ⁻¹} ξ_d)^`, the exact error rate as a 4×4 tangent matrix at `Ψ`.
pub fn exact_error_rate(psi_group: &Pose, xi: &Vec6, xi_d: &Vec6) -> Mat4 {
    let relative = xi - adjoint_SE3(&psi_group.inverse()) * xi_d;
    psi_group.matrix() * hat6(&relative).matrix()
}

/// `ψ̇ = −ad_{ξ_d} ψ + ξ − ξ_d`. Depends only on the algebra quantities,
/// never on the poses themselves.
pub fn linearized_error_rate(psi: &Vec6, xi: &Vec6, xi_d: &Vec6) -> Vec6 {
    -(ad_se3(xi_d) * psi) + xi - xi_d
}

/// `e_R = ½(RᵀR_d − R_dᵀR)^∨`, the rotation error used by variational
/// controllers. Its norm is `|sin θ|` for a relative rotation by `θ`.
pub fn compatible_error(r: &Rotation, r_d: &Rotation) -> Vec3 {
    let a = r.matrix().transpose() * r_d.matrix();
    vee3_unchecked(&((a - a.transpose()) * 0.5))
}
