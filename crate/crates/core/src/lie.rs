//! SO(3) and SE(3) operators.
//!
//! Twists are ordered angular-first, `ξ = (ω, v)`, and every 6×6 matrix in
//! this crate uses the same block order.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Matrix6, Vector3, Vector6};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec6 = Vector6<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;
pub type Mat6 = Matrix6<f64>;

/// Tolerance on `‖RᵀR − I‖_F` and `|det R − 1|` for a matrix to count as a rotation.
pub const ROTATION_TOL: f64 = 1e-9;
/// Drift above [`ROTATION_TOL`] but below this is projected back onto SO(3).
pub const ROTATION_REPAIR_TOL: f64 = 1e-3;
/// Tolerance on the symmetric part accepted by [`vee3`].
pub const SKEW_TOL: f64 = 1e-9;

const SMALL_ANGLE: f64 = 1e-6;
const NEAR_PI: f64 = 1e-2;

/// Cross-product matrix: `hat3(w) * u == w × u`.
pub fn hat3(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat3`]. Takes the skew part of `m`; rejects inputs whose
/// symmetric part exceeds [`SKEW_TOL`].
pub fn vee3(m: &Mat3) -> Result<Vec3> {
    let sym = (m + m.transpose()).abs().max() * 0.5;
    if sym > SKEW_TOL {
        return Err(Error::NotSkew(sym));
    }
    Ok(vee3_unchecked(m))
}

/// Skew part of `m` as a vector, no validation.
pub(crate) fn vee3_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// A 4×4 element of se(3): `[[ω^, v], [0, 0]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se3Matrix(Mat4);

impl Se3Matrix {
    /// Validates the se(3) structure of a raw 4×4 matrix.
    pub fn from_matrix(m: Mat4) -> Result<Self> {
        if m.row(3).iter().any(|v| *v != 0.0) {
            return Err(Error::NotSe3("bottom row must be zero"));
        }
        let w: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
        vee3(&w).map_err(|_| Error::NotSe3("rotation block must be skew-symmetric"))?;
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }
}

pub fn hat6(xi: &Vec6) -> Se3Matrix {
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat3(&angular(xi)));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&linear(xi));
    Se3Matrix(m)
}

pub fn vee6(m: &Se3Matrix) -> Vec6 {
    let w: Mat3 = m.0.fixed_view::<3, 3>(0, 0).into_owned();
    twist(&vee3_unchecked(&w), &m.0.fixed_view::<3, 1>(0, 3).into_owned())
}

/// Angular block `ω` of a twist.
pub fn angular(xi: &Vec6) -> Vec3 {
    xi.fixed_rows::<3>(0).into_owned()
}

/// Linear block `v` of a twist.
pub fn linear(xi: &Vec6) -> Vec3 {
    xi.fixed_rows::<3>(3).into_owned()
}

/// Stacks `(ω, v)`.
pub fn twist(omega: &Vec3, v: &Vec3) -> Vec6 {
    Vec6::new(omega.x, omega.y, omega.z, v.x, v.y, v.z)
}

/// Rotation matrix with `RᵀR = I` and `det R = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Accepts `m` if it is a rotation within [`ROTATION_TOL`]; small drift
    /// (up to [`ROTATION_REPAIR_TOL`]) is removed by polar projection.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let defect = orthogonality_defect(&m);
        let det = m.determinant();
        if defect <= ROTATION_TOL && (det - 1.0).abs() <= ROTATION_TOL {
            return Ok(Self(m));
        }
        if defect <= ROTATION_REPAIR_TOL && det > 0.0 {
            return Ok(Self::project(&m));
        }
        Err(Error::NotRotation { defect, det })
    }

    /// Nearest rotation in the Frobenius sense (polar factor of `m`).
    pub fn project(m: &Mat3) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let mut u = u;
            u.column_mut(2).neg_mut();
            r = u * v_t;
        }
        Self(r)
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        exp_so3(&(axis.normalize() * angle))
    }

    /// Intrinsic roll-pitch-yaw: `R = Rz(yaw) · Ry(pitch) · Rx(roll)`.
    pub fn from_rpy(roll: f64, pitch: f64, yaw: f64) -> Self {
        let rx = exp_so3(&Vec3::new(roll, 0.0, 0.0));
        let ry = exp_so3(&Vec3::new(0.0, pitch, 0.0));
        let rz = exp_so3(&Vec3::new(0.0, 0.0, yaw));
        Self(rz.0 * ry.0 * rx.0)
    }

    /// Roll, pitch, yaw matching [`Rotation::from_rpy`].
    pub fn rpy(&self) -> (f64, f64, f64) {
        let r = &self.0;
        let pitch = (-r[(2, 0)]).clamp(-1.0, 1.0).asin();
        let roll = r[(2, 1)].atan2(r[(2, 2)]);
        let yaw = r[(1, 0)].atan2(r[(0, 0)]);
        (roll, pitch, yaw)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.0)
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// `‖RᵀR − I‖_F`.
pub fn orthogonality_defect(m: &Mat3) -> f64 {
    (m.transpose() * m - Mat3::identity()).norm()
}

/// Rigid transform `[[R, p], [0, 1]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Rotation,
    pub position: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation, position: Vec3) -> Self {
        Self { rotation, position }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn from_matrix(m: &Mat4) -> Result<Self> {
        if (m.row(3) - nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0)).abs().max() > ROTATION_TOL {
            return Err(Error::NotSe3("homogeneous bottom row must be (0, 0, 0, 1)"));
        }
        let r = Rotation::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        Ok(Self::new(r, m.fixed_view::<3, 1>(0, 3).into_owned()))
    }

    pub fn matrix(&self) -> Mat4 {
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.inverse();
        Self::new(rt, -(rt * self.position))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * *p + self.position
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        Pose::new(
            self.rotation * rhs.rotation,
            self.rotation * rhs.position + self.position,
        )
    }
}

impl fmt::Display for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = log_so3(&self.rotation);
        let p = &self.position;
        write!(
            f,
            "Pose(rotvec: [{:.4}, {:.4}, {:.4}], position: [{:.4}, {:.4}, {:.4}])",
            w.x, w.y, w.z, p.x, p.y, p.z
        )
    }
}

/// Rodrigues' formula, with a Taylor expansion below `‖w‖ = 1e-6`.
pub fn exp_so3(w: &Vec3) -> Rotation {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let (a, b) = if theta < SMALL_ANGLE {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = hat3(w);
    Rotation(Mat3::identity() + k * a + k * k * b)
}

/// Rotation vector with norm in `[0, π]`.
///
/// Near `θ = π` the axis comes from the dominant column of the symmetric
/// part, which stays well conditioned where `sin θ → 0`.
pub fn log_so3(r: &Rotation) -> Vec3 {
    let m = r.matrix();
    let cos_theta = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let skew = vee3_unchecked(m);
    let theta = skew.norm().atan2(cos_theta);

    if theta < SMALL_ANGLE {
        // θ / sin θ ≈ 1 + θ²/6
        return skew * (1.0 + theta * theta / 6.0);
    }
    if PI - theta > NEAR_PI {
        return skew * (theta / theta.sin());
    }

    // (R + Rᵀ)/2 − cos θ·I = (1 − cos θ)·aaᵀ
    let sym = (m + m.transpose()) * 0.5 - Mat3::identity() * cos_theta;
    let one_minus_cos = 1.0 - cos_theta;
    let i = (0..3)
        .max_by(|&a, &b| sym[(a, a)].total_cmp(&sym[(b, b)]))
        .unwrap_or(0);
    let ai = (sym[(i, i)] / one_minus_cos).max(0.0).sqrt();
    let mut axis = Vec3::zeros();
    for j in 0..3 {
        axis[j] = if j == i {
            ai
        } else {
            sym[(i, j)] / (one_minus_cos * ai)
        };
    }
    axis.normalize_mut();
    if axis.dot(&skew) < 0.0 {
        axis = -axis;
    }
    axis * theta
}

/// Coefficients `(sin θ/θ, (1 − cos θ)/θ², (θ − sin θ)/θ³)` with series fallbacks.
fn so3_coefficients(theta2: f64) -> (f64, f64, f64) {
    let theta = theta2.sqrt();
    if theta < SMALL_ANGLE {
        (
            1.0 - theta2 / 6.0,
            0.5 - theta2 / 24.0,
            1.0 / 6.0 - theta2 / 120.0,
        )
    } else {
        (
            theta.sin() / theta,
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    }
}

/// Left Jacobian of SO(3), the translation coupling of `exp_se3`.
pub fn left_jacobian_so3(w: &Vec3) -> Mat3 {
    let (_, b, c) = so3_coefficients(w.norm_squared());
    let k = hat3(w);
    Mat3::identity() + k * b + k * k * c
}

/// Inverse of [`left_jacobian_so3`], valid for `‖w‖ < 2π`.
pub fn left_jacobian_so3_inv(w: &Vec3) -> Mat3 {
    let theta2 = w.norm_squared();
    let theta = theta2.sqrt();
    let k = hat3(w);
    let coeff = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        let (a, b, _) = so3_coefficients(theta2);
        (1.0 - a / (2.0 * b)) / theta2
    };
    Mat3::identity() - k * 0.5 + k * k * coeff
}

pub fn exp_se3(xi: &Vec6) -> Pose {
    let w = angular(xi);
    let r = exp_so3(&w);
    let p = left_jacobian_so3(&w) * linear(xi);
    Pose::new(r, p)
}

pub fn log_se3(x: &Pose) -> Vec6 {
    let w = log_so3(&x.rotation);
    let v = left_jacobian_so3_inv(&w) * x.position;
    twist(&w, &v)
}

/// `Ad_X = [[R, 0], [p^R, R]]`.
#[allow(non_snake_case)]
pub fn adjoint_SE3(x: &Pose) -> Mat6 {
    let r = x.rotation.matrix();
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 0)
        .copy_from(&(hat3(&x.position) * r));
    m
}

/// `ad_ξ = [[ω^, 0], [v^, ω^]]`, so that `ad_ξ η = [ξ^, η^]^∨`.
pub fn ad_se3(xi: &Vec6) -> Mat6 {
    let wh = hat3(&angular(xi));
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&wh);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&hat3(&linear(xi)));
    m
}

/// `ad*_ξ = ad_ξᵀ = −[[ω^, v^], [0, ω^]]`.
pub fn coad_se3(xi: &Vec6) -> Mat6 {
    ad_se3(xi).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_abs<const R: usize, const C: usize>(
        a: &nalgebra::SMatrix<f64, R, C>,
        b: &nalgebra::SMatrix<f64, R, C>,
    ) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn hat3_examples() {
        assert_eq!(hat3(&Vec3::zeros()), Mat3::zeros());
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(hat3(&Vec3::z()), expected);
        let a = Vec3::new(0.3, -1.2, 2.0);
        let b = Vec3::new(-0.7, 0.4, 1.1);
        assert!(max_abs(&(hat3(&a) * b), &a.cross(&b)) < 1e-15);
        assert!(max_abs(&(hat3(&a) * b), &(-(hat3(&b) * a))) < 1e-15);
        let h = hat3(&a);
        assert_eq!(h, -h.transpose());
    }

    #[test]
    fn vee3_examples() {
        assert_eq!(vee3(&Mat3::zeros()).unwrap(), Vec3::zeros());
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(vee3(&hat3(&v)).unwrap(), v);
        let bad = Mat3::identity();
        assert!(matches!(vee3(&bad), Err(Error::NotSkew(_))));
    }

    #[test]
    fn hat6_spiral_twist() {
        let xi = Vec6::new(0.0, 0.0, 1.0, 2.0, 0.0, 0.2);
        let m = hat6(&xi);
        let mm = m.matrix();
        assert_eq!(mm.fixed_view::<3, 3>(0, 0).into_owned(), hat3(&Vec3::z()));
        assert_eq!(mm.fixed_view::<3, 1>(0, 3).into_owned(), Vec3::new(2.0, 0.0, 0.2));
        assert_eq!(mm.row(3).into_owned(), nalgebra::RowVector4::zeros());
        assert_eq!(vee6(&m), xi);
        assert_eq!(*hat6(&Vec6::zeros()).matrix(), Mat4::zeros());
    }

    #[test]
    fn se3_matrix_rejects_bad_structure() {
        let mut m = *hat6(&Vec6::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0)).matrix();
        assert!(Se3Matrix::from_matrix(m).is_ok());
        m[(3, 0)] = 1.0;
        assert!(Se3Matrix::from_matrix(m).is_err());
        let mut m = Mat4::zeros();
        m[(0, 0)] = 1.0;
        assert!(Se3Matrix::from_matrix(m).is_err());
    }

    #[test]
    fn exp_so3_quarter_turn() {
        let r = exp_so3(&Vec3::new(PI / 2.0, 0.0, 0.0));
        let expected = Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert!(max_abs(r.matrix(), &expected) < 1e-15);
        assert_eq!(*exp_so3(&Vec3::zeros()).matrix(), Mat3::identity());
    }

    #[test]
    fn log_so3_examples() {
        assert_eq!(log_so3(&Rotation::identity()), Vec3::zeros());
        let w = Vec3::new(0.3, -0.2, 0.9);
        assert!(max_abs(&log_so3(&exp_so3(&w)), &w) < 1e-9);
        let flip = Rotation::from_matrix(Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))).unwrap();
        let w = log_so3(&flip);
        assert!((w.x.abs() - PI).abs() < 1e-12);
        assert!(w.y.abs() < 1e-12 && w.z.abs() < 1e-12);
    }

    #[test]
    fn log_so3_near_pi_keeps_axis_sign() {
        let axis = Vec3::new(1.0, -2.0, 0.5).normalize();
        for delta in [1e-3, 1e-6, 1e-9, 0.0] {
            let w = axis * (PI - delta);
            let back = log_so3(&exp_so3(&w));
            if delta > 0.0 {
                assert!(max_abs(&back, &w) < 1e-7, "delta {delta}: {back:?}");
            } else {
                assert!((back.norm() - PI).abs() < 1e-9);
                assert!(back.normalize().cross(&axis).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn small_angle_series() {
        let w = Vec3::new(1e-8, -2e-8, 3e-9);
        assert!(max_abs(&log_so3(&exp_so3(&w)), &w) < 1e-20);
        let xi = Vec6::new(1e-8, 0.0, -1e-8, 0.4, 0.5, -0.6);
        assert!(max_abs(&log_se3(&exp_se3(&xi)), &xi) < 1e-14);
    }

    #[test]
    fn exp_se3_examples() {
        assert_eq!(exp_se3(&Vec6::zeros()), Pose::identity());
        let x = exp_se3(&Vec6::new(0.0, 0.0, 0.0, 1.0, 2.0, 3.0));
        assert_eq!(*x.rotation.matrix(), Mat3::identity());
        assert_eq!(x.position, Vec3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn adjoint_examples() {
        assert_eq!(adjoint_SE3(&Pose::identity()), Mat6::identity());
        let r = exp_so3(&Vec3::new(0.2, 0.5, -0.3));
        let ad = adjoint_SE3(&Pose::new(r, Vec3::zeros()));
        assert_eq!(ad.fixed_view::<3, 3>(0, 0).into_owned(), *r.matrix());
        assert_eq!(ad.fixed_view::<3, 3>(3, 3).into_owned(), *r.matrix());
        assert_eq!(ad.fixed_view::<3, 3>(3, 0).into_owned(), Mat3::zeros());
        assert_eq!(ad.fixed_view::<3, 3>(0, 3).into_owned(), Mat3::zeros());
    }

    #[test]
    fn ad_examples() {
        assert_eq!(ad_se3(&Vec6::zeros()), Mat6::zeros());
        let x = Vec6::new(0.1, -0.4, 0.9, 1.5, -2.0, 0.3);
        assert!((ad_se3(&x) * x).abs().max() < 1e-15);
        let c = coad_se3(&x);
        let w = hat3(&angular(&x));
        let v = hat3(&linear(&x));
        let mut expected = Mat6::zeros();
        expected.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-w));
        expected.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-v));
        expected.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-w));
        assert_eq!(c, expected);
    }

    #[test]
    fn rotation_construction() {
        let r = exp_so3(&Vec3::new(0.4, 0.1, -0.7));
        let drifted = r.matrix() * 1.0000001;
        let fixed = Rotation::from_matrix(drifted).unwrap();
        assert!(fixed.orthogonality_defect() < 1e-12);
        assert!(max_abs(fixed.matrix(), r.matrix()) < 1e-6);
        assert!(Rotation::from_matrix(Mat3::identity() * 2.0).is_err());
        assert!(Rotation::from_matrix(-Mat3::identity()).is_err());
    }

    #[test]
    fn rpy_round_trip() {
        let r = Rotation::from_rpy(-1.3, 0.2, 0.5);
        let (roll, pitch, yaw) = r.rpy();
        assert!((roll + 1.3).abs() < 1e-12);
        assert!((pitch - 0.2).abs() < 1e-12);
        assert!((yaw - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pose_group_ops() {
        let a = exp_se3(&Vec6::new(0.3, -0.1, 0.8, 1.0, -0.5, 0.25));
        let id = a * a.inverse();
        assert!(max_abs(&id.matrix(), &Mat4::identity()) < 1e-14);
        let m = a.matrix();
        assert_eq!(Pose::from_matrix(&m).unwrap(), a);
        let p = Vec3::new(0.1, 0.2, 0.3);
        let hp = m * nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
        assert!(max_abs(&a.transform_point(&p), &hp.xyz()) < 1e-15);
    }
}
