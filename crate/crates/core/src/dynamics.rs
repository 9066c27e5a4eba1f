//! Rigid-body plant: forced Euler–Poincaré twist dynamics with pose
//! reconstruction `Ẋ = Xξ^`.

use crate::error::{Error, Result};
use crate::lie::{ad_se3, coad_se3, exp_se3, Mat3, Mat6, Pose, Rotation, Vec3, Vec6};

/// Standard gravity in the world frame, z up.
pub const GRAVITY: Vec3 = Vec3::new(0.0, 0.0, -9.81);

/// Body-frame rotational inertia and mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaParams {
    inertia: Mat3,
    inertia_inv: Mat3,
    mass: f64,
}

impl InertiaParams {
    pub fn new(inertia: Mat3, mass: f64) -> Result<Self> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidInertia(format!("mass must be positive, got {mass}")));
        }
        if (inertia - inertia.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidInertia("inertia must be symmetric".into()));
        }
        let eig = inertia.symmetric_eigenvalues();
        if eig.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidInertia(format!(
                "inertia must be positive definite, eigenvalues {:?}",
                eig.as_slice()
            )));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| Error::InvalidInertia("inertia is singular".into()))?;
        Ok(Self {
            inertia,
            inertia_inv,
            mass,
        })
    }

    pub fn diagonal(ixx: f64, iyy: f64, izz: f64, mass: f64) -> Result<Self> {
        Self::new(Mat3::from_diagonal(&Vec3::new(ixx, iyy, izz)), mass)
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.inertia
    }

    pub fn inertia_inv(&self) -> &Mat3 {
        &self.inertia_inv
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Generalized inertia `J_b = blockdiag(I_b, m·I₃)`.
    pub fn spatial(&self) -> Mat6 {
        let mut j = Mat6::zeros();
        j.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.inertia);
        j.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Mat3::identity() * self.mass));
        j
    }

    pub fn spatial_inv(&self) -> Mat6 {
        let mut j = Mat6::zeros();
        j.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.inertia_inv);
        j.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&(Mat3::identity() / self.mass));
        j
    }

    /// `J_b⁻¹ w` without forming the 6×6 inverse.
    pub fn apply_inv(&self, w: &Vec6) -> Vec6 {
        let tau = self.inertia_inv * w.fixed_rows::<3>(0);
        let f = w.fixed_rows::<3>(3) / self.mass;
        Vec6::new(tau.x, tau.y, tau.z, f.x, f.y, f.z)
    }

    pub fn kinetic_energy(&self, xi: &Vec6) -> f64 {
        0.5 * xi.dot(&(self.spatial() * xi))
    }
}

/// Body-frame wrench `(τ, f)`.
pub type WrenchInput = Vec6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidBodyState {
    pub pose: Pose,
    /// Body-frame twist `(ω, v)`.
    pub twist: Vec6,
}

impl RigidBodyState {
    pub fn new(pose: Pose, twist: Vec6) -> Self {
        Self { pose, twist }
    }

    pub fn at_rest(pose: Pose) -> Self {
        Self::new(pose, Vec6::zeros())
    }
}

/// `ξ̇ = J_b⁻¹(ad*_ξ J_b ξ + u)`.
pub fn twist_rate(xi: &Vec6, u: &WrenchInput, inertia: &InertiaParams) -> Vec6 {
    let momentum = inertia.spatial() * xi;
    inertia.apply_inv(&(coad_se3(xi) * momentum + u))
}

/// [`twist_rate`] plus the body-frame gravity acceleration `(0, Rᵀg)`.
pub fn twist_rate_with_gravity(
    xi: &Vec6,
    u: &WrenchInput,
    inertia: &InertiaParams,
    rotation: &Rotation,
    gravity: &Vec3,
) -> Vec6 {
    let mut rate = twist_rate(xi, u, inertia);
    let g_body = rotation.matrix().transpose() * gravity;
    rate[3] += g_body.x;
    rate[4] += g_body.y;
    rate[5] += g_body.z;
    rate
}

fn rate(
    xi: &Vec6,
    u: &WrenchInput,
    inertia: &InertiaParams,
    pose: &Pose,
    gravity: Option<&Vec3>,
) -> Vec6 {
    match gravity {
        Some(g) => twist_rate_with_gravity(xi, u, inertia, &pose.rotation, g),
        None => twist_rate(xi, u, inertia),
    }
}

/// `Ω̇` for `X = X₀·exp(Ω)` driven by the body twist `a`:
/// `a + ½ad_Ω a + (1/12)ad_Ω² a`, truncated where a fourth-order step allows.
fn dexp_inv(omega: &Vec6, a: &Vec6) -> Vec6 {
    let ad = ad_se3(omega);
    let ad_a = ad * a;
    a + ad_a * 0.5 + ad * ad_a / 12.0
}

/// Advances the state by one step under a constant wrench.
///
/// The twist is advanced with classical RK4. The pose is advanced
/// geometrically, `X ← X·exp(ξ_avg·dt)`, where `ξ_avg` is the RK4-weighted
/// average of the stage twists mapped through `dexp⁻¹` (Munthe-Kaas form), so
/// the pose stays on SE(3) and the step is fourth-order in both components.
pub fn integrate_step(
    state: &RigidBodyState,
    u: &WrenchInput,
    inertia: &InertiaParams,
    dt: f64,
    gravity: Option<&Vec3>,
) -> Result<RigidBodyState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidDt(dt));
    }
    let x0 = state.pose;
    let xi1 = state.twist;
    let k1 = rate(&xi1, u, inertia, &x0, gravity);
    let w1 = xi1;

    let xi2 = xi1 + k1 * (0.5 * dt);
    let om2 = w1 * (0.5 * dt);
    let w2 = dexp_inv(&om2, &xi2);
    let k2 = rate(&xi2, u, inertia, &(x0 * exp_se3(&om2)), gravity);

    let xi3 = xi1 + k2 * (0.5 * dt);
    let om3 = w2 * (0.5 * dt);
    let w3 = dexp_inv(&om3, &xi3);
    let k3 = rate(&xi3, u, inertia, &(x0 * exp_se3(&om3)), gravity);

    let xi4 = xi1 + k3 * dt;
    let om4 = w3 * dt;
    let w4 = dexp_inv(&om4, &xi4);
    let k4 = rate(&xi4, u, inertia, &(x0 * exp_se3(&om4)), gravity);

    let twist = xi1 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let xi_avg = (w1 + w2 * 2.0 + w3 * 2.0 + w4) / 6.0;
    let pose = x0 * exp_se3(&(xi_avg * dt));
    Ok(RigidBodyState::new(pose, twist))
}

/// One recorded sample of a simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub state: RigidBodyState,
    /// Input applied over `[time, time + dt)`.
    pub input: WrenchInput,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_state: Option<RigidBodyState>,
}

/// Runs `steps` plant steps, querying `controller(t, state)` before each.
///
/// Controller errors abort the run and are returned unchanged.
pub fn simulate<F, E>(
    initial: RigidBodyState,
    mut controller: F,
    inertia: &InertiaParams,
    dt: f64,
    steps: usize,
    gravity: Option<&Vec3>,
) -> std::result::Result<Trajectory, E>
where
    F: FnMut(f64, &RigidBodyState) -> std::result::Result<WrenchInput, E>,
    E: From<Error>,
{
    let mut state = initial;
    let mut samples = Vec::with_capacity(steps);
    for i in 0..steps {
        let t = i as f64 * dt;
        let u = controller(t, &state)?;
        samples.push(Sample {
            time: t,
            state,
            input: u,
        });
        state = integrate_step(&state, &u, inertia, dt, gravity)?;
    }
    Ok(Trajectory {
        samples,
        final_state: Some(state),
    })
}

/// Momentum `Ad_{X⁻¹}ᵀ J_b ξ` expressed in the world frame; conserved
/// by the torque-free flow.
pub fn spatial_momentum(state: &RigidBodyState, inertia: &InertiaParams) -> Vec6 {
    crate::lie::adjoint_SE3(&state.pose.inverse()).transpose() * (inertia.spatial() * state.twist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{hat3, log_se3};

    fn body() -> InertiaParams {
        InertiaParams::diagonal(0.1, 0.15, 0.2, 1.0).unwrap()
    }

    /// `J_b ξ̇ = −[[ω^, v^], [0, ω^]] J_b ξ + u`, written out block by block.
    fn twist_rate_blocks(xi: &Vec6, u: &Vec6, j: &InertiaParams) -> Vec6 {
        let w = xi.fixed_rows::<3>(0).into_owned();
        let v = xi.fixed_rows::<3>(3).into_owned();
        let iw = j.inertia() * w;
        let mv = v * j.mass();
        let top = -(hat3(&w) * iw + hat3(&v) * mv) + u.fixed_rows::<3>(0);
        let bottom = -(hat3(&w) * mv) + u.fixed_rows::<3>(3);
        let dw = j.inertia_inv() * top;
        let dv = bottom / j.mass();
        Vec6::new(dw.x, dw.y, dw.z, dv.x, dv.y, dv.z)
    }

    #[test]
    fn rejects_bad_inertia() {
        assert!(InertiaParams::diagonal(0.1, 0.1, 0.1, 0.0).is_err());
        assert!(InertiaParams::diagonal(0.1, -0.1, 0.1, 1.0).is_err());
        let mut m = Mat3::identity();
        m[(0, 1)] = 0.1;
        assert!(InertiaParams::new(m, 1.0).is_err());
    }

    #[test]
    fn equilibrium_and_principal_spin() {
        let j = body();
        assert_eq!(twist_rate(&Vec6::zeros(), &Vec6::zeros(), &j), Vec6::zeros());
        for axis in 0..3 {
            let mut xi = Vec6::zeros();
            xi[axis] = 2.5;
            assert_eq!(twist_rate(&xi, &Vec6::zeros(), &j), Vec6::zeros());
        }
    }

    #[test]
    fn coadjoint_form_matches_block_form() {
        let j = InertiaParams::new(
            Mat3::new(0.2, 0.01, -0.02, 0.01, 0.3, 0.03, -0.02, 0.03, 0.25),
            2.5,
        )
        .unwrap();
        let cases = [
            Vec6::new(0.4, -1.2, 0.8, 1.5, -0.3, 2.2),
            Vec6::new(-3.0, 0.1, 0.0, 0.0, 4.0, -1.0),
            Vec6::new(0.0, 0.0, 1.0, 2.0, 0.0, 0.2),
        ];
        let u = Vec6::new(0.3, -0.2, 0.1, 1.0, 2.0, -3.0);
        for xi in cases {
            let a = twist_rate(&xi, &u, &j);
            let b = twist_rate_blocks(&xi, &u, &j);
            assert!((a - b).abs().max() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn gravity_term() {
        let j = body();
        let r = Rotation::identity();
        let rate = twist_rate_with_gravity(&Vec6::zeros(), &Vec6::zeros(), &j, &r, &GRAVITY);
        assert_eq!(rate, Vec6::new(0.0, 0.0, 0.0, 0.0, 0.0, -9.81));

        let xi = Vec6::new(0.3, 0.2, -0.5, 0.7, -0.1, 0.4);
        let r = crate::lie::exp_so3(&Vec3::new(0.5, -0.4, 1.2));
        let u = Vec6::new(0.1, 0.2, 0.3, 0.4, 0.5, 0.6);
        assert_eq!(
            twist_rate_with_gravity(&xi, &u, &j, &r, &Vec3::zeros()),
            twist_rate(&xi, &u, &j)
        );

        // Equilibrium input: cancel the coadjoint term and gravity.
        let g_body = r.matrix().transpose() * GRAVITY;
        let bias = coad_se3(&xi) * (j.spatial() * xi);
        let mut u_eq = -bias;
        for k in 0..3 {
            u_eq[3 + k] -= j.mass() * g_body[k];
        }
        let rate = twist_rate_with_gravity(&xi, &u_eq, &j, &r, &GRAVITY);
        assert!(rate.abs().max() < 1e-14, "{rate}");
    }

    #[test]
    fn invalid_dt() {
        let s = RigidBodyState::at_rest(Pose::identity());
        assert!(matches!(
            integrate_step(&s, &Vec6::zeros(), &body(), 0.0, None),
            Err(Error::InvalidDt(_))
        ));
        assert!(integrate_step(&s, &Vec6::zeros(), &body(), -1e-3, None).is_err());
    }

    #[test]
    fn rest_state_unchanged() {
        let s = RigidBodyState::at_rest(crate::lie::exp_se3(&Vec6::new(0.1, 0.2, 0.3, 1.0, 2.0, 3.0)));
        let next = integrate_step(&s, &Vec6::zeros(), &body(), 1e-3, None).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn constant_twist_traces_exponential_flow() {
        let xi_d = Vec6::new(0.0, 0.0, 1.0, 2.0, 0.0, 0.2);
        let j = body();
        // Input holding the twist constant: u = −ad*_ξ J ξ.
        let u = -(coad_se3(&xi_d) * (j.spatial() * xi_d));
        let dt = 1e-3;
        let traj = simulate::<_, Error>(
            RigidBodyState::new(Pose::identity(), xi_d),
            |_, _| Ok(u),
            &j,
            dt,
            3000,
            None,
        )
        .unwrap();
        for (i, s) in traj.samples.iter().enumerate().step_by(500) {
            let expected = exp_se3(&(xi_d * (i as f64 * dt)));
            let err = log_se3(&(expected.inverse() * s.state.pose)).norm();
            assert!(err < 1e-10, "step {i}: {err}");
            assert!((s.state.twist - xi_d).abs().max() < 1e-12);
        }
    }

    fn pose_after(dt: f64, t_end: f64) -> Pose {
        let j = body();
        let mut s = RigidBodyState::new(Pose::identity(), Vec6::new(1.5, -2.0, 3.0, 0.5, 1.0, -0.7));
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            s = integrate_step(&s, &Vec6::zeros(), &j, dt, Some(&GRAVITY)).unwrap();
        }
        s.pose
    }

    #[test]
    fn fourth_order_self_convergence() {
        let t_end = 1.0;
        let coarse = 0.02;
        let reference = pose_after(coarse / 200.0, t_end);
        let err = |dt: f64| log_se3(&(reference.inverse() * pose_after(dt, t_end))).norm();
        let e1 = err(coarse);
        let e2 = err(coarse / 2.0);
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "e1 {e1:e} e2 {e2:e} ratio {ratio}");
    }

    #[test]
    fn free_flight_invariants() {
        let j = InertiaParams::diagonal(0.1, 0.15, 0.2, 1.0).unwrap();
        let mut s = RigidBodyState::new(Pose::identity(), Vec6::new(1.0, 2.0, -0.5, 0.3, -0.2, 0.8));
        let e0 = j.kinetic_energy(&s.twist);
        let m0 = spatial_momentum(&s, &j);
        for _ in 0..10_000 {
            s = integrate_step(&s, &Vec6::zeros(), &j, 1e-3, None).unwrap();
        }
        let e1 = j.kinetic_energy(&s.twist);
        assert!(((e1 - e0) / e0).abs() < 1e-6);
        assert!((spatial_momentum(&s, &j) - m0).abs().max() < 1e-6);
        assert!(s.pose.rotation.orthogonality_defect() < 1e-9);
    }

    #[test]
    fn controller_error_propagates() {
        let res = simulate::<_, Error>(
            RigidBodyState::at_rest(Pose::identity()),
            |t, _| {
                if t > 0.0015 {
                    Err(Error::InvalidConfig("stop".into()))
                } else {
                    Ok(Vec6::zeros())
                }
            },
            &body(),
            1e-3,
            10,
            None,
        );
        assert!(matches!(res, Err(Error::InvalidConfig(_))));
    }
}
