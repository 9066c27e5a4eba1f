//! Stance-phase quadruped as a single rigid body driven by ground reaction
//! forces (GRFs). Feet stay planted in the world; their body-frame lever arms
//! are re-sampled once per control cycle.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{InertiaParams, RigidBodyState, GRAVITY};
use crate::error::{Error, Result};
use crate::lie::{hat3, Pose, Rotation, Vec3, Vec6};
use crate::mpc::{solve_mpc, ControllerMemory, InputConstraints, MpcConfig, MpcStep, PlantModel, Reference, STATE_DIM};

#[derive(Clone, Debug, PartialEq)]
pub struct ContactConfig {
    /// Lever arms from the center of mass to each foot, body frame (m).
    pub feet: Vec<Vec3>,
    pub mu: f64,
    /// Bounds on the world-frame normal force of each foot (N).
    pub f_min: f64,
    pub f_max: f64,
}

impl ContactConfig {
    pub fn new(feet: Vec<Vec3>, mu: f64, f_min: f64, f_max: f64) -> Result<Self> {
        let cfg = Self { feet, mu, f_min, f_max };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Four feet on a 0.38 m × 0.22 m rectangle, 0.29 m below the body.
    /// `f_max` allows each foot to carry four times its share of the weight.
    pub fn mini_cheetah(mass: f64) -> Self {
        let feet = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
            .iter()
            .map(|(sx, sy)| Vec3::new(0.19 * sx, 0.11 * sy, -0.29))
            .collect::<Vec<_>>();
        let n = feet.len() as f64;
        Self {
            feet,
            mu: 0.6,
            f_min: 1.0,
            f_max: 4.0 * mass * GRAVITY.norm() / n,
        }
    }

    pub fn num_feet(&self) -> usize {
        self.feet.len()
    }

    pub fn num_inputs(&self) -> usize {
        3 * self.feet.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.feet.is_empty() {
            return Err(Error::InvalidConfig("at least one foot is required".into()));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("friction coefficient {} must be non-negative", self.mu)));
        }
        if !(self.f_min > 0.0) || !(self.f_max >= self.f_min) {
            return Err(Error::InvalidConfig(format!(
                "normal force bounds must satisfy 0 < f_min ≤ f_max, got [{}, {}]",
                self.f_min, self.f_max
            )));
        }
        if self.feet.iter().any(|r| !r.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidConfig("foot positions must be finite".into()));
        }
        Ok(())
    }
}

/// Foot positions planted in the world frame.
#[derive(Clone, Debug, PartialEq)]
pub struct StanceFeet {
    pub world: Vec<Vec3>,
}

impl StanceFeet {
    /// Plants the feet of `cfg` where they are when the body is at `pose`.
    pub fn plant(pose: &Pose, cfg: &ContactConfig) -> Self {
        Self {
            world: cfg.feet.iter().map(|r| pose.transform_point(r)).collect(),
        }
    }

    /// Copy of `cfg` with lever arms taken from the body at `pose`.
    pub fn contact_at(&self, pose: &Pose, cfg: &ContactConfig) -> ContactConfig {
        let rt = pose.rotation.matrix().transpose();
        ContactConfig {
            feet: self.world.iter().map(|p| rt * (p - pose.position)).collect(),
            ..cfg.clone()
        }
    }
}

/// `6 × 3n` map from stacked body-frame foot forces to body wrench `(τ, f)`.
pub fn grf_wrench_map(cfg: &ContactConfig) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(6, cfg.num_inputs());
    for (k, r) in cfg.feet.iter().enumerate() {
        g.view_mut((0, 3 * k), (3, 3)).copy_from(&hat3(r));
        g.view_mut((3, 3 * k), (3, 3)).copy_from(&nalgebra::Matrix3::<f64>::identity());
    }
    g
}

/// Input matrix of the stacked error-state model: zero on the error rows,
/// `I_b⁻¹ r_k^` on the angular rows and `I/m` on the linear rows.
pub fn grf_input_matrix(cfg: &ContactConfig, inertia: &InertiaParams) -> DMatrix<f64> {
    let n_u = cfg.num_inputs();
    let mut b = DMatrix::zeros(STATE_DIM, n_u);
    for (k, r) in cfg.feet.iter().enumerate() {
        b.view_mut((6, 3 * k), (3, 3)).copy_from(&(inertia.inertia_inv() * hat3(r)));
        b.view_mut((9, 3 * k), (3, 3))
            .copy_from(&(nalgebra::Matrix3::<f64>::identity() / inertia.mass()));
    }
    b
}

/// Net body wrench of the foot forces.
pub fn grf_to_wrench(cfg: &ContactConfig, forces: &DVector<f64>) -> Result<Vec6> {
    if forces.len() != cfg.num_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "{} force entries for {} feet",
            forces.len(),
            cfg.num_feet()
        )));
    }
    let mut w = Vec6::zeros();
    for (k, r) in cfg.feet.iter().enumerate() {
        let f = Vec3::new(forces[3 * k], forces[3 * k + 1], forces[3 * k + 2]);
        let tau = r.cross(&f);
        for i in 0..3 {
            w[i] += tau[i];
            w[3 + i] += f[i];
        }
    }
    Ok(w)
}

/// Friction pyramid and normal-force bounds in the world frame, expressed
/// over body-frame forces through the frozen rotation. Six rows per foot:
/// `f_x − μf_z ≤ 0`, `f_x + μf_z ≥ 0`, the same for `y`, `f_z ≥ f_min`,
/// `f_z ≤ f_max`.
pub fn friction_constraints(rotation: &Rotation, cfg: &ContactConfig) -> InputConstraints {
    let n = cfg.num_feet();
    let r = rotation.matrix();
    let (ex, ey, ez) = (r.row(0), r.row(1), r.row(2));
    let mut matrix = DMatrix::zeros(6 * n, 3 * n);
    let mut lower = DVector::zeros(6 * n);
    let mut upper = DVector::zeros(6 * n);
    let inf = f64::INFINITY;
    for k in 0..n {
        let rows = [
            (ex - ez * cfg.mu, -inf, 0.0),
            (ex + ez * cfg.mu, 0.0, inf),
            (ey - ez * cfg.mu, -inf, 0.0),
            (ey + ez * cfg.mu, 0.0, inf),
            (ez.into_owned(), cfg.f_min, inf),
            (ez.into_owned(), -inf, cfg.f_max),
        ];
        for (i, (row, lo, hi)) in rows.into_iter().enumerate() {
            let ri = 6 * k + i;
            for c in 0..3 {
                matrix[(ri, 3 * k + c)] = row[c];
            }
            lower[ri] = lo;
            upper[ri] = hi;
        }
    }
    InputConstraints { matrix, lower, upper }
}

/// Largest violation of the friction and normal-force limits, evaluated
/// directly on the world-frame forces. Zero when all hold.
pub fn friction_violation(rotation: &Rotation, cfg: &ContactConfig, forces: &DVector<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..cfg.num_feet() {
        let fb = Vec3::new(forces[3 * k], forces[3 * k + 1], forces[3 * k + 2]);
        let fw = rotation.matrix() * fb;
        worst = worst
            .max(fw.x.abs() - cfg.mu * fw.z)
            .max(fw.y.abs() - cfg.mu * fw.z)
            .max(cfg.f_min - fw.z)
            .max(fw.z - cfg.f_max);
    }
    worst
}

/// Quadruped defaults: horizon 4 at 40 Hz with a one-step Riccati update.
pub fn quadruped_mpc_defaults(n_feet: usize) -> MpcConfig {
    let mut q = crate::mpc::Mat12::zeros();
    let diag = [200.0, 200.0, 200.0, 200.0, 200.0, 200.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    for (i, w) in diag.iter().enumerate() {
        q[(i, i)] = *w;
    }
    MpcConfig {
        horizon: 4,
        dt: 0.025,
        q,
        r: DMatrix::identity(3 * n_feet, 3 * n_feet) * 1e-4,
        p_terminal: q,
        input_bound: None,
        variant: crate::mpc::Variant::Proposed,
        terminal_mode: crate::mpc::TerminalMode::OneStep,
        discretization: crate::mpc::Discretization::Euler,
        dare_warm_start: false,
        qp: crate::qp::QpSettings::default(),
    }
}

/// Plant description for one cycle with rotation and lever arms frozen at
/// their current values.
pub fn stance_plant(rotation: &Rotation, cfg: &ContactConfig) -> PlantModel {
    PlantModel {
        input_map: grf_wrench_map(cfg),
        gravity_body: Some(rotation.matrix().transpose() * GRAVITY),
        constraints: friction_constraints(rotation, cfg),
    }
}

/// One stance control cycle; returns the first-step foot forces.
pub fn build_quadruped_mpc_step(
    state: &RigidBodyState,
    reference: &dyn Reference,
    t: f64,
    cfg: &MpcConfig,
    contact: &ContactConfig,
    inertia: &InertiaParams,
    memory: &mut ControllerMemory,
) -> Result<(DVector<f64>, MpcStep)> {
    contact.validate()?;
    let plant = stance_plant(&state.pose.rotation, contact);
    let step = solve_mpc(state, reference, t, cfg, inertia, &plant, memory)?;
    Ok((step.input.clone(), step))
}
