//! Receding-horizon error-state controller.

use nalgebra::{DMatrix, DVector};

use super::error_state::{tracking_error, TrackingError};
use super::horizon::{build_qp, warm_start, HorizonData, HorizonLayout, InputConstraints, OutputMap};
use super::model::{build_ct_system_with_input, discretize, linearize_twist_dynamics, Discretization, Mat12, Variant, Vec12};
use super::riccati::{riccati_terminal, solve_dare, TerminalMode};
use crate::dynamics::{InertiaParams, RigidBodyState};
use crate::error::{Error, Result};
use crate::lie::{Pose, Vec3, Vec6};
use crate::qp::{QpProblem, QpSettings, QpSolution, QpSolver, QpStatus};

/// Desired motion as a function of time.
pub trait Reference: Send + Sync {
    fn pose(&self, t: f64) -> Pose;
    /// Body twist of the reference. At a discontinuity this is the value on
    /// the interval ending at `t`.
    fn twist(&self, t: f64) -> Vec6;
}

impl<R: Reference + ?Sized> Reference for &R {
    fn pose(&self, t: f64) -> Pose {
        (**self).pose(t)
    }
    fn twist(&self, t: f64) -> Vec6 {
        (**self).twist(t)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Controller sample time (s).
    pub dt: f64,
    pub q: Mat12,
    pub r: DMatrix<f64>,
    /// Terminal weight for [`TerminalMode::Fixed`], and the seed of
    /// [`TerminalMode::OneStep`].
    pub p_terminal: Mat12,
    /// `‖u‖∞` bound for wrench inputs. Ignored when constraints are passed
    /// explicitly.
    pub input_bound: Option<f64>,
    pub variant: Variant,
    pub terminal_mode: TerminalMode,
    pub discretization: Discretization,
    /// Restart the full Riccati iteration from the previous cycle's solution
    /// instead of from `Q`.
    pub dare_warm_start: bool,
    pub qp: QpSettings,
}

impl MpcConfig {
    /// Weights used for the spiral tracking experiment.
    pub fn spiral_defaults() -> Self {
        let mut q = Mat12::identity();
        for i in 0..6 {
            q[(i, i)] = 10.0;
        }
        Self {
            horizon: 12,
            dt: 0.05,
            q,
            r: DMatrix::identity(6, 6) * 0.02,
            p_terminal: q,
            input_bound: Some(50.0),
            variant: Variant::Proposed,
            terminal_mode: TerminalMode::FullDare,
            discretization: Discretization::Euler,
            dare_warm_start: false,
            qp: QpSettings::default(),
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.r.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidConfig("horizon must be at least 1".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidDt(self.dt));
        }
        check_psd("Q", &self.q)?;
        check_psd("P", &self.p_terminal)?;
        if !self.r.is_square() {
            return Err(Error::DimensionMismatch(format!("R is {:?}", self.r.shape())));
        }
        if (&self.r - self.r.transpose()).amax() > 1e-12 {
            return Err(Error::InvalidConfig("R is not symmetric".into()));
        }
        if self.r.clone().cholesky().is_none() {
            return Err(Error::InvalidConfig("R is not positive definite".into()));
        }
        if let Some(b) = self.input_bound {
            if !(b > 0.0) {
                return Err(Error::InvalidConfig(format!("input bound {b} must be positive")));
            }
        }
        Ok(())
    }
}

fn check_psd(name: &str, m: &Mat12) -> Result<()> {
    if (m - m.transpose()).amax() > 1e-12 {
        return Err(Error::InvalidConfig(format!("{name} is not symmetric")));
    }
    if m.symmetric_eigenvalues().min() < -1e-10 {
        return Err(Error::InvalidConfig(format!("{name} is not positive semidefinite")));
    }
    Ok(())
}

/// Per-controller state carried between cycles.
#[derive(Clone, Debug)]
pub struct ControllerMemory {
    /// Terminal weight of the last cycle.
    pub terminal: Option<Mat12>,
    last: Option<(QpSolution, HorizonLayout)>,
    solver: QpSolver,
}

impl ControllerMemory {
    pub fn new(settings: QpSettings) -> Self {
        Self {
            terminal: None,
            last: None,
            solver: QpSolver::new(settings),
        }
    }

    pub fn reset(&mut self) {
        self.terminal = None;
        self.last = None;
    }
}

/// How inputs enter the body and what limits them, for one control cycle.
#[derive(Clone, Debug, PartialEq)]
pub struct PlantModel {
    /// `6 × n_u` map from inputs to body wrench `(τ, f)`.
    pub input_map: DMatrix<f64>,
    /// Body-frame gravity `Rᵀg` frozen over the horizon.
    pub gravity_body: Option<Vec3>,
    pub constraints: InputConstraints,
}

impl PlantModel {
    pub fn wrench(cfg: &MpcConfig) -> Self {
        let n_u = 6;
        Self {
            input_map: DMatrix::identity(n_u, n_u),
            gravity_body: None,
            constraints: match cfg.input_bound {
                Some(b) => InputConstraints::boxed(n_u, b),
                None => InputConstraints::none(n_u),
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct MpcStep {
    /// First input of the plan.
    pub input: DVector<f64>,
    pub error: TrackingError,
    /// `x₁ … x_N`.
    pub predicted_states: Vec<Vec12>,
    /// `u₀ … u_{N−1}`.
    pub predicted_inputs: Vec<DVector<f64>>,
    pub solution: QpSolution,
    /// The QP that was solved.
    pub problem: QpProblem,
    /// Plan cost including the constant dropped from the QP.
    pub tracking_cost: f64,
    pub terminal: Mat12,
}

fn to_dmatrix(m: &Mat12) -> DMatrix<f64> {
    DMatrix::from_column_slice(12, 12, m.as_slice())
}

/// One control cycle: error at `t`, linearization at the measured twist,
/// QP over the horizon, first input.
pub fn solve_mpc(
    state: &RigidBodyState,
    reference: &dyn Reference,
    t: f64,
    cfg: &MpcConfig,
    inertia: &InertiaParams,
    plant: &PlantModel,
    memory: &mut ControllerMemory,
) -> Result<MpcStep> {
    let n_u = plant.input_map.ncols();
    if plant.input_map.nrows() != 6 || cfg.r.shape() != (n_u, n_u) {
        return Err(Error::DimensionMismatch(format!(
            "input map {:?} with R {:?}",
            plant.input_map.shape(),
            cfg.r.shape()
        )));
    }
    let error = tracking_error(&reference.pose(t), &state.pose);
    let mut x0 = Vec12::zeros();
    x0.fixed_rows_mut::<6>(0).copy_from(&error.psi);
    x0.fixed_rows_mut::<6>(6).copy_from(&state.twist);

    let lin = linearize_twist_dynamics(&state.twist, inertia);
    let mut dynamics = Vec::with_capacity(cfg.horizon);
    let mut outputs = Vec::with_capacity(cfg.horizon);
    for k in 0..cfg.horizon {
        let t_next = t + (k + 1) as f64 * cfg.dt;
        let xi_d = reference.twist(t_next);
        let mut ct = build_ct_system_with_input(&xi_d, &lin, inertia, &plant.input_map, cfg.variant);
        if let Some(g) = plant.gravity_body {
            for i in 0..3 {
                ct.h[9 + i] += g[i];
            }
        }
        outputs.push(OutputMap { c: ct.c, d: ct.d });
        dynamics.push(discretize(&ct, cfg.dt, cfg.discretization)?);
    }

    let last = &dynamics[cfg.horizon - 1];
    let previous = memory.terminal.unwrap_or(cfg.p_terminal);
    let terminal_d = match cfg.terminal_mode {
        TerminalMode::FullDare if cfg.dare_warm_start && memory.terminal.is_some() => {
            warm_dare(&to_dmatrix(&last.a), &last.b, &to_dmatrix(&previous), &to_dmatrix(&cfg.q), &cfg.r)?
        }
        mode => riccati_terminal(
            &to_dmatrix(&last.a),
            &last.b,
            &to_dmatrix(&cfg.q),
            &cfg.r,
            mode,
            Some(&to_dmatrix(&previous)),
        )?,
    };
    let terminal = Mat12::from_column_slice(terminal_d.as_slice());

    let data = HorizonData {
        x0,
        dynamics,
        outputs,
        input_constraints: vec![plant.constraints.clone()],
    };
    let qp = build_qp(&data, &cfg.q, &cfg.r, &terminal)?;

    let ws = match &memory.last {
        Some((prev, layout)) if *layout == qp.layout => Some(warm_start(prev, layout)?),
        _ => None,
    };
    memory.solver.settings_mut().warm_start = ws;
    let solution = memory.solver.solve(&qp.problem)?;
    if solution.status != QpStatus::Solved {
        memory.last = None;
        return Err(Error::QpFailed {
            status: solution.status,
            iterations: solution.iterations,
        });
    }

    let predicted_states = (1..=cfg.horizon).map(|k| qp.layout.state(&solution.primal, k)).collect();
    let predicted_inputs: Vec<DVector<f64>> =
        (0..cfg.horizon).map(|k| qp.layout.input(&solution.primal, k)).collect();
    memory.terminal = Some(terminal);
    memory.last = Some((solution.clone(), qp.layout.clone()));
    Ok(MpcStep {
        input: predicted_inputs[0].clone(),
        error,
        predicted_states,
        predicted_inputs,
        tracking_cost: solution.objective + qp.constant,
        solution,
        problem: qp.problem,
        terminal,
    })
}

fn warm_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    start: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    use super::riccati::{riccati_step, DARE_MAX_ITER, DARE_TOL};
    let mut p = start.clone();
    for _ in 0..DARE_MAX_ITER {
        let next = riccati_step(a, b, q, r, &p)?;
        let step = (&next - &p).amax();
        p = next;
        if step < DARE_TOL {
            return Ok(p);
        }
        if !step.is_finite() {
            break;
        }
    }
    Ok(solve_dare(a, b, q, r)?.p)
}

/// Wrench-input controller for a free rigid body.
pub fn mpc_step(
    state: &RigidBodyState,
    reference: &dyn Reference,
    t: f64,
    cfg: &MpcConfig,
    inertia: &InertiaParams,
    memory: &mut ControllerMemory,
) -> Result<(Vec6, MpcStep)> {
    let plant = PlantModel::wrench(cfg);
    let step = solve_mpc(state, reference, t, cfg, inertia, &plant, memory)?;
    let u = Vec6::from_column_slice(step.input.as_slice());
    Ok((u, step))
}

/// Bundles configuration, body parameters and cycle-to-cycle memory.
#[derive(Clone, Debug)]
pub struct ErrorStateMpc {
    pub config: MpcConfig,
    pub inertia: InertiaParams,
    pub memory: ControllerMemory,
}

impl ErrorStateMpc {
    pub fn new(config: MpcConfig, inertia: InertiaParams) -> Result<Self> {
        config.validate()?;
        let memory = ControllerMemory::new(config.qp.clone());
        Ok(Self {
            config,
            inertia,
            memory,
        })
    }

    pub fn step(&mut self, t: f64, state: &RigidBodyState, reference: &dyn Reference) -> Result<(Vec6, MpcStep)> {
        mpc_step(state, reference, t, &self.config, &self.inertia, &mut self.memory)
    }
}
