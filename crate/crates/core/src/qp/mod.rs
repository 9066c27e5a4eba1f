//! Convex QP solver for `min ½zᵀPz + qᵀz  s.t.  l ≤ Az ≤ u`.
//!
//! Operator splitting (ADMM) over a cached sparse quasi-definite KKT
//! factorization, with Ruiz equilibration, adaptive penalty, infeasibility
//! detection and an optional active-set polishing pass.

mod admm;
pub mod csc;
pub mod dump;
pub mod ldl;

pub use admm::QpSolver;
pub use csc::CscMatrix;

use crate::error::{Error, Result};

/// Bounds at or beyond this magnitude are treated as infinite.
pub const QP_INFINITY: f64 = 1e30;

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    /// Full symmetric cost matrix (both triangles stored).
    pub p: CscMatrix,
    pub q: Vec<f64>,
    pub a: CscMatrix,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl QpProblem {
    pub fn new(p: CscMatrix, q: Vec<f64>, a: CscMatrix, l: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let prob = Self { p, q, a, l, u };
        prob.validate()?;
        Ok(prob)
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q.len();
        let m = self.l.len();
        if self.p.nrows != n || self.p.ncols != n {
            return Err(Error::DimensionMismatch(format!(
                "P is {}x{}, expected {n}x{n}",
                self.p.nrows, self.p.ncols
            )));
        }
        if self.a.nrows != m || self.a.ncols != n || self.u.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{} with |l| = {m}, |u| = {}, expected {m}x{n}",
                self.a.nrows,
                self.a.ncols,
                self.u.len()
            )));
        }
        let asym = self.p.asymmetry();
        if asym > 1e-12 {
            return Err(Error::InvalidConfig(format!("P not symmetric (defect {asym:.3e})")));
        }
        if let Some(i) = (0..m).find(|&i| self.l[i] > self.u[i] || self.l[i].is_nan() || self.u[i].is_nan()) {
            return Err(Error::InvalidConfig(format!(
                "bounds violate l <= u at row {i}: {} > {}",
                self.l[i], self.u[i]
            )));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; x.len()];
        self.p.mul_vec(x, &mut px);
        0.5 * dot(x, &px) + dot(&self.q, x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIter,
    PrimalInfeasible,
    DualInfeasible,
}

/// Primal/dual starting point.
#[derive(Clone, Debug, PartialEq)]
pub struct WarmStart {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub eps_dual_inf: f64,
    /// Initial penalty; rows with `l = u` use `1e3·rho`.
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation parameter.
    pub alpha: f64,
    pub max_iter: usize,
    pub adaptive_rho: bool,
    pub adaptive_rho_interval: usize,
    pub adaptive_rho_tolerance: f64,
    pub scaling_iters: usize,
    pub polish: bool,
    pub polish_delta: f64,
    pub polish_refine_iters: usize,
    pub warm_start: Option<WarmStart>,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            eps_prim_inf: 1e-6,
            eps_dual_inf: 1e-6,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            max_iter: 20_000,
            adaptive_rho: true,
            adaptive_rho_interval: 50,
            adaptive_rho_tolerance: 5.0,
            scaling_iters: 10,
            polish: true,
            polish_delta: 1e-6,
            polish_refine_iters: 3,
            warm_start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    /// Minimizer `z*`.
    pub primal: Vec<f64>,
    /// Multipliers `y*`; negative on active lower bounds, positive on upper.
    pub dual: Vec<f64>,
    pub status: QpStatus,
    /// `‖Az − Π(Az)‖∞` on the unscaled problem.
    pub prim_res: f64,
    /// `‖Pz + q + Aᵀy‖∞` on the unscaled problem.
    pub dual_res: f64,
    pub iterations: usize,
    pub objective: f64,
    pub polished: bool,
}

impl QpSolution {
    pub fn is_solved(&self) -> bool {
        self.status == QpStatus::Solved
    }
}

/// One-shot solve with a fresh solver instance.
pub fn solve(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    QpSolver::new(settings.clone()).solve(problem)
}

/// Residuals of `(x, y)` on the unscaled problem, projecting `Ax` onto the
/// bounds for the primal part.
pub fn kkt_residuals(problem: &QpProblem, x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = problem.num_vars();
    let m = problem.num_constraints();
    let mut ax = vec![0.0; m];
    problem.a.mul_vec(x, &mut ax);
    let prim = (0..m)
        .map(|i| (ax[i] - ax[i].clamp(problem.l[i], problem.u[i])).abs())
        .fold(0.0, f64::max);
    let mut px = vec![0.0; n];
    problem.p.mul_vec(x, &mut px);
    let mut aty = vec![0.0; n];
    problem.a.mul_t_vec(y, &mut aty);
    let dual = (0..n)
        .map(|j| (px[j] + problem.q[j] + aty[j]).abs())
        .fold(0.0, f64::max);
    (prim, dual)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
