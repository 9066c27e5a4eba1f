//! Sparse QP for the finite-horizon tracking problem.
//!
//! Decision vector `z = (x₁, …, x_N, u₀, …, u_{N−1})`. Rows of `A` are the
//! dynamics equalities `x_{k+1} − A_k x_k − B_k u_k = h_k` (stage-major),
//! followed by the input constraint rows of each stage.

use nalgebra::{DMatrix, DVector};

use super::model::{DiscreteModel, Mat12, Vec12, STATE_DIM};
use crate::error::{Error, Result};
use crate::qp::{CscMatrix, QpProblem, QpSolution, WarmStart};

/// Linear input constraints `lower ≤ G u ≤ upper` for one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct InputConstraints {
    pub matrix: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

impl InputConstraints {
    pub fn none(n_u: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(0, n_u),
            lower: DVector::zeros(0),
            upper: DVector::zeros(0),
        }
    }

    /// `‖u‖∞ ≤ bound`.
    pub fn boxed(n_u: usize, bound: f64) -> Self {
        Self {
            matrix: DMatrix::identity(n_u, n_u),
            lower: DVector::from_element(n_u, -bound),
            upper: DVector::from_element(n_u, bound),
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let rows = self.matrix.nrows();
        if self.lower.len() != rows || self.upper.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "input constraints: {rows} rows but bounds of length {} and {}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        if (0..rows).any(|i| self.lower[i] > self.upper[i]) {
            return Err(Error::InvalidConfig("input constraint lower bound above upper bound".into()));
        }
        Ok(())
    }

    /// Whether `u` satisfies every row within `tol`.
    pub fn satisfied_by(&self, u: &DVector<f64>, tol: f64) -> bool {
        let g = &self.matrix * u;
        (0..g.len()).all(|i| g[i] >= self.lower[i] - tol && g[i] <= self.upper[i] + tol)
    }
}

/// Output map `y_k = C_k x_k − d_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputMap {
    pub c: Mat12,
    pub d: Vec12,
}

/// Everything the QP needs about one horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonData {
    pub x0: Vec12,
    /// Stage dynamics for `k = 0..N−1`.
    pub dynamics: Vec<DiscreteModel>,
    /// Output maps for `x_k`, `k = 1..N`.
    pub outputs: Vec<OutputMap>,
    /// One entry shared by all stages, or one per stage.
    pub input_constraints: Vec<InputConstraints>,
}

impl HorizonData {
    fn constraints_at(&self, k: usize) -> &InputConstraints {
        if self.input_constraints.len() == 1 {
            &self.input_constraints[0]
        } else {
            &self.input_constraints[k]
        }
    }
}

/// Index bookkeeping for the stacked decision and constraint vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HorizonLayout {
    pub horizon: usize,
    pub n_u: usize,
    /// Constraint rows of each stage.
    pub stage_rows: Vec<usize>,
}

impl HorizonLayout {
    pub fn num_vars(&self) -> usize {
        self.horizon * (STATE_DIM + self.n_u)
    }

    pub fn num_constraints(&self) -> usize {
        self.horizon * STATE_DIM + self.stage_rows.iter().sum::<usize>()
    }

    /// Offset of `x_k`, `k = 1..=N`.
    pub fn x_offset(&self, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.horizon);
        (k - 1) * STATE_DIM
    }

    /// Offset of `u_k`, `k = 0..N`.
    pub fn u_offset(&self, k: usize) -> usize {
        self.horizon * STATE_DIM + k * self.n_u
    }

    fn ineq_offset(&self, k: usize) -> usize {
        self.horizon * STATE_DIM + self.stage_rows[..k].iter().sum::<usize>()
    }

    pub fn state(&self, z: &[f64], k: usize) -> Vec12 {
        Vec12::from_column_slice(&z[self.x_offset(k)..self.x_offset(k) + STATE_DIM])
    }

    pub fn input(&self, z: &[f64], k: usize) -> DVector<f64> {
        DVector::from_column_slice(&z[self.u_offset(k)..self.u_offset(k) + self.n_u])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HorizonQp {
    pub problem: QpProblem,
    pub layout: HorizonLayout,
    /// `Σ d_kᵀQd_k + d_NᵀPd_N`, dropped from the QP objective. The tracking
    /// cost of a plan is `objective + constant`.
    pub constant: f64,
}

/// Assembles `min Σ_{k=1}^{N−1} y_kᵀQy_k + Σ_{k=0}^{N−1} u_kᵀRu_k + y_NᵀPy_N`
/// as `½zᵀPz + qᵀz` subject to the stacked dynamics and input constraints.
pub fn build_qp(
    data: &HorizonData,
    q: &Mat12,
    r: &DMatrix<f64>,
    p_terminal: &Mat12,
) -> Result<HorizonQp> {
    let horizon = data.dynamics.len();
    if horizon == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let n_u = data.dynamics[0].b.ncols();
    if data.outputs.len() != horizon {
        return Err(Error::DimensionMismatch(format!(
            "{} output maps for horizon {horizon}",
            data.outputs.len()
        )));
    }
    if data.input_constraints.len() != 1 && data.input_constraints.len() != horizon {
        return Err(Error::DimensionMismatch(format!(
            "{} input constraint blocks for horizon {horizon}",
            data.input_constraints.len()
        )));
    }
    if r.shape() != (n_u, n_u) {
        return Err(Error::DimensionMismatch(format!("R is {:?}, expected {n_u}x{n_u}", r.shape())));
    }
    for (k, dm) in data.dynamics.iter().enumerate() {
        if dm.b.shape() != (STATE_DIM, n_u) {
            return Err(Error::DimensionMismatch(format!("B_{k} is {:?}", dm.b.shape())));
        }
    }
    for c in &data.input_constraints {
        c.validate()?;
        if c.num_inputs() != n_u {
            return Err(Error::DimensionMismatch(format!(
                "input constraints over {} inputs, model has {n_u}",
                c.num_inputs()
            )));
        }
    }

    let layout = HorizonLayout {
        horizon,
        n_u,
        stage_rows: (0..horizon).map(|k| data.constraints_at(k).num_rows()).collect(),
    };
    let n = layout.num_vars();
    let m = layout.num_constraints();

    let mut p_trip = Vec::new();
    let mut qv = vec![0.0; n];
    let mut constant = 0.0;
    for k in 1..=horizon {
        let out = &data.outputs[k - 1];
        let w = if k == horizon { p_terminal } else { q };
        let hess = out.c.transpose() * w * out.c * 2.0;
        let lin = -(out.c.transpose() * w * out.d * 2.0);
        constant += out.d.dot(&(w * out.d));
        let off = layout.x_offset(k);
        for c in 0..STATE_DIM {
            for rr in 0..STATE_DIM {
                if hess[(rr, c)] != 0.0 {
                    p_trip.push((off + rr, off + c, hess[(rr, c)]));
                }
            }
            qv[off + c] = lin[c];
        }
    }
    let r2 = r * 2.0;
    for k in 0..horizon {
        let off = layout.u_offset(k);
        for c in 0..n_u {
            for rr in 0..n_u {
                if r2[(rr, c)] != 0.0 {
                    p_trip.push((off + rr, off + c, r2[(rr, c)]));
                }
            }
        }
    }
    let p = CscMatrix::from_triplets(n, n, &p_trip);

    let mut a_trip = Vec::new();
    let mut l = vec![0.0; m];
    let mut u = vec![0.0; m];
    for (k, dm) in data.dynamics.iter().enumerate() {
        let row = k * STATE_DIM;
        let x_next = layout.x_offset(k + 1);
        for i in 0..STATE_DIM {
            a_trip.push((row + i, x_next + i, 1.0));
        }
        let rhs = if k == 0 {
            dm.a * data.x0 + dm.h
        } else {
            let x_prev = layout.x_offset(k);
            for c in 0..STATE_DIM {
                for i in 0..STATE_DIM {
                    if dm.a[(i, c)] != 0.0 {
                        a_trip.push((row + i, x_prev + c, -dm.a[(i, c)]));
                    }
                }
            }
            dm.h
        };
        let u_off = layout.u_offset(k);
        for c in 0..n_u {
            for i in 0..STATE_DIM {
                if dm.b[(i, c)] != 0.0 {
                    a_trip.push((row + i, u_off + c, -dm.b[(i, c)]));
                }
            }
        }
        for i in 0..STATE_DIM {
            l[row + i] = rhs[i];
            u[row + i] = rhs[i];
        }
    }
    for k in 0..horizon {
        let cons = data.constraints_at(k);
        let row = layout.ineq_offset(k);
        let u_off = layout.u_offset(k);
        for i in 0..cons.num_rows() {
            for c in 0..n_u {
                let v = cons.matrix[(i, c)];
                if v != 0.0 {
                    a_trip.push((row + i, u_off + c, v));
                }
            }
            l[row + i] = cons.lower[i];
            u[row + i] = cons.upper[i];
        }
    }
    let a = CscMatrix::from_triplets(m, n, &a_trip);
    let problem = QpProblem::new(p, qv, a, l, u)?;
    Ok(HorizonQp {
        problem,
        layout,
        constant,
    })
}

/// Shifts a previous horizon solution one stage forward, repeating the last
/// stage, as a starting point for the next solve.
pub fn warm_start(prev: &QpSolution, layout: &HorizonLayout) -> Result<WarmStart> {
    if prev.primal.len() != layout.num_vars() || prev.dual.len() != layout.num_constraints() {
        return Err(Error::DimensionMismatch(format!(
            "previous solution has |z| = {}, |y| = {}; layout expects {} and {}",
            prev.primal.len(),
            prev.dual.len(),
            layout.num_vars(),
            layout.num_constraints()
        )));
    }
    let n_stage = layout.horizon;
    let shift_blocks = |src: &[f64], offset: usize, width: usize, out: &mut [f64]| {
        for k in 0..n_stage {
            let from = (k + 1).min(n_stage - 1);
            let dst = offset + k * width;
            let s = offset + from * width;
            out[dst..dst + width].copy_from_slice(&src[s..s + width]);
        }
    };
    let mut x = vec![0.0; prev.primal.len()];
    shift_blocks(&prev.primal, 0, STATE_DIM, &mut x);
    shift_blocks(&prev.primal, layout.u_offset(0), layout.n_u, &mut x);

    let mut y = vec![0.0; prev.dual.len()];
    shift_blocks(&prev.dual, 0, STATE_DIM, &mut y);
    let uniform = layout.stage_rows.windows(2).all(|w| w[0] == w[1]);
    if uniform {
        let rows = layout.stage_rows.first().copied().unwrap_or(0);
        if rows > 0 {
            shift_blocks(&prev.dual, layout.ineq_offset(0), rows, &mut y);
        }
    }
    Ok(WarmStart { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::InertiaParams;
    use crate::lie::Vec6;
    use crate::mpc::model::{build_ct_system, discretize, output_map, Discretization, Variant};
    use crate::qp::{solve, QpSettings, QpStatus};

    fn body() -> InertiaParams {
        InertiaParams::diagonal(0.1, 0.15, 0.2, 1.0).unwrap()
    }

    fn spiral_data(horizon: usize, x0: Vec12, xi_bar: Vec6) -> HorizonData {
        let xi_d = Vec6::new(0.0, 0.0, 1.0, 2.0, 0.0, 0.2);
        let ct = build_ct_system(&xi_d, &xi_bar, &body(), false);
        let dm = discretize(&ct, 0.05, Discretization::Euler).unwrap();
        let (c, d) = output_map(&xi_d, Variant::Proposed);
        HorizonData {
            x0,
            dynamics: vec![dm; horizon],
            outputs: vec![OutputMap { c, d }; horizon],
            input_constraints: vec![InputConstraints::boxed(6, 50.0)],
        }
    }

    fn weights() -> (Mat12, DMatrix<f64>) {
        let mut q = Mat12::identity();
        for i in 0..6 {
            q[(i, i)] = 10.0;
        }
        (q, DMatrix::identity(6, 6) * 0.1)
    }

    #[test]
    fn origin_is_optimal_without_offsets() {
        let ct = build_ct_system(&Vec6::zeros(), &Vec6::zeros(), &body(), false);
        let dm = discretize(&ct, 0.1, Discretization::Euler).unwrap();
        let data = HorizonData {
            x0: Vec12::zeros(),
            dynamics: vec![dm],
            outputs: vec![OutputMap {
                c: Mat12::identity(),
                d: Vec12::zeros(),
            }],
            input_constraints: vec![InputConstraints::none(6)],
        };
        let (q, r) = weights();
        let qp = build_qp(&data, &q, &r, &q).unwrap();
        let sol = solve(&qp.problem, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!(qp.layout.input(&sol.primal, 0).amax() < 1e-9);
        assert_eq!(qp.constant, 0.0);
    }

    #[test]
    fn layout_and_symmetry() {
        let data = spiral_data(3, Vec12::zeros(), Vec6::zeros());
        let (q, r) = weights();
        let qp = build_qp(&data, &q, &r, &q).unwrap();
        assert_eq!(qp.layout.num_vars(), 3 * 18);
        assert_eq!(qp.layout.num_constraints(), 3 * 12 + 3 * 6);
        assert_eq!(qp.problem.p.asymmetry(), 0.0);
        let eig = qp.problem.p.to_dense().symmetric_eigenvalues();
        assert!(eig.min() > -1e-9);
    }

    #[test]
    fn dimension_errors() {
        let mut data = spiral_data(2, Vec12::zeros(), Vec6::zeros());
        let (q, r) = weights();
        data.outputs.pop();
        assert!(matches!(build_qp(&data, &q, &r, &q), Err(Error::DimensionMismatch(_))));
        let data = spiral_data(2, Vec12::zeros(), Vec6::zeros());
        assert!(matches!(
            build_qp(&data, &q, &DMatrix::identity(3, 3), &q),
            Err(Error::DimensionMismatch(_))
        ));
    }

    /// Condensed least-squares oracle: eliminate the states and solve the
    /// unconstrained normal equations in the inputs directly.
    #[test]
    fn unconstrained_matches_batch_least_squares() {
        let xi_bar = Vec6::new(0.1, -0.2, 0.9, 1.9, 0.1, 0.3);
        let mut x0 = Vec12::zeros();
        for i in 0..12 {
            x0[i] = 0.1 * ((i * 7) as f64).sin();
        }
        let mut data = spiral_data(2, x0, xi_bar);
        data.input_constraints = vec![InputConstraints::none(6)];
        let (q, r) = weights();
        let mut p_term = q * 3.0;
        p_term[(0, 1)] = 0.5;
        p_term[(1, 0)] = 0.5;
        let qp = build_qp(&data, &q, &r, &p_term).unwrap();
        let sol = solve(&qp.problem, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);

        // x1 = A0 x0 + B0 u0 + h0, x2 = A1 x1 + B1 u1 + h1, u = [u0; u1]
        let to_d = |m: &Mat12| DMatrix::from_iterator(12, 12, m.iter().copied());
        let to_v = |v: &Vec12| DVector::from_iterator(12, v.iter().copied());
        let (d0, d1) = (&data.dynamics[0], &data.dynamics[1]);
        let (a0, a1) = (to_d(&d0.a), to_d(&d1.a));
        let mut s1 = DMatrix::zeros(12, 12);
        s1.view_mut((0, 0), (12, 6)).copy_from(&d0.b);
        let c1 = &a0 * to_v(&x0) + to_v(&d0.h);
        let mut s2 = DMatrix::zeros(12, 12);
        s2.view_mut((0, 0), (12, 6)).copy_from(&(&a1 * &d0.b));
        s2.view_mut((0, 6), (12, 6)).copy_from(&d1.b);
        let c2 = &a1 * &c1 + to_v(&d1.h);
        // y_k = C_k (S_k u + c_k) − d_k
        let o1 = &data.outputs[0];
        let o2 = &data.outputs[1];
        let g1 = to_d(&o1.c) * &s1;
        let f1 = to_d(&o1.c) * &c1 - to_v(&o1.d);
        let g2 = to_d(&o2.c) * &s2;
        let f2 = to_d(&o2.c) * &c2 - to_v(&o2.d);
        let (qd, pd) = (to_d(&q), to_d(&p_term));
        let mut rr = DMatrix::zeros(12, 12);
        rr.view_mut((0, 0), (6, 6)).copy_from(&r);
        rr.view_mut((6, 6), (6, 6)).copy_from(&r);
        let hess = g1.transpose() * &qd * &g1 + g2.transpose() * &pd * &g2 + rr;
        let grad = g1.transpose() * &qd * f1 + g2.transpose() * &pd * f2;
        let u_star = hess.lu().solve(&(-grad)).unwrap();
        let u0 = qp.layout.input(&sol.primal, 0);
        let u1 = qp.layout.input(&sol.primal, 1);
        for i in 0..6 {
            assert!((u0[i] - u_star[i]).abs() < 1e-6, "{u0} vs {u_star}");
            assert!((u1[i] - u_star[6 + i]).abs() < 1e-6);
        }
    }

    #[test]
    fn perfect_tracking_is_feasible_and_zero_cost() {
        // ψ = 0, ξ = ξ_d and an operating point at ξ_d: holding u = −J·b_bias
        // keeps the error at zero.
        let xi_d = Vec6::new(0.0, 0.0, 1.0, 2.0, 0.0, 0.2);
        let j = body();
        let mut x0 = Vec12::zeros();
        x0.fixed_rows_mut::<6>(6).copy_from(&xi_d);
        let data = spiral_data(4, x0, xi_d);
        let (q, r) = weights();
        let qp = build_qp(&data, &q, &r, &q).unwrap();

        let hold = -(crate::lie::coad_se3(&xi_d) * (j.spatial() * xi_d));
        let mut z = vec![0.0; qp.layout.num_vars()];
        for k in 1..=4 {
            let off = qp.layout.x_offset(k);
            z[off..off + 12].copy_from_slice(x0.as_slice());
        }
        for k in 0..4 {
            let off = qp.layout.u_offset(k);
            z[off..off + 6].copy_from_slice(hold.as_slice());
        }
        let mut az = vec![0.0; qp.layout.num_constraints()];
        qp.problem.a.mul_vec(&z, &mut az);
        for i in 0..48 {
            assert!((az[i] - qp.problem.l[i]).abs() < 1e-12, "row {i}");
        }
        // Output terms vanish, only input cost remains.
        let tracking = qp.problem.objective(&z) + qp.constant;
        let input_cost = 4.0 * hold.dot(&(hold * 0.1));
        assert!((tracking - input_cost).abs() < 1e-9);
    }

    #[test]
    fn warm_start_shifts_blocks() {
        let layout = HorizonLayout {
            horizon: 3,
            n_u: 2,
            stage_rows: vec![1, 1, 1],
        };
        let n = layout.num_vars();
        let m = layout.num_constraints();
        let prev = QpSolution {
            primal: (0..n).map(|i| i as f64).collect(),
            dual: (0..m).map(|i| i as f64).collect(),
            status: QpStatus::Solved,
            prim_res: 0.0,
            dual_res: 0.0,
            iterations: 1,
            objective: 0.0,
            polished: false,
        };
        let ws = warm_start(&prev, &layout).unwrap();
        assert_eq!(ws.x[0], 12.0);
        assert_eq!(ws.x[12], 24.0);
        assert_eq!(ws.x[24], 24.0);
        assert_eq!(ws.x[layout.u_offset(0)], prev.primal[layout.u_offset(1)]);
        assert_eq!(ws.x[layout.u_offset(2)], prev.primal[layout.u_offset(2)]);
        assert_eq!(ws.y[36], 37.0);
        assert_eq!(ws.y[38], 38.0);

        let zero = QpSolution {
            primal: vec![0.0; n],
            dual: vec![0.0; m],
            ..prev.clone()
        };
        let ws = warm_start(&zero, &layout).unwrap();
        assert!(ws.x.iter().chain(&ws.y).all(|v| *v == 0.0));

        let short = QpSolution {
            primal: vec![0.0; 3],
            ..prev
        };
        assert!(matches!(warm_start(&short, &layout), Err(Error::DimensionMismatch(_))));
    }
}
