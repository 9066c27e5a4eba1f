//! Terminal cost from the discrete algebraic Riccati equation
//! `P = AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const DARE_TOL: f64 = 1e-9;
pub const DARE_MAX_ITER: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalMode {
    /// Iterate the recursion to its fixed point every control cycle.
    #[default]
    FullDare,
    /// One recursion per cycle, starting from the previous cycle's `P`.
    OneStep,
    /// Use the configured `P` unchanged.
    Fixed,
}

/// One step of the Riccati recursion.
pub fn riccati_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let pa = p * a;
    let pb = p * b;
    let s = r + b.transpose() * &pb;
    let bt_pa = b.transpose() * &pa;
    let chol = s.cholesky().ok_or_else(|| {
        Error::InvalidConfig("R + BᵀPB is not positive definite".into())
    })?;
    let k = chol.solve(&bt_pa);
    let next = a.transpose() * &pa - (a.transpose() * &pb) * k + q;
    Ok((&next + next.transpose()) * 0.5)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DareSolution {
    pub p: DMatrix<f64>,
    pub iterations: usize,
    /// `‖P_{i+1} − P_i‖∞` at exit.
    pub step: f64,
}

/// Fixed-point iteration from `P₀ = Q` until successive iterates differ by
/// less than [`DARE_TOL`] (max-abs), at most [`DARE_MAX_ITER`] times.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DareSolution> {
    check_dims(a, b, q, r)?;
    let mut p = q.clone();
    let mut step = f64::INFINITY;
    for it in 1..=DARE_MAX_ITER {
        let next = riccati_step(a, b, q, r, &p)?;
        step = (&next - &p).abs().max();
        p = next;
        if step < DARE_TOL {
            return Ok(DareSolution {
                p,
                iterations: it,
                step,
            });
        }
        if !step.is_finite() {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: DARE_MAX_ITER,
        residual: step,
    })
}

/// `‖P − f(P)‖∞` where `f` is one recursion step.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<f64> {
    Ok((riccati_step(a, b, q, r, p)? - p).abs().max())
}

/// Terminal weight for the given mode. `previous` seeds [`TerminalMode::OneStep`]
/// and is returned as-is for [`TerminalMode::Fixed`]; it defaults to `Q`.
pub fn riccati_terminal(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    mode: TerminalMode,
    previous: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    check_dims(a, b, q, r)?;
    let prev = previous.unwrap_or(q);
    match mode {
        TerminalMode::FullDare => Ok(solve_dare(a, b, q, r)?.p),
        TerminalMode::OneStep => riccati_step(a, b, q, r, prev),
        TerminalMode::Fixed => Ok(prev.clone()),
    }
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "DARE with A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_golden_ratio() {
        // P² − P − 1 = 0
        let sol = solve_dare(&scalar(1.0), &scalar(1.0), &scalar(1.0), &scalar(1.0)).unwrap();
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((sol.p[(0, 0)] - golden).abs() < 1e-9);
    }

    #[test]
    fn zero_state_cost_has_zero_solution() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let b = DMatrix::identity(2, 2);
        let sol = solve_dare(&a, &b, &DMatrix::zeros(2, 2), &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(sol.p, DMatrix::zeros(2, 2));
    }

    #[test]
    fn converged_solution_is_a_fixed_point() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.05, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 0.05]);
        let q = DMatrix::identity(2, 2);
        let r = scalar(0.1);
        let sol = solve_dare(&a, &b, &q, &r).unwrap();
        assert!(dare_residual(&a, &b, &q, &r, &sol.p).unwrap() < 1e-8);
    }

    #[test]
    fn unstabilizable_pair_does_not_converge() {
        let a = scalar(2.0);
        let b = scalar(0.0);
        let err = solve_dare(&a, &b, &scalar(1.0), &scalar(1.0)).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn modes() {
        let (a, b, q, r) = (scalar(1.0), scalar(1.0), scalar(1.0), scalar(1.0));
        let one = riccati_terminal(&a, &b, &q, &r, TerminalMode::OneStep, None).unwrap();
        assert!((one[(0, 0)] - 1.5).abs() < 1e-15);
        let two = riccati_terminal(&a, &b, &q, &r, TerminalMode::OneStep, Some(&one)).unwrap();
        assert!((two[(0, 0)] - (1.5 - 2.25 / 2.5 + 1.0)).abs() < 1e-15);
        let fixed = riccati_terminal(&a, &b, &q, &r, TerminalMode::Fixed, Some(&scalar(7.0))).unwrap();
        assert_eq!(fixed, scalar(7.0));
        assert!(riccati_terminal(&a, &scalar(1.0), &q, &DMatrix::identity(2, 2), TerminalMode::FullDare, None).is_err());
    }
}
