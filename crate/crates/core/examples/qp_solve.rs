//! Solving a small box-constrained QP and round-tripping it through the text dump.

use lie_mpc::qp::{dump, kkt_residuals, solve, CscMatrix, QpProblem, QpSettings};

fn main() -> lie_mpc::Result<()> {
    // minimize ½xᵀPx + qᵀx  s.t.  x₀ + x₁ = 1,  0 ≤ x ≤ 0.7
    let p = CscMatrix::from_triplets(2, 2, &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)]);
    let a = CscMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (2, 1, 1.0)]);
    let problem = QpProblem::new(p, vec![1.0, 1.0], a, vec![1.0, 0.0, 0.0], vec![1.0, 0.7, 0.7])?;

    let sol = solve(&problem, &QpSettings::default())?;
    println!("status {:?} after {} iterations (polished: {})", sol.status, sol.iterations, sol.polished);
    println!("x = {:?}", sol.primal);
    println!("y = {:?}", sol.dual);
    println!("objective {:.6}", sol.objective);
    let (prim, dual) = kkt_residuals(&problem, &sol.primal, &sol.dual);
    println!("KKT residuals: primal {prim:.2e}, dual {dual:.2e}");

    let text = dump::to_string(&problem);
    println!("\n{text}");
    let back = dump::read(text.as_bytes())?;
    assert_eq!(back, problem);
    Ok(())
}
