use super::csc::CscMatrix;
use super::ldl::{minimum_degree, SymmetricSolver};
use super::{dot, inf_norm, QpProblem, QpSettings, QpSolution, QpStatus, QP_INFINITY};
use crate::error::{Error, Result};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const SCALING_MIN: f64 = 1e-4;
const SCALING_MAX: f64 = 1e4;
const DIV_TOL: f64 = 1e-30;

/// Reusable ADMM solver.
///
/// Keeps the fill-reducing ordering of the last KKT pattern so a sequence of
/// structurally identical problems (receding-horizon MPC) skips the ordering
/// step. One instance serves one solve at a time.
#[derive(Clone, Debug)]
pub struct QpSolver {
    settings: QpSettings,
    ordering: Option<CachedOrdering>,
}

#[derive(Clone, Debug)]
struct CachedOrdering {
    pattern: CscMatrix,
    perm: Vec<usize>,
}

/// Problem data after Ruiz equilibration: `P̄ = c·DPD`, `q̄ = c·Dq`,
/// `Ā = EAD`, `l̄ = El`, `ū = Eu`.
struct Scaled {
    p: CscMatrix,
    q: Vec<f64>,
    a: CscMatrix,
    l: Vec<f64>,
    u: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
}

fn clamp_bound(v: f64) -> f64 {
    v.clamp(-QP_INFINITY, QP_INFINITY)
}

fn limit_scaling(v: f64) -> f64 {
    if v < SCALING_MIN {
        1.0
    } else {
        v.min(SCALING_MAX)
    }
}

fn equilibrate(problem: &QpProblem, iters: usize) -> Scaled {
    let n = problem.num_vars();
    let m = problem.num_constraints();
    let mut p = problem.p.clone();
    let mut a = problem.a.clone();
    let mut q = problem.q.clone();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut c = 1.0;

    for _ in 0..iters {
        let p_cols = p.col_inf_norms();
        let a_cols = a.col_inf_norms();
        let a_rows = a.row_inf_norms();
        let dt: Vec<f64> = (0..n)
            .map(|j| 1.0 / limit_scaling(p_cols[j].max(a_cols[j])).sqrt())
            .collect();
        let et: Vec<f64> = (0..m).map(|i| 1.0 / limit_scaling(a_rows[i]).sqrt()).collect();
        p.scale(&dt, &dt);
        a.scale(&et, &dt);
        for j in 0..n {
            q[j] *= dt[j];
            d[j] *= dt[j];
        }
        for i in 0..m {
            e[i] *= et[i];
        }

        let p_cols = p.col_inf_norms();
        let mean_col = if n > 0 {
            p_cols.iter().sum::<f64>() / n as f64
        } else {
            0.0
        };
        let ct = 1.0 / limit_scaling(mean_col.max(inf_norm(&q)));
        p.values.iter_mut().for_each(|v| *v *= ct);
        q.iter_mut().for_each(|v| *v *= ct);
        c *= ct;
    }

    let scale_bound = |b: f64, ei: f64| {
        let b = clamp_bound(b);
        if b.abs() >= QP_INFINITY {
            b
        } else {
            b * ei
        }
    };
    let l = (0..m).map(|i| scale_bound(problem.l[i], e[i])).collect();
    let u = (0..m).map(|i| scale_bound(problem.u[i], e[i])).collect();
    Scaled {
        p,
        q,
        a,
        l,
        u,
        d,
        e,
        c,
    }
}

/// Upper triangle of `[[P + σI, Aᵀ], [A, −diag(1/ρ)]]`.
fn kkt_upper(p: &CscMatrix, a: &CscMatrix, sigma: f64, rho: &[f64]) -> CscMatrix {
    let n = p.ncols;
    let m = a.nrows;
    let mut t = Vec::with_capacity(p.nnz() / 2 + n + a.nnz() + m);
    for (c, r, v) in p.iter() {
        if r < c {
            t.push((r, c, v));
        }
    }
    for j in 0..n {
        t.push((j, j, p.get(j, j) + sigma));
    }
    for (c, r, v) in a.iter() {
        t.push((c, n + r, v));
    }
    for (i, r) in rho.iter().enumerate() {
        t.push((n + i, n + i, -1.0 / r));
    }
    CscMatrix::from_triplets(n + m, n + m, &t)
}

struct Residuals {
    prim: f64,
    dual: f64,
    prim_scale: f64,
    dual_scale: f64,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Self {
        Self {
            settings,
            ordering: None,
        }
    }

    pub fn settings(&self) -> &QpSettings {
        &self.settings
    }

    pub fn settings_mut(&mut self) -> &mut QpSettings {
        &mut self.settings
    }

    fn ordering_for(&mut self, kkt: &CscMatrix) -> Vec<usize> {
        if let Some(c) = &self.ordering {
            if c.pattern.same_pattern(kkt) {
                return c.perm.clone();
            }
        }
        let perm = minimum_degree(kkt);
        self.ordering = Some(CachedOrdering {
            pattern: kkt.clone(),
            perm: perm.clone(),
        });
        perm
    }

    pub fn solve(&mut self, problem: &QpProblem) -> Result<QpSolution> {
        problem.validate()?;
        let s = self.settings.clone();
        if !(s.eps_abs >= 0.0 && s.eps_rel >= 0.0 && s.eps_abs + s.eps_rel > 0.0) {
            return Err(Error::InvalidConfig("QP tolerances must be positive".into()));
        }
        let n = problem.num_vars();
        let m = problem.num_constraints();
        let sc = equilibrate(problem, s.scaling_iters);

        let rho_for = |rho: f64, i: usize| -> f64 {
            let (l, u) = (sc.l[i], sc.u[i]);
            if l <= -QP_INFINITY && u >= QP_INFINITY {
                RHO_MIN
            } else if u - l < 1e-12 * (1.0 + l.abs()) {
                (RHO_EQ_FACTOR * rho).min(RHO_MAX)
            } else {
                rho
            }
        };
        let mut rho = s.rho.clamp(RHO_MIN, RHO_MAX);
        let mut rho_vec: Vec<f64> = (0..m).map(|i| rho_for(rho, i)).collect();

        let kkt = kkt_upper(&sc.p, &sc.a, s.sigma, &rho_vec);
        let perm = self.ordering_for(&kkt);
        let mut kkt_solver = SymmetricSolver::new(&kkt, perm.clone())?;

        // Iterates in scaled space.
        let mut x = vec![0.0; n];
        let mut z = vec![0.0; m];
        let mut y = vec![0.0; m];
        if let Some(ws) = &s.warm_start {
            if ws.x.len() != n || ws.y.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "warm start has |x| = {}, |y| = {}, problem has n = {n}, m = {m}",
                    ws.x.len(),
                    ws.y.len()
                )));
            }
            for j in 0..n {
                x[j] = ws.x[j] / sc.d[j];
            }
            for i in 0..m {
                y[i] = ws.y[i] * sc.c / sc.e[i];
            }
            sc.a.mul_vec(&x, &mut z);
            for i in 0..m {
                z[i] = z[i].clamp(sc.l[i], sc.u[i]);
            }
        }

        let mut x_prev = vec![0.0; n];
        let mut z_prev = vec![0.0; m];
        let mut y_prev = vec![0.0; m];
        let mut rhs = vec![0.0; n + m];
        let mut ax = vec![0.0; m];
        let mut px = vec![0.0; n];
        let mut aty = vec![0.0; n];
        let mut status = QpStatus::MaxIter;
        let mut iterations = s.max_iter;
        let mut last = Residuals {
            prim: f64::INFINITY,
            dual: f64::INFINITY,
            prim_scale: 0.0,
            dual_scale: 0.0,
        };

        for iter in 1..=s.max_iter {
            x_prev.copy_from_slice(&x);
            z_prev.copy_from_slice(&z);
            y_prev.copy_from_slice(&y);

            for j in 0..n {
                rhs[j] = s.sigma * x_prev[j] - sc.q[j];
            }
            for i in 0..m {
                rhs[n + i] = z_prev[i] - y[i] / rho_vec[i];
            }
            kkt_solver.solve(&mut rhs);

            for j in 0..n {
                x[j] = s.alpha * rhs[j] + (1.0 - s.alpha) * x_prev[j];
            }
            for i in 0..m {
                let z_tilde = z_prev[i] + (rhs[n + i] - y[i]) / rho_vec[i];
                let z_relaxed = s.alpha * z_tilde + (1.0 - s.alpha) * z_prev[i];
                z[i] = (z_relaxed + y[i] / rho_vec[i]).clamp(sc.l[i], sc.u[i]);
                y[i] += rho_vec[i] * (z_relaxed - z[i]);
            }

            last = self.residuals(&sc, &x, &z, &y, &mut ax, &mut px, &mut aty);
            let eps_prim = s.eps_abs + s.eps_rel * last.prim_scale;
            let eps_dual = s.eps_abs + s.eps_rel * last.dual_scale;
            if last.prim <= eps_prim && last.dual <= eps_dual {
                status = QpStatus::Solved;
                iterations = iter;
                break;
            }
            if m > 0 && primal_infeasible(&sc, &y, &y_prev, s.eps_prim_inf) {
                status = QpStatus::PrimalInfeasible;
                iterations = iter;
                break;
            }
            if dual_infeasible(&sc, &x, &x_prev, s.eps_dual_inf) {
                status = QpStatus::DualInfeasible;
                iterations = iter;
                break;
            }

            if s.adaptive_rho && s.adaptive_rho_interval > 0 && iter % s.adaptive_rho_interval == 0 && m > 0 {
                let (sp, sd) = scaled_ratio(&sc, &x, &z, &y, &ax, &px, &aty);
                let candidate = (rho * (sp / (sd + DIV_TOL)).sqrt()).clamp(RHO_MIN, RHO_MAX);
                if candidate > rho * s.adaptive_rho_tolerance || candidate < rho / s.adaptive_rho_tolerance {
                    rho = candidate;
                    for (i, r) in rho_vec.iter_mut().enumerate() {
                        *r = rho_for(rho, i);
                    }
                    kkt_solver.update_diagonal(rho_vec.iter().enumerate().map(|(i, r)| (n + i, -1.0 / r)))?;
                }
            }
        }

        let mut polished = false;
        if status == QpStatus::Solved && s.polish && n > 0 {
            if let Some((xp, yp, res)) = self.polish(&sc, &x, &z, &y, &perm) {
                if res.prim <= last.prim.max(1e-9) && res.dual <= last.dual.max(1e-9) {
                    x = xp;
                    y = yp;
                    last = res;
                    polished = true;
                }
            }
        }

        let primal: Vec<f64> = (0..n).map(|j| x[j] * sc.d[j]).collect();
        let dual: Vec<f64> = match status {
            QpStatus::PrimalInfeasible => (0..m).map(|i| (y[i] - y_prev[i]) * sc.e[i] / sc.c).collect(),
            _ => (0..m).map(|i| y[i] * sc.e[i] / sc.c).collect(),
        };
        let objective = problem.objective(&primal);
        Ok(QpSolution {
            primal,
            dual,
            status,
            prim_res: last.prim,
            dual_res: last.dual,
            iterations,
            objective,
            polished,
        })
    }

    /// Unscaled residuals of the scaled iterate.
    #[allow(clippy::too_many_arguments)]
    fn residuals(
        &self,
        sc: &Scaled,
        x: &[f64],
        z: &[f64],
        y: &[f64],
        ax: &mut [f64],
        px: &mut [f64],
        aty: &mut [f64],
    ) -> Residuals {
        let n = x.len();
        let m = z.len();
        sc.a.mul_vec(x, ax);
        sc.p.mul_vec(x, px);
        sc.a.mul_t_vec(y, aty);
        let mut prim: f64 = 0.0;
        let mut ax_norm: f64 = 0.0;
        let mut z_norm: f64 = 0.0;
        for i in 0..m {
            let inv = 1.0 / sc.e[i];
            prim = prim.max(((ax[i] - z[i]) * inv).abs());
            ax_norm = ax_norm.max((ax[i] * inv).abs());
            z_norm = z_norm.max((z[i] * inv).abs());
        }
        let mut dual: f64 = 0.0;
        let mut px_norm: f64 = 0.0;
        let mut aty_norm: f64 = 0.0;
        let mut q_norm: f64 = 0.0;
        for j in 0..n {
            let f = 1.0 / (sc.c * sc.d[j]);
            dual = dual.max(((px[j] + sc.q[j] + aty[j]) * f).abs());
            px_norm = px_norm.max((px[j] * f).abs());
            aty_norm = aty_norm.max((aty[j] * f).abs());
            q_norm = q_norm.max((sc.q[j] * f).abs());
        }
        Residuals {
            prim,
            dual,
            prim_scale: ax_norm.max(z_norm),
            dual_scale: px_norm.max(aty_norm).max(q_norm),
        }
    }

    /// Solves the equality-constrained problem on the guessed active set.
    fn polish(
        &self,
        sc: &Scaled,
        x: &[f64],
        z: &[f64],
        y: &[f64],
        perm: &[usize],
    ) -> Option<(Vec<f64>, Vec<f64>, Residuals)> {
        let s = &self.settings;
        let n = x.len();
        let m = z.len();
        // (row, bound, sign) with sign = −1 for lower, +1 for upper, 0 for equality.
        let mut active: Vec<(usize, f64, i8)> = Vec::new();
        for i in 0..m {
            if (sc.u[i] - sc.l[i]).abs() < 1e-12 * (1.0 + sc.l[i].abs()) {
                active.push((i, sc.l[i], 0));
            } else if z[i] - sc.l[i] < -y[i] {
                active.push((i, sc.l[i], -1));
            } else if sc.u[i] - z[i] < y[i] {
                active.push((i, sc.u[i], 1));
            }
        }
        let k = active.len();
        let mut slot = vec![usize::MAX; m];
        for (idx, &(i, _, _)) in active.iter().enumerate() {
            slot[i] = idx;
        }
        let mut t = Vec::new();
        for (c, r, v) in sc.p.iter() {
            if r < c {
                t.push((r, c, v));
            }
        }
        for j in 0..n {
            t.push((j, j, sc.p.get(j, j) + s.polish_delta));
        }
        let mut a_red = Vec::new();
        for (c, r, v) in sc.a.iter() {
            if slot[r] != usize::MAX {
                t.push((c, n + slot[r], v));
                a_red.push((slot[r], c, v));
            }
        }
        for idx in 0..k {
            t.push((n + idx, n + idx, -s.polish_delta));
        }
        let kkt = CscMatrix::from_triplets(n + k, n + k, &t);
        let a_red = CscMatrix::from_triplets(k, n, &a_red);

        let red_perm: Vec<usize> = perm
            .iter()
            .filter_map(|&old| {
                if old < n {
                    Some(old)
                } else if slot[old - n] != usize::MAX {
                    Some(n + slot[old - n])
                } else {
                    None
                }
            })
            .collect();
        let mut solver = SymmetricSolver::new(&kkt, red_perm).ok()?;

        let mut rhs = vec![0.0; n + k];
        for j in 0..n {
            rhs[j] = -sc.q[j];
        }
        for (idx, &(_, b, _)) in active.iter().enumerate() {
            rhs[n + idx] = b;
        }
        let mut sol = rhs.clone();
        solver.solve(&mut sol);

        let mut px = vec![0.0; n];
        let mut aty = vec![0.0; n];
        let mut ax = vec![0.0; k];
        for _ in 0..s.polish_refine_iters {
            sc.p.mul_vec(&sol[..n], &mut px);
            a_red.mul_t_vec(&sol[n..], &mut aty);
            a_red.mul_vec(&sol[..n], &mut ax);
            let mut r: Vec<f64> = (0..n).map(|j| rhs[j] - px[j] - aty[j]).collect();
            r.extend((0..k).map(|idx| rhs[n + idx] - ax[idx]));
            solver.solve(&mut r);
            for (v, d) in sol.iter_mut().zip(&r) {
                *v += d;
            }
        }

        let xp = sol[..n].to_vec();
        let mut yp = vec![0.0; m];
        for (idx, &(i, _, sign)) in active.iter().enumerate() {
            let yi = sol[n + idx];
            let tol = 1e-9 * (1.0 + inf_norm(&sol[n..]));
            if (sign < 0 && yi > tol) || (sign > 0 && yi < -tol) {
                return None;
            }
            yp[i] = yi;
        }
        let mut axf = vec![0.0; m];
        sc.a.mul_vec(&xp, &mut axf);
        let zp: Vec<f64> = (0..m).map(|i| axf[i].clamp(sc.l[i], sc.u[i])).collect();
        let mut px = vec![0.0; n];
        let mut aty = vec![0.0; n];
        let res = self.residuals(sc, &xp, &zp, &yp, &mut axf, &mut px, &mut aty);
        if !res.prim.is_finite() || !res.dual.is_finite() {
            return None;
        }
        Some((xp, yp, res))
    }
}

/// Ratio of normalized primal to dual residuals in the scaled space, used
/// for penalty adaptation.
fn scaled_ratio(
    sc: &Scaled,
    _x: &[f64],
    z: &[f64],
    _y: &[f64],
    ax: &[f64],
    px: &[f64],
    aty: &[f64],
) -> (f64, f64) {
    let m = z.len();
    let n = px.len();
    let prim = (0..m).map(|i| (ax[i] - z[i]).abs()).fold(0.0, f64::max);
    let prim_norm = inf_norm(ax).max(inf_norm(z));
    let dual = (0..n)
        .map(|j| (px[j] + sc.q[j] + aty[j]).abs())
        .fold(0.0, f64::max);
    let dual_norm = inf_norm(px).max(inf_norm(aty)).max(inf_norm(&sc.q));
    (prim / (prim_norm + DIV_TOL), dual / (dual_norm + DIV_TOL))
}

fn primal_infeasible(sc: &Scaled, y: &[f64], y_prev: &[f64], eps: f64) -> bool {
    let m = y.len();
    let dy: Vec<f64> = (0..m).map(|i| y[i] - y_prev[i]).collect();
    let dy_unscaled: Vec<f64> = (0..m).map(|i| dy[i] * sc.e[i]).collect();
    let norm = inf_norm(&dy_unscaled);
    if norm <= DIV_TOL {
        return false;
    }
    let mut support = 0.0;
    for i in 0..m {
        let v = dy_unscaled[i];
        let (l, u) = (sc.l[i] / sc.e[i], sc.u[i] / sc.e[i]);
        if v > 0.0 {
            if sc.u[i] >= QP_INFINITY {
                if v > eps * norm {
                    return false;
                }
            } else {
                support += u * v;
            }
        } else if v < 0.0 {
            if sc.l[i] <= -QP_INFINITY {
                if -v > eps * norm {
                    return false;
                }
            } else {
                support += l * v;
            }
        }
    }
    if support >= -eps * norm {
        return false;
    }
    let mut aty = vec![0.0; sc.a.ncols];
    sc.a.mul_t_vec(&dy, &mut aty);
    let aty_norm = (0..aty.len())
        .map(|j| (aty[j] / sc.d[j]).abs())
        .fold(0.0, f64::max);
    aty_norm <= eps * norm
}

fn dual_infeasible(sc: &Scaled, x: &[f64], x_prev: &[f64], eps: f64) -> bool {
    let n = x.len();
    let dx: Vec<f64> = (0..n).map(|j| x[j] - x_prev[j]).collect();
    let norm = (0..n).map(|j| (dx[j] * sc.d[j]).abs()).fold(0.0, f64::max);
    if norm <= DIV_TOL {
        return false;
    }
    if dot(&sc.q, &dx) / sc.c >= -eps * norm {
        return false;
    }
    let mut pdx = vec![0.0; n];
    sc.p.mul_vec(&dx, &mut pdx);
    if (0..n).any(|j| (pdx[j] / (sc.c * sc.d[j])).abs() > eps * norm) {
        return false;
    }
    let mut adx = vec![0.0; sc.a.nrows];
    sc.a.mul_vec(&dx, &mut adx);
    for i in 0..adx.len() {
        let v = adx[i] / sc.e[i];
        let lower_inf = sc.l[i] <= -QP_INFINITY;
        let upper_inf = sc.u[i] >= QP_INFINITY;
        let ok = match (lower_inf, upper_inf) {
            (true, true) => true,
            (false, true) => v >= -eps * norm,
            (true, false) => v <= eps * norm,
            (false, false) => v.abs() <= eps * norm,
        };
        if !ok {
            return false;
        }
    }
    true
}
