//! Sparse `LDLᵀ` factorization for quasi-definite matrices.
//!
//! Up-looking numeric factorization over an elimination tree, with a
//! minimum-degree fill-reducing ordering. Quasi-definite matrices admit the
//! factorization under any symmetric permutation, so no pivoting is needed.

use std::collections::BTreeSet;

use super::csc::CscMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Minimum-degree ordering of the symmetric pattern whose upper triangle is
/// `upper`. Returns `perm` with `perm[new] = old`. Ties go to the lowest index.
pub fn minimum_degree(upper: &CscMatrix) -> Vec<usize> {
    let n = upper.ncols;
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (c, r, _) in upper.iter() {
        if r != c {
            adj[r].insert(c);
            adj[c].insert(r);
        }
    }
    let mut alive = vec![true; n];
    let mut perm = Vec::with_capacity(n);
    let mut nbrs: Vec<usize> = Vec::new();
    for _ in 0..n {
        let v = (0..n)
            .filter(|&i| alive[i])
            .min_by_key(|&i| (adj[i].len(), i))
            .expect("node left");
        alive[v] = false;
        perm.push(v);
        nbrs.clear();
        nbrs.extend(adj[v].iter().copied());
        adj[v].clear();
        for &a in &nbrs {
            adj[a].remove(&v);
        }
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                adj[a].insert(b);
                adj[b].insert(a);
            }
        }
    }
    perm
}

pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

/// Upper triangle of `P·M·Pᵀ` where `upper` holds the upper triangle of `M`.
/// Also returns, for every original diagonal index, the position of that
/// diagonal entry in the permuted value array.
pub fn permute_upper(upper: &CscMatrix, iperm: &[usize]) -> (CscMatrix, Vec<usize>) {
    let t: Vec<_> = upper
        .iter()
        .map(|(c, r, v)| {
            let (a, b) = (iperm[r], iperm[c]);
            (a.min(b), a.max(b), v)
        })
        .collect();
    let m = CscMatrix::from_triplets(upper.nrows, upper.ncols, &t);
    let diag_pos = (0..upper.ncols)
        .map(|old| {
            let j = iperm[old];
            let range = m.col_ptr[j]..m.col_ptr[j + 1];
            let k = m.row_idx[range.clone()]
                .binary_search(&j)
                .expect("diagonal entry present");
            range.start + k
        })
        .collect();
    (m, diag_pos)
}

/// `L`, `D` factors of an upper-triangular CSC pattern.
#[derive(Clone, Debug)]
pub struct LdlFactor {
    n: usize,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    // workspaces
    y_marker: Vec<bool>,
    y_idx: Vec<usize>,
    elim: Vec<usize>,
    next_space: Vec<usize>,
    y_vals: Vec<f64>,
}

impl LdlFactor {
    /// Symbolic analysis: elimination tree and column counts of `L`.
    pub fn symbolic(upper: &CscMatrix) -> Result<Self> {
        let n = upper.ncols;
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for k in upper.col_ptr[j]..upper.col_ptr[j + 1] {
                let mut i = upper.row_idx[k];
                if i > j {
                    return Err(Error::DimensionMismatch("KKT matrix must be upper triangular".into()));
                }
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        Ok(Self {
            n,
            etree,
            lp,
            li: vec![0; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            y_marker: vec![false; n],
            y_idx: vec![0; n],
            elim: vec![0; n],
            next_space: vec![0; n],
            y_vals: vec![0.0; n],
        })
    }

    pub fn nnz_l(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization of a matrix with the analysed pattern.
    pub fn numeric(&mut self, upper: &CscMatrix) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Ok(());
        }
        for i in 0..n {
            self.y_marker[i] = false;
            self.y_vals[i] = 0.0;
            self.d[i] = 0.0;
            self.next_space[i] = self.lp[i];
        }
        for k in 0..n {
            let mut nnz_y = 0;
            for p in upper.col_ptr[k]..upper.col_ptr[k + 1] {
                let b = upper.row_idx[p];
                if b == k {
                    self.d[k] = upper.values[p];
                    continue;
                }
                self.y_vals[b] = upper.values[p];
                if !self.y_marker[b] {
                    self.y_marker[b] = true;
                    self.elim[0] = b;
                    let mut nnz_e = 1;
                    let mut next = self.etree[b];
                    while next != NONE && next < k {
                        if self.y_marker[next] {
                            break;
                        }
                        self.y_marker[next] = true;
                        self.elim[nnz_e] = next;
                        nnz_e += 1;
                        next = self.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        self.y_idx[nnz_y] = self.elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = self.y_idx[i];
                let slot = self.next_space[c];
                let yc = self.y_vals[c];
                for j in self.lp[c]..slot {
                    self.y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[slot] = k;
                let l = yc * self.dinv[c];
                self.lx[slot] = l;
                self.d[k] -= yc * l;
                self.next_space[c] += 1;
                self.y_vals[c] = 0.0;
                self.y_marker[c] = false;
            }
            if self.d[k] == 0.0 || !self.d[k].is_finite() {
                return Err(Error::Factorization(k));
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        Ok(())
    }

    /// Solves `L D Lᵀ x = b` in place.
    pub fn solve(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..self.n {
            x[i] *= self.dinv[i];
        }
        for i in (0..self.n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.d
    }
}

/// A permuted, factorized symmetric system `M x = b`.
#[derive(Clone, Debug)]
pub struct SymmetricSolver {
    perm: Vec<usize>,
    iperm: Vec<usize>,
    permuted: CscMatrix,
    diag_pos: Vec<usize>,
    factor: LdlFactor,
    work: Vec<f64>,
}

impl SymmetricSolver {
    /// Analyses and factors `upper` (upper triangle of `M`) under `perm`.
    pub fn new(upper: &CscMatrix, perm: Vec<usize>) -> Result<Self> {
        let iperm = invert_permutation(&perm);
        let (permuted, diag_pos) = permute_upper(upper, &iperm);
        let mut factor = LdlFactor::symbolic(&permuted)?;
        factor.numeric(&permuted)?;
        let n = upper.ncols;
        Ok(Self {
            perm,
            iperm,
            permuted,
            diag_pos,
            factor,
            work: vec![0.0; n],
        })
    }

    /// Overwrites diagonal entries (original indexing) and refactors.
    pub fn update_diagonal(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<()> {
        for (i, v) in entries {
            self.permuted.values[self.diag_pos[i]] = v;
        }
        self.factor.numeric(&self.permuted)
    }

    pub fn solve(&mut self, b: &mut [f64]) {
        for (new, &old) in self.perm.iter().enumerate() {
            self.work[new] = b[old];
        }
        self.factor.solve(&mut self.work);
        for (old, &new) in self.iperm.iter().enumerate() {
            b[old] = self.work[new];
        }
    }

    pub fn nnz_l(&self) -> usize {
        self.factor.nnz_l()
    }
}
