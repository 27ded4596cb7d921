//! Sparse symmetric indefinite systems and their LDL^T factorization.
//!
//! The factorization is the up-looking simplicial algorithm of the QDLDL /
//! LDL family: no numerical pivoting, so the caller supplies a symmetric
//! permutation that is pivot-safe for its block structure (the solvers order
//! dofs cell by cell with mass-carrying fields ahead of multipliers).
//! Sign-aware dynamic regularization plus iterative refinement in `resolve`
//! keep the solve robust when a pivot degenerates numerically.

use crate::error::{DdError, Result};
use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};

/// Upper triangle (including diagonal) of a symmetric matrix in CSC form.
#[derive(Debug, Clone)]
pub struct SymmCsc {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SymmCsc {
    /// Builds from triplets of either triangle; duplicates are summed and a
    /// structural zero is inserted on every missing diagonal entry.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> SymmCsc {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len() + n);
        for &(i, j, v) in triplets {
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            entries.push((c, r, v));
        }
        for d in 0..n {
            entries.push((d, d, 0.0));
        }
        entries.sort_by_key(|&(c, r, _)| (c, r));
        let mut colptr = vec![0usize; n + 1];
        let mut rowidx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last = (usize::MAX, usize::MAX);
        for (c, r, v) in entries {
            if (c, r) == last {
                *values.last_mut().unwrap() += v;
            } else {
                rowidx.push(r);
                values.push(v);
                colptr[c + 1] += 1;
                last = (c, r);
            }
        }
        for c in 0..n {
            colptr[c + 1] += colptr[c];
        }
        SymmCsc {
            n,
            colptr,
            rowidx,
            values,
        }
    }

    /// y = A x with the full symmetric matrix.
    pub fn symm_matvec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for c in 0..self.n {
            for idx in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowidx[idx];
                let v = self.values[idx];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
    }

    pub fn max_abs_diag(&self) -> f64 {
        let mut m: f64 = 0.0;
        for c in 0..self.n {
            for idx in self.colptr[c]..self.colptr[c + 1] {
                if self.rowidx[idx] == c {
                    m = m.max(self.values[idx].abs());
                }
            }
        }
        m
    }

    /// Symmetric permutation B = P A P^T, with B in upper CSC again.
    /// `perm[k]` is the original index placed at position k.
    fn permuted(&self, perm: &[usize]) -> SymmCsc {
        let n = self.n;
        let mut iperm = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }
        let mut triplets = Vec::with_capacity(self.rowidx.len());
        for c in 0..n {
            for idx in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowidx[idx];
                triplets.push((iperm[r], iperm[c], self.values[idx]));
            }
        }
        SymmCsc::from_triplets(n, &triplets)
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        // stored as a single triangle, so by construction exactly symmetric
        0.0
    }
}

/// LDL^T factors of a permuted symmetric matrix.
#[derive(Debug)]
pub struct LdlFactors {
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    pub n_regularized: usize,
    /// Original (free) indices of regularized pivots; diagnostic only.
    pub regularized_dofs: Vec<usize>,
}

/// Expected inertia sign of each diagonal entry; +1 for mass/stiffness rows,
/// -1 for multiplier rows.
pub type DSigns = Vec<i8>;

pub fn ldl_factor(a: &SymmCsc, perm: &[usize], dsigns: &[i8]) -> Result<LdlFactors> {
    let n = a.n;
    assert_eq!(perm.len(), n);
    assert_eq!(dsigns.len(), n);
    let b = a.permuted(perm);
    let mut psigns = vec![1i8; n];
    let mut iperm = vec![0usize; n];
    for (k, &p) in perm.iter().enumerate() {
        iperm[p] = k;
    }
    for i in 0..n {
        psigns[iperm[i]] = dsigns[i];
    }

    // elimination tree and column counts
    let mut etree = vec![usize::MAX; n];
    let mut lnz = vec![0usize; n];
    let mut flag = vec![usize::MAX; n];
    for j in 0..n {
        flag[j] = j;
        for idx in b.colptr[j]..b.colptr[j + 1] {
            let mut i = b.rowidx[idx];
            if i >= j {
                continue;
            }
            while flag[i] != j {
                if etree[i] == usize::MAX {
                    etree[i] = j;
                }
                lnz[i] += 1;
                flag[i] = j;
                i = etree[i];
                if i == usize::MAX {
                    break;
                }
            }
        }
    }

    let nnz: usize = lnz.iter().sum();
    let mut lp = vec![0usize; n + 1];
    for i in 0..n {
        lp[i + 1] = lp[i] + lnz[i];
    }
    let mut li = vec![0usize; nnz];
    let mut lx = vec![0.0f64; nnz];
    let mut d = vec![0.0f64; n];
    let mut next_slot = lp[..n].to_vec();

    let scale = b.max_abs_diag().max(1.0);
    let reg_eps = 1e-13 * scale;
    let reg_delta = 1e-10 * scale;
    let mut n_regularized = 0usize;
    let mut regularized_dofs: Vec<usize> = Vec::new();

    // up-looking factorization, one row of L per step
    let mut y_val = vec![0.0f64; n];
    let mut y_mark = vec![false; n];
    let mut pattern = vec![0usize; n];
    let mut stack = vec![0usize; n];
    for k in 0..n {
        let mut np = 0;
        d[k] = 0.0;
        for idx in b.colptr[k]..b.colptr[k + 1] {
            let i = b.rowidx[idx];
            if i == k {
                d[k] = b.values[idx];
                continue;
            }
            debug_assert!(i < k);
            y_val[i] = b.values[idx];
            if !y_mark[i] {
                y_mark[i] = true;
                stack[0] = i;
                let mut depth = 1;
                let mut t = etree[i];
                while t != usize::MAX && t < k && !y_mark[t] {
                    y_mark[t] = true;
                    stack[depth] = t;
                    depth += 1;
                    t = etree[t];
                }
                while depth > 0 {
                    depth -= 1;
                    pattern[np] = stack[depth];
                    np += 1;
                }
            }
        }
        // topological order: eliminate in reverse of the pattern buffer
        for &cidx in pattern[..np].iter().rev() {
            let yv = y_val[cidx];
            for idx in lp[cidx]..next_slot[cidx] {
                y_val[li[idx]] -= lx[idx] * yv;
            }
            let lkj = yv / d[cidx];
            let slot = next_slot[cidx];
            li[slot] = k;
            lx[slot] = lkj;
            next_slot[cidx] += 1;
            d[k] -= yv * lkj;
            y_val[cidx] = 0.0;
            y_mark[cidx] = false;
        }
        // an exactly zero pivot means a fully decoupled dof (missing BC or
        // inf-sup violation); degenerate-but-nonzero pivots are regularized
        // and repaired by iterative refinement
        if d[k] == 0.0 {
            return Err(DdError::ZeroPivot { dof: perm[k] });
        }
        let sign = psigns[k] as f64;
        if !d[k].is_finite() {
            return Err(DdError::ZeroPivot { dof: perm[k] });
        }
        if d[k] * sign < reg_eps {
            d[k] = reg_delta * sign;
            n_regularized += 1;
            regularized_dofs.push(perm[k]);
        }
    }

    Ok(LdlFactors {
        perm: perm.to_vec(),
        lp,
        li,
        lx,
        d,
        n_regularized,
        regularized_dofs,
    })
}

impl LdlFactors {
    /// Solves A x = b given the factors of P A P^T.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut y = vec![0.0; n];
        for k in 0..n {
            y[k] = b[self.perm[k]];
        }
        for k in 0..n {
            let yk = y[k];
            for idx in self.lp[k]..self.lp[k + 1] {
                y[self.li[idx]] -= self.lx[idx] * yk;
            }
        }
        for k in 0..n {
            y[k] /= self.d[k];
        }
        for k in (0..n).rev() {
            let mut acc = y[k];
            for idx in self.lp[k]..self.lp[k + 1] {
                acc -= self.lx[idx] * y[self.li[idx]];
            }
            y[k] = acc;
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.perm[k]] = y[k];
        }
        x
    }
}

/// Assembled symmetric block system over free dofs, with a reusable
/// factorization and solve/factor counters.
#[derive(Debug)]
pub struct LinearSystem {
    pub matrix: SymmCsc,
    pub layout: Vec<(String, Range<usize>)>,
    perm: Vec<usize>,
    dsigns: DSigns,
    factors: Option<LdlFactors>,
    pub factor_count: AtomicUsize,
    pub resolve_count: AtomicUsize,
}

impl LinearSystem {
    pub fn new(
        matrix: SymmCsc,
        layout: Vec<(String, Range<usize>)>,
        perm: Vec<usize>,
        dsigns: DSigns,
    ) -> LinearSystem {
        LinearSystem {
            matrix,
            layout,
            perm,
            dsigns,
            factors: None,
            factor_count: AtomicUsize::new(0),
            resolve_count: AtomicUsize::new(0),
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.n
    }

    /// Direct factorization; reusable for many right-hand sides.
    pub fn factor(&mut self) -> Result<()> {
        let f = ldl_factor(&self.matrix, &self.perm, &self.dsigns)?;
        self.factors = Some(f);
        self.factor_count.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    pub fn is_factored(&self) -> bool {
        self.factors.is_some()
    }

    pub fn n_regularized(&self) -> usize {
        self.factors.as_ref().map_or(0, |f| f.n_regularized)
    }

    /// Free-dof indices whose pivots were regularized, with the owning block
    /// name from the layout.
    pub fn regularized_dofs(&self) -> Vec<(usize, String)> {
        let Some(f) = self.factors.as_ref() else { return vec![] };
        f.regularized_dofs
            .iter()
            .map(|&d| {
                let name = self
                    .layout
                    .iter()
                    .find(|(_, r)| r.contains(&d))
                    .map(|(n, _)| n.clone())
                    .unwrap_or_else(|| "?".into());
                (d, name)
            })
            .collect()
    }

    /// Solves with the stored factorization plus two steps of iterative
    /// refinement against the unperturbed matrix.
    pub fn resolve(&self, rhs: &[f64]) -> Vec<f64> {
        let f = self.factors.as_ref().expect("system not factored");
        self.resolve_count.fetch_add(1, Ordering::Relaxed);
        let mut x = f.solve(rhs);
        let mut r = vec![0.0; self.n()];
        for _ in 0..2 {
            self.matrix.symm_matvec(&x, &mut r);
            for i in 0..self.n() {
                r[i] = rhs[i] - r[i];
            }
            let dx = f.solve(&r);
            for i in 0..self.n() {
                x[i] += dx[i];
            }
        }
        x
    }

    /// Relative residual norm ||Ax - b|| / ||b||.
    pub fn residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n()];
        self.matrix.symm_matvec(x, &mut ax);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.n() {
            num += (ax[i] - rhs[i]) * (ax[i] - rhs[i]);
            den += rhs[i] * rhs[i];
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}
