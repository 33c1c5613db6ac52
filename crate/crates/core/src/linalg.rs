//! Block-sparse linear algebra for the implicit stages.
//!
//! The Newton systems couple cells through m x m blocks on a fixed sparsity
//! pattern (face neighbors for the predictor, stencil unions for the
//! corrector). They are solved either by restarted GMRES with a block ILU(0)
//! preconditioner, or by a dense LU path on small meshes that doubles as the
//! oracle for the iterative solver.

use nalgebra::{DMatrix, DVector, SMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinearError {
    #[error("GMRES did not reach tolerance {tol:.3e} in {iters} iterations (residual {residual:.3e})")]
    NotConverged {
        iters: usize,
        tol: f64,
        residual: f64,
    },
    #[error("singular diagonal block in row {0}")]
    SingularDiagonal(usize),
    #[error("dense factorization failed")]
    DenseFactorization,
}

/// Block-row sparsity with sorted column indices and a guaranteed diagonal.
#[derive(Debug, Clone)]
pub struct SparsityPattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub diag: Vec<usize>,
}

impl SparsityPattern {
    pub fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.push(r);
            row.sort_unstable();
            row.dedup();
            diag.push(cols.len() + row.binary_search(&r).unwrap());
            cols.extend_from_slice(&row);
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            diag,
        }
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Index of entry (r, c) in the value array, if present.
    pub fn find(&self, r: usize, c: usize) -> Option<usize> {
        let base = self.row_ptr[r];
        self.row(r).binary_search(&c).ok().map(|k| base + k)
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }
}

/// Block compressed-sparse-row matrix with `M x M` dense blocks.
pub struct BlockCsr<const M: usize> {
    pub pattern: SparsityPattern,
    pub blocks: Vec<SMatrix<f64, M, M>>,
}

impl<const M: usize> BlockCsr<M> {
    pub fn zeros(pattern: SparsityPattern) -> Self {
        let nnz = pattern.nnz();
        Self {
            pattern,
            blocks: vec![SMatrix::zeros(); nnz],
        }
    }

    pub fn reset(&mut self) {
        for b in &mut self.blocks {
            *b = SMatrix::zeros();
        }
    }

    /// Accumulate into block (r, c); the entry must exist in the pattern.
    pub fn add_block(&mut self, r: usize, c: usize, b: &SMatrix<f64, M, M>) {
        let k = self
            .pattern
            .find(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) outside the sparsity pattern"));
        self.blocks[k] += b;
    }

    pub fn add_diagonal(&mut self, r: usize, b: &SMatrix<f64, M, M>) {
        self.blocks[self.pattern.diag[r]] += b;
    }

    pub fn n_unknowns(&self) -> usize {
        self.pattern.n * M
    }

    /// y = A x on flat vectors of length `n * M`.
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) {
        let n = self.pattern.n;
        for r in 0..n {
            let mut acc = [0.0; M];
            for k in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                let c = self.pattern.cols[k];
                let b = &self.blocks[k];
                let xc = &x[c * M..(c + 1) * M];
                for i in 0..M {
                    let mut s = 0.0;
                    for j in 0..M {
                        s += b[(i, j)] * xc[j];
                    }
                    acc[i] += s;
                }
            }
            y[r * M..(r + 1) * M].copy_from_slice(&acc);
        }
    }

    /// Dense copy for direct solves and oracle comparisons.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.pattern.n * M;
        let mut out = DMatrix::zeros(n, n);
        for r in 0..self.pattern.n {
            for k in self.pattern.row_ptr[r]..self.pattern.row_ptr[r + 1] {
                let c = self.pattern.cols[k];
                let b = &self.blocks[k];
                for i in 0..M {
                    for j in 0..M {
                        out[(r * M + i, c * M + j)] = b[(i, j)];
                    }
                }
            }
        }
        out
    }
}

/// Block ILU(0): incomplete LU with no fill beyond the pattern, with the
/// pivot blocks inverted once.
pub struct BlockIlu0<const M: usize> {
    pattern: SparsityPattern,
    factors: Vec<SMatrix<f64, M, M>>,
    inv_diag: Vec<SMatrix<f64, M, M>>,
}

impl<const M: usize> BlockIlu0<M> {
    pub fn factor(mat: &BlockCsr<M>) -> Result<Self, LinearError> {
        let pattern = mat.pattern.clone();
        let mut f = mat.blocks.clone();
        let n = pattern.n;
        let mut inv_diag: Vec<SMatrix<f64, M, M>> = Vec::with_capacity(n);
        for i in 0..n {
            let (start, end) = (pattern.row_ptr[i], pattern.row_ptr[i + 1]);
            for kk in start..end {
                let k = pattern.cols[kk];
                if k >= i {
                    break;
                }
                // L(i,k) = A(i,k) * inv(U(k,k))
                let lik = f[kk] * inv_diag[k];
                f[kk] = lik;
                for jj in kk + 1..end {
                    let j = pattern.cols[jj];
                    if let Some(kj) = pattern.find(k, j) {
                        let update = lik * f[kj];
                        f[jj] -= update;
                    }
                }
            }
            let d = f[pattern.diag[i]];
            let inv = d
                .try_inverse()
                .ok_or(LinearError::SingularDiagonal(i))?;
            inv_diag.push(inv);
        }
        Ok(Self {
            pattern,
            factors: f,
            inv_diag,
        })
    }

    /// Solve M z = r with the incomplete factors.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.pattern.n;
        z.copy_from_slice(r);
        // forward: (I + L) y = r
        for i in 0..n {
            let mut acc = [0.0; M];
            for kk in self.pattern.row_ptr[i]..self.pattern.row_ptr[i + 1] {
                let k = self.pattern.cols[kk];
                if k >= i {
                    break;
                }
                let b = &self.factors[kk];
                let zk = &z[k * M..(k + 1) * M];
                for a in 0..M {
                    for c in 0..M {
                        acc[a] += b[(a, c)] * zk[c];
                    }
                }
            }
            for a in 0..M {
                z[i * M + a] -= acc[a];
            }
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let mut acc = [0.0; M];
            for kk in self.pattern.diag[i] + 1..self.pattern.row_ptr[i + 1] {
                let j = self.pattern.cols[kk];
                let b = &self.factors[kk];
                let zj = &z[j * M..(j + 1) * M];
                for a in 0..M {
                    for c in 0..M {
                        acc[a] += b[(a, c)] * zj[c];
                    }
                }
            }
            let inv = &self.inv_diag[i];
            let mut xi = [0.0; M];
            for a in 0..M {
                let mut s = 0.0;
                for c in 0..M {
                    s += inv[(a, c)] * (z[i * M + c] - acc[c]);
                }
                xi[a] = s;
            }
            z[i * M..(i + 1) * M].copy_from_slice(&xi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolverKind {
    /// Dense on small systems, GMRES + ILU(0) otherwise.
    Auto,
    Dense,
    Gmres,
}

#[derive(Debug, Clone, Copy)]
pub struct LinearSolverConfig {
    pub kind: LinearSolverKind,
    /// Relative residual target of the inexact Newton linear solves.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Cell count at or below which `Auto` picks the dense path.
    pub dense_threshold: usize,
}

impl Default for LinearSolverConfig {
    fn default() -> Self {
        Self {
            kind: LinearSolverKind::Auto,
            rel_tol: 1e-3,
            max_iter: 400,
            restart: 40,
            dense_threshold: 512,
        }
    }
}

/// Solve `A x = b`, dispatching on the configured solver kind.
pub fn solve_block_system<const M: usize>(
    mat: &BlockCsr<M>,
    rhs: &[f64],
    cfg: &LinearSolverConfig,
) -> Result<Vec<f64>, LinearError> {
    let dense = match cfg.kind {
        LinearSolverKind::Dense => true,
        LinearSolverKind::Gmres => false,
        LinearSolverKind::Auto => mat.pattern.n <= cfg.dense_threshold,
    };
    if dense {
        solve_dense(mat, rhs)
    } else {
        let ilu = BlockIlu0::factor(mat)?;
        gmres(mat, rhs, &ilu, cfg)
    }
}

pub fn solve_dense<const M: usize>(
    mat: &BlockCsr<M>,
    rhs: &[f64],
) -> Result<Vec<f64>, LinearError> {
    let a = mat.to_dense();
    let b = DVector::from_column_slice(rhs);
    let lu = a.lu();
    let x = lu.solve(&b).ok_or(LinearError::DenseFactorization)?;
    Ok(x.as_slice().to_vec())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Right-preconditioned restarted GMRES.
pub fn gmres<const M: usize>(
    mat: &BlockCsr<M>,
    rhs: &[f64],
    precond: &BlockIlu0<M>,
    cfg: &LinearSolverConfig,
) -> Result<Vec<f64>, LinearError> {
    let n = mat.n_unknowns();
    let b_norm = norm(rhs);
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let tol = cfg.rel_tol * b_norm;
    let m = cfg.restart.max(1);
    let mut x = vec![0.0; n];
    let mut total_iters = 0usize;
    let mut residual = vec![0.0; n];
    let mut last_res = b_norm;

    while total_iters < cfg.max_iter {
        // r = b - A x
        mat.spmv(&x, &mut residual);
        for k in 0..n {
            residual[k] = rhs[k] - residual[k];
        }
        let beta = norm(&residual);
        last_res = beta;
        if beta <= tol {
            return Ok(x);
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(residual.iter().map(|r| r / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;

        for k in 0..m {
            if total_iters >= cfg.max_iter {
                break;
            }
            total_iters += 1;
            // w = A M^-1 v_k
            let mut z = vec![0.0; n];
            precond.apply(&basis[k], &mut z);
            let mut w = vec![0.0; n];
            mat.spmv(&z, &mut w);
            // modified Gram-Schmidt
            for j in 0..=k {
                let hjk: f64 = w.iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
                h[j][k] = hjk;
                for (wi, vj) in w.iter_mut().zip(&basis[j]) {
                    *wi -= hjk * vj;
                }
            }
            let hk1 = norm(&w);
            h[k + 1][k] = hk1;
            // apply previous Givens rotations to the new column
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + hk1 * hk1).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = hk1 / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            last_res = g[k + 1].abs();
            if hk1 == 0.0 || last_res <= tol {
                break;
            }
            basis.push(w.iter().map(|wi| wi / hk1).collect());
        }

        if k_used == 0 {
            break;
        }
        // back substitution for the Hessenberg least squares
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        // x += M^-1 (V y)
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, v) in update.iter_mut().zip(&basis[j]) {
                *u += yj * v;
            }
        }
        let mut z = vec![0.0; n];
        precond.apply(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        if last_res <= tol {
            return Ok(x);
        }
    }

    // final residual check
    let mut r = vec![0.0; n];
    mat.spmv(&x, &mut r);
    for k in 0..n {
        r[k] = rhs[k] - r[k];
    }
    let res = norm(&r);
    if res <= tol {
        Ok(x)
    } else {
        Err(LinearError::NotConverged {
            iters: total_iters,
            tol,
            residual: res,
        })
    }
}
