//! Minimal sparse symmetric positive-definite solver.
//!
//! The spatial sampler factors `Q/sigma^2 + Z'KZ` once per sweep. When the
//! random-effect precision `Q` is sparse (a Markov random field, a
//! nearest-neighbour approximation, a banded structure), a dense Cholesky
//! wastes both memory and time, so this module provides the one factorization
//! the sampler needs: an up-looking `L D L'` decomposition of a sparse
//! symmetric matrix in compressed-column form, kept in the natural ordering.
//! No fill-reducing permutation is applied; problems in this crate are small
//! enough that simplicity and reproducibility win over fill optimization.
//!
//! The factor supports the three operations the sampler uses:
//! `solve` (both vector and matrix right-hand sides), `log_determinant`, and
//! the half-solve `L'^{-1} D^{-1/2} z` that turns iid standard normals into a
//! draw with covariance equal to the matrix inverse.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Sparse symmetric matrix, stored as the upper triangle (including the full
/// diagonal) in compressed-column form with row indices sorted within each
/// column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymmetric {
    /// Builds the matrix from `(row, column, value)` triplets.
    ///
    /// Entries may arrive in any order and may name either triangle; an entry
    /// and its mirror image are treated as the same coefficient, and
    /// duplicates are summed. Every diagonal slot is materialized even when no
    /// triplet mentions it, so a later `scale_and_add_diagonal` always has a
    /// place to write.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("sparse matrix dimension must be >= 1"));
        }
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len() + n);
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(Error::invalid(format!(
                    "sparse entry ({i}, {j}) is outside a {n} x {n} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "sparse entry ({i}, {j}) has non-finite value {v}"
                )));
            }
            // Fold everything onto the upper triangle.
            let (r, c) = if i <= j { (i, j) } else { (j, i) };
            entries.push((c, r, v));
        }
        for j in 0..n {
            entries.push((j, j, 0.0));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut counts = vec![0usize; n];
        let mut row_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (c, r, v) in entries {
            if last == Some((c, r)) {
                *values.last_mut().expect("a duplicate follows a stored entry") += v;
            } else {
                row_idx.push(r);
                values.push(v);
                counts[c] += 1;
                last = Some((c, r));
            }
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + counts[j];
        }
        Ok(Self {
            n,
            col_ptr,
            row_idx,
            values,
        })
    }

    /// Matrix dimension.
    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Number of stored coefficients (upper triangle including the diagonal).
    pub fn stored_entries(&self) -> usize {
        self.row_idx.len()
    }

    /// Returns `scale * self` with `extra[j]` added to each diagonal entry.
    ///
    /// This is the per-sweep update of the sampler: the random-effect
    /// precision is rescaled by `1/sigma_u^2` and the augmentation weights
    /// land on the diagonal. The sparsity pattern is unchanged.
    pub fn scale_and_add_diagonal(&self, scale: f64, extra: &DVector<f64>) -> Result<Self> {
        if extra.len() != self.n {
            return Err(Error::invalid(format!(
                "diagonal update has length {} but the matrix is {} x {}",
                extra.len(),
                self.n,
                self.n
            )));
        }
        if !scale.is_finite() {
            return Err(Error::invalid(format!("scale must be finite, got {scale}")));
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= scale;
        }
        for j in 0..self.n {
            // The diagonal is the last entry of column j in upper storage.
            let p = out.col_ptr[j + 1] - 1;
            debug_assert_eq!(out.row_idx[p], j);
            out.values[p] += extra[j];
        }
        Ok(out)
    }

    /// Dense copy of the full symmetric matrix (for tests and tiny problems).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                let v = self.values[p];
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        a
    }

    /// Up-looking `L D L'` factorization in the natural ordering.
    ///
    /// Fails unless the matrix is positive definite.
    pub fn factor(&self) -> Result<SparseLdl> {
        let n = self.n;
        // Symbolic pass: elimination tree and column counts of L.
        let mut parent = vec![usize::MAX; n];
        let mut flag = vec![usize::MAX; n];
        let mut l_count = vec![0usize; n];
        for j in 0..n {
            flag[j] = j;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let mut i = self.row_idx[p];
                while i < j && flag[i] != j {
                    if parent[i] == usize::MAX {
                        parent[i] = j;
                    }
                    l_count[i] += 1;
                    flag[i] = j;
                    i = parent[i];
                }
            }
        }
        let mut l_ptr = vec![0usize; n + 1];
        for j in 0..n {
            l_ptr[j + 1] = l_ptr[j] + l_count[j];
        }
        let nnz = l_ptr[n];
        let mut l_idx = vec![0usize; nnz];
        let mut l_val = vec![0f64; nnz];
        let mut diag = vec![0f64; n];
        let mut next_slot: Vec<usize> = l_ptr[..n].to_vec();
        let mut work = vec![0f64; n];
        let mut pattern = vec![0usize; n];

        for k in 0..n {
            // Scatter column k of the upper triangle into the work vector and
            // collect the nonzero pattern of row k of L by climbing the
            // elimination tree. `pattern` doubles as scratch (from the left)
            // and as the topologically ordered stack (from the right).
            let mut top = n;
            flag[k] = k;
            for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                let entry_row = self.row_idx[p];
                if entry_row > k {
                    continue;
                }
                work[entry_row] += self.values[p];
                let mut len = 0usize;
                let mut i = entry_row;
                while i < k && flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    pattern[top] = pattern[len];
                }
            }
            diag[k] = work[k];
            work[k] = 0.0;
            for s in top..n {
                let i = pattern[s];
                let y_i = work[i];
                work[i] = 0.0;
                for p in l_ptr[i]..next_slot[i] {
                    work[l_idx[p]] -= l_val[p] * y_i;
                }
                let l_ki = y_i / diag[i];
                diag[k] -= l_ki * y_i;
                l_idx[next_slot[i]] = k;
                l_val[next_slot[i]] = l_ki;
                next_slot[i] += 1;
            }
            if !(diag[k] > 0.0 && diag[k].is_finite()) {
                return Err(Error::Numeric(format!(
                    "sparse factorization failed at pivot {k}: the matrix is not positive definite"
                )));
            }
        }

        Ok(SparseLdl {
            n,
            l_ptr,
            l_idx,
            l_val,
            diag,
        })
    }
}

/// `L D L'` factor of a sparse symmetric positive-definite matrix.
///
/// `L` is unit lower triangular and stored by columns without its diagonal;
/// `diag` holds the positive pivots `D`.
#[derive(Debug, Clone)]
pub struct SparseLdl {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    diag: Vec<f64>,
}

impl SparseLdl {
    /// Matrix dimension.
    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Log-determinant of the factored matrix.
    pub fn log_determinant(&self) -> f64 {
        self.diag.iter().map(|d| d.ln()).sum()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        debug_assert_eq!(b.len(), self.n);
        for j in 0..self.n {
            let bj = b[j];
            if bj != 0.0 {
                for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                    b[self.l_idx[p]] -= self.l_val[p] * bj;
                }
            }
        }
        for j in 0..self.n {
            b[j] /= self.diag[j];
        }
        for j in (0..self.n).rev() {
            let mut s = b[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                s -= self.l_val[p] * b[self.l_idx[p]];
            }
            b[j] = s;
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            let mut x = DVector::from_column_slice(col.as_slice());
            self.solve_in_place(&mut x);
            col.copy_from(&x);
        }
        out
    }

    /// Maps iid standard normals `z` to a draw with covariance `A^{-1}`:
    /// returns `L'^{-1} D^{-1/2} z`.
    pub fn correlated_noise(&self, z: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(z.len(), self.n);
        let mut w = DVector::from_fn(self.n, |j, _| z[j] / self.diag[j].sqrt());
        for j in (0..self.n).rev() {
            let mut s = w[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                s -= self.l_val[p] * w[self.l_idx[p]];
            }
            w[j] = s;
        }
        w
    }
}
