//! Sparse symmetric matrices and an envelope (profile) Cholesky solver with
//! reverse Cuthill–McKee ordering.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
// Unused when a dependency links std and the inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Result};

/// Compressed sparse row storage of a symmetric matrix (both triangles).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from unsorted triplets; duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            cols[fill[i]] = j;
            vals[fill[i]] = v;
            fill[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            row.sort_by_key(|e| e.0);
            for &(j, v) in &row {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (self.col_idx[p], self.values[p]))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        CsrMatrix { values: self.values.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    /// Largest absolute asymmetry `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Reverse Cuthill–McKee permutation: `perm[new] = old`.
    pub fn rcm_ordering(&self) -> Vec<usize> {
        let n = self.n;
        let degree: Vec<usize> = (0..n).map(|i| self.row(i).filter(|&(j, _)| j != i).count()).collect();
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).expect("unvisited node exists");
            let root = self.pseudo_peripheral(start, &degree);
            visited[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut nbrs: Vec<usize> = self.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
                nbrs.sort_by_key(|&j| (degree[j], j));
                for j in nbrs {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        order.reverse();
        order
    }

    fn bfs_levels(&self, root: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.n];
        level[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for (j, _) in self.row(v) {
                if level[j] == usize::MAX {
                    level[j] = level[v] + 1;
                    queue.push_back(j);
                }
            }
        }
        level
    }

    fn pseudo_peripheral(&self, start: usize, degree: &[usize]) -> usize {
        let mut root = start;
        let mut ecc = 0;
        loop {
            let level = self.bfs_levels(root);
            let far = level.iter().copied().filter(|&l| l != usize::MAX).max().unwrap_or(0);
            if far <= ecc {
                return root;
            }
            ecc = far;
            root = (0..self.n).filter(|&i| level[i] == far).min_by_key(|&i| degree[i]).unwrap_or(root);
        }
    }
}

/// Cholesky factor `L` of a symmetric positive definite matrix stored by
/// rows within the envelope of the (permuted) lower triangle.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// first stored column of each row of `L`
    first: Vec<usize>,
    /// offset of row `i` in `data`; row `i` spans columns `first[i]..=i`
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors the principal submatrix of `a` on the rows/columns where
    /// `keep` is true.
    pub fn factor_submatrix(a: &CsrMatrix, keep: &[bool]) -> Result<Self> {
        let full_order = a.rcm_ordering();
        let perm: Vec<usize> = full_order.into_iter().filter(|&i| keep[i]).collect();
        let n = perm.len();
        let mut inv = vec![usize::MAX; a.dim()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, &old) in perm.iter().enumerate() {
            for (j, _) in a.row(old) {
                let jn = inv[j];
                if jn != usize::MAX && jn < first[i] {
                    first[i] = jn;
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut data = vec![0.0; total];
        for (i, &old) in perm.iter().enumerate() {
            for (j, v) in a.row(old) {
                let jn = inv[j];
                if jn != usize::MAX && jn <= i {
                    data[start[i] + jn - first[i]] += v;
                }
            }
        }
        // Row-oriented envelope Cholesky.
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = data[start[i] + j - fi];
                let ri = &data[start[i] + lo - fi..start[i] + j - fi];
                let rj = &data[start[j] + lo - fj..start[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                let d = data[start[j + 1] - 1];
                data[start[i] + j - fi] = s / d;
            }
            let row = &data[start[i]..start[i + 1] - 1];
            let diag = data[start[i + 1] - 1] - row.iter().map(|x| x * x).sum::<f64>();
            if !(diag > 0.0) {
                return Err(Error::Factorization { pivot: perm[i] });
            }
            data[start[i + 1] - 1] = diag.sqrt();
        }
        Ok(EnvelopeCholesky { n, perm, first, start, data })
    }

    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        Self::factor_submatrix(a, &vec![true; a.dim()])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solves with a right-hand side indexed by the original (kept) rows,
    /// given as a map from original index to value via `rhs(old)`; the
    /// result is written back through `out(old, value)`.
    pub fn solve_with<R, W>(&self, rhs: R, mut out: W)
    where
        R: Fn(usize) -> f64,
        W: FnMut(usize, f64),
    {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs(old)).collect();
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1] - 1];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.data[self.start[i + 1] - 1];
        }
        // L^T x = y, column-oriented over the row storage.
        for i in (0..n).rev() {
            y[i] /= self.data[self.start[i + 1] - 1];
            let xi = y[i];
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1] - 1];
            for (k, l) in row.iter().enumerate() {
                y[fi + k] -= l * xi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            out(old, y[new]);
        }
    }

    /// Solves `A x = b` for a factor of the full matrix.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; b.len()];
        self.solve_with(|i| b[i], |i, v| x[i] = v);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1D Dirichlet Laplacian (tridiagonal 2, -1), shuffled indices.
    fn laplacian(n: usize) -> CsrMatrix {
        let map = |i: usize| (i * 7) % n;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((map(i), map(i), 2.0));
            if i + 1 < n {
                t.push((map(i), map(i + 1), -1.0));
                t.push((map(i + 1), map(i), -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0), (0, 1, 4.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn rcm_narrows_shuffled_band() {
        let a = laplacian(50);
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        // A tridiagonal matrix in RCM order has envelope 2n - 1.
        assert_eq!(chol.envelope_size(), 99);
    }

    #[test]
    fn solves_spd_system() {
        let n = 50;
        let a = laplacian(n);
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.mul_vec(&x);
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        let y = chol.solve(&b);
        for i in 0..n {
            assert!((x[i] - y[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn indefinite_matrix_fails() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(EnvelopeCholesky::factor(&a).is_err());
    }
}
