//! Sensitivity-based factorization method: the per-pixel index
//! `zeta_j^n = Phi_j^n . dV^{-1} Phi_j^n`, with `Phi_j^n` the `n`-th column of
//! the sensitivity block `S_j`, and the log-compressed weight image `w`.
//!
//! The data matrix of adjacent patterns is singular (its columns telescope
//! to zero), so `dV^{-1}` is realised as a spectrally truncated inverse of
//! the symmetric part of `dV`.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
// Unused when a dependency links std and the inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::forward::DifferenceData;
use crate::sensitivity::SensitivityMatrix;
use crate::{Error, Result};

/// Default relative eigenvalue cut-off of the data inverse.
pub const DEFAULT_EPS_ZETA: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct RegularizedDataInverse {
    pub dv_mat: DMatrix<f64>,
    /// `(dV + dV^T) / 2`
    pub symmetrized: DMatrix<f64>,
    /// Eigenvalues of the symmetrized matrix, by decreasing magnitude.
    pub eigenvalues: Vec<f64>,
    /// Matching unit eigenvectors as columns.
    pub eigenvectors: DMatrix<f64>,
    pub eps_rel: f64,
    /// Number of leading eigenpairs with `|mu| > eps_rel * |mu_max|`.
    pub retained: usize,
}

impl RegularizedDataInverse {
    pub fn dim(&self) -> usize {
        self.dv_mat.nrows()
    }

    /// Retained eigenvectors as columns.
    pub fn retained_basis(&self) -> DMatrix<f64> {
        self.eigenvectors.columns(0, self.retained).into_owned()
    }

    /// `sum_{retained} mu_i^{-1} (e_i . x) e_i`
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for i in 0..self.retained {
            let e = self.eigenvectors.column(i);
            out.axpy(e.dot(x) / self.eigenvalues[i], &e, 1.0);
        }
        out
    }

    /// `x . apply(x)` without forming the product.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        (0..self.retained)
            .map(|i| {
                let c = self.eigenvectors.column(i).dot(x);
                c * c / self.eigenvalues[i]
            })
            .sum()
    }

    /// The regularized inverse as a dense matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let b = self.retained_basis();
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.retained,
            self.eigenvalues[..self.retained].iter().map(|m| 1.0 / m),
        ));
        &b * d * b.transpose()
    }
}

/// Symmetrizes the data matrix and truncates its spectrum at
/// `eps_rel * |mu_max|`.
pub fn build_data_inverse(dv_mat: &DMatrix<f64>, eps_rel: f64) -> Result<RegularizedDataInverse> {
    if dv_mat.nrows() != dv_mat.ncols() || dv_mat.is_empty() {
        return Err(Error::ShapeMismatch(format!("data matrix must be square, got {:?}", dv_mat.shape())));
    }
    if !(0.0..1.0).contains(&eps_rel) {
        return Err(Error::param("eps_rel", format!("must lie in [0, 1), got {eps_rel}")));
    }
    let symmetrized = (dv_mat + dv_mat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(symmetrized.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].abs().total_cmp(&eig.eigenvalues[a].abs()));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(dv_mat.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let top = eigenvalues[0].abs();
    if top == 0.0 {
        return Err(Error::ZeroData);
    }
    let retained = eigenvalues.iter().take_while(|m| m.abs() > eps_rel * top).count();
    Ok(RegularizedDataInverse { dv_mat: dv_mat.clone(), symmetrized, eigenvalues, eigenvectors, eps_rel, retained })
}

pub fn build_data_inverse_from(data: &DifferenceData, eps_rel: f64) -> Result<RegularizedDataInverse> {
    build_data_inverse(&data.dv_mat, eps_rel)
}

/// `zeta` (`n_E x n_p`) and the weight image `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SfmIndexField {
    pub zeta: DMatrix<f64>,
    pub w: Vec<f64>,
}

impl SfmIndexField {
    pub fn compute(s: &SensitivityMatrix, inv: &RegularizedDataInverse) -> Result<Self> {
        let zeta = compute_zeta(s, inv)?;
        let w = compute_weights(&zeta, s)?;
        Ok(SfmIndexField { zeta, w })
    }

    /// Diagonal weight operator `W`.
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.w))
    }
}

/// `zeta[(j, n)] = Phi_j^n . dV^{-1} Phi_j^n` with `Phi_j^n = S_j e_n`.
pub fn compute_zeta(s: &SensitivityMatrix, inv: &RegularizedDataInverse) -> Result<DMatrix<f64>> {
    let ne = s.n_electrodes;
    if inv.dim() != ne {
        return Err(Error::ShapeMismatch(format!("data inverse of size {} for {ne} electrodes", inv.dim())));
    }
    // Coefficients of every block column in the retained eigenbasis.
    let basis_t = inv.retained_basis().transpose();
    let mut zeta = DMatrix::zeros(ne, s.n_pixels());
    for n in 0..s.n_pixels() {
        for j in 0..ne {
            let c = &basis_t * s.block_column(j, n);
            zeta[(j, n)] = c.iter().zip(&inv.eigenvalues).map(|(c, m)| c * c / m).sum();
        }
    }
    Ok(zeta)
}

/// `w_n = ln(1 + sum_j |zeta_j^n / (S_j^n . S_j^n)|)`.
pub fn compute_weights(zeta: &DMatrix<f64>, s: &SensitivityMatrix) -> Result<Vec<f64>> {
    if zeta.shape() != (s.n_electrodes, s.n_pixels()) {
        return Err(Error::ShapeMismatch(format!("zeta {:?} vs S with {} pixels", zeta.shape(), s.n_pixels())));
    }
    (0..s.n_pixels())
        .map(|n| {
            let mut acc = 0.0;
            for j in 0..s.n_electrodes {
                let norm2 = s.block_column(j, n).norm_squared();
                if !(norm2 > 0.0) {
                    return Err(Error::ZeroColumn { pixel: n, drive: j });
                }
                acc += (zeta[(j, n)] / norm2).abs();
            }
            Ok(acc.ln_1p())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_inverse() {
        let inv = build_data_inverse(&DMatrix::identity(4, 4), 1e-3).unwrap();
        assert_eq!(inv.retained, 4);
        assert!((inv.matrix() - DMatrix::<f64>::identity(4, 4)).amax() < 1e-14);
    }

    #[test]
    fn thresholded_spectrum() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![2.0, 1.0, 1e-9]));
        let inv = build_data_inverse(&d, 1e-3).unwrap();
        assert_eq!(inv.retained, 2);
        let expected = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![0.5, 1.0, 0.0]));
        assert!((inv.matrix() - expected).amax() < 1e-14);
    }

    #[test]
    fn inverts_full_rank_symmetric() {
        let a = DMatrix::from_fn(5, 5, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { 1.0 } else { 0.0 });
        let inv = build_data_inverse(&a, 1e-6).unwrap();
        let x = DVector::from_fn(5, |i, _| (i as f64).cos());
        assert!((inv.apply(&(&a * &x)) - &x).amax() < 1e-8);
        assert!((inv.quadratic_form(&x) - x.dot(&inv.apply(&x))).abs() < 1e-12);
    }

    #[test]
    fn negative_spectrum_by_magnitude() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![-3.0, 1.0, 1e-8]));
        let inv = build_data_inverse(&d, 1e-3).unwrap();
        assert_eq!(inv.eigenvalues[0], -3.0);
        assert_eq!(inv.retained, 2);
    }

    #[test]
    fn zero_data_fails() {
        assert_eq!(build_data_inverse(&DMatrix::zeros(3, 3), 1e-3).unwrap_err(), Error::ZeroData);
    }

    #[test]
    fn weights_from_zero_zeta() {
        let s = SensitivityMatrix { matrix: DMatrix::from_fn(4, 3, |i, j| 1.0 + (i + j) as f64), n_electrodes: 2 };
        let w = compute_weights(&DMatrix::zeros(2, 3), &s).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
        let mut z = DMatrix::zeros(2, 3);
        z[(1, 2)] = -0.5;
        let w2 = compute_weights(&z, &s).unwrap();
        assert!(w2[2] > 0.0 && w2[0] == 0.0);
    }

    #[test]
    fn zero_column_is_named() {
        let mut m = DMatrix::from_element(4, 3, 1.0);
        m[(2, 1)] = 0.0;
        m[(3, 1)] = 0.0;
        let s = SensitivityMatrix { matrix: m, n_electrodes: 2 };
        assert_eq!(compute_weights(&DMatrix::zeros(2, 3), &s), Err(Error::ZeroColumn { pixel: 1, drive: 1 }));
    }
}
