//! Linearized reconstructions: truncated SVD of `S` (`dsigma_S`), the
//! weighted penalty system `B = (S; beta W)` (`dsigma_B`) and the augmented
//! system `A = (S; alpha W^{-1})` with right side `(dV; alpha W^{-1} S^+ dV)`
//! (`dsigma_A`).
//!
//! The stacked systems are solved through the eigen-decomposition of their
//! normal matrices `S^T S + D^2`. With right vectors `v_t` and singular values
//! `l_t` of the stacked matrix `M`, `<b, u_t> / l_t = <M^T b, v_t> / l_t^2`,
//! so the truncated sums need no tall SVD.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
// Unused when a dependency links std and the inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use crate::forward::DifferenceData;
use crate::sensitivity::SensitivityMatrix;
use crate::{Error, Result};

/// Default truncation level of `dsigma_S`.
pub const DEFAULT_T0: usize = 64;
/// Default relative singular value threshold of `dsigma_B`.
pub const DEFAULT_RHO: f64 = 1e-3;
/// Default weight of the `W^{-1}` block.
pub const DEFAULT_ALPHA: f64 = 1.0;
/// `W^{-1}` entries are capped at this multiple of `1 / median(w)`.
pub const INVERSE_WEIGHT_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationRule {
    /// Keep the `t` leading singular values (clamped to the rank).
    Fixed(usize),
    /// Keep every `l_t` with `l_t / l_1 >= rho`.
    Relative(f64),
}

impl TruncationRule {
    fn level(&self, singular_values: &[f64], rank: usize) -> Result<usize> {
        match *self {
            TruncationRule::Fixed(t) => Ok(t.min(rank)),
            TruncationRule::Relative(rho) => {
                if !(rho > 0.0 && rho <= 1.0) {
                    return Err(Error::param("rho", format!("must lie in (0, 1], got {rho}")));
                }
                let top = singular_values[0];
                Ok(singular_values[..rank].iter().take_while(|&&l| l >= rho * top).count())
            }
        }
    }
}

/// Singular triplets sorted by decreasing singular value.
#[derive(Debug, Clone)]
pub struct TsvdFactors {
    pub singular_values: Vec<f64>,
    /// Left vectors as columns.
    pub u: DMatrix<f64>,
    /// Right vectors as columns.
    pub v: DMatrix<f64>,
    /// Numerical rank: `l_t > max(m, n) * eps * l_1`.
    pub rank: usize,
}

impl TsvdFactors {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::EmptyMatrix);
        }
        if let Some(i) = m.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        let svd = SVD::new(m.clone(), true, true);
        let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
        let u = DMatrix::from_fn(m.nrows(), order.len(), |r, c| u[(r, order[c])]);
        let v = DMatrix::from_fn(m.ncols(), order.len(), |r, c| vt[(order[c], r)]);
        let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * singular_values[0];
        let rank = singular_values.iter().take_while(|&&l| l > tol).count();
        let f = TsvdFactors { singular_values, u, v, rank };
        let error = (f.truncated_product(f.u.ncols()) - m).amax();
        if !(error <= 1e-8 * f.singular_values[0]) {
            return Err(Error::InaccurateSvd { error });
        }
        Ok(f)
    }

    /// `sum_{t < level} l_t^{-1} <b, u_t> v_t`
    pub fn solve(&self, b: &DVector<f64>, level: usize) -> Result<DVector<f64>> {
        if b.len() != self.u.nrows() {
            return Err(Error::ShapeMismatch(format!("right side of length {} for {} rows", b.len(), self.u.nrows())));
        }
        let level = level.min(self.rank);
        let coeffs = self.u.columns(0, level).tr_mul(b);
        let mut x = DVector::zeros(self.v.nrows());
        for t in 0..level {
            x.axpy(coeffs[t] / self.singular_values[t], &self.v.column(t), 1.0);
        }
        Ok(x)
    }

    /// Rank-`level` pseudo-inverse as a dense matrix.
    pub fn pseudo_inverse(&self, level: usize) -> DMatrix<f64> {
        let level = level.min(self.rank);
        let mut vs = self.v.columns(0, level).into_owned();
        for t in 0..level {
            vs.column_mut(t).unscale_mut(self.singular_values[t]);
        }
        vs * self.u.columns(0, level).transpose()
    }

    /// Rank-`level` approximation `U_t L_t V_t^T`.
    pub fn truncated_product(&self, level: usize) -> DMatrix<f64> {
        let level = level.min(self.u.ncols());
        let mut us = self.u.columns(0, level).into_owned();
        for t in 0..level {
            us.column_mut(t).scale_mut(self.singular_values[t]);
        }
        us * self.v.columns(0, level).transpose()
    }
}

/// Factorizes `m` and resolves the truncation level.
pub fn tsvd(m: &DMatrix<f64>, rule: TruncationRule) -> Result<(TsvdFactors, usize)> {
    let f = TsvdFactors::new(m)?;
    let t = rule.level(&f.singular_values, f.rank)?;
    Ok((f, t))
}

/// Right singular structure of `(S; D)` for a diagonal `D`, from the
/// eigen-decomposition of `S^T S + D^2`.
#[derive(Debug, Clone)]
struct StackedFactors {
    singular_values: Vec<f64>,
    v: DMatrix<f64>,
    rank: usize,
}

impl StackedFactors {
    fn new(gram: &DMatrix<f64>, diag: &[f64]) -> Self {
        let mut n = gram.clone();
        for (i, d) in diag.iter().enumerate() {
            n[(i, i)] += d * d;
        }
        let eig = SymmetricEigen::new(n);
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let singular_values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
        let v = DMatrix::from_fn(diag.len(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        let tol = (gram.nrows() as f64 * f64::EPSILON).sqrt() * singular_values[0];
        let rank = singular_values.iter().take_while(|&&l| l > tol).count();
        StackedFactors { singular_values, v, rank }
    }

    /// `sum_{t < level} l_t^{-2} <rhs, v_t> v_t` where `rhs = M^T b`.
    fn solve(&self, rhs: &DVector<f64>, level: usize) -> DVector<f64> {
        let level = level.min(self.rank);
        let coeffs = self.v.columns(0, level).tr_mul(rhs);
        let mut x = DVector::zeros(self.v.nrows());
        for t in 0..level {
            let l = self.singular_values[t];
            x.axpy(coeffs[t] / (l * l), &self.v.column(t), 1.0);
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Truncated SVD of `S`.
    S,
    /// Penalty system `(S; beta W)`.
    B,
    /// Augmented system `(S; alpha W^{-1})`.
    A,
    /// The weight image `w` itself.
    W1,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::S, Method::B, Method::A, Method::W1];

    pub fn name(&self) -> &'static str {
        match self {
            Method::S => "S",
            Method::B => "B",
            Method::A => "A",
            Method::W1 => "W1",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub delta_sigma: Vec<f64>,
    pub method: Method,
    /// `t0`, `t1` or `t2` for `S`, `B` and `A`; zero for `W1`.
    pub truncation: usize,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub eps_zeta: Option<f64>,
    pub seed: Option<u64>,
    pub noise_level: f64,
}

impl ReconstructionResult {
    fn new(delta_sigma: DVector<f64>, method: Method, truncation: usize, data: &DifferenceData) -> Result<Self> {
        if let Some(i) = delta_sigma.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(ReconstructionResult {
            delta_sigma: delta_sigma.as_slice().to_vec(),
            method,
            truncation,
            alpha: None,
            beta: None,
            eps_zeta: None,
            seed: data.seed,
            noise_level: data.noise_level,
        })
    }

    /// Wraps the weight image as a result.
    pub fn weight_image(w: &[f64], eps_zeta: f64, data: &DifferenceData) -> Result<Self> {
        let mut r = Self::new(DVector::from_column_slice(w), Method::W1, 0, data)?;
        r.eps_zeta = Some(eps_zeta);
        Ok(r)
    }
}

/// `t2 = 2 * #{n : 1/w_n <= 1/w_min - (1/w_min - 1/w_max) / 3}`, clamped to
/// `[1, rank]`. Pixels with `w_n = 0` never qualify.
pub fn select_t2(w: &[f64], rank: usize) -> Result<usize> {
    let positive = || w.iter().copied().filter(|&x| x > 0.0);
    let w_min = positive().fold(f64::INFINITY, f64::min);
    let w_max = positive().fold(0.0, f64::max);
    if !(w_max > 0.0) {
        return Err(Error::ZeroWeights);
    }
    let (inv_min, inv_max) = (1.0 / w_min, 1.0 / w_max);
    let threshold = inv_min - (inv_min - inv_max) / 3.0;
    let count = positive().filter(|&x| 1.0 / x <= threshold).count();
    Ok((2 * count).clamp(1, rank.max(1)))
}

/// Pixels counted by [`select_t2`].
pub fn t2_selection(w: &[f64]) -> Vec<bool> {
    let w_min = w.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let (inv_min, inv_max) = (1.0 / w_min, 1.0 / w_max);
    let threshold = inv_min - (inv_min - inv_max) / 3.0;
    w.iter().map(|&x| x > 0.0 && 1.0 / x <= threshold).collect()
}

/// Twice the number of pixels whose `1/w_n` lies in the upper third of the
/// `1/w` range, clamped to `[1, rank]`. Zero weights count as `1/w = inf`
/// and are excluded from the range.
pub fn select_t2_upper_third(w: &[f64], rank: usize) -> Result<usize> {
    let positive = || w.iter().copied().filter(|&x| x > 0.0);
    let w_min = positive().fold(f64::INFINITY, f64::min);
    let w_max = positive().fold(0.0, f64::max);
    if !(w_max > 0.0) {
        return Err(Error::ZeroWeights);
    }
    let (inv_min, inv_max) = (1.0 / w_min, 1.0 / w_max);
    let threshold = inv_min - (inv_min - inv_max) / 3.0;
    let count = positive().filter(|&x| 1.0 / x >= threshold).count();
    Ok((2 * count).clamp(1, rank.max(1)))
}

/// How `dsigma_A` picks its truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum T2Rule {
    /// Explicit level, clamped to `[1, rank A]`.
    Fixed(usize),
    /// [`select_t2`].
    Formula,
    /// [`select_t2_upper_third`].
    UpperThird,
}

impl T2Rule {
    pub fn level(&self, w: &[f64], rank: usize) -> Result<usize> {
        match *self {
            T2Rule::Fixed(t) => Ok(t.clamp(1, rank.max(1))),
            T2Rule::Formula => select_t2(w, rank),
            T2Rule::UpperThird => select_t2_upper_third(w, rank),
        }
    }
}

/// Diagonal of `W^{-1}` with entries capped at `INVERSE_WEIGHT_CAP / median(w)`.
/// The median runs over positive weights when more than half are zero.
pub fn inverse_weights(w: &[f64]) -> Result<Vec<f64>> {
    check_weights(w, true)?;
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut median = sorted[sorted.len() / 2];
    if median == 0.0 {
        let positive: Vec<f64> = sorted.into_iter().filter(|&x| x > 0.0).collect();
        if positive.is_empty() {
            return Err(Error::ZeroWeights);
        }
        median = positive[positive.len() / 2];
    }
    let cap = INVERSE_WEIGHT_CAP / median;
    Ok(w.iter().map(|&x| if x > 0.0 { (1.0 / x).min(cap) } else { cap }).collect())
}

fn check_weights(w: &[f64], allow_zero: bool) -> Result<()> {
    for (pixel, &value) in w.iter().enumerate() {
        let ok = value.is_finite() && (value > 0.0 || (allow_zero && value == 0.0));
        if !ok {
            return Err(Error::NonPositiveWeight { pixel, value });
        }
    }
    Ok(())
}

/// `S` together with its SVD and Gram matrix, shared by all methods.
#[derive(Debug, Clone)]
pub struct LinearizedSystem {
    pub s: SensitivityMatrix,
    pub svd: TsvdFactors,
    gram: DMatrix<f64>,
}

impl LinearizedSystem {
    pub fn new(s: SensitivityMatrix) -> Result<Self> {
        let svd = TsvdFactors::new(&s.matrix)?;
        let gram = s.matrix.tr_mul(&s.matrix);
        Ok(LinearizedSystem { s, svd, gram })
    }

    pub fn n_pixels(&self) -> usize {
        self.s.n_pixels()
    }

    pub fn rank(&self) -> usize {
        self.svd.rank
    }

    /// Default `beta = l_1(S) / max(w)`.
    pub fn default_beta(&self, w: &[f64]) -> Result<f64> {
        let w_max = w.iter().copied().fold(0.0, f64::max);
        if !(w_max > 0.0) {
            return Err(Error::ZeroWeights);
        }
        Ok(self.svd.singular_values[0] / w_max)
    }

    fn data_vector(&self, data: &DifferenceData) -> Result<DVector<f64>> {
        if data.dv_vec.len() != self.s.matrix.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "data of length {} for S with {} rows",
                data.dv_vec.len(),
                self.s.matrix.nrows()
            )));
        }
        Ok(data.dv_vec.clone())
    }

    fn check_pixels(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n_pixels() {
            return Err(Error::ShapeMismatch(format!("{} weights for {} pixels", w.len(), self.n_pixels())));
        }
        Ok(())
    }

    /// `dsigma_S = S^+_{t0} dV`.
    pub fn reconstruct_s(&self, data: &DifferenceData, t0: usize) -> Result<ReconstructionResult> {
        if t0 > self.rank() {
            return Err(Error::param("t0", format!("{t0} exceeds rank {}", self.rank())));
        }
        let dv = self.data_vector(data)?;
        ReconstructionResult::new(self.svd.solve(&dv, t0)?, Method::S, t0, data)
    }

    /// `dsigma_B`: truncated solution of `(S; beta W) x = (dV; 0)`.
    pub fn reconstruct_b(
        &self,
        data: &DifferenceData,
        w: &[f64],
        beta: f64,
        rule: TruncationRule,
    ) -> Result<ReconstructionResult> {
        self.check_pixels(w)?;
        check_weights(w, false)?;
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", format!("must be finite and nonnegative, got {beta}")));
        }
        let dv = self.data_vector(data)?;
        let (x, t1) = if beta == 0.0 {
            let t1 = rule.level(&self.svd.singular_values, self.svd.rank)?;
            (self.svd.solve(&dv, t1)?, t1)
        } else {
            let diag: Vec<f64> = w.iter().map(|x| beta * x).collect();
            let f = StackedFactors::new(&self.gram, &diag);
            let t1 = rule.level(&f.singular_values, f.rank)?;
            (f.solve(&self.s.matrix.tr_mul(&dv), t1), t1)
        };
        let mut r = ReconstructionResult::new(x, Method::B, t1, data)?;
        r.beta = Some(beta);
        Ok(r)
    }

    /// `dsigma_A`: truncated solution of
    /// `(S; alpha W^{-1}) x = (dV; alpha W^{-1} S^+_{t0} dV)`.
    pub fn reconstruct_a(
        &self,
        data: &DifferenceData,
        w: &[f64],
        alpha: f64,
        t0: usize,
        rule: T2Rule,
    ) -> Result<ReconstructionResult> {
        self.check_pixels(w)?;
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("must be finite and nonnegative, got {alpha}")));
        }
        let winv = inverse_weights(w)?;
        let dv = self.data_vector(data)?;
        let (x, t2) = if alpha == 0.0 {
            let t2 = rule.level(w, self.rank())?;
            (self.svd.solve(&dv, t2)?, t2)
        } else {
            let diag: Vec<f64> = winv.iter().map(|x| alpha * x).collect();
            let f = StackedFactors::new(&self.gram, &diag);
            let t2 = rule.level(w, f.rank)?;
            let prior = self.svd.solve(&dv, t0)?;
            // A^T b = S^T dV + alpha^2 W^{-2} S^+ dV
            let mut rhs = self.s.matrix.tr_mul(&dv);
            for (i, d) in diag.iter().enumerate() {
                rhs[i] += d * d * prior[i];
            }
            (f.solve(&rhs, t2), t2)
        };
        let mut r = ReconstructionResult::new(x, Method::A, t2, data)?;
        r.alpha = Some(alpha);
        Ok(r)
    }

    /// Rank of `(S; alpha W^{-1})`.
    pub fn augmented_rank(&self, w: &[f64], alpha: f64) -> Result<usize> {
        self.check_pixels(w)?;
        if alpha == 0.0 {
            return Ok(self.rank());
        }
        let diag: Vec<f64> = inverse_weights(w)?.iter().map(|x| alpha * x).collect();
        Ok(StackedFactors::new(&self.gram, &diag).rank)
    }
}
