//! Small Hermitian helpers shared by the estimators.

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::CMatrix;

/// Forces exact Hermitian symmetry: averages mirrored entries and drops the
/// imaginary part of the diagonal.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factorization of a Hermitian positive definite matrix.
pub struct HermitianFactor {
    chol: Cholesky<Complex64, Dyn>,
}

impl HermitianFactor {
    pub fn new(m: &CMatrix) -> Result<Self> {
        let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
        // a negative pivot shows up as a non-real diagonal entry of L
        let l = chol.l_dirty();
        let pivots_ok = (0..l.nrows()).all(|i| {
            let d = l[(i, i)];
            d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-10 * d.re
        });
        if !pivots_ok {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { chol })
    }

    pub fn ln_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
    }

    pub fn inverse(&self) -> CMatrix {
        let mut inv = self.chol.inverse();
        hermitize(&mut inv);
        inv
    }

    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        self.chol.solve(b)
    }
}

/// Conditional second moment `A B^-1 R B^-1 A + A - A B^-1 A` of a Gaussian
/// component with covariance `A` given an observation with covariance `B` and
/// sample covariance `R`.  `b_inv` is `B^-1`.
pub(crate) fn conditional_moment(a: &CMatrix, b_inv: &CMatrix, r: &CMatrix) -> CMatrix {
    let gain = a * b_inv;
    let mut out = &gain * r * gain.adjoint() + a - &gain * a;
    hermitize(&mut out);
    out
}

/// `diag(w)^-1/2 R diag(w)^-1/2`.
pub(crate) fn whiten(r: &CMatrix, w: &[f64]) -> CMatrix {
    let scale: Vec<f64> = w.iter().map(|x| 1.0 / x.sqrt()).collect();
    CMatrix::from_fn(r.nrows(), r.ncols(), |i, j| {
        r[(i, j)] * (scale[i] * scale[j])
    })
}
