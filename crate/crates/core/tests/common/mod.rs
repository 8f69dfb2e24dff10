#![allow(dead_code)]

use emdoa::array::{complex_gaussian, stream_rng};
use emdoa::CMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 99)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, var: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, var))
}

/// Random Hermitian PSD matrix of the given rank plus `floor * I`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize, floor: f64) -> CMatrix {
    let a = gaussian_matrix(rng, n, rank, 1.0);
    &a * a.adjoint() + CMatrix::identity(n, n) * c(floor)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Plain ULA steering vector, written out independently of the library.
pub fn steering(theta: f64, n: usize) -> CMatrix {
    CMatrix::from_fn(n, 1, |k, _| {
        Complex64::from_polar(1.0, -(k as f64) * std::f64::consts::PI * theta.cos())
    })
}

pub fn diag(values: &[f64]) -> CMatrix {
    let mut d = CMatrix::zeros(values.len(), values.len());
    for (k, v) in values.iter().enumerate() {
        d[(k, k)] = c(*v);
    }
    d
}

/// Generic inverse through LU, independent of the Cholesky path.
pub fn lu_inverse(m: &CMatrix) -> CMatrix {
    m.clone().lu().try_inverse().expect("invertible")
}

pub fn real_lu_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().lu().try_inverse().expect("invertible")
}

/// Conditional mean and covariance of `x ~ CN(mu, cov)` given `y = A x`.
pub fn condition(mu: &CMatrix, cov: &CMatrix, a: &CMatrix, y: &CMatrix) -> (CMatrix, CMatrix) {
    let cross = cov * a.adjoint();
    let gain = &cross * lu_inverse(&(a * &cross));
    let mean = mu + &gain * (y - a * mu);
    let cond = cov - &gain * cross.adjoint();
    (mean, cond)
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`.
pub fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo + hi) / 2.0
}

/// Maximizer of `f` on `[lo, hi]`: dense grid, then golden-section refinement
/// around the best grid point.
pub fn grid_max(lo: f64, hi: f64, step: f64, f: impl Fn(f64) -> f64) -> f64 {
    let count = ((hi - lo) / step).ceil() as usize;
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..=count {
        let x = (lo + k as f64 * step).min(hi);
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    golden_min((best.0 - step).max(lo), (best.0 + step).min(hi), |x| -f(x))
}
