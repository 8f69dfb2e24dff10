//! Cramér-Rao lower bounds on the DOAs under nonuniform noise.
//!
//! Both bounds are in rad² per source.  The stochastic bound uses the
//! Gaussian covariance FIM over `(theta, P, sigma)`.  The deterministic bound
//! conditions on the waveforms `F`: the noise block decouples from the mean
//! block, and eliminating `F` from the mean block leaves a closed-form
//! effective information matrix for `theta`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array::{
    steer, steer_derivative, steering_matrix, DoaVector, NoiseProfile, SourcePowers,
};
use crate::error::{Error, Result};
use crate::likelihood::stoch_covariance;
use crate::linalg::HermitianFactor;
use crate::CMatrix;

/// Fisher information and the DOA block of its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherBlock {
    /// Full FIM for the stochastic model, ordered `(theta, P, sigma)`.  For
    /// the deterministic model this is the effective `theta` information
    /// after the waveforms are eliminated.
    pub fim: DMatrix<f64>,
    /// `theta` block of the inverse FIM.
    pub theta_block: DMatrix<f64>,
}

impl FisherBlock {
    /// Per-source variance bounds.
    pub fn bounds(&self) -> Vec<f64> {
        self.theta_block.diagonal().iter().copied().collect()
    }
}

fn check_scenario(theta: &DoaVector, n: usize) -> Result<()> {
    let m = theta.len();
    if m >= n {
        return Err(Error::Unidentifiable(format!("{m} sources on {n} sensors")));
    }
    let t = theta.as_slice();
    for a in 0..m {
        for b in a + 1..m {
            if t[a] == t[b] {
                return Err(Error::Unidentifiable(format!(
                    "sources {a} and {b} coincide"
                )));
            }
        }
    }
    Ok(())
}

fn invert_spd(fim: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = fim
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Unidentifiable("singular Fisher information".into()))?;
    let inv = chol.inverse();
    if inv.iter().any(|x| !x.is_finite()) {
        return Err(Error::Unidentifiable("singular Fisher information".into()));
    }
    Ok(inv)
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    // Tr(A B) without forming the product
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn stoch_fisher(
    theta: &DoaVector,
    p: &SourcePowers,
    sigma: &NoiseProfile,
    t: usize,
) -> Result<FisherBlock> {
    let n = sigma.len();
    let m = theta.len();
    if p.len() != m {
        return Err(Error::Dimension(format!(
            "{m} sources but {} powers",
            p.len()
        )));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("no snapshots".into()));
    }
    check_scenario(theta, n)?;
    if let Some(k) = p.as_slice().iter().position(|&x| !(x > 0.0)) {
        return Err(Error::Unidentifiable(format!("source {k} has zero power")));
    }

    let h = stoch_covariance(theta.as_slice(), p.as_slice(), sigma.as_slice());
    let h_inv = HermitianFactor::new(&h)?.inverse();

    // H^-1 dH/dphi_i for every parameter
    let mut scaled: Vec<CMatrix> = Vec::with_capacity(2 * m + n);
    for (&angle, &power) in theta.as_slice().iter().zip(p.as_slice()) {
        let d = steer(angle, n);
        let dd = steer_derivative(angle, n);
        let dh = (&dd * d.adjoint() + &d * dd.adjoint()) * Complex64::from(power);
        scaled.push(&h_inv * dh);
    }
    for &angle in theta.as_slice() {
        let d = steer(angle, n);
        scaled.push(&h_inv * (&d * d.adjoint()));
    }
    for k in 0..n {
        // H^-1 e_k e_k^H has column k of H^-1 and zeros elsewhere
        let mut e = CMatrix::zeros(n, n);
        e.set_column(k, &h_inv.column(k));
        scaled.push(e);
    }

    let dim = scaled.len();
    let mut fim = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = t as f64 * trace_product(&scaled[i], &scaled[j]).re;
            fim[(i, j)] = v;
            fim[(j, i)] = v;
        }
    }
    let inv = invert_spd(&fim)?;
    let theta_block = inv.view((0, 0), (m, m)).into_owned();
    Ok(FisherBlock { fim, theta_block })
}

/// Per-DOA bounds for the stochastic signal model.
pub fn stoch_crlb(
    theta: &DoaVector,
    p: &SourcePowers,
    sigma: &NoiseProfile,
    t: usize,
) -> Result<Vec<f64>> {
    Ok(stoch_fisher(theta, p, sigma, t)?.bounds())
}

pub fn det_fisher(theta: &DoaVector, f: &CMatrix, sigma: &NoiseProfile) -> Result<FisherBlock> {
    let n = sigma.len();
    let m = theta.len();
    if f.nrows() != m || f.ncols() == 0 {
        return Err(Error::Dimension(format!(
            "{m} sources but waveforms are {}x{}",
            f.nrows(),
            f.ncols()
        )));
    }
    check_scenario(theta, n)?;

    let w: Vec<f64> = sigma.as_slice().iter().map(|s| 1.0 / s.sqrt()).collect();
    let whiten = |a: CMatrix| {
        let mut a = a;
        for (k, &wk) in w.iter().enumerate() {
            a.row_mut(k).scale_mut(wk);
        }
        a
    };
    let d = whiten(steering_matrix(theta.as_slice(), n));
    let mut dd = CMatrix::zeros(n, m);
    for (k, &angle) in theta.as_slice().iter().enumerate() {
        dd.set_column(k, &steer_derivative(angle, n));
    }
    let dd = whiten(dd);

    let gram = d.adjoint() * &d;
    let gram_inv = HermitianFactor::new(&gram)
        .map_err(|_| Error::Unidentifiable("steering matrix is rank deficient".into()))?
        .inverse();
    let projected = &dd - &d * (&gram_inv * (d.adjoint() * &dd));
    let a = dd.adjoint() * projected;
    let s = f * f.adjoint();

    let mut fim = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            fim[(i, j)] = 2.0 * (a[(i, j)] * s[(j, i)]).re;
        }
    }
    let fim = (&fim + fim.transpose()) * 0.5;
    let theta_block = invert_spd(&fim)?;
    Ok(FisherBlock { fim, theta_block })
}

/// Per-DOA bounds for the deterministic signal model, conditioned on `f`.
pub fn det_crlb(theta: &DoaVector, f: &CMatrix, sigma: &NoiseProfile) -> Result<Vec<f64>> {
    Ok(det_fisher(theta, f, sigma)?.bounds())
}
