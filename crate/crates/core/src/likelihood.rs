//! Incomplete-data log-likelihoods for the deterministic and stochastic
//! signal models.  Every estimator in this crate records one of these per
//! iteration to monitor monotone ascent.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::array::{steering_matrix, DoaVector, NoiseProfile, SnapshotMatrix, SourcePowers};
use crate::error::{Error, Result};
use crate::linalg::HermitianFactor;
use crate::CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DetParams {
    pub theta: DoaVector,
    /// `M x T` source waveforms.
    pub f: CMatrix,
    pub sigma: NoiseProfile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochParams {
    pub theta: DoaVector,
    pub p: SourcePowers,
    pub sigma: NoiseProfile,
}

pub fn det_llf(params: &DetParams, v: &SnapshotMatrix) -> Result<f64> {
    let n = v.n_sensors();
    if params.sigma.len() != n {
        return Err(Error::Dimension(format!(
            "{} noise variances for {n} sensors",
            params.sigma.len()
        )));
    }
    if params.f.nrows() != params.theta.len() || params.f.ncols() != v.n_snapshots() {
        return Err(Error::Dimension(format!(
            "waveforms are {}x{}, expected {}x{}",
            params.f.nrows(),
            params.f.ncols(),
            params.theta.len(),
            v.n_snapshots()
        )));
    }
    Ok(det_llf_raw(
        params.theta.as_slice(),
        &params.f,
        params.sigma.as_slice(),
        v.matrix(),
    ))
}

pub(crate) fn det_llf_raw(theta: &[f64], f: &CMatrix, sigma: &[f64], v: &CMatrix) -> f64 {
    let n = v.nrows();
    let t = v.ncols() as f64;
    let residual = v - steering_matrix(theta, n) * f;
    let mut weighted = 0.0;
    for col in residual.column_iter() {
        for (z, s) in col.iter().zip(sigma) {
            weighted += z.norm_sqr() / s;
        }
    }
    let log_det: f64 = sigma.iter().map(|s| s.ln()).sum();
    -t * n as f64 * PI.ln() - t * log_det - weighted
}

/// `H_v = sum_m P_m d(theta_m) d(theta_m)^H + diag(sigma)`.
pub fn stoch_covariance(theta: &[f64], p: &[f64], sigma: &[f64]) -> CMatrix {
    let n = sigma.len();
    let d = steering_matrix(theta, n);
    let mut h = CMatrix::zeros(n, n);
    for (m, &pm) in p.iter().enumerate() {
        let col = d.column(m);
        h += col * col.adjoint() * Complex64::from(pm);
    }
    for (k, &s) in sigma.iter().enumerate() {
        h[(k, k)] += s;
    }
    crate::linalg::hermitize(&mut h);
    h
}

pub fn stoch_llf(params: &StochParams, r_hat: &CMatrix, t: usize) -> Result<f64> {
    let n = params.sigma.len();
    if r_hat.nrows() != n || r_hat.ncols() != n {
        return Err(Error::Dimension(format!(
            "sample covariance is {}x{}, expected {n}x{n}",
            r_hat.nrows(),
            r_hat.ncols()
        )));
    }
    if params.p.len() != params.theta.len() {
        return Err(Error::Dimension(
            "powers and angles differ in length".into(),
        ));
    }
    stoch_llf_raw(
        params.theta.as_slice(),
        params.p.as_slice(),
        params.sigma.as_slice(),
        r_hat,
        t,
    )
}

pub(crate) fn stoch_llf_raw(
    theta: &[f64],
    p: &[f64],
    sigma: &[f64],
    r_hat: &CMatrix,
    t: usize,
) -> Result<f64> {
    let n = sigma.len() as f64;
    let h = stoch_covariance(theta, p, sigma);
    let factor = HermitianFactor::new(&h)?;
    let trace = factor.solve(r_hat).trace().re;
    Ok(-(t as f64) * (n * PI.ln() + factor.ln_det() + trace))
}
