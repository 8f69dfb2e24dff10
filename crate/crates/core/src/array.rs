//! Uniform linear array model with half-wavelength spacing.
//!
//! The received snapshot at time `t` is `v(t) = D(theta) f(t) + z(t)` where the
//! columns of `D` are steering vectors and `z(t)` is circular complex Gaussian
//! noise with a diagonal (per-sensor) covariance.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::{CMatrix, CVector};

/// Per-sensor noise variances used in every experiment of the reference study.
pub const REFERENCE_NOISE: [f64; 10] = [1.1, 2.3, 3.0, 4.2, 1.3, 0.5, 5.0, 2.2, 6.7, 10.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArrayConfig {
    n_sensors: usize,
}

impl ArrayConfig {
    pub fn new(n_sensors: usize) -> Result<Self> {
        if n_sensors < 2 {
            return Err(Error::InvalidParameter(format!(
                "array needs at least 2 sensors, got {n_sensors}"
            )));
        }
        Ok(Self { n_sensors })
    }

    pub fn n_sensors(&self) -> usize {
        self.n_sensors
    }

    pub fn steering_matrix(&self, theta: &DoaVector) -> CMatrix {
        steering_matrix(theta.as_slice(), self.n_sensors)
    }
}

/// Source bearings in radians, each strictly inside `(0, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaVector(Vec<f64>);

impl DoaVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidParameter("DOA vector is empty".into()));
        }
        for &angle in &theta {
            check_angle(angle)?;
        }
        Ok(Self(theta))
    }

    pub fn from_degrees(deg: &[f64]) -> Result<Self> {
        Self::new(deg.iter().map(|d| d.to_radians()).collect())
    }

    /// Caller guarantees every angle is inside `(0, pi)`.
    pub(crate) fn from_raw(theta: Vec<f64>) -> Self {
        debug_assert!(theta.iter().all(|&a| a > 0.0 && a < PI));
        Self(theta)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_degrees(&self) -> Vec<f64> {
        self.0.iter().map(|a| a.to_degrees()).collect()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Per-sensor noise variances `sigma_n > 0` (total complex variance).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProfile(Vec<f64>);

impl NoiseProfile {
    pub fn new(sigma: Vec<f64>) -> Result<Self> {
        if sigma.is_empty() {
            return Err(Error::InvalidParameter("noise profile is empty".into()));
        }
        for (index, &value) in sigma.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveVariance { index, value });
            }
        }
        Ok(Self(sigma))
    }

    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn reference() -> Self {
        Self(REFERENCE_NOISE.to_vec())
    }

    pub(crate) fn from_raw(sigma: Vec<f64>) -> Self {
        debug_assert!(sigma.iter().all(|&s| s > 0.0));
        Self(sigma)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Deterministic-model split of the noise over sources: an `N x M` matrix of
/// per-source variances whose row sums give the total per-sensor variance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseShares(DMatrix<f64>);

impl NoiseShares {
    pub fn new(shares: DMatrix<f64>) -> Result<Self> {
        if shares.ncols() == 0 || shares.nrows() == 0 {
            return Err(Error::InvalidParameter("noise shares are empty".into()));
        }
        for (k, &value) in shares.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveVariance {
                    index: k % shares.nrows(),
                    value,
                });
            }
        }
        Ok(Self(shares))
    }

    /// Constant share `value` for every sensor and source.
    pub fn constant(n: usize, m: usize, value: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(n, m, value))
    }

    /// Splits `sigma` evenly over `m` sources.
    pub fn even(sigma: &NoiseProfile, m: usize) -> Self {
        let n = sigma.len();
        Self(DMatrix::from_fn(n, m, |r, _| sigma.0[r] / m as f64))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Total per-sensor variance (row sums).
    pub fn total(&self) -> NoiseProfile {
        NoiseProfile::from_raw(self.0.row_iter().map(|r| r.sum()).collect())
    }
}

/// Stochastic-model split weights: `Sigma_m = alpha_m Sigma`, `alpha > 0`, `sum(alpha) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitWeights(Vec<f64>);

impl SplitWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidParameter(
                "split weights must be non-empty and positive".into(),
            ));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "split weights must sum to 1, got {total}"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Nonnegative source powers for the stochastic signal model.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePowers(Vec<f64>);

impl SourcePowers {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidParameter(
                "source powers must be non-empty, finite and nonnegative".into(),
            ));
        }
        Ok(Self(p))
    }

    pub(crate) fn from_raw(p: Vec<f64>) -> Self {
        Self(p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `N x T` matrix of received snapshots, one column per sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix(CMatrix);

impl SnapshotMatrix {
    pub fn new(v: CMatrix) -> Result<Self> {
        if v.ncols() == 0 || v.nrows() == 0 {
            return Err(Error::Dimension("snapshot matrix must be non-empty".into()));
        }
        if v.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidParameter(
                "snapshots contain non-finite values".into(),
            ));
        }
        Ok(Self(v))
    }

    pub fn n_sensors(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_snapshots(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

fn check_angle(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < PI {
        Ok(())
    } else {
        Err(Error::AngleOutOfRange(theta))
    }
}

/// Steering vector `[1, e^{-j pi cos theta}, ..., e^{-j (n-1) pi cos theta}]`.
pub fn steering_vector(theta: f64, n: usize) -> Result<CVector> {
    check_angle(theta)?;
    Ok(steer(theta, n))
}

/// Derivative of [`steering_vector`] with respect to `theta`.
pub fn steering_derivative(theta: f64, n: usize) -> Result<CVector> {
    check_angle(theta)?;
    Ok(steer_derivative(theta, n))
}

pub(crate) fn steer(theta: f64, n: usize) -> CVector {
    let phase = -PI * theta.cos();
    DVector::from_fn(n, |k, _| Complex64::from_polar(1.0, phase * k as f64))
}

pub(crate) fn steer_derivative(theta: f64, n: usize) -> CVector {
    let phase = -PI * theta.cos();
    let rate = PI * theta.sin();
    DVector::from_fn(n, |k, _| {
        let k = k as f64;
        Complex64::new(0.0, k * rate) * Complex64::from_polar(1.0, phase * k)
    })
}

/// Steering matrix with one column per angle.
pub fn steering_matrix(theta: &[f64], n: usize) -> CMatrix {
    let mut d = CMatrix::zeros(n, theta.len());
    for (m, &angle) in theta.iter().enumerate() {
        d.set_column(m, &steer(angle, n));
    }
    d
}

/// Reproducible random stream `stream` derived from `master_seed`.
///
/// Streams of the same master seed are independent, so Monte Carlo trial `k`
/// can draw from stream `k` regardless of execution order.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Draw from `CN(0, variance)`: real and imaginary parts each have variance `variance / 2`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * x, scale * y)
}

/// `M x T` source waveforms with `f_m(t) ~ CN(0, p_m)`.
pub fn random_waveforms<R: Rng + ?Sized>(rng: &mut R, powers: &[f64], t: usize) -> CMatrix {
    let mut f = CMatrix::zeros(powers.len(), t);
    for col in 0..t {
        for (m, &p) in powers.iter().enumerate() {
            f[(m, col)] = complex_gaussian(rng, p);
        }
    }
    f
}

pub fn generate_deterministic_snapshots(
    theta: &DoaVector,
    f: &CMatrix,
    sigma: &NoiseProfile,
    seed: u64,
) -> Result<SnapshotMatrix> {
    deterministic_snapshots_with(&mut stream_rng(seed, 0), theta, f, sigma)
}

pub fn deterministic_snapshots_with<R: Rng + ?Sized>(
    rng: &mut R,
    theta: &DoaVector,
    f: &CMatrix,
    sigma: &NoiseProfile,
) -> Result<SnapshotMatrix> {
    if f.nrows() != theta.len() {
        return Err(Error::Dimension(format!(
            "waveform matrix has {} rows for {} sources",
            f.nrows(),
            theta.len()
        )));
    }
    let n = sigma.len();
    let d = steering_matrix(theta.as_slice(), n);
    let mut v = &d * f;
    for col in 0..v.ncols() {
        for (row, &s) in sigma.as_slice().iter().enumerate() {
            v[(row, col)] += complex_gaussian(rng, s);
        }
    }
    SnapshotMatrix::new(v)
}

pub fn generate_stochastic_snapshots(
    theta: &DoaVector,
    p: &SourcePowers,
    sigma: &NoiseProfile,
    t: usize,
    seed: u64,
) -> Result<SnapshotMatrix> {
    stochastic_snapshots_with(&mut stream_rng(seed, 0), theta, p, sigma, t)
}

pub fn stochastic_snapshots_with<R: Rng + ?Sized>(
    rng: &mut R,
    theta: &DoaVector,
    p: &SourcePowers,
    sigma: &NoiseProfile,
    t: usize,
) -> Result<SnapshotMatrix> {
    if p.len() != theta.len() {
        return Err(Error::Dimension(format!(
            "{} powers for {} sources",
            p.len(),
            theta.len()
        )));
    }
    if t == 0 {
        return Err(Error::Dimension("snapshot count must be positive".into()));
    }
    let n = sigma.len();
    let d = steering_matrix(theta.as_slice(), n);
    let mut v = CMatrix::zeros(n, t);
    let mut f = CVector::zeros(p.len());
    for col in 0..t {
        for (m, &pm) in p.as_slice().iter().enumerate() {
            f[m] = complex_gaussian(rng, pm);
        }
        let mut column = &d * &f;
        for (row, &s) in sigma.as_slice().iter().enumerate() {
            column[row] += complex_gaussian(rng, s);
        }
        v.set_column(col, &column);
    }
    SnapshotMatrix::new(v)
}

/// `(1/T) V V^H`, Hermitian by construction.
pub fn sample_covariance(v: &SnapshotMatrix) -> CMatrix {
    let x = v.matrix();
    let mut r = x * x.adjoint() / Complex64::from(x.ncols() as f64);
    crate::linalg::hermitize(&mut r);
    r
}
