//! ECM-based GEM estimator for the deterministic signal model.
//!
//! The complete data split the snapshots into one noisy component per source,
//! `g_m(t) = d(theta_m) f_m(t) + z_m(t)` with `z_m ~ CN(0, diag(sigma_m))`.
//! Each iteration runs one E-step and two conditional maximizations:
//! DOA and waveform per source with the noise shares held fixed, then the
//! damped noise-share update.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array::{steer, DoaVector, NoiseShares, SnapshotMatrix};
use crate::error::{Error, Result};
use crate::likelihood::det_llf_raw;
use crate::linalg::whiten;
use crate::line_search::{LineSearch, SearchProblem};
use crate::record::{drive, AlgorithmConfig, Iterate, TrialRecord};
use crate::{CMatrix, CVector};

#[derive(Debug, Clone, PartialEq)]
pub struct DetGemState {
    pub theta: DoaVector,
    /// `M x T` waveform estimates.
    pub f: CMatrix,
    /// `N x M` per-source noise variances.
    pub omega: NoiseShares,
    pub iteration: usize,
}

impl DetGemState {
    pub fn new(theta: DoaVector, f: CMatrix, omega: NoiseShares) -> Result<Self> {
        let m = theta.len();
        if f.nrows() != m || omega.matrix().ncols() != m {
            return Err(Error::Dimension(format!(
                "{m} sources but waveforms have {} rows and noise shares {} columns",
                f.nrows(),
                omega.matrix().ncols()
            )));
        }
        Ok(Self {
            theta,
            f,
            omega,
            iteration: 0,
        })
    }

    fn check(&self, v: &SnapshotMatrix) -> Result<()> {
        if self.omega.matrix().nrows() != v.n_sensors() || self.f.ncols() != v.n_snapshots() {
            return Err(Error::Dimension(format!(
                "state is {}x{} but snapshots are {}x{}",
                self.omega.matrix().nrows(),
                self.f.ncols(),
                v.n_sensors(),
                v.n_snapshots()
            )));
        }
        Ok(())
    }
}

/// Conditional means of the complete data and the diagonal of their
/// conditional covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct DetEStepCache {
    /// One `N x T` conditional mean per source.
    pub g: Vec<CMatrix>,
    /// `c[(n, m)] = sigma_nm (1 - sigma_nm / sigma_n)`.
    pub c: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalUpdate {
    pub theta: DoaVector,
    pub f: CMatrix,
    /// Line searches that stopped on a safety cap.
    pub search_flags: usize,
}

pub fn gem_e_step(state: &DetGemState, v: &SnapshotMatrix) -> Result<DetEStepCache> {
    state.check(v)?;
    Ok(e_step(state, v.matrix()))
}

fn e_step(state: &DetGemState, v: &CMatrix) -> DetEStepCache {
    let shares = state.omega.matrix();
    let (n, m_count) = shares.shape();
    let total: Vec<f64> = shares.row_iter().map(|r| r.sum()).collect();
    let theta = state.theta.as_slice();
    let steering: Vec<CVector> = theta.iter().map(|&a| steer(a, n)).collect();

    let mut residual = v.clone();
    for (m, d) in steering.iter().enumerate() {
        residual -= d * state.f.row(m);
    }

    let mut g = Vec::with_capacity(m_count);
    let mut c = DMatrix::zeros(n, m_count);
    for (m, d) in steering.iter().enumerate() {
        let mut gm = d * state.f.row(m);
        for row in 0..n {
            let ratio = shares[(row, m)] / total[row];
            let mut target = gm.row_mut(row);
            target += residual.row(row) * Complex64::from(ratio);
            c[(row, m)] = (shares[(row, m)] * (1.0 - ratio)).max(0.0);
        }
        g.push(gm);
    }
    DetEStepCache { g, c }
}

/// Whitened single-source fit shared by the deterministic estimators:
/// ascends `d~^H R~ d~` from `seed` and returns the new angle and waveform.
pub(crate) fn whitened_source_fit(
    g: &CMatrix,
    weights: &[f64],
    seed: f64,
    search: &LineSearch,
) -> (f64, CVector, bool) {
    let t = g.ncols() as f64;
    let r = g * g.adjoint() / Complex64::from(t);
    let r_tilde = whiten(&r, weights);
    let problem = SearchProblem::from_parts(&r_tilde, weights, seed);
    let outcome = search.ascend(&problem);
    let angle = outcome.angle;

    // f(t) = d~^H g~(t) / q = sum_n conj(d_n) g_n(t) / w_n / q
    let d = steer(angle, g.nrows());
    let q: f64 = weights.iter().map(|w| 1.0 / w).sum();
    let weighted = CVector::from_fn(g.nrows(), |k, _| d[k] / (weights[k] * q));
    let f = (weighted.adjoint() * g).transpose();
    (angle, f, outcome.flagged())
}

pub fn gem_cm_step1(
    cache: &DetEStepCache,
    state: &DetGemState,
    search: &LineSearch,
) -> SignalUpdate {
    let shares = state.omega.matrix();
    let t = cache.g[0].ncols();
    let mut theta = Vec::with_capacity(cache.g.len());
    let mut f = CMatrix::zeros(cache.g.len(), t);
    let mut search_flags = 0;
    for (m, gm) in cache.g.iter().enumerate() {
        let weights: Vec<f64> = shares.column(m).iter().copied().collect();
        let (angle, fm, flagged) =
            whitened_source_fit(gm, &weights, state.theta.as_slice()[m], search);
        theta.push(angle);
        f.set_row(m, &fm.transpose());
        search_flags += flagged as usize;
    }
    SignalUpdate {
        theta: DoaVector::from_raw(theta),
        f,
        search_flags,
    }
}

/// Per-sensor mean squared residual `(1/T) sum_t |g_n(t) - d_n(theta) f(t)|^2`.
pub(crate) fn mean_squared_residual(g: &CMatrix, theta: f64, f: &CMatrix) -> Vec<f64> {
    let d = steer(theta, g.nrows());
    let fit = &d * f;
    let t = g.ncols() as f64;
    (0..g.nrows())
        .map(|row| {
            g.row(row)
                .iter()
                .zip(fit.row(row).iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / t
        })
        .collect()
}

pub fn gem_cm_step2(
    cache: &DetEStepCache,
    update: &SignalUpdate,
    state: &DetGemState,
    beta: f64,
) -> Result<NoiseShares> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter(format!(
            "beta {beta} not in [0, 1]"
        )));
    }
    let old = state.omega.matrix();
    let mut shares = old.clone();
    for (m, gm) in cache.g.iter().enumerate() {
        let fm = update.f.rows(m, 1).into_owned();
        let d = mean_squared_residual(gm, update.theta.as_slice()[m], &fm);
        for row in 0..old.nrows() {
            let target = cache.c[(row, m)] + d[row];
            shares[(row, m)] = beta * old[(row, m)] + (1.0 - beta) * target;
        }
    }
    NoiseShares::new(shares)
}

struct GemRun<'a> {
    state: DetGemState,
    v: &'a CMatrix,
    config: AlgorithmConfig,
    search_flags: usize,
}

impl Iterate for GemRun<'_> {
    fn theta(&self) -> &[f64] {
        self.state.theta.as_slice()
    }

    fn llf(&self) -> Result<f64> {
        let sigma = self.state.omega.total();
        Ok(det_llf_raw(
            self.state.theta.as_slice(),
            &self.state.f,
            sigma.as_slice(),
            self.v,
        ))
    }

    fn step(&mut self) -> Result<()> {
        let cache = e_step(&self.state, self.v);
        let update = gem_cm_step1(&cache, &self.state, &self.config.line_search);
        let omega = gem_cm_step2(&cache, &update, &self.state, self.config.beta)?;
        self.search_flags += update.search_flags;
        self.state = DetGemState {
            theta: update.theta,
            f: update.f,
            omega,
            iteration: self.state.iteration + 1,
        };
        Ok(())
    }
}

pub fn gem_run(
    v: &SnapshotMatrix,
    init: &DetGemState,
    config: &AlgorithmConfig,
) -> Result<TrialRecord> {
    init.check(v)?;
    let mut run = GemRun {
        state: init.clone(),
        v: v.matrix(),
        config: *config,
        search_flags: 0,
    };
    let trace = drive(&mut run, config)?;
    Ok(TrialRecord {
        llf: trace.llf,
        theta_deg: trace.theta_deg,
        cycle_llf: Vec::new(),
        converged: trace.converged,
        iterations: trace.iterations,
        final_sigma: run.state.omega.total(),
        final_theta: run.state.theta,
        final_powers: None,
        final_waveforms: Some(run.state.f),
        search_flags: run.search_flags,
        elapsed: trace.elapsed,
    })
}
