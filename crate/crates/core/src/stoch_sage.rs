//! SAGE estimators for the stochastic signal model, `f_m(t) ~ CN(0, P_m)`.
//!
//! Variant A (simultaneous) splits the noise over sources with known weights
//! `alpha`, computes every conditional source covariance in one E-step and
//! refits all `(theta_m, P_m)` pairs in parallel.  Variant B (sequential)
//! cycles over sources, each cycle assigning all noise to the current source.
//! Both finish an iteration with the same additional E/M step, which treats
//! `(F, Z)` as complete data and re-estimates the powers and the noise.

use num_complex::Complex64;

use crate::array::{
    sample_covariance, steer, DoaVector, NoiseProfile, SnapshotMatrix, SourcePowers, SplitWeights,
};
use crate::error::{Error, Result};
use crate::likelihood::{stoch_covariance, stoch_llf_raw};
use crate::linalg::{conditional_moment, hermitize, whiten, HermitianFactor};
use crate::line_search::{LineSearch, SearchProblem};
use crate::record::{drive, AlgorithmConfig, Iterate, TrialRecord};
use crate::CMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StochVariant {
    /// All DOAs refit at once from per-source conditional covariances.
    Simultaneous,
    /// One source per cycle, all noise allocated to that source.
    Sequential,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StochSageState {
    pub theta: DoaVector,
    pub p: SourcePowers,
    pub sigma: NoiseProfile,
    /// Noise split weights; only the simultaneous variant uses them.
    pub alpha: SplitWeights,
    pub iteration: usize,
    pub cycle: usize,
}

impl StochSageState {
    pub fn new(
        theta: DoaVector,
        p: SourcePowers,
        sigma: NoiseProfile,
        alpha: SplitWeights,
    ) -> Result<Self> {
        let m = theta.len();
        if p.len() != m || alpha.as_slice().len() != m {
            return Err(Error::Dimension(format!(
                "{m} sources with {} powers and {} split weights",
                p.len(),
                alpha.as_slice().len()
            )));
        }
        Ok(Self {
            theta,
            p,
            sigma,
            alpha,
            iteration: 0,
            cycle: 0,
        })
    }

    /// Uniform split weights `1/M`.
    pub fn with_uniform_split(
        theta: DoaVector,
        p: SourcePowers,
        sigma: NoiseProfile,
    ) -> Result<Self> {
        let alpha = SplitWeights::uniform(theta.len());
        Self::new(theta, p, sigma, alpha)
    }

    fn check(&self, r_v: &CMatrix) -> Result<()> {
        let n = self.sigma.len();
        if r_v.nrows() != n || r_v.ncols() != n {
            return Err(Error::Dimension(format!(
                "sample covariance is {}x{} for {n} sensors",
                r_v.nrows(),
                r_v.ncols()
            )));
        }
        Ok(())
    }
}

/// Conditional per-source covariances `E{R_m | V}` of the simultaneous E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct StochEStepCache {
    pub r_m: Vec<CMatrix>,
}

/// Conditional sufficient statistics of the additional E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStats {
    /// `E{(1/T) sum |f_m(t)|^2 | V}` per source.
    pub p_hat: Vec<f64>,
    /// `E{(1/T) sum z(t) z(t)^H | V}`.
    pub r_z: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerUpdate {
    pub theta: DoaVector,
    pub p: SourcePowers,
    pub search_flags: usize,
}

fn diag(sigma: &[f64]) -> CMatrix {
    let mut s = CMatrix::zeros(sigma.len(), sigma.len());
    for (k, &x) in sigma.iter().enumerate() {
        s[(k, k)] = Complex64::from(x);
    }
    s
}

fn rank_one(theta: f64, power: f64, n: usize) -> CMatrix {
    let d = steer(theta, n);
    &d * d.adjoint() * Complex64::from(power)
}

pub fn stoch_e_step_a(state: &StochSageState, r_v: &CMatrix) -> Result<StochEStepCache> {
    state.check(r_v)?;
    let sigma = state.sigma.as_slice();
    let n = sigma.len();
    let theta = state.theta.as_slice();
    let p = state.p.as_slice();
    let h_inv = HermitianFactor::new(&stoch_covariance(theta, p, sigma))?.inverse();
    let noise = diag(sigma);
    let r_m = state
        .alpha
        .as_slice()
        .iter()
        .enumerate()
        .map(|(m, &alpha)| {
            let h_m = rank_one(theta[m], p[m], n) + &noise * Complex64::from(alpha);
            conditional_moment(&h_m, &h_inv, r_v)
        })
        .collect();
    Ok(StochEStepCache { r_m })
}

/// Fits `(theta, P)` to one whitened conditional covariance.  `share` is the
/// fraction of the noise allocated to the source (`alpha_m`, or 1 when all
/// noise goes to it).  A clamped power keeps the previous angle.
fn fit_source(
    r: &CMatrix,
    sigma: &[f64],
    seed: f64,
    share: f64,
    search: &LineSearch,
) -> (f64, f64, bool) {
    let q: f64 = sigma.iter().map(|s| 1.0 / s).sum();
    let r_tilde = whiten(r, sigma);
    let problem = SearchProblem::from_parts(&r_tilde, sigma, seed);
    let outcome = search.ascend(&problem);
    let power = ((outcome.value / q - share) / q).max(0.0);
    let angle = if power > 0.0 { outcome.angle } else { seed };
    (angle, power, outcome.flagged())
}

pub fn stoch_m_step_a(
    cache: &StochEStepCache,
    state: &StochSageState,
    search: &LineSearch,
) -> PowerUpdate {
    let sigma = state.sigma.as_slice();
    let mut theta = Vec::with_capacity(cache.r_m.len());
    let mut p = Vec::with_capacity(cache.r_m.len());
    let mut search_flags = 0;
    for (m, r) in cache.r_m.iter().enumerate() {
        let (angle, power, flagged) = fit_source(
            r,
            sigma,
            state.theta.as_slice()[m],
            state.alpha.as_slice()[m],
            search,
        );
        theta.push(angle);
        p.push(power);
        search_flags += flagged as usize;
    }
    PowerUpdate {
        theta: DoaVector::from_raw(theta),
        p: SourcePowers::from_raw(p),
        search_flags,
    }
}

/// `P_hat_m = q_m^H R_v q_m + P_m (1 - d_m^H q_m)` with `q_m = H^-1 d_m P_m`.
fn conditional_power(theta: f64, power: f64, h_inv: &CMatrix, r_v: &CMatrix) -> f64 {
    if power == 0.0 {
        return 0.0;
    }
    let d = steer(theta, r_v.nrows());
    let q = h_inv * &d * Complex64::from(power);
    let value = q.dotc(&(r_v * &q)).re + power * (1.0 - d.dotc(&q).re);
    value.max(0.0)
}

/// Additional E-step: conditional power and noise statistics at
/// `(theta, p, sigma)`.
pub fn noise_stats(
    theta: &DoaVector,
    p: &SourcePowers,
    sigma: &NoiseProfile,
    r_v: &CMatrix,
) -> Result<NoiseStats> {
    let s = sigma.as_slice();
    let h_inv =
        HermitianFactor::new(&stoch_covariance(theta.as_slice(), p.as_slice(), s))?.inverse();
    let p_hat = theta
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(&angle, &power)| conditional_power(angle, power, &h_inv, r_v))
        .collect();
    let mut r_z = conditional_moment(&diag(s), &h_inv, r_v);
    hermitize(&mut r_z);
    Ok(NoiseStats { p_hat, r_z })
}

/// Additional E- and M-steps: `P <- P_hat`, `sigma_n <- [R_z]_nn`, with any
/// non-positive noise entry replaced by `zeta sigma_n + (1 - zeta) [R_z]_nn`.
pub fn additional_em_steps(
    theta: &DoaVector,
    p: &SourcePowers,
    sigma_prev: &NoiseProfile,
    r_v: &CMatrix,
    zeta: f64,
) -> Result<(SourcePowers, NoiseProfile)> {
    if !(zeta > 0.0 && zeta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "zeta {zeta} not in (0, 1]"
        )));
    }
    let stats = noise_stats(theta, p, sigma_prev, r_v)?;
    let sigma = sigma_prev
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &old)| {
            let rz = stats.r_z[(k, k)].re;
            if rz > 0.0 {
                rz
            } else {
                // the diagonal of a PSD matrix is only negative through rounding
                zeta * old + (1.0 - zeta) * rz.max(0.0)
            }
        })
        .collect();
    Ok((
        SourcePowers::from_raw(stats.p_hat),
        NoiseProfile::new(sigma)?,
    ))
}

/// Cycle `i` (0-based) of the sequential variant.  The noise is held at the
/// state's `sigma` throughout the cycles.
pub fn stoch_cycle_b(
    state: &StochSageState,
    r_v: &CMatrix,
    i: usize,
    search: &LineSearch,
) -> Result<(StochSageState, bool)> {
    state.check(r_v)?;
    let m_count = state.theta.len();
    if i >= m_count {
        return Err(Error::InvalidParameter(format!(
            "cycle {i} out of range for {m_count} sources"
        )));
    }
    let sigma = state.sigma.as_slice();
    let theta = state.theta.as_slice();
    let p = state.p.as_slice();
    let n = sigma.len();
    let h_inv = HermitianFactor::new(&stoch_covariance(theta, p, sigma))?.inverse();

    let mut powers: Vec<f64> = (0..m_count)
        .map(|m| {
            if m == i {
                p[m]
            } else {
                conditional_power(theta[m], p[m], &h_inv, r_v)
            }
        })
        .collect();
    let h_i = rank_one(theta[i], p[i], n) + diag(sigma);
    let r_i = conditional_moment(&h_i, &h_inv, r_v);
    let (angle, power, flagged) = fit_source(&r_i, sigma, theta[i], 1.0, search);
    powers[i] = power;
    let mut angles = theta.to_vec();
    angles[i] = angle;

    let next = StochSageState {
        theta: DoaVector::from_raw(angles),
        p: SourcePowers::from_raw(powers),
        sigma: state.sigma.clone(),
        alpha: state.alpha.clone(),
        iteration: state.iteration,
        cycle: i + 1,
    };
    Ok((next, flagged))
}

/// Conditional covariance `E{R_i | V}` used by cycle `i` of the sequential
/// variant.
pub fn sequential_conditional_covariance(
    state: &StochSageState,
    r_v: &CMatrix,
    i: usize,
) -> Result<CMatrix> {
    state.check(r_v)?;
    let sigma = state.sigma.as_slice();
    let theta = state.theta.as_slice();
    let p = state.p.as_slice();
    let h_inv = HermitianFactor::new(&stoch_covariance(theta, p, sigma))?.inverse();
    let h_i = rank_one(theta[i], p[i], sigma.len()) + diag(sigma);
    Ok(conditional_moment(&h_i, &h_inv, r_v))
}

struct StochRun<'a> {
    state: StochSageState,
    r_v: &'a CMatrix,
    t: usize,
    variant: StochVariant,
    config: AlgorithmConfig,
    search_flags: usize,
    cycle_llf: Vec<f64>,
}

impl StochRun<'_> {
    fn current_llf(&self) -> Result<f64> {
        stoch_llf_raw(
            self.state.theta.as_slice(),
            self.state.p.as_slice(),
            self.state.sigma.as_slice(),
            self.r_v,
            self.t,
        )
    }
}

impl Iterate for StochRun<'_> {
    fn theta(&self) -> &[f64] {
        self.state.theta.as_slice()
    }

    fn llf(&self) -> Result<f64> {
        self.current_llf()
    }

    fn step(&mut self) -> Result<()> {
        let search = self.config.line_search;
        match self.variant {
            StochVariant::Simultaneous => {
                let cache = stoch_e_step_a(&self.state, self.r_v)?;
                let update = stoch_m_step_a(&cache, &self.state, &search);
                self.search_flags += update.search_flags;
                self.state.theta = update.theta;
                self.state.p = update.p;
            }
            StochVariant::Sequential => {
                for i in 0..self.state.theta.len() {
                    let (next, flagged) = stoch_cycle_b(&self.state, self.r_v, i, &search)?;
                    self.state = next;
                    self.search_flags += flagged as usize;
                    self.cycle_llf.push(self.current_llf()?);
                }
            }
        }
        let (p, sigma) = additional_em_steps(
            &self.state.theta,
            &self.state.p,
            &self.state.sigma,
            self.r_v,
            self.config.zeta,
        )?;
        self.state.p = p;
        self.state.sigma = sigma;
        self.state.iteration += 1;
        self.state.cycle = 0;
        if self.variant == StochVariant::Sequential {
            self.cycle_llf.push(self.current_llf()?);
        }
        Ok(())
    }
}

pub fn stoch_sage_run(
    v: &SnapshotMatrix,
    init: &StochSageState,
    variant: StochVariant,
    config: &AlgorithmConfig,
) -> Result<TrialRecord> {
    let r_v = sample_covariance(v);
    stoch_sage_run_covariance(&r_v, v.n_snapshots(), init, variant, config)
}

/// [`stoch_sage_run`] on a precomputed sample covariance of `t` snapshots.
pub fn stoch_sage_run_covariance(
    r_v: &CMatrix,
    t: usize,
    init: &StochSageState,
    variant: StochVariant,
    config: &AlgorithmConfig,
) -> Result<TrialRecord> {
    init.check(r_v)?;
    let mut run = StochRun {
        state: init.clone(),
        r_v,
        t,
        variant,
        config: *config,
        search_flags: 0,
        cycle_llf: Vec::new(),
    };
    if variant == StochVariant::Sequential {
        run.cycle_llf.push(run.current_llf()?);
    }
    let trace = drive(&mut run, config)?;
    Ok(TrialRecord {
        llf: trace.llf,
        theta_deg: trace.theta_deg,
        cycle_llf: run.cycle_llf,
        converged: trace.converged,
        iterations: trace.iterations,
        final_theta: run.state.theta,
        final_sigma: run.state.sigma,
        final_powers: Some(run.state.p),
        final_waveforms: None,
        search_flags: run.search_flags,
        elapsed: trace.elapsed,
    })
}
