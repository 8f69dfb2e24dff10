use std::time::{Duration, Instant};

use crate::array::{DoaVector, NoiseProfile, SourcePowers};
use crate::error::{Error, Result};
use crate::line_search::LineSearch;
use crate::CMatrix;

/// Damping constants, stopping rule and line-search settings shared by all
/// four estimators.  Each estimator reads only the damping constant it uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgorithmConfig {
    /// Noise-share damping of the deterministic GEM algorithm, in `[0, 1]`.
    pub beta: f64,
    /// Noise damping of the deterministic SAGE algorithm, in `(0, 1]`.
    pub gamma: f64,
    /// Fallback damping for noise entries that collapse to zero in the
    /// stochastic additional M-step, in `(0, 1]`.
    pub zeta: f64,
    /// Stop once `||theta(b) - theta(b-1)||` (radians) is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub line_search: LineSearch,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            gamma: 0.9,
            zeta: 0.5,
            tolerance: 0.001f64.to_radians(),
            max_iterations: 2000,
            line_search: LineSearch::default(),
        }
    }
}

impl AlgorithmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidParameter(format!(
                "beta {} not in [0, 1]",
                self.beta
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma {} not in (0, 1]",
                self.gamma
            )));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "zeta {} not in (0, 1]",
                self.zeta
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Convergence trace and final estimates of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Incomplete-data LLF; entry 0 is the initial point, entry `b` follows iteration `b`.
    pub llf: Vec<f64>,
    /// DOA iterates in degrees, indexed like `llf`.
    pub theta_deg: Vec<Vec<f64>>,
    /// LLF after every SAGE cycle (empty for GEM and the simultaneous variant).
    pub cycle_llf: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_theta: DoaVector,
    pub final_sigma: NoiseProfile,
    pub final_powers: Option<SourcePowers>,
    pub final_waveforms: Option<CMatrix>,
    /// Number of line searches that hit a safety cap.
    pub search_flags: usize,
    pub elapsed: Duration,
}

impl TrialRecord {
    /// True when no LLF entry drops below its predecessor by more than
    /// `rel_tol * |previous|`.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        monotone(&self.llf, rel_tol)
    }

    pub fn final_theta_deg(&self) -> Vec<f64> {
        self.final_theta.to_degrees()
    }
}

pub(crate) fn monotone(trace: &[f64], rel_tol: f64) -> bool {
    trace
        .windows(2)
        .all(|w| w[1] >= w[0] - rel_tol * w[0].abs())
}

/// One estimator viewed as an iteration map.
pub(crate) trait Iterate {
    fn theta(&self) -> &[f64];
    fn llf(&self) -> Result<f64>;
    fn step(&mut self) -> Result<()>;
}

pub(crate) struct Trace {
    pub llf: Vec<f64>,
    pub theta_deg: Vec<Vec<f64>>,
    pub converged: bool,
    pub iterations: usize,
    pub elapsed: Duration,
}

pub(crate) fn drive<S: Iterate>(state: &mut S, config: &AlgorithmConfig) -> Result<Trace> {
    config.validate()?;
    let start = Instant::now();
    let to_deg = |t: &[f64]| t.iter().map(|a| a.to_degrees()).collect::<Vec<_>>();
    let mut llf = vec![state.llf()?];
    let mut theta_deg = vec![to_deg(state.theta())];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        let before = state.theta().to_vec();
        state.step()?;
        iterations += 1;
        llf.push(state.llf()?);
        theta_deg.push(to_deg(state.theta()));
        let moved = before
            .iter()
            .zip(state.theta())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if moved <= config.tolerance {
            converged = true;
            break;
        }
    }
    Ok(Trace {
        llf,
        theta_deg,
        converged,
        iterations,
        elapsed: start.elapsed(),
    })
}
