//! SAGE estimator for the deterministic signal model.
//!
//! An iteration runs one cycle per source in index order.  Cycle `i` assigns
//! all of the noise to source `i`, which makes its E-step exact (zero
//! conditional covariance), then refits `theta_i` and `f_i` on the whitened
//! data and damps the full noise vector toward the new residual power.

use crate::array::{steer, DoaVector, NoiseProfile, SnapshotMatrix};
use crate::det_gem::{mean_squared_residual, whitened_source_fit};
use crate::error::{Error, Result};
use crate::likelihood::det_llf_raw;
use crate::line_search::LineSearch;
use crate::record::{drive, AlgorithmConfig, Iterate, TrialRecord};
use crate::CMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DetSageState {
    pub theta: DoaVector,
    pub f: CMatrix,
    pub sigma: NoiseProfile,
    pub iteration: usize,
    /// Cycles completed within the current iteration.
    pub cycle: usize,
}

impl DetSageState {
    pub fn new(theta: DoaVector, f: CMatrix, sigma: NoiseProfile) -> Result<Self> {
        if f.nrows() != theta.len() {
            return Err(Error::Dimension(format!(
                "{} sources but waveforms have {} rows",
                theta.len(),
                f.nrows()
            )));
        }
        Ok(Self {
            theta,
            f,
            sigma,
            iteration: 0,
            cycle: 0,
        })
    }

    fn check(&self, v: &SnapshotMatrix) -> Result<()> {
        if self.sigma.len() != v.n_sensors() || self.f.ncols() != v.n_snapshots() {
            return Err(Error::Dimension(format!(
                "state is {}x{} but snapshots are {}x{}",
                self.sigma.len(),
                self.f.ncols(),
                v.n_sensors(),
                v.n_snapshots()
            )));
        }
        Ok(())
    }
}

fn check_cycle(i: usize, m: usize) -> Result<()> {
    if i >= m {
        return Err(Error::InvalidParameter(format!(
            "cycle {i} out of range for {m} sources"
        )));
    }
    Ok(())
}

/// Conditional mean of source `i`'s complete data (0-based `i`):
/// `d(theta_i) f_i(t) + v(t) - D(theta) f(t)`.
pub fn sage_e_step(state: &DetSageState, v: &SnapshotMatrix, i: usize) -> Result<CMatrix> {
    state.check(v)?;
    check_cycle(i, state.theta.len())?;
    Ok(e_step(state, v.matrix(), i))
}

fn e_step(state: &DetSageState, v: &CMatrix, i: usize) -> CMatrix {
    let n = v.nrows();
    let mut g = v.clone();
    for (m, &angle) in state.theta.as_slice().iter().enumerate() {
        if m != i {
            g -= steer(angle, n) * state.f.row(m);
        }
    }
    g
}

/// Both conditional maximizations of cycle `i`: whitened DOA/waveform fit,
/// then `sigma <- gamma sigma + (1 - gamma) d`.  Returns the updated state
/// and whether the line search hit a safety cap.
pub fn sage_cm_steps(
    g_i: &CMatrix,
    state: &DetSageState,
    i: usize,
    gamma: f64,
    search: &LineSearch,
) -> Result<(DetSageState, bool)> {
    check_cycle(i, state.theta.len())?;
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma {gamma} not in (0, 1]"
        )));
    }
    if g_i.nrows() != state.sigma.len() || g_i.ncols() != state.f.ncols() {
        return Err(Error::Dimension(
            "complete-data estimate has the wrong shape".into(),
        ));
    }
    let sigma = state.sigma.as_slice();
    let (angle, fi, flagged) = whitened_source_fit(g_i, sigma, state.theta.as_slice()[i], search);

    let mut theta = state.theta.as_slice().to_vec();
    theta[i] = angle;
    let mut f = state.f.clone();
    f.set_row(i, &fi.transpose());

    let residual = mean_squared_residual(g_i, angle, &f.rows(i, 1).into_owned());
    let updated: Vec<f64> = sigma
        .iter()
        .zip(&residual)
        .map(|(s, d)| gamma * s + (1.0 - gamma) * d)
        .collect();

    let next = DetSageState {
        theta: DoaVector::from_raw(theta),
        f,
        sigma: NoiseProfile::new(updated)?,
        iteration: state.iteration,
        cycle: i + 1,
    };
    Ok((next, flagged))
}

struct SageRun<'a> {
    state: DetSageState,
    v: &'a CMatrix,
    config: AlgorithmConfig,
    search_flags: usize,
    cycle_llf: Vec<f64>,
}

impl SageRun<'_> {
    fn current_llf(&self) -> f64 {
        det_llf_raw(
            self.state.theta.as_slice(),
            &self.state.f,
            self.state.sigma.as_slice(),
            self.v,
        )
    }
}

impl Iterate for SageRun<'_> {
    fn theta(&self) -> &[f64] {
        self.state.theta.as_slice()
    }

    fn llf(&self) -> Result<f64> {
        Ok(self.current_llf())
    }

    fn step(&mut self) -> Result<()> {
        for i in 0..self.state.theta.len() {
            let g = e_step(&self.state, self.v, i);
            let (next, flagged) = sage_cm_steps(
                &g,
                &self.state,
                i,
                self.config.gamma,
                &self.config.line_search,
            )?;
            self.state = next;
            self.search_flags += flagged as usize;
            self.cycle_llf.push(self.current_llf());
        }
        self.state.iteration += 1;
        self.state.cycle = 0;
        Ok(())
    }
}

pub fn sage_run(
    v: &SnapshotMatrix,
    init: &DetSageState,
    config: &AlgorithmConfig,
) -> Result<TrialRecord> {
    init.check(v)?;
    let mut run = SageRun {
        state: init.clone(),
        v: v.matrix(),
        config: *config,
        search_flags: 0,
        cycle_llf: Vec::new(),
    };
    run.cycle_llf.push(run.current_llf());
    let trace = drive(&mut run, config)?;
    Ok(TrialRecord {
        llf: trace.llf,
        theta_deg: trace.theta_deg,
        cycle_llf: run.cycle_llf,
        converged: trace.converged,
        iterations: trace.iterations,
        final_theta: run.state.theta,
        final_sigma: run.state.sigma,
        final_powers: None,
        final_waveforms: Some(run.state.f),
        search_flags: run.search_flags,
        elapsed: trace.elapsed,
    })
}
