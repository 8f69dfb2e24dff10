//! Monte Carlo execution.
//!
//! Trial `k` of sweep point `s` draws all of its data from stream
//! `(s << 32) | k` of the master seed, so results do not depend on the
//! execution order.  Every listed algorithm processes the same snapshots from
//! the same initial point.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use num_complex::Complex64;

use crate::array::{
    deterministic_snapshots_with, random_waveforms, stochastic_snapshots_with, stream_rng,
    DoaVector, NoiseProfile, NoiseShares, SnapshotMatrix, SourcePowers,
};
use crate::crlb::{det_crlb, stoch_crlb};
use crate::det_gem::{gem_run, DetGemState};
use crate::det_sage::{sage_run, DetSageState};
use crate::error::Result;
use crate::record::TrialRecord;
use crate::stoch_sage::{stoch_sage_run, StochSageState, StochVariant};
use crate::CMatrix;

use super::config::{AlgorithmKind, ExperimentConfig, SignalModel, SweepPoint, WaveformMode};
use super::metrics::{classify_wanted, match_and_error, per_source_rmse, pooled_rmse};

/// Stream reserved for the shared waveform matrix of fixed-waveform runs.
const FIXED_WAVEFORM_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Trials run on the rayon pool when the `parallel` feature is enabled,
    /// sequentially otherwise.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Self::Parallel
        } else {
            Self::Sequential
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: usize,
    pub algorithm: AlgorithmKind,
    pub record: TrialRecord,
    /// Matched signed errors in degrees, ordered like the true DOAs.
    pub errors_deg: Vec<f64>,
    pub wanted: bool,
    /// Hash of the first snapshot column, identical across algorithms.
    pub sample_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: AlgorithmKind,
    pub trials: usize,
    pub converged: usize,
    pub wanted: usize,
    /// RMSE over converged trials only.
    pub rmse_deg: f64,
    /// RMSE over all trials.
    pub rmse_all_deg: f64,
    pub rmse_per_source_deg: Vec<f64>,
    pub mean_iterations: f64,
    pub median_iterations: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point: SweepPoint,
    /// Per-source variance bounds in rad², when the data model admits one.
    pub crlb: Option<Vec<f64>>,
    /// Ordered by trial, then by algorithm as listed in the config.
    pub outcomes: Vec<TrialOutcome>,
}

impl PointResult {
    pub fn outcomes_for(&self, algorithm: AlgorithmKind) -> impl Iterator<Item = &TrialOutcome> {
        self.outcomes
            .iter()
            .filter(move |o| o.algorithm == algorithm)
    }

    pub fn summary(&self, algorithm: AlgorithmKind) -> AlgorithmSummary {
        let all: Vec<&TrialOutcome> = self.outcomes_for(algorithm).collect();
        let m = self.point.power.len();
        let converged: Vec<Vec<f64>> = all
            .iter()
            .filter(|o| o.record.converged)
            .map(|o| o.errors_deg.clone())
            .collect();
        let every: Vec<Vec<f64>> = all.iter().map(|o| o.errors_deg.clone()).collect();
        let mut iterations: Vec<usize> = all.iter().map(|o| o.record.iterations).collect();
        iterations.sort_unstable();
        let median_iterations = match iterations.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => iterations[n / 2] as f64,
            n => (iterations[n / 2 - 1] + iterations[n / 2]) as f64 / 2.0,
        };
        AlgorithmSummary {
            algorithm,
            trials: all.len(),
            converged: converged.len(),
            wanted: all.iter().filter(|o| o.wanted).count(),
            rmse_deg: pooled_rmse(&converged),
            rmse_all_deg: pooled_rmse(&every),
            rmse_per_source_deg: per_source_rmse(&converged, m),
            mean_iterations: iterations.iter().sum::<usize>() as f64
                / iterations.len().max(1) as f64,
            median_iterations,
        }
    }

    /// Square root of the source-averaged bound, in degrees.
    pub fn crlb_sqrt_deg(&self) -> Option<f64> {
        self.crlb
            .as_ref()
            .map(|b| (b.iter().sum::<f64>() / b.len() as f64).sqrt().to_degrees())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub points: Vec<PointResult>,
}

impl ExperimentResult {
    pub fn all_converged(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.outcomes.iter().all(|o| o.record.converged))
    }
}

/// Data and bound shared by every trial of one sweep point.
struct PointSetup {
    point: SweepPoint,
    fixed_waveforms: Option<CMatrix>,
}

fn setup(config: &ExperimentConfig, point: &SweepPoint) -> PointSetup {
    let fixed_waveforms = (config.scenario.signal == SignalModel::Deterministic
        && config.scenario.waveforms == WaveformMode::Fixed)
        .then(|| fixed_waveforms(config, point));
    PointSetup {
        point: point.clone(),
        fixed_waveforms,
    }
}

/// Unit-power waveforms from the reserved stream, scaled to the point's
/// powers.  Columns are drawn in order, so a shorter record is a prefix of a
/// longer one.
pub fn fixed_waveforms(config: &ExperimentConfig, point: &SweepPoint) -> CMatrix {
    let mut rng = stream_rng(config.evaluation.seed, FIXED_WAVEFORM_STREAM);
    let unit = vec![1.0; point.power.len()];
    let mut f = random_waveforms(&mut rng, &unit, point.snapshots);
    for (m, p) in point.power.iter().enumerate() {
        f.row_mut(m).scale_mut(p.sqrt());
    }
    f
}

fn point_crlb(config: &ExperimentConfig, setup: &PointSetup) -> Option<Vec<f64>> {
    let theta = DoaVector::from_degrees(&config.scenario.theta_deg).ok()?;
    let sigma = config.noise();
    match (config.scenario.signal, &setup.fixed_waveforms) {
        (SignalModel::Stochastic, _) => {
            let p = SourcePowers::new(setup.point.power.clone()).ok()?;
            stoch_crlb(&theta, &p, &sigma, setup.point.snapshots).ok()
        }
        (SignalModel::Deterministic, Some(f)) => det_crlb(&theta, f, &sigma).ok(),
        (SignalModel::Deterministic, None) => None,
    }
}

fn trial_stream(sweep_index: usize, trial: usize) -> u64 {
    ((sweep_index as u64) << 32) | trial as u64
}

/// Snapshots of trial `trial` at sweep point `sweep_index`.
pub fn trial_snapshots(
    config: &ExperimentConfig,
    sweep_index: usize,
    trial: usize,
) -> Result<SnapshotMatrix> {
    let point = &config.sweep_points()[sweep_index];
    draw_snapshots(config, &setup(config, point), sweep_index, trial)
}

fn draw_snapshots(
    config: &ExperimentConfig,
    setup: &PointSetup,
    sweep_index: usize,
    trial: usize,
) -> Result<SnapshotMatrix> {
    let mut rng = stream_rng(config.evaluation.seed, trial_stream(sweep_index, trial));
    let theta = DoaVector::from_degrees(&config.scenario.theta_deg)?;
    let sigma = config.noise();
    let t = setup.point.snapshots;
    match config.scenario.signal {
        SignalModel::Deterministic => {
            let f = match &setup.fixed_waveforms {
                Some(f) => f.clone(),
                None => random_waveforms(&mut rng, &setup.point.power, t),
            };
            deterministic_snapshots_with(&mut rng, &theta, &f, &sigma)
        }
        SignalModel::Stochastic => {
            let p = SourcePowers::new(setup.point.power.clone())?;
            stochastic_snapshots_with(&mut rng, &theta, &p, &sigma, t)
        }
    }
}

fn sample_hash(v: &SnapshotMatrix) -> u64 {
    let mut h = DefaultHasher::new();
    for z in v.matrix().column(0).iter() {
        z.re.to_bits().hash(&mut h);
        z.im.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Runs one algorithm from the configured initial point.
pub fn run_algorithm(
    config: &ExperimentConfig,
    algorithm: AlgorithmKind,
    v: &SnapshotMatrix,
) -> Result<TrialRecord> {
    let init = &config.init;
    let n = v.n_sensors();
    let t = v.n_snapshots();
    let m = init.theta_deg.len();
    let theta0 = DoaVector::from_degrees(&init.theta_deg)?;
    let f0 = CMatrix::from_element(m, t, Complex64::from(init.waveform));
    let sigma0 = NoiseProfile::uniform(n, init.noise)?;
    let settings = config.algorithm_config();
    match algorithm {
        AlgorithmKind::DetGem => {
            let shares = NoiseShares::constant(n, m, init.noise_share)?;
            gem_run(v, &DetGemState::new(theta0, f0, shares)?, &settings)
        }
        AlgorithmKind::DetSage => sage_run(v, &DetSageState::new(theta0, f0, sigma0)?, &settings),
        AlgorithmKind::StochSageA | AlgorithmKind::StochSageB => {
            let state = StochSageState::new(
                theta0,
                SourcePowers::new(vec![init.power; m])?,
                sigma0,
                config.split_weights(),
            )?;
            let variant = if algorithm == AlgorithmKind::StochSageA {
                StochVariant::Simultaneous
            } else {
                StochVariant::Sequential
            };
            stoch_sage_run(v, &state, variant, &settings)
        }
    }
}

fn run_trial(
    config: &ExperimentConfig,
    setup: &PointSetup,
    sweep_index: usize,
    trial: usize,
) -> Result<Vec<TrialOutcome>> {
    let v = draw_snapshots(config, setup, sweep_index, trial)?;
    let hash = sample_hash(&v);
    let truth = DoaVector::from_degrees(&config.scenario.theta_deg)?;
    let radius = config.evaluation.wanted_radius_deg;
    config
        .algorithm
        .names
        .iter()
        .map(|&algorithm| {
            let record = run_algorithm(config, algorithm, &v)?;
            let (_, errors_deg) = match_and_error(&record.final_theta, &truth);
            let wanted = classify_wanted(&record.final_theta, &truth, radius);
            Ok(TrialOutcome {
                trial,
                algorithm,
                record,
                errors_deg,
                wanted,
                sample_hash: hash,
            })
        })
        .collect()
}

fn map_trials<R, F>(trials: usize, execution: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        use rayon::prelude::*;
        return (0..trials).into_par_iter().map(f).collect();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = execution;
    (0..trials).map(f).collect()
}

pub fn run_experiment(config: &ExperimentConfig, execution: Execution) -> Result<ExperimentResult> {
    let mut points = Vec::new();
    for (sweep_index, point) in config.sweep_points().iter().enumerate() {
        let setup = setup(config, point);
        let per_trial = map_trials(config.evaluation.trials, execution, |trial| {
            run_trial(config, &setup, sweep_index, trial)
        });
        let mut outcomes = Vec::with_capacity(per_trial.len() * config.algorithm.names.len());
        for trial in per_trial {
            outcomes.extend(trial?);
        }
        points.push(PointResult {
            crlb: point_crlb(config, &setup),
            point: setup.point,
            outcomes,
        });
    }
    Ok(ExperimentResult {
        config: config.clone(),
        points,
    })
}

/// Bound at every sweep point without running any trials.
pub fn crlb_curve(config: &ExperimentConfig) -> Vec<(SweepPoint, Option<Vec<f64>>)> {
    config
        .sweep_points()
        .iter()
        .map(|point| {
            let s = setup(config, point);
            let bound = point_crlb(config, &s);
            (s.point, bound)
        })
        .collect()
}
