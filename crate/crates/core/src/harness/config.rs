//! TOML experiment description.
//!
//! ```toml
//! [scenario]
//! sensors = 10
//! theta_deg = [40.0, 80.0]
//! signal = "deterministic"      # or "stochastic"
//! power = [6.0, 8.0]
//! snapshots = 500
//! # noise = [...]              # defaults to the 10-sensor reference profile
//! # alpha = [0.5, 0.5]         # noise split of stoch-sage-A, default uniform
//! # waveforms = "fixed"        # deterministic data: one F shared by all trials
//!
//! [init]
//! theta_deg = [45.0, 85.0]
//! # waveform = 1.0, noise_share = 0.5, power = 1.0, noise = 1.0
//!
//! [algorithm]
//! names = ["det-gem", "det-sage"]
//! beta = 0.5
//! gamma = 0.9
//!
//! [sweep]
//! axis = "snapshots"            # "power" or "none"
//! values = [50, 100, 200]
//!
//! [evaluation]
//! trials = 100
//! seed = 7
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::array::{NoiseProfile, SplitWeights, REFERENCE_NOISE};
use crate::line_search::LineSearch;
use crate::record::AlgorithmConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlgorithmKind {
    #[serde(rename = "det-gem")]
    DetGem,
    #[serde(rename = "det-sage")]
    DetSage,
    #[serde(rename = "stoch-sage-A")]
    StochSageA,
    #[serde(rename = "stoch-sage-B")]
    StochSageB,
}

impl AlgorithmKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::DetGem => "det-gem",
            Self::DetSage => "det-sage",
            Self::StochSageA => "stoch-sage-A",
            Self::StochSageB => "stoch-sage-B",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalModel {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveformMode {
    /// Fresh `CN(0, P)` waveforms for every trial.
    #[default]
    PerTrial,
    /// One waveform matrix, drawn from a dedicated stream, for all trials.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    #[default]
    None,
    Snapshots,
    /// Common power of every source.
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub sensors: usize,
    pub theta_deg: Vec<f64>,
    pub signal: SignalModel,
    pub power: Vec<f64>,
    pub snapshots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub waveforms: WaveformMode,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub theta_deg: Vec<f64>,
    /// Every entry of the initial waveform matrix.
    #[serde(default = "one")]
    pub waveform: f64,
    /// Every entry of the initial GEM noise shares.
    #[serde(default = "half")]
    pub noise_share: f64,
    #[serde(default = "one")]
    pub power: f64,
    #[serde(default = "one")]
    pub noise: f64,
}

fn default_beta() -> f64 {
    0.5
}

fn default_gamma() -> f64 {
    0.9
}

fn default_tolerance() -> f64 {
    0.001
}

fn default_cap() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub names: Vec<AlgorithmKind>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "half")]
    pub zeta: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance_deg: f64,
    #[serde(default = "default_cap")]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub axis: SweepAxis,
    #[serde(default)]
    pub values: Vec<f64>,
}

fn default_radius() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_radius")]
    pub wanted_radius_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub init: InitConfig,
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub sweep: SweepConfig,
    pub evaluation: EvaluationConfig,
}

/// One sweep point: the swept value and the scenario it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub snapshots: usize,
    pub power: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        config
            .validate()
            .map_err(|(section, key, message)| ConfigError {
                line: locate(text, section, key),
                message: format!("{section}.{key}: {message}"),
            })?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sources(&self) -> usize {
        self.scenario.theta_deg.len()
    }

    pub fn noise(&self) -> NoiseProfile {
        match &self.scenario.noise {
            Some(sigma) => NoiseProfile::new(sigma.clone()).expect("validated"),
            None => NoiseProfile::new(REFERENCE_NOISE.to_vec()).expect("reference profile"),
        }
    }

    pub fn split_weights(&self) -> SplitWeights {
        match &self.scenario.alpha {
            Some(alpha) => SplitWeights::new(alpha.clone()).expect("validated"),
            None => SplitWeights::uniform(self.sources()),
        }
    }

    pub fn algorithm_config(&self) -> AlgorithmConfig {
        AlgorithmConfig {
            beta: self.algorithm.beta,
            gamma: self.algorithm.gamma,
            zeta: self.algorithm.zeta,
            tolerance: self.algorithm.tolerance_deg.to_radians(),
            max_iterations: self.algorithm.max_iterations,
            line_search: LineSearch::default(),
        }
    }

    /// Sweep points in ascending order; a single point when there is no sweep.
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let s = &self.scenario;
        let mut values = self.sweep.values.clone();
        values.sort_by(f64::total_cmp);
        match self.sweep.axis {
            SweepAxis::None => vec![SweepPoint {
                value: s.snapshots as f64,
                snapshots: s.snapshots,
                power: s.power.clone(),
            }],
            SweepAxis::Snapshots => values
                .into_iter()
                .map(|v| SweepPoint {
                    value: v,
                    snapshots: v as usize,
                    power: s.power.clone(),
                })
                .collect(),
            SweepAxis::Power => values
                .into_iter()
                .map(|v| SweepPoint {
                    value: v,
                    snapshots: s.snapshots,
                    power: vec![v; s.theta_deg.len()],
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        let s = &self.scenario;
        let n = s.sensors;
        let m = s.theta_deg.len();
        let angle_ok = |deg: &f64| *deg > 0.0 && *deg < 180.0;
        if n < 2 {
            return Err((
                "scenario",
                "sensors",
                format!("need at least 2 sensors, got {n}"),
            ));
        }
        if m == 0 || m >= n {
            return Err((
                "scenario",
                "theta_deg",
                format!("{m} sources on {n} sensors"),
            ));
        }
        if !s.theta_deg.iter().all(angle_ok) {
            return Err((
                "scenario",
                "theta_deg",
                "angles must lie in (0, 180) degrees".into(),
            ));
        }
        if s.power.len() != m || s.power.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err((
                "scenario",
                "power",
                format!("expected {m} nonnegative powers"),
            ));
        }
        if s.snapshots == 0 {
            return Err(("scenario", "snapshots", "must be positive".into()));
        }
        match &s.noise {
            Some(sigma) => {
                if sigma.len() != n || NoiseProfile::new(sigma.clone()).is_err() {
                    return Err((
                        "scenario",
                        "noise",
                        format!("expected {n} positive variances"),
                    ));
                }
            }
            None if n != REFERENCE_NOISE.len() => {
                return Err((
                    "scenario",
                    "noise",
                    format!("required when sensors != {}", REFERENCE_NOISE.len()),
                ));
            }
            None => {}
        }
        if let Some(alpha) = &s.alpha {
            if alpha.len() != m || SplitWeights::new(alpha.clone()).is_err() {
                return Err((
                    "scenario",
                    "alpha",
                    format!("expected {m} weights summing to 1"),
                ));
            }
        }

        let i = &self.init;
        if i.theta_deg.len() != m {
            return Err(("init", "theta_deg", format!("expected {m} angles")));
        }
        if !i.theta_deg.iter().all(angle_ok) {
            return Err((
                "init",
                "theta_deg",
                "angles must lie in (0, 180) degrees".into(),
            ));
        }
        if !(i.noise > 0.0) {
            return Err(("init", "noise", "must be positive".into()));
        }
        if !(i.noise_share > 0.0) {
            return Err(("init", "noise_share", "must be positive".into()));
        }
        if !(i.power >= 0.0) {
            return Err(("init", "power", "must be nonnegative".into()));
        }

        let a = &self.algorithm;
        if a.names.is_empty() {
            return Err(("algorithm", "names", "list at least one algorithm".into()));
        }
        if !(0.0..=1.0).contains(&a.beta) {
            return Err(("algorithm", "beta", "must lie in [0, 1]".into()));
        }
        if !(a.gamma > 0.0 && a.gamma <= 1.0) {
            return Err(("algorithm", "gamma", "must lie in (0, 1]".into()));
        }
        if !(a.zeta > 0.0 && a.zeta <= 1.0) {
            return Err(("algorithm", "zeta", "must lie in (0, 1]".into()));
        }
        if !(a.tolerance_deg > 0.0) {
            return Err(("algorithm", "tolerance_deg", "must be positive".into()));
        }
        if a.max_iterations == 0 {
            return Err(("algorithm", "max_iterations", "must be positive".into()));
        }

        let w = &self.sweep;
        match w.axis {
            SweepAxis::None => {}
            SweepAxis::Snapshots => {
                if w.values.is_empty() || w.values.iter().any(|v| !(*v >= 1.0 && v.fract() == 0.0))
                {
                    return Err((
                        "sweep",
                        "values",
                        "snapshot counts must be positive integers".into(),
                    ));
                }
            }
            SweepAxis::Power => {
                if w.values.is_empty() || w.values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(("sweep", "values", "powers must be positive".into()));
                }
            }
        }

        let e = &self.evaluation;
        if e.trials == 0 {
            return Err(("evaluation", "trials", "must be positive".into()));
        }
        if !(e.wanted_radius_deg >= 0.0) {
            return Err((
                "evaluation",
                "wanted_radius_deg",
                "must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line of `key` inside `[section]`, falling back to the section header.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let header = format!("[{section}]");
    let mut in_section = false;
    let mut header_line = None;
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            in_section = line == header;
            if in_section {
                header_line = Some(k + 1);
            }
            continue;
        }
        if in_section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(k + 1);
                }
            }
        }
    }
    header_line
}
