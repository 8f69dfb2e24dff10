//! EM-type maximum-likelihood direction-of-arrival estimation for a uniform
//! linear array in unknown nonuniform sensor noise.
//!
//! Four estimators are provided: GEM and SAGE for deterministic source
//! waveforms ([`det_gem`], [`det_sage`]), and a simultaneous and a sequential
//! SAGE variant for Gaussian sources ([`stoch_sage`]).  [`crlb`] gives the
//! matching Cramér-Rao bounds and [`harness`] runs Monte Carlo experiments.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub mod array;
pub mod crlb;
pub mod det_gem;
pub mod det_sage;
pub mod error;
pub mod harness;
pub mod likelihood;
pub mod linalg;
pub mod line_search;
pub mod record;
pub mod stoch_sage;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub use array::{
    ArrayConfig, DoaVector, NoiseProfile, NoiseShares, SnapshotMatrix, SourcePowers, SplitWeights,
};
pub use error::{Error, Result};
pub use line_search::LineSearch;
pub use record::{AlgorithmConfig, TrialRecord};
