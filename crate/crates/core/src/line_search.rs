//! Local gradient ascent of `h(theta) = d~(theta)^H R~ d~(theta)` with
//! Armijo backtracking.
//!
//! Every estimator updates a DOA by maximizing this quadratic form.  A global
//! search tends to pull all DOA estimates onto the strongest source, so the
//! ascent is seeded at the previous estimate and only climbs the basin it
//! starts in (or a higher one reached by a step that passes the Armijo test).
//! The initial step moves a tenth of the way to the nearer boundary in the
//! uphill direction, which keeps every iterate inside `(0, pi)`.

use std::f64::consts::PI;

use crate::array::{steer, steer_derivative};
use crate::error::{Error, Result};
use crate::linalg::whiten;
use crate::CMatrix;

/// Constants of the ascent.  The defaults are the published ones; the two
/// caps bound pathological (flat or badly scaled) objectives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    step_fraction: f64,
    armijo: f64,
    shrink: f64,
    gradient_tol: f64,
    max_iterations: usize,
    max_halvings: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            step_fraction: 0.1,
            armijo: 0.3,
            shrink: 0.5,
            gradient_tol: 1e-3,
            max_iterations: 500,
            max_halvings: 60,
        }
    }
}

impl LineSearch {
    pub fn with_caps(max_iterations: usize, max_halvings: usize) -> Self {
        Self {
            max_iterations,
            max_halvings,
            ..Self::default()
        }
    }

    pub fn step_fraction(&self) -> f64 {
        self.step_fraction
    }

    pub fn armijo(&self) -> f64 {
        self.armijo
    }

    pub fn shrink(&self) -> f64 {
        self.shrink
    }

    pub fn gradient_tol(&self) -> f64 {
        self.gradient_tol
    }

    pub fn max_iterations(&self) -> usize {
        self.max_iterations
    }

    pub fn max_halvings(&self) -> usize {
        self.max_halvings
    }

    pub fn ascend(&self, problem: &SearchProblem) -> AscentOutcome {
        self.ascend_observed(problem, |_, _| {})
    }

    /// [`LineSearch::ascend`], calling `visit(theta, h)` at every accepted iterate.
    pub fn ascend_observed(
        &self,
        problem: &SearchProblem,
        mut visit: impl FnMut(f64, f64),
    ) -> AscentOutcome {
        let mut theta = problem.seed_angle;
        let (mut h, mut grad) = problem.evaluate(theta);
        let mut iterations = 0;
        let mut stop = AscentStop::Converged;

        while grad.abs() > self.gradient_tol {
            if iterations == self.max_iterations {
                stop = AscentStop::IterationCap;
                break;
            }
            let mut t = if grad > 0.0 {
                self.step_fraction * (PI - theta) / grad
            } else {
                self.step_fraction * (-theta) / grad
            };
            let mut halvings = 0;
            let accepted = loop {
                let candidate = theta + t * grad;
                let value = problem.value(candidate);
                // NaN never satisfies the sufficient-increase test
                if value >= h + self.armijo * t * grad * grad {
                    break Some((candidate, value));
                }
                if halvings == self.max_halvings {
                    break None;
                }
                t *= self.shrink;
                halvings += 1;
            };
            match accepted {
                Some((candidate, _)) => {
                    theta = candidate;
                    let (value, slope) = problem.evaluate(theta);
                    h = value;
                    grad = slope;
                    iterations += 1;
                    visit(theta, h);
                }
                None => {
                    stop = AscentStop::Stalled;
                    break;
                }
            }
        }

        AscentOutcome {
            angle: theta,
            value: h,
            gradient: grad,
            iterations,
            stop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AscentStop {
    /// Gradient magnitude fell to the tolerance.
    Converged,
    /// Outer iteration cap reached.
    IterationCap,
    /// Backtracking exhausted its halvings without an acceptable step.
    Stalled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOutcome {
    pub angle: f64,
    pub value: f64,
    pub gradient: f64,
    pub iterations: usize,
    pub stop: AscentStop,
}

impl AscentOutcome {
    pub fn flagged(&self) -> bool {
        self.stop != AscentStop::Converged
    }
}

/// The objective `h(theta) = d~^H R~ d~` with `d~ = diag(w)^-1/2 d(theta)`.
#[derive(Debug, Clone)]
pub struct SearchProblem {
    // diag(w)^-1/2 R~ diag(w)^-1/2, so h is evaluated on the raw steering vector
    kernel: CMatrix,
    seed_angle: f64,
}

impl SearchProblem {
    pub fn new(r_tilde: &CMatrix, whitening: &[f64], seed_angle: f64) -> Result<Self> {
        let n = r_tilde.nrows();
        if r_tilde.ncols() != n || whitening.len() != n {
            return Err(Error::Dimension(format!(
                "R~ is {}x{} with {} whitening weights",
                n,
                r_tilde.ncols(),
                whitening.len()
            )));
        }
        if let Some((index, &value)) = whitening.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
            return Err(Error::NonPositiveVariance { index, value });
        }
        if !(seed_angle > 0.0 && seed_angle < PI) {
            return Err(Error::AngleOutOfRange(seed_angle));
        }
        Ok(Self::from_parts(r_tilde, whitening, seed_angle))
    }

    pub(crate) fn from_parts(r_tilde: &CMatrix, whitening: &[f64], seed_angle: f64) -> Self {
        Self {
            kernel: whiten(r_tilde, whitening),
            seed_angle,
        }
    }

    pub fn seed_angle(&self) -> f64 {
        self.seed_angle
    }

    pub fn value(&self, theta: f64) -> f64 {
        let d = steer(theta, self.kernel.nrows());
        d.dotc(&(&self.kernel * &d)).re
    }

    /// `(h(theta), h'(theta))` with `h' = 2 Re{ d~'^H R~ d~ }`.
    pub fn evaluate(&self, theta: f64) -> (f64, f64) {
        let n = self.kernel.nrows();
        let d = steer(theta, n);
        let dd = steer_derivative(theta, n);
        let y = &self.kernel * &d;
        let h = d.dotc(&y).re;
        let grad = 2.0 * dd.dotc(&y).re;
        (h, grad)
    }
}

/// [`SearchProblem::evaluate`] with angle validation.
pub fn objective_and_gradient(problem: &SearchProblem, theta: f64) -> Result<(f64, f64)> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::AngleOutOfRange(theta));
    }
    Ok(problem.evaluate(theta))
}
