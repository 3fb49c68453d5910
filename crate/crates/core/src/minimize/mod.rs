//! Minimization of discretized actions over symmetric loop spaces and
//! fixed-end path spaces.

mod fixed;
mod lbfgs;
mod loops;

pub use fixed::{bumped_straight_path, minimize_fixed_ends, minimize_p12, P12Options};
pub use loops::{minimize_loop, multistart_loop, random_init, MultistartReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::MinDistance;

/// Harmonics per coordinate of a loop.
pub const DEFAULT_LOOP_MODES: usize = 24;
/// Quadrature samples per period of a loop.
pub const DEFAULT_LOOP_SAMPLES: usize = 256;
/// Interior nodes of a fixed-end path.
pub const DEFAULT_INTERIOR_NODES: usize = 128;

/// Knobs of the quasi-Newton solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Tolerance on the Euclidean norm of the action gradient.
    pub gtol: f64,
    /// Sufficient-decrease constant of the backtracking line search.
    pub sufficient_decrease: f64,
    /// Step shrink factor of the backtracking line search.
    pub backtrack: f64,
    /// Soft collision floor, relative to the scale of the initial path.
    pub dmin: f64,
    /// Number of stored curvature pairs.
    pub memory: usize,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            gtol: 1e-7,
            sufficient_decrease: 1e-4,
            backtrack: 0.5,
            dmin: 1e-3,
            memory: 20,
            seed: 0,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gtol > 0.0) {
            return Err(Error::bad(format!("gtol must be positive, got {}", self.gtol)));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::bad(format!(
                "backtracking factor must lie in (0, 1), got {}",
                self.backtrack
            )));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return Err(Error::bad(format!(
                "sufficient-decrease constant must lie in (0, 1), got {}",
                self.sufficient_decrease
            )));
        }
        if !(self.dmin >= 0.0) {
            return Err(Error::bad(format!("dmin must be nonnegative, got {}", self.dmin)));
        }
        if self.memory == 0 {
            return Err(Error::bad("memory must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    /// Gradient norm below `gtol`, or a quasi-Newton step whose predicted
    /// decrease is lost in the round-off of the action.
    Converged,
    MaxIter,
    /// No admissible step stays above the soft collision floor.
    CollisionFloor,
    /// The line search fails although the model predicts a resolvable
    /// decrease.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeReport {
    pub action: f64,
    /// Norm of the full, unconstrained gradient.
    pub grad_norm: f64,
    /// Norm of the gradient restricted to the admissible subspace.
    pub projected_grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub min_distance: MinDistance,
    pub termination: Termination,
    /// Action after every accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    pub seed: u64,
}

impl MinimizeReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// A smooth function on a flat vector, restricted to a linear subspace.
pub(crate) trait Objective {
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    /// Euclidean-orthogonal projection onto the admissible subspace.
    fn project(&self, v: &mut [f64]);
    /// Approximate inverse Hessian applied in place.
    fn precondition(&self, v: &mut [f64]);
    fn min_distance(&self, x: &[f64]) -> MinDistance;
    /// Whether convergence is judged on the full gradient (true) or only on
    /// its admissible part.
    fn full_gradient_converges(&self) -> bool;
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
