//! Discretized path spaces: periodic Fourier loops, fixed-end nodal paths
//! and closed-form paths, with their actions.
//!
//! The action of a path is `∫ (½ Σ m_i |v_i|² + U) dt`. The kinetic term
//! uses absolute velocities; for paths with a fixed center of mass this is
//! the usual `K/2`, and otherwise it only adds the (nonnegative) kinetic
//! energy of the centroid.

mod fourier;
mod nodes;

pub use fourier::FourierLoop;
pub use nodes::NodePath;

use serde::{Deserialize, Serialize};

use crate::dynamics::{closest_pair, potential_flat, Configuration, MassSystem, PhaseState};
use crate::error::{Error, Result};
use crate::quadrature::try_gauss_legendre;

/// Anything that can be evaluated to positions and velocities.
pub trait Path {
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    /// Time interval on which the path is defined. Periodic paths report one
    /// period but may be evaluated anywhere.
    fn domain(&self) -> (f64, f64);
    fn periodic(&self) -> bool {
        false
    }
    fn eval(&self, t: f64) -> Result<PhaseState>;
}

/// Uniform-grid quadrature parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub samples: usize,
}

impl QuadratureSpec {
    pub fn new(samples: usize) -> Result<Self> {
        if samples < 3 {
            return Err(Error::Grid(format!("need at least 3 samples, got {samples}")));
        }
        Ok(Self { samples })
    }

    /// Quadrature for a loop with `modes` harmonics; enforces `M ≥ 4·modes`.
    pub fn for_loop(samples: usize, modes: usize) -> Result<Self> {
        if samples < 4 * modes.max(1) {
            return Err(Error::Grid(format!(
                "{samples} samples is below the anti-aliasing floor 4·{modes}"
            )));
        }
        Self::new(samples)
    }

    pub fn refined(self) -> Self {
        Self {
            samples: 2 * self.samples,
        }
    }
}

/// Closest approach on a sample grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinDistance {
    pub value: f64,
    pub time: f64,
    pub pair: (usize, usize),
}

impl MinDistance {
    pub(crate) fn none() -> Self {
        Self {
            value: f64::INFINITY,
            time: 0.0,
            pair: (0, 1),
        }
    }

    pub(crate) fn update(&mut self, x: &[f64], n: usize, d: usize, t: f64) {
        let (r, i, j) = closest_pair(x, n, d);
        if r < self.value {
            *self = Self {
                value: r,
                time: t,
                pair: (i, j),
            };
        }
    }
}

/// Position and velocity of any path at `t`.
pub fn eval_path<P: Path + ?Sized>(path: &P, t: f64) -> Result<PhaseState> {
    path.eval(t)
}

fn check_window<P: Path + ?Sized>(path: &P, t1: f64, t2: f64) -> Result<()> {
    if !(t2 > t1) {
        return Err(Error::bad(format!("empty window [{t1}, {t2}]")));
    }
    if !path.periodic() {
        let (lo, hi) = path.domain();
        let slack = 1e-12 * (hi - lo).abs().max(1.0);
        for t in [t1, t2] {
            if t < lo - slack || t > hi + slack {
                return Err(Error::OutOfRange { t, lo, hi });
            }
        }
    }
    Ok(())
}

/// Lagrangian `½ Σ m|v|² + U` at one phase-space point.
pub fn lagrangian(state: &PhaseState, ms: &MassSystem) -> Result<f64> {
    let v = &state.velocities;
    Ok(0.5 * ms.dot(v, v) + potential_flat(state.config.as_slice(), ms)?)
}

/// Action of any path over `[t1, t2]` by composite Gauss–Legendre
/// quadrature with `panels` panels.
pub fn action_window<P: Path + ?Sized>(path: &P, ms: &MassSystem, t1: f64, t2: f64, panels: usize) -> Result<f64> {
    check_window(path, t1, t2)?;
    try_gauss_legendre(t1, t2, panels.max(1), |t| {
        let st = path.eval(t)?;
        lagrangian(&st, ms).map_err(|e| e.at_time(t))
    })
}

/// Minimum pairwise distance over `samples + 1` equally spaced times
/// covering the domain (both ends included).
pub fn min_pairwise_distance<P: Path + ?Sized>(path: &P, samples: usize) -> Result<MinDistance> {
    let (lo, hi) = path.domain();
    let mut best = MinDistance::none();
    let samples = samples.max(1);
    for s in 0..=samples {
        let t = lo + (hi - lo) * s as f64 / samples as f64;
        let st = path.eval(t)?;
        best.update(st.config.as_slice(), path.n(), path.dim(), t);
    }
    Ok(best)
}

/// A path given by a closure returning flat positions and velocities.
pub struct ClosedFormPath {
    n: usize,
    dim: usize,
    domain: (f64, f64),
    f: Box<dyn Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync>,
}

impl ClosedFormPath {
    pub fn new<F>(n: usize, dim: usize, domain: (f64, f64), f: F) -> Self
    where
        F: Fn(f64) -> (Vec<f64>, Vec<f64>) + Send + Sync + 'static,
    {
        Self {
            n,
            dim,
            domain,
            f: Box::new(f),
        }
    }
}

impl Path for ClosedFormPath {
    fn n(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
    fn eval(&self, t: f64) -> Result<PhaseState> {
        let (lo, hi) = self.domain;
        if t < lo || t > hi {
            return Err(Error::OutOfRange { t, lo, hi });
        }
        let (x, v) = (self.f)(t);
        PhaseState::new(Configuration::new(self.n, self.dim, x)?, v)
    }
}

/// The blow-up `x^λ(t) = λ^{-2/3} x(λ t)` of a path, evaluated lazily.
pub struct BlownUp<'a, P: ?Sized> {
    inner: &'a P,
    lambda: f64,
}

/// Rescaled path `λ^{-2/3} x(λ t)`; solutions are mapped to solutions and
/// actions on `[T1, T2]` scale by `λ^{-1/3}` relative to `[λT1, λT2]`.
pub fn blow_up<P: Path + ?Sized>(path: &P, lambda: f64) -> Result<BlownUp<'_, P>> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::bad(format!("blow-up factor must be positive, got {lambda}")));
    }
    Ok(BlownUp { inner: path, lambda })
}

impl<P: Path + ?Sized> Path for BlownUp<'_, P> {
    fn n(&self) -> usize {
        self.inner.n()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn domain(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.domain();
        (lo / self.lambda, hi / self.lambda)
    }
    fn periodic(&self) -> bool {
        self.inner.periodic()
    }
    fn eval(&self, t: f64) -> Result<PhaseState> {
        let st = self.inner.eval(self.lambda * t)?;
        let xs = self.lambda.powf(-2.0 / 3.0);
        let vs = self.lambda.powf(1.0 / 3.0);
        let cfg = st.config.scaled(xs);
        let v = st.velocities.iter().map(|v| v * vs).collect();
        PhaseState::new(cfg, v)
    }
}

/// `base + eps · variation`, pointwise.
pub struct Perturbed<'a, P: ?Sized, V: ?Sized> {
    pub base: &'a P,
    pub variation: &'a V,
    pub eps: f64,
}

impl<P: Path + ?Sized, V: Path + ?Sized> Path for Perturbed<'_, P, V> {
    fn n(&self) -> usize {
        self.base.n()
    }
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn domain(&self) -> (f64, f64) {
        self.base.domain()
    }
    fn periodic(&self) -> bool {
        self.base.periodic()
    }
    fn eval(&self, t: f64) -> Result<PhaseState> {
        let a = self.base.eval(t)?;
        let b = self.variation.eval(t)?;
        let x: Vec<f64> = a
            .config
            .as_slice()
            .iter()
            .zip(b.config.as_slice())
            .map(|(p, q)| p + self.eps * q)
            .collect();
        let v: Vec<f64> = a
            .velocities
            .iter()
            .zip(&b.velocities)
            .map(|(p, q)| p + self.eps * q)
            .collect();
        PhaseState::new(Configuration::new(self.n(), self.dim(), x)?, v)
    }
}
