use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{MinDistance, Path, QuadratureSpec};
use crate::dynamics::{add_forces, potential_flat, Configuration, MassSystem, PhaseState};
use crate::error::{Error, Result};

/// A periodic loop given by truncated trigonometric series
///
/// `x_{i,a}(t) = c_{i,a} + Σ_{k=1..m} α_{i,a,k} cos(2πkt/T) + β_{i,a,k} sin(2πkt/T)`.
///
/// Coefficients are stored body-major, axis-minor; each `(body, axis)` block
/// is `[c, α_1..α_m, β_1..β_m]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierLoop {
    n: usize,
    dim: usize,
    period: f64,
    modes: usize,
    coeffs: Vec<f64>,
}

/// cos/sin of `2π k s / M` for `s < M`, `k = 1..=m`, row-major in `s`.
pub(crate) struct TrigTable {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigTable {
    pub(crate) fn new(samples: usize, modes: usize) -> Self {
        let mut cos = Vec::with_capacity(samples * modes);
        let mut sin = Vec::with_capacity(samples * modes);
        for s in 0..samples {
            for k in 1..=modes {
                // reduce k·s mod M first so the grid stays exactly periodic
                let ang = 2.0 * PI * ((k * s) % samples) as f64 / samples as f64;
                cos.push(ang.cos());
                sin.push(ang.sin());
            }
        }
        Self { cos, sin }
    }
}

impl FourierLoop {
    pub fn new(n: usize, dim: usize, period: f64, modes: usize, coeffs: Vec<f64>) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::bad(format!("period must be positive, got {period}")));
        }
        let expected = n * dim * (2 * modes + 1);
        if coeffs.len() != expected {
            return Err(Error::DimMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            n,
            dim,
            period,
            modes,
            coeffs,
        })
    }

    pub fn zeros(n: usize, dim: usize, period: f64, modes: usize) -> Result<Self> {
        Self::new(n, dim, period, modes, vec![0.0; n * dim * (2 * modes + 1)])
    }

    /// Rigid uniform rotation of a planar configuration about the `z` axis
    /// (in the `xy` plane), `turns` full turns per period.
    pub fn rigid_rotation(cfg: &Configuration, period: f64, turns: i32, modes: usize) -> Result<Self> {
        let k = turns.unsigned_abs() as usize;
        if k == 0 || k > modes {
            return Err(Error::bad(format!("cannot represent {turns} turns with {modes} modes")));
        }
        let sign = turns.signum() as f64;
        let mut lp = Self::zeros(cfg.n(), cfg.dim(), period, modes)?;
        for i in 0..cfg.n() {
            let r = cfg.body(i);
            // (x, y) rotated by sign·ωt
            *lp.cos_mut(i, 0, k) = r[0];
            *lp.sin_mut(i, 0, k) = -sign * r[1];
            *lp.cos_mut(i, 1, k) = r[1];
            *lp.sin_mut(i, 1, k) = sign * r[0];
            for a in 2..cfg.dim() {
                *lp.constant_mut(i, a) = r[a];
            }
        }
        Ok(lp)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(self.n, self.dim, self.period, self.modes, coeffs)
    }

    pub(crate) fn stride(&self) -> usize {
        2 * self.modes + 1
    }

    pub(crate) fn block(&self, i: usize, a: usize) -> usize {
        (i * self.dim + a) * self.stride()
    }

    pub fn constant(&self, i: usize, a: usize) -> f64 {
        self.coeffs[self.block(i, a)]
    }
    pub fn cos(&self, i: usize, a: usize, k: usize) -> f64 {
        self.coeffs[self.block(i, a) + k]
    }
    pub fn sin(&self, i: usize, a: usize, k: usize) -> f64 {
        self.coeffs[self.block(i, a) + self.modes + k]
    }
    pub fn constant_mut(&mut self, i: usize, a: usize) -> &mut f64 {
        let b = self.block(i, a);
        &mut self.coeffs[b]
    }
    pub fn cos_mut(&mut self, i: usize, a: usize, k: usize) -> &mut f64 {
        let b = self.block(i, a);
        &mut self.coeffs[b + k]
    }
    pub fn sin_mut(&mut self, i: usize, a: usize, k: usize) -> &mut f64 {
        let b = self.block(i, a) + self.modes;
        &mut self.coeffs[b + k]
    }

    /// Mode index of a flat coefficient position (0 for constants).
    pub fn mode_of(&self, idx: usize) -> usize {
        let r = idx % self.stride();
        if r == 0 {
            0
        } else if r <= self.modes {
            r
        } else {
            r - self.modes
        }
    }

    /// Body index of a flat coefficient position.
    pub fn body_of(&self, idx: usize) -> usize {
        idx / (self.stride() * self.dim)
    }

    fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Exact kinetic part `∫₀ᵀ ½ Σ m_i |ẋ_i|² dt` by Parseval.
    pub fn kinetic_action(&self, ms: &MassSystem) -> f64 {
        let w = self.omega();
        let mut total = 0.0;
        for i in 0..self.n {
            let mut s = 0.0;
            for a in 0..self.dim {
                for k in 1..=self.modes {
                    let (c, sn) = (self.cos(i, a, k), self.sin(i, a, k));
                    s += (k * k) as f64 * (c * c + sn * sn);
                }
            }
            total += ms.mass(i) * s;
        }
        0.25 * self.period * w * w * total
    }

    /// Positions at `t_s = sT/M`, `s < M`, as an `M × n × dim` array.
    pub(crate) fn grid_positions(&self, table: &TrigTable, samples: usize) -> Vec<f64> {
        let nd = self.n * self.dim;
        let m = self.modes;
        let mut out = vec![0.0; samples * nd];
        for s in 0..samples {
            let cs = &table.cos[s * m..(s + 1) * m];
            let sn = &table.sin[s * m..(s + 1) * m];
            for ia in 0..nd {
                let b = ia * self.stride();
                let mut v = self.coeffs[b];
                for k in 0..m {
                    v += self.coeffs[b + 1 + k] * cs[k] + self.coeffs[b + 1 + m + k] * sn[k];
                }
                out[s * nd + ia] = v;
            }
        }
        out
    }

    fn check(&self, ms: &MassSystem) -> Result<()> {
        if ms.n() != self.n || ms.dim() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.n * self.dim,
                got: ms.n() * ms.dim(),
            });
        }
        Ok(())
    }

    /// Discretized action: spectral kinetic term plus `M`-point uniform
    /// rectangle rule for `∫ U dt`.
    pub fn action(&self, ms: &MassSystem, quad: &QuadratureSpec) -> Result<f64> {
        self.check(ms)?;
        let m = quad.samples;
        let table = TrigTable::new(m, self.modes);
        let grid = self.grid_positions(&table, m);
        let nd = self.n * self.dim;
        let dt = self.period / m as f64;
        let mut pot = 0.0;
        for s in 0..m {
            pot += potential_flat(&grid[s * nd..(s + 1) * nd], ms).map_err(|e| e.at_time(s as f64 * dt))?;
        }
        Ok(self.kinetic_action(ms) + dt * pot)
    }

    /// Action and its exact gradient with respect to every coefficient.
    pub fn action_and_gradient(&self, ms: &MassSystem, quad: &QuadratureSpec) -> Result<(f64, Vec<f64>)> {
        self.check(ms)?;
        let m = quad.samples;
        let modes = self.modes;
        let table = TrigTable::new(m, modes);
        let grid = self.grid_positions(&table, m);
        let nd = self.n * self.dim;
        let dt = self.period / m as f64;
        let mut grad = vec![0.0; self.coeffs.len()];
        let mut forces = vec![0.0; nd];
        let mut pot = 0.0;
        for s in 0..m {
            forces.iter_mut().for_each(|f| *f = 0.0);
            pot +=
                add_forces(&grid[s * nd..(s + 1) * nd], ms, 1.0, &mut forces).map_err(|e| e.at_time(s as f64 * dt))?;
            let cs = &table.cos[s * modes..(s + 1) * modes];
            let sn = &table.sin[s * modes..(s + 1) * modes];
            for ia in 0..nd {
                // d action / d x = -(forces) ... U enters with a plus sign,
                // and ∂U/∂x_i = m_i a_i = forces_i.
                let f = dt * forces[ia];
                let b = ia * self.stride();
                grad[b] += f;
                for k in 0..modes {
                    grad[b + 1 + k] += f * cs[k];
                    grad[b + 1 + modes + k] += f * sn[k];
                }
            }
        }
        let w = self.omega();
        let half_t = 0.5 * self.period;
        for ia in 0..nd {
            let mi = ms.mass(ia / self.dim);
            let b = ia * self.stride();
            for k in 1..=modes {
                let c = mi * (w * k as f64).powi(2) * half_t;
                grad[b + k] += c * self.coeffs[b + k];
                grad[b + modes + k] += c * self.coeffs[b + modes + k];
            }
        }
        Ok((self.kinetic_action(ms) + dt * pot, grad))
    }

    /// `λ^{-2/3} x(λt)`: same coefficients scaled, period divided by `λ`.
    pub fn blow_up(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::bad(format!("blow-up factor must be positive, got {lambda}")));
        }
        let s = lambda.powf(-2.0 / 3.0);
        Self::new(
            self.n,
            self.dim,
            self.period / lambda,
            self.modes,
            self.coeffs.iter().map(|c| c * s).collect(),
        )
    }

    /// Closest approach over the quadrature grid.
    pub fn min_pairwise_distance(&self, quad: &QuadratureSpec) -> MinDistance {
        let m = quad.samples;
        let table = TrigTable::new(m, self.modes);
        let grid = self.grid_positions(&table, m);
        let nd = self.n * self.dim;
        let mut best = MinDistance::none();
        for s in 0..m {
            best.update(
                &grid[s * nd..(s + 1) * nd],
                self.n,
                self.dim,
                s as f64 * self.period / m as f64,
            );
        }
        best
    }

    /// Positions on the `M`-point grid, one configuration per sample.
    pub fn sample(&self, samples: usize) -> Vec<Configuration> {
        let table = TrigTable::new(samples, self.modes);
        let nd = self.n * self.dim;
        self.grid_positions(&table, samples)
            .chunks(nd)
            .map(|c| Configuration::new(self.n, self.dim, c.to_vec()).expect("grid shape"))
            .collect()
    }

    /// Phase states on the `M`-point grid.
    pub fn sample_states(&self, samples: usize) -> Vec<PhaseState> {
        (0..samples)
            .map(|s| {
                self.eval(s as f64 * self.period / samples as f64)
                    .expect("loops evaluate everywhere")
            })
            .collect()
    }

    /// Same loop, represented with `modes` harmonics (zero padded or
    /// truncated).
    pub fn resized(&self, modes: usize) -> Self {
        let mut out = Self::zeros(self.n, self.dim, self.period, modes).expect("valid shape");
        for i in 0..self.n {
            for a in 0..self.dim {
                *out.constant_mut(i, a) = self.constant(i, a);
                for k in 1..=modes.min(self.modes) {
                    *out.cos_mut(i, a, k) = self.cos(i, a, k);
                    *out.sin_mut(i, a, k) = self.sin(i, a, k);
                }
            }
        }
        out
    }

    /// Moves the mass-weighted centroid of the constant terms to the origin.
    pub fn center(&mut self, ms: &MassSystem) {
        let mt = ms.total_mass();
        for a in 0..self.dim {
            let c: f64 = (0..self.n).map(|i| ms.mass(i) * self.constant(i, a)).sum::<f64>() / mt;
            for i in 0..self.n {
                *self.constant_mut(i, a) -= c;
            }
        }
    }

    /// `L²` mass inner product `∫₀ᵀ Σ m_i <x_i, y_i> dt` of two loops of the
    /// same shape, from their coefficients.
    pub fn l2_dot(&self, other: &Self, ms: &MassSystem) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            let mut s = 0.0;
            for a in 0..self.dim {
                let (b1, b2) = (self.block(i, a), other.block(i, a));
                s += self.coeffs[b1] * other.coeffs[b2];
                let mut h = 0.0;
                for r in 1..self.stride() {
                    h += self.coeffs[b1 + r] * other.coeffs[b2 + r];
                }
                s += 0.5 * h;
            }
            total += ms.mass(i) * s;
        }
        total * self.period
    }
}

impl Path for FourierLoop {
    fn n(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, self.period)
    }
    fn periodic(&self) -> bool {
        true
    }
    fn eval(&self, t: f64) -> Result<PhaseState> {
        let w = self.omega();
        let tau = t.rem_euclid(self.period);
        let nd = self.n * self.dim;
        let mut x = vec![0.0; nd];
        let mut v = vec![0.0; nd];
        for k in 1..=self.modes {
            let (s, c) = (w * k as f64 * tau).sin_cos();
            let wk = w * k as f64;
            for ia in 0..nd {
                let b = ia * self.stride();
                let (ca, sa) = (self.coeffs[b + k], self.coeffs[b + self.modes + k]);
                x[ia] += ca * c + sa * s;
                v[ia] += wk * (sa * c - ca * s);
            }
        }
        for ia in 0..nd {
            x[ia] += self.coeffs[ia * self.stride()];
        }
        PhaseState::new(Configuration::new(self.n, self.dim, x)?, v)
    }
}
