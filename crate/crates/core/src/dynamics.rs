//! Pointwise n-body quantities.
//!
//! Units follow the usual convention `G = 1`. Configurations are stored as
//! flat row-major `n × dim` arrays; everything in this module is a pure
//! function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative collision threshold.
pub const DEFAULT_COLLISION_EPS: f64 = 1e-12;

/// Masses and ambient dimension of an n-body problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSystem {
    dim: usize,
    masses: Vec<f64>,
    collision_eps: f64,
}

impl MassSystem {
    pub fn new(dim: usize, masses: Vec<f64>) -> Result<Self> {
        if masses.len() < 2 {
            return Err(Error::bad(format!("need at least 2 bodies, got {}", masses.len())));
        }
        if !(dim == 2 || dim == 3) {
            return Err(Error::bad(format!("dimension must be 2 or 3, got {dim}")));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::bad(format!("masses must be positive, got {m}")));
        }
        Ok(Self {
            dim,
            masses,
            collision_eps: DEFAULT_COLLISION_EPS,
        })
    }

    /// `n` unit masses.
    pub fn equal(n: usize, dim: usize) -> Result<Self> {
        Self::new(dim, vec![1.0; n])
    }

    pub fn with_collision_eps(mut self, eps: f64) -> Self {
        self.collision_eps = eps;
        self
    }

    pub fn n(&self) -> usize {
        self.masses.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn collision_eps(&self) -> f64 {
        self.collision_eps
    }

    /// Length of a flat configuration array.
    pub fn len(&self) -> usize {
        self.n() * self.dim
    }

    pub fn all_equal_masses(&self) -> bool {
        self.masses.iter().all(|m| *m == self.masses[0])
    }

    /// Mass-weighted centroid of a flat `n × dim` array.
    pub fn centroid(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut c = vec![0.0; d];
        for (i, m) in self.masses.iter().enumerate() {
            for a in 0..d {
                c[a] += m * x[i * d + a];
            }
        }
        let mt = self.total_mass();
        c.iter_mut().for_each(|v| *v /= mt);
        c
    }

    /// Mass inner product `Σ m_i <a_i, b_i>` without centroid reduction.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = self.dim;
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| m * (0..d).map(|k| a[i * d + k] * b[i * d + k]).sum::<f64>())
            .sum()
    }

    /// The mass scalar product `Σ m_i <a_i - a_G, b_i - b_G>`.
    pub fn metric_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let ca = self.centroid(a);
        let cb = self.centroid(b);
        let d = self.dim;
        let mut s = 0.0;
        for (i, m) in self.masses.iter().enumerate() {
            for k in 0..d {
                s += m * (a[i * d + k] - ca[k]) * (b[i * d + k] - cb[k]);
            }
        }
        s
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::DimMismatch {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }
}

/// Positions of `n` bodies, row-major `n × dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    n: usize,
    dim: usize,
    pos: Vec<f64>,
}

impl Configuration {
    pub fn new(n: usize, dim: usize, pos: Vec<f64>) -> Result<Self> {
        if pos.len() != n * dim {
            return Err(Error::DimMismatch {
                expected: n * dim,
                got: pos.len(),
            });
        }
        Ok(Self { n, dim, pos })
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            n,
            dim,
            pos: vec![0.0; n * dim],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::bad("ragged configuration rows"));
        }
        Self::new(n, dim, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pos
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.pos
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.pos
    }

    pub fn body(&self, i: usize) -> &[f64] {
        &self.pos[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.pos.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(self.body(i), self.body(j))
    }

    /// RMS distance of the bodies from their arithmetic mean.
    pub fn scale(&self) -> f64 {
        geometric_scale(&self.pos, self.n, self.dim)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            dim: self.dim,
            pos: self.pos.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Positions and velocities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub config: Configuration,
    pub velocities: Vec<f64>,
}

impl PhaseState {
    pub fn new(config: Configuration, velocities: Vec<f64>) -> Result<Self> {
        if velocities.len() != config.as_slice().len() {
            return Err(Error::DimMismatch {
                expected: config.as_slice().len(),
                got: velocities.len(),
            });
        }
        Ok(Self { config, velocities })
    }

    /// Both centroids moved to the origin.
    pub fn reduced(&self, ms: &MassSystem) -> Self {
        let config = reduce_to_center_of_mass(&self.config, ms);
        let mut velocities = self.velocities.clone();
        subtract_centroid(&mut velocities, ms);
        Self { config, velocities }
    }
}

/// The isometry invariants of a phase-space point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantSet {
    /// Moment of inertia about the center of mass.
    pub i: f64,
    /// Half the time derivative of `i`.
    pub j: f64,
    /// Twice the kinetic energy in the center-of-mass frame.
    pub k: f64,
    /// Force function (minus the potential energy).
    pub u: f64,
    /// Energy `k/2 - u`.
    pub h: f64,
    /// Lagrangian `k/2 + u`.
    pub l: f64,
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn geometric_scale(x: &[f64], n: usize, d: usize) -> f64 {
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for a in 0..d {
            mean[a] += x[i * d + a];
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut s = 0.0;
    for i in 0..n {
        for a in 0..d {
            let v = x[i * d + a] - mean[a];
            s += v * v;
        }
    }
    (s / n as f64).sqrt()
}

pub(crate) fn subtract_centroid(x: &mut [f64], ms: &MassSystem) {
    let c = ms.centroid(x);
    let d = ms.dim();
    for row in x.chunks_mut(d) {
        for a in 0..d {
            row[a] -= c[a];
        }
    }
}

/// Closest pair `(distance, i, j)` of a flat configuration.
pub(crate) fn closest_pair(x: &[f64], n: usize, d: usize) -> (f64, usize, usize) {
    let mut best = (f64::INFINITY, 0, 1);
    for i in 0..n {
        for j in i + 1..n {
            let r = dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
            if r < best.0 {
                best = (r, i, j);
            }
        }
    }
    best
}

fn collision_threshold(x: &[f64], ms: &MassSystem) -> f64 {
    ms.collision_eps() * geometric_scale(x, ms.n(), ms.dim())
}

/// `U` on a flat array.
pub(crate) fn potential_flat(x: &[f64], ms: &MassSystem) -> Result<f64> {
    let (n, d) = (ms.n(), ms.dim());
    let eps = collision_threshold(x, ms);
    let mut u = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let r = dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
            if r <= eps {
                return Err(Error::Collision {
                    i,
                    j,
                    distance: r,
                    time: None,
                });
            }
            u += ms.mass(i) * ms.mass(j) / r;
        }
    }
    Ok(u)
}

/// Adds the Euclidean gradient `∂U/∂x` (i.e. the forces `m_i a_i`) into
/// `out`, scaled by `weight`, and returns `U`.
pub(crate) fn add_forces(x: &[f64], ms: &MassSystem, weight: f64, out: &mut [f64]) -> Result<f64> {
    let (n, d) = (ms.n(), ms.dim());
    let eps = collision_threshold(x, ms);
    let mut u = 0.0;
    let mut diff = [0.0f64; 3];
    for i in 0..n {
        for j in i + 1..n {
            let mut r2 = 0.0;
            for a in 0..d {
                diff[a] = x[j * d + a] - x[i * d + a];
                r2 += diff[a] * diff[a];
            }
            let r = r2.sqrt();
            if r <= eps {
                return Err(Error::Collision {
                    i,
                    j,
                    distance: r,
                    time: None,
                });
            }
            let mm = ms.mass(i) * ms.mass(j);
            u += mm / r;
            let c = weight * mm / (r2 * r);
            for a in 0..d {
                out[i * d + a] += c * diff[a];
                out[j * d + a] -= c * diff[a];
            }
        }
    }
    Ok(u)
}

/// Accelerations `∇U` in the mass metric on a flat array.
pub(crate) fn accelerations_flat(x: &[f64], ms: &MassSystem, out: &mut [f64]) -> Result<f64> {
    out.iter_mut().for_each(|v| *v = 0.0);
    let u = add_forces(x, ms, 1.0, out)?;
    let d = ms.dim();
    for (i, row) in out.chunks_mut(d).enumerate() {
        let m = ms.mass(i);
        row.iter_mut().for_each(|v| *v /= m);
    }
    Ok(u)
}

/// `U = Σ_{i<j} m_i m_j / |r_i - r_j|`.
pub fn potential(cfg: &Configuration, ms: &MassSystem) -> Result<f64> {
    ms.check_len(cfg.as_slice().len())?;
    potential_flat(cfg.as_slice(), ms)
}

/// Gradient of `U` for the mass metric: body `i` gets
/// `Σ_{j≠i} m_j (r_j - r_i)/|r_j - r_i|³`.
pub fn grad_potential(cfg: &Configuration, ms: &MassSystem) -> Result<Configuration> {
    ms.check_len(cfg.as_slice().len())?;
    let mut out = vec![0.0; ms.len()];
    accelerations_flat(cfg.as_slice(), ms, &mut out)?;
    Configuration::new(ms.n(), ms.dim(), out)
}

pub fn scalar_invariants(state: &PhaseState, ms: &MassSystem) -> Result<InvariantSet> {
    let x = state.config.as_slice();
    ms.check_len(x.len())?;
    let y = &state.velocities;
    let i = ms.metric_dot(x, x);
    let j = ms.metric_dot(x, y);
    let k = ms.metric_dot(y, y);
    let u = potential_flat(x, ms)?;
    Ok(InvariantSet {
        i,
        j,
        k,
        u,
        h: 0.5 * k - u,
        l: 0.5 * k + u,
    })
}

pub fn reduce_to_center_of_mass(cfg: &Configuration, ms: &MassSystem) -> Configuration {
    let mut out = cfg.clone();
    subtract_centroid(&mut out.pos, ms);
    out
}

/// Named configuration shapes. All are placed in the `xy` plane and reduced
/// to their center of mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Preset {
    Equilateral {
        side: f64,
    },
    /// Collinear central configuration with body 0 between bodies 1 and 2;
    /// `spacing` is the distance from body 0 to body 1.
    EulerCollinear {
        spacing: f64,
    },
    RegularNgon {
        circumradius: f64,
    },
    /// Bodies 0 and 1 at the ends of the base, body 2 at the apex.
    Isosceles {
        base: f64,
        height: f64,
    },
}

pub fn preset_configuration(kind: Preset, ms: &MassSystem) -> Result<Configuration> {
    let n = ms.n();
    let planar: Vec<[f64; 2]> = match kind {
        Preset::Equilateral { side } => {
            require_three(n, "equilateral")?;
            require_positive(side, "side")?;
            let rc = side / 3f64.sqrt();
            (0..3)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                    [rc * a.cos(), rc * a.sin()]
                })
                .collect()
        }
        Preset::EulerCollinear { spacing } => {
            require_three(n, "euler_collinear")?;
            require_positive(spacing, "spacing")?;
            let z = euler_ratio(ms.masses())?;
            vec![[0.0, 0.0], [-spacing, 0.0], [spacing * z, 0.0]]
        }
        Preset::RegularNgon { circumradius } => {
            require_positive(circumradius, "circumradius")?;
            (0..n)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    [circumradius * a.cos(), circumradius * a.sin()]
                })
                .collect()
        }
        Preset::Isosceles { base, height } => {
            require_three(n, "isosceles")?;
            require_positive(base, "base")?;
            require_positive(height, "height")?;
            vec![[-0.5 * base, 0.0], [0.5 * base, 0.0], [0.0, height]]
        }
    };
    let d = ms.dim();
    let mut pos = vec![0.0; n * d];
    for (i, p) in planar.iter().enumerate() {
        pos[i * d] = p[0];
        pos[i * d + 1] = p[1];
    }
    let cfg = Configuration::new(n, d, pos)?;
    Ok(reduce_to_center_of_mass(&cfg, ms))
}

fn require_three(n: usize, name: &str) -> Result<()> {
    if n != 3 {
        return Err(Error::bad(format!("{name} preset needs 3 bodies, got {n}")));
    }
    Ok(())
}

fn require_positive(v: f64, name: &str) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::bad(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Ratio `|r_2 - r_0| / |r_1 - r_0|` of the Euler collinear central
/// configuration with body 0 in the middle.
fn euler_ratio(m: &[f64]) -> Result<f64> {
    // Positions -1, 0, z on a line; central iff the accelerations are an
    // affine-proportional function of position.
    let f = |z: f64| {
        let x = [0.0, -1.0, z];
        let acc = |i: usize| -> f64 {
            (0..3)
                .filter(|&j| j != i)
                .map(|j| {
                    let r = x[j] - x[i];
                    m[j] * r.signum() / (r * r)
                })
                .sum()
        };
        let (a0, a1, a2) = (acc(0), acc(1), acc(2));
        (a2 - a0) / z - (a0 - a1)
    };
    let (mut lo, mut hi) = (-8.0f64, 8.0f64); // log z
    let (flo, fhi) = (f(lo.exp()), f(hi.exp()));
    if flo.signum() == fhi.signum() {
        return Err(Error::bad("could not bracket the Euler configuration"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp()).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// `Ï − 4H − 2U` along a uniformly sampled trajectory, `Ï` from second
/// differences of the sampled moment of inertia. Returns one value per
/// interior sample.
pub fn lagrange_jacobi_residual(states: &[PhaseState], dt: f64, ms: &MassSystem) -> Result<Vec<f64>> {
    if states.len() < 3 {
        return Err(Error::Grid(format!("need at least 3 samples, got {}", states.len())));
    }
    if !(dt > 0.0) {
        return Err(Error::Grid(format!("time step must be positive, got {dt}")));
    }
    let inv: Vec<InvariantSet> = states.iter().map(|s| scalar_invariants(s, ms)).collect::<Result<_>>()?;
    Ok(inv
        .windows(3)
        .map(|w| (w[2].i - 2.0 * w[1].i + w[0].i) / (dt * dt) - 4.0 * w[1].h - 2.0 * w[1].u)
        .collect())
}

/// `Ũ = I^{1/2} U`, the scale-invariant potential.
pub fn normalized_potential(x: &[f64], ms: &MassSystem) -> Result<f64> {
    Ok(ms.metric_dot(x, x).sqrt() * potential_flat(x, ms)?)
}

/// Mass-metric gradient of `Ũ`; zero exactly at central configurations.
pub fn grad_normalized_potential(x: &[f64], ms: &MassSystem) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; x.len()];
    let u = accelerations_flat(x, ms, &mut acc)?;
    let i = ms.metric_dot(x, x);
    let mut xr = x.to_vec();
    subtract_centroid(&mut xr, ms);
    Ok(acc
        .iter()
        .zip(&xr)
        .map(|(a, r)| i.sqrt() * a + u / i.sqrt() * r)
        .collect())
}

/// For a central configuration, `λ` with `∇U(x) = −λ x`; equals `U/I`.
pub fn central_multiplier(cfg: &Configuration, ms: &MassSystem) -> Result<f64> {
    let x = cfg.as_slice();
    Ok(potential_flat(x, ms)? / ms.metric_dot(x, x))
}

/// Relative defect of a configuration from being central:
/// `|∇Ũ| / (Ũ / I^{1/2})`, measured in the mass metric.
pub fn central_defect(cfg: &Configuration, ms: &MassSystem) -> Result<f64> {
    let x = cfg.as_slice();
    let g = grad_normalized_potential(x, ms)?;
    let i = ms.metric_dot(x, x);
    let ut = normalized_potential(x, ms)?;
    Ok(ms.dot(&g, &g).sqrt() / (ut / i.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cfg(rows: &[&[f64]]) -> Configuration {
        Configuration::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn potential_examples() {
        let ms = MassSystem::equal(2, 2).unwrap();
        assert_eq!(potential(&cfg(&[&[0.0, 0.0], &[1.0, 0.0]]), &ms).unwrap(), 1.0);

        let ms3 = MassSystem::equal(3, 2).unwrap();
        let tri = preset_configuration(Preset::Equilateral { side: 2.0 }, &ms3).unwrap();
        assert!((potential(&tri, &ms3).unwrap() - 1.5).abs() < 1e-14);

        let err = potential(&cfg(&[&[1.0, 1.0], &[1.0, 1.0]]), &ms).unwrap_err();
        assert!(matches!(err, Error::Collision { i: 0, j: 1, .. }));
    }

    #[test]
    fn grad_two_body_and_triangle() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let g = grad_potential(&cfg(&[&[-0.5, 0.0], &[0.5, 0.0]]), &ms).unwrap();
        assert_eq!(g.body(0), &[1.0, 0.0]);
        assert_eq!(g.body(1), &[-1.0, 0.0]);

        let ms3 = MassSystem::equal(3, 2).unwrap();
        let tri = preset_configuration(Preset::Equilateral { side: 1.0 }, &ms3).unwrap();
        let g = grad_potential(&tri, &ms3).unwrap();
        let mags: Vec<f64> = (0..3).map(|i| dist(g.body(i), &[0.0, 0.0])).collect();
        for i in 0..3 {
            assert!((mags[i] - mags[0]).abs() < 1e-14);
            // parallel and opposite to the position (centroid at origin)
            let r = tri.body(i);
            let cross = r[0] * g.body(i)[1] - r[1] * g.body(i)[0];
            let dot = r[0] * g.body(i)[0] + r[1] * g.body(i)[1];
            assert!(cross.abs() < 1e-14 && dot < 0.0);
        }
    }

    #[test]
    fn invariants_two_body_at_rest() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let st = PhaseState::new(cfg(&[&[-0.5, 0.0], &[0.5, 0.0]]), vec![0.0; 4]).unwrap();
        let inv = scalar_invariants(&st, &ms).unwrap();
        assert_eq!(
            (inv.i, inv.j, inv.k, inv.u, inv.h, inv.l),
            (0.5, 0.0, 0.0, 1.0, -1.0, 1.0)
        );
    }

    #[test]
    fn virial_on_rotating_triangle() {
        let ms = MassSystem::equal(3, 2).unwrap();
        let a = 1.3f64;
        let omega = (3.0 / a.powi(3)).sqrt();
        let tri = preset_configuration(Preset::Equilateral { side: a }, &ms).unwrap();
        let v: Vec<f64> = tri.rows().iter().flat_map(|r| [-omega * r[1], omega * r[0]]).collect();
        let inv = scalar_invariants(&PhaseState::new(tri, v).unwrap(), &ms).unwrap();
        assert!((4.0 * inv.h + 2.0 * inv.u).abs() < 1e-13);
        assert_eq!(inv.l + inv.h, inv.k);
    }

    #[test]
    fn reduce_examples() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let r = reduce_to_center_of_mass(&cfg(&[&[0.0, 0.0], &[2.0, 0.0]]), &ms);
        assert_eq!(r.as_slice(), &[-1.0, 0.0, 1.0, 0.0]);
        assert_eq!(reduce_to_center_of_mass(&r, &ms), r);

        let ms = MassSystem::new(2, vec![1.0, 3.0]).unwrap();
        let r = reduce_to_center_of_mass(&cfg(&[&[0.0, 0.0], &[4.0, 0.0]]), &ms);
        assert_eq!(r.as_slice(), &[-3.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn presets() {
        let ms = MassSystem::equal(3, 3).unwrap();
        let tri = preset_configuration(Preset::Equilateral { side: 1.0 }, &ms).unwrap();
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            assert!((tri.distance(i, j) - 1.0).abs() < 1e-14);
        }
        assert!(ms.centroid(tri.as_slice()).iter().all(|c| c.abs() < 1e-15));

        let ms4 = MassSystem::equal(4, 2).unwrap();
        let sq = preset_configuration(Preset::RegularNgon { circumradius: 1.0 }, &ms4).unwrap();
        for r in sq.rows() {
            assert!((r[0].hypot(r[1]) - 1.0).abs() < 1e-15);
        }
        assert!((sq.distance(0, 1) - 2f64.sqrt()).abs() < 1e-14);

        let euler = preset_configuration(Preset::EulerCollinear { spacing: 0.7 }, &ms).unwrap();
        assert!(euler.body(0).iter().all(|v| v.abs() < 1e-12));
        assert!(euler.rows().iter().all(|r| r[1] == 0.0 && r[2] == 0.0));
        assert!(central_defect(&euler, &ms).unwrap() < 1e-10);

        let ms_un = MassSystem::new(2, vec![1.0, 2.0, 5.0]).unwrap();
        let euler = preset_configuration(Preset::EulerCollinear { spacing: 1.0 }, &ms_un).unwrap();
        assert!(central_defect(&euler, &ms_un).unwrap() < 1e-10);

        assert!(preset_configuration(Preset::Equilateral { side: 1.0 }, &ms4).is_err());
    }

    #[test]
    fn lagrange_jacobi_needs_three_samples() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let st = PhaseState::new(cfg(&[&[-0.5, 0.0], &[0.5, 0.0]]), vec![0.0; 4]).unwrap();
        assert!(matches!(
            lagrange_jacobi_residual(&[st.clone(), st], 0.1, &ms),
            Err(Error::Grid(_))
        ));
    }

    #[test]
    fn lagrange_jacobi_on_rigid_rotation_and_uniform_motion() {
        let ms = MassSystem::equal(3, 2).unwrap();
        let omega = 3f64.sqrt();
        let tri = preset_configuration(Preset::Equilateral { side: 1.0 }, &ms).unwrap();
        let dt = 1e-3;
        let states: Vec<PhaseState> = (0..50)
            .map(|k| {
                let th = omega * k as f64 * dt;
                let (c, s) = (th.cos(), th.sin());
                let rows = tri.rows();
                let pos: Vec<f64> = rows
                    .iter()
                    .flat_map(|r| [c * r[0] - s * r[1], s * r[0] + c * r[1]])
                    .collect();
                let vel: Vec<f64> = pos.chunks(2).flat_map(|p| [-omega * p[1], omega * p[0]]).collect();
                PhaseState::new(Configuration::new(3, 2, pos).unwrap(), vel).unwrap()
            })
            .collect();
        let res = lagrange_jacobi_residual(&states, dt, &ms).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-6), "{res:?}");

        // uniform straight motion: Ï = 2K exactly, so the residual is 2U.
        let ms2 = MassSystem::equal(2, 2).unwrap();
        let states: Vec<PhaseState> = (0..5)
            .map(|k| {
                let t = k as f64 * 0.1;
                let pos = vec![-1.0, -t, 1.0, t];
                PhaseState::new(Configuration::new(2, 2, pos).unwrap(), vec![0.0, -1.0, 0.0, 1.0]).unwrap()
            })
            .collect();
        let res = lagrange_jacobi_residual(&states, 0.1, &ms2).unwrap();
        for (k, r) in res.iter().enumerate() {
            let t = (k + 1) as f64 * 0.1;
            let u = 1.0 / (2.0 * (1.0 + t * t).sqrt());
            assert!((r - 2.0 * u).abs() < 1e-9 && *r > 0.5);
        }
    }

    #[test]
    fn equilateral_vertical_hessian_of_normalized_potential_vanishes() {
        // Every mean-zero vertical variation of a planar 3-body configuration
        // is an infinitesimal tilt, so Ũ is flat along it.
        let ms = MassSystem::equal(3, 3).unwrap();
        let tri = preset_configuration(Preset::Equilateral { side: 1.0 }, &ms).unwrap();
        let x = tri.as_slice();
        let z = [0.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0];
        let h = 1e-4;
        let f = |e: f64| {
            let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + e * b).collect();
            normalized_potential(&y, &ms).unwrap()
        };
        let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert!(d2.abs() < 1e-5, "{d2}");
        let _ = PI;
    }

    fn arb_config(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0f64..2.0, n * 3)
    }

    fn separated(x: &[f64], n: usize) -> bool {
        closest_pair(x, n, 3).0 > 0.05
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn grad_matches_finite_differences(x in arb_config(4), dir in arb_config(4)) {
            prop_assume!(separated(&x, 4));
            let ms = MassSystem::new(3, vec![1.0, 0.5, 2.0, 1.5]).unwrap();
            let cfg = Configuration::new(4, 3, x.clone()).unwrap();
            let g = grad_potential(&cfg, &ms).unwrap();
            let h = 1e-5 * cfg.scale();
            let f = |e: f64| {
                let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + e * b).collect();
                potential_flat(&y, &ms).unwrap()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let an = ms.dot(g.as_slice(), &dir);
            prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(potential(&cfg, &ms).unwrap() / cfg.scale()),
                "fd {} vs analytic {}", fd, an);
        }

        #[test]
        fn momentum_of_force_field_vanishes(x in arb_config(5)) {
            prop_assume!(separated(&x, 5));
            let ms = MassSystem::new(3, vec![1.0, 0.3, 2.0, 1.5, 0.7]).unwrap();
            let g = grad_potential(&Configuration::new(5, 3, x).unwrap(), &ms).unwrap();
            let mut total = [0.0f64; 3];
            let mut scale = 0.0f64;
            for i in 0..5 {
                for a in 0..3 {
                    total[a] += ms.mass(i) * g.body(i)[a];
                    scale = scale.max((ms.mass(i) * g.body(i)[a]).abs());
                }
            }
            prop_assert!(total.iter().all(|t| t.abs() <= 1e-12 * scale.max(1.0)));
        }

        #[test]
        fn translation_rotation_and_homogeneity(x in arb_config(3), v in arb_config(3),
                                                shift in -5.0f64..5.0, angle in 0.0f64..std::f64::consts::TAU, lam in 0.1f64..10.0) {
            prop_assume!(separated(&x, 3));
            let ms = MassSystem::new(3, vec![1.0, 2.0, 3.0]).unwrap();
            let cfg = Configuration::new(3, 3, x.clone()).unwrap();
            let u = potential(&cfg, &ms).unwrap();

            let moved: Vec<f64> = x.iter().map(|a| a + shift).collect();
            let um = potential(&Configuration::new(3, 3, moved).unwrap(), &ms).unwrap();
            prop_assert!((um - u).abs() <= 1e-12 * u);

            prop_assert!((potential(&cfg.scaled(lam), &ms).unwrap() - u / lam).abs() <= 1e-12 * u / lam);

            let (c, s) = (angle.cos(), angle.sin());
            let rot = |p: &[f64]| -> Vec<f64> {
                p.chunks(3).flat_map(|r| [c * r[0] - s * r[1], s * r[0] + c * r[1], r[2]]).collect()
            };
            let st = PhaseState::new(cfg.clone(), v.clone()).unwrap();
            let st_rot = PhaseState::new(Configuration::new(3, 3, rot(&x)).unwrap(), rot(&v)).unwrap();
            let a = scalar_invariants(&st, &ms).unwrap();
            let b = scalar_invariants(&st_rot, &ms).unwrap();
            for (p, q) in [(a.i, b.i), (a.j, b.j), (a.k, b.k), (a.u, b.u), (a.h, b.h), (a.l, b.l)] {
                prop_assert!((p - q).abs() <= 1e-10 * (1.0 + p.abs()));
            }
            prop_assert!(a.l - a.u >= 0.0);
        }
    }
}
