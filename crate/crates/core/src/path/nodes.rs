use serde::{Deserialize, Serialize};

use super::{MinDistance, Path};
use crate::dynamics::{accelerations_flat, add_forces, potential_flat, Configuration, MassSystem, PhaseState};
use crate::error::{Error, Result};

/// A piecewise-linear path on `[0, T]` through `N + 2` equally spaced nodes,
/// the first and last being the endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePath {
    n: usize,
    dim: usize,
    duration: f64,
    /// `(N + 2) × n × dim`, row-major.
    nodes: Vec<f64>,
}

impl NodePath {
    /// Path from its endpoints and a flat array of `N ≥ 1` interior nodes.
    pub fn new(start: &Configuration, end: &Configuration, interior: Vec<f64>, duration: f64) -> Result<Self> {
        let (n, dim) = (start.n(), start.dim());
        if end.n() != n || end.dim() != dim {
            return Err(Error::DimMismatch {
                expected: n * dim,
                got: end.as_slice().len(),
            });
        }
        let nd = n * dim;
        if interior.is_empty() || !interior.len().is_multiple_of(nd) {
            return Err(Error::Grid(format!(
                "interior nodes must be a non-empty multiple of {nd} values, got {}",
                interior.len()
            )));
        }
        let mut nodes = Vec::with_capacity(interior.len() + 2 * nd);
        nodes.extend_from_slice(start.as_slice());
        nodes.extend(interior);
        nodes.extend_from_slice(end.as_slice());
        Self::from_nodes(n, dim, nodes, duration)
    }

    /// Path from the full node array, endpoints included.
    pub fn from_nodes(n: usize, dim: usize, nodes: Vec<f64>, duration: f64) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::bad(format!("duration must be positive, got {duration}")));
        }
        let nd = n * dim;
        if nd == 0 || !nodes.len().is_multiple_of(nd) || nodes.len() / nd < 3 {
            return Err(Error::Grid(format!("need at least 3 nodes of {nd} values")));
        }
        Ok(Self {
            n,
            dim,
            duration,
            nodes,
        })
    }

    /// Uniform straight-line motion between the endpoints.
    pub fn straight(start: &Configuration, end: &Configuration, interior: usize, duration: f64) -> Result<Self> {
        let (a, b) = (start.as_slice(), end.as_slice());
        Self::from_fn(start, end, interior, duration, |s| {
            a.iter().zip(b).map(|(p, q)| p + s * (q - p)).collect()
        })
    }

    /// Interior nodes sampled from `f(s)`, `s = t/T ∈ (0, 1)`.
    pub fn from_fn<F: FnMut(f64) -> Vec<f64>>(
        start: &Configuration,
        end: &Configuration,
        interior: usize,
        duration: f64,
        mut f: F,
    ) -> Result<Self> {
        let mut flat = Vec::new();
        for k in 1..=interior {
            flat.extend(f(k as f64 / (interior + 1) as f64));
        }
        Self::new(start, end, flat, duration)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Number of interior nodes `N`.
    pub fn interior_count(&self) -> usize {
        self.node_count() - 2
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len() / (self.n * self.dim)
    }

    /// Node spacing `T / (N + 1)`.
    pub fn step(&self) -> f64 {
        self.duration / (self.node_count() - 1) as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn nodes_mut(&mut self) -> &mut [f64] {
        &mut self.nodes
    }

    pub fn with_nodes(&self, nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::DimMismatch {
                expected: self.nodes.len(),
                got: nodes.len(),
            });
        }
        Self::from_nodes(self.n, self.dim, nodes, self.duration)
    }

    pub fn node(&self, k: usize) -> &[f64] {
        let nd = self.n * self.dim;
        &self.nodes[k * nd..(k + 1) * nd]
    }

    pub fn start(&self) -> Configuration {
        Configuration::new(self.n, self.dim, self.node(0).to_vec()).expect("node shape")
    }

    pub fn end(&self) -> Configuration {
        Configuration::new(self.n, self.dim, self.node(self.node_count() - 1).to_vec()).expect("node shape")
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

    /// Kinetic term `Σ_k ½ Σ m_i |x_{k+1} − x_k|² / h` (exact for the
    /// piecewise-linear path).
    pub fn kinetic_action(&self, ms: &MassSystem) -> f64 {
        let nd = self.n * self.dim;
        let h = self.step();
        let mut total = 0.0;
        for k in 0..self.node_count() - 1 {
            let (a, b) = (self.node(k), self.node(k + 1));
            for ia in 0..nd {
                let d = b[ia] - a[ia];
                total += ms.mass(ia / self.dim) * d * d;
            }
        }
        0.5 * total / h
    }

    fn potential_term(&self, ms: &MassSystem, k: usize, forces: Option<&mut [f64]>, drop_ends: bool) -> Result<f64> {
        let last = self.node_count() - 1;
        let x = self.node(k);
        let t = k as f64 * self.step();
        let res = match forces {
            Some(f) => add_forces(x, ms, 1.0, f),
            None => potential_flat(x, ms),
        };
        match res {
            Ok(u) => Ok(u),
            // endpoint collisions are admissible data; their term is dropped
            Err(Error::Collision { .. }) if drop_ends && (k == 0 || k == last) => Ok(0.0),
            Err(e) => Err(e.at_time(t)),
        }
    }

    /// Exact kinetic term plus trapezoid rule for `∫ U dt` on the nodes.
    pub fn action(&self, ms: &MassSystem) -> Result<f64> {
        self.check(ms)?;
        let last = self.node_count() - 1;
        let mut pot = 0.0;
        for k in 0..=last {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 };
            pot += w * self.potential_term(ms, k, None, true)?;
        }
        Ok(self.kinetic_action(ms) + self.step() * pot)
    }

    /// Action and its gradient with respect to every node. Endpoint blocks
    /// are zero unless `free_ends` is set; free endpoints must not collide.
    pub fn action_and_gradient(&self, ms: &MassSystem, free_ends: bool) -> Result<(f64, Vec<f64>)> {
        self.check(ms)?;
        let nd = self.n * self.dim;
        let h = self.step();
        let last = self.node_count() - 1;
        let mut grad = vec![0.0; self.nodes.len()];
        let mut pot = 0.0;
        let mut f = vec![0.0; nd];
        for k in 0..=last {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 };
            f.iter_mut().for_each(|v| *v = 0.0);
            let u = self.potential_term(ms, k, Some(&mut f), !free_ends)?;
            pot += w * u;
            if u == 0.0 {
                // dropped endpoint term
                continue;
            }
            for ia in 0..nd {
                grad[k * nd + ia] += w * h * f[ia];
            }
        }
        for k in 0..last {
            let (a, b) = (self.node(k), self.node(k + 1));
            for ia in 0..nd {
                let g = ms.mass(ia / self.dim) * (b[ia] - a[ia]) / h;
                grad[k * nd + ia] -= g;
                grad[(k + 1) * nd + ia] += g;
            }
        }
        if !free_ends {
            grad[..nd].iter_mut().for_each(|v| *v = 0.0);
            grad[last * nd..].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok((self.kinetic_action(ms) + h * pot, grad))
    }

    /// `(x_{k+1} − 2x_k + x_{k−1})/h² − ∇U(x_k)` at every interior node,
    /// flattened.
    pub fn discrete_el_residual(&self, ms: &MassSystem) -> Result<Vec<f64>> {
        self.check(ms)?;
        let nd = self.n * self.dim;
        let h = self.step();
        let mut out = Vec::with_capacity(self.interior_count() * nd);
        let mut acc = vec![0.0; nd];
        for k in 1..self.node_count() - 1 {
            accelerations_flat(self.node(k), ms, &mut acc).map_err(|e| e.at_time(k as f64 * h))?;
            let (p, c, q) = (self.node(k - 1), self.node(k), self.node(k + 1));
            for ia in 0..nd {
                out.push((q[ia] - 2.0 * c[ia] + p[ia]) / (h * h) - acc[ia]);
            }
        }
        Ok(out)
    }

    /// `λ^{-2/3} x(λt)` on `[0, T/λ]`.
    pub fn blow_up(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::bad(format!("blow-up factor must be positive, got {lambda}")));
        }
        let s = lambda.powf(-2.0 / 3.0);
        Self::from_nodes(
            self.n,
            self.dim,
            self.nodes.iter().map(|v| v * s).collect(),
            self.duration / lambda,
        )
    }

    /// Closest approach over the interior nodes (endpoints may collide).
    pub fn min_pairwise_distance(&self) -> MinDistance {
        self.closest_over(1..self.node_count() - 1)
    }

    /// Closest approach over every node, endpoints included.
    pub fn min_pairwise_distance_all(&self) -> MinDistance {
        self.closest_over(0..self.node_count())
    }

    fn closest_over(&self, range: std::ops::Range<usize>) -> MinDistance {
        let h = self.step();
        let mut best = MinDistance::none();
        for k in range {
            best.update(self.node(k), self.n, self.dim, k as f64 * h);
        }
        best
    }
}

impl Path for NodePath {
    fn n(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn domain(&self) -> (f64, f64) {
        (0.0, self.duration)
    }
    fn eval(&self, t: f64) -> Result<PhaseState> {
        if !(0.0..=self.duration).contains(&t) {
            return Err(Error::OutOfRange {
                t,
                lo: 0.0,
                hi: self.duration,
            });
        }
        let h = self.step();
        let segs = self.node_count() - 1;
        let k = ((t / h).floor() as usize).min(segs - 1);
        let frac = if t == self.duration { 1.0 } else { t / h - k as f64 };
        let (a, b) = (self.node(k), self.node(k + 1));
        let x: Vec<f64> = if frac == 0.0 {
            a.to_vec()
        } else if frac == 1.0 {
            b.to_vec()
        } else {
            a.iter().zip(b).map(|(p, q)| p + frac * (q - p)).collect()
        };
        let v = a.iter().zip(b).map(|(p, q)| (q - p) / h).collect();
        PhaseState::new(Configuration::new(self.n, self.dim, x)?, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::action_window;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(a: [f64; 2], b: [f64; 2]) -> Configuration {
        Configuration::new(2, 2, vec![a[0], a[1], b[0], b[1]]).unwrap()
    }

    fn wiggly(seed: u64, interior: usize) -> NodePath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = pair([-1.0, 0.0], [1.0, 0.0]);
        let end = pair([-1.0, 0.5], [1.0, -0.5]);
        let mut p = NodePath::straight(&start, &end, interior, 1.3).unwrap();
        let nd = 4;
        for v in &mut p.nodes_mut()[nd..(interior + 1) * nd] {
            *v += 0.1 * rng.gen_range(-1.0..1.0);
        }
        p
    }

    #[test]
    fn endpoints_and_nodes_evaluate_exactly() {
        let p = wiggly(1, 9);
        assert_eq!(p.eval(0.0).unwrap().config, p.start());
        assert_eq!(p.eval(p.duration()).unwrap().config, p.end());
        let h = p.step();
        for k in [1usize, 4, 7] {
            let st = p.eval(k as f64 * h).unwrap();
            for (x, y) in st.config.as_slice().iter().zip(p.node(k)) {
                assert!((x - y).abs() < 1e-14);
            }
        }
        assert!(matches!(p.eval(-0.1), Err(Error::OutOfRange { .. })));
        assert!(matches!(p.eval(1.31), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn kinetic_term_matches_piecewise_integration() {
        let ms = MassSystem::new(2, vec![1.0, 2.5]).unwrap();
        let p = wiggly(2, 7);
        let h = p.step();
        let mut k = 0.0;
        for s in 0..p.node_count() - 1 {
            let v = p.eval((s as f64 + 0.5) * h).unwrap().velocities;
            k += 0.5 * ms.dot(&v, &v) * h;
        }
        assert!((k - p.kinetic_action(&ms)).abs() < 1e-12 * k);
    }

    #[test]
    fn uniform_straight_motion_action() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let (a, vy, tt) = (1.5, 0.4, 2.0);
        let p = NodePath::straight(
            &pair([-0.75, 0.0], [0.75, 0.0]),
            &pair([-0.75, vy * tt], [0.75, vy * tt]),
            5,
            tt,
        )
        .unwrap();
        let expected = tt * vy * vy + tt / a;
        assert!((p.action(&ms).unwrap() - expected).abs() < 1e-13);
        let gl = action_window(&p, &ms, 0.0, tt, 12).unwrap();
        assert!((gl - expected).abs() < 1e-13);
    }

    #[test]
    fn endpoint_collisions_are_admissible() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let start = pair([0.0, 0.0], [0.0, 0.0]);
        let end = pair([-1.0, 0.0], [1.0, 0.0]);
        let p = NodePath::straight(&start, &end, 4, 1.0).unwrap();
        assert!(p.action(&ms).unwrap().is_finite());
        assert!(p.min_pairwise_distance().value > 0.0);
        let (_, g) = p.action_and_gradient(&ms, false).unwrap();
        assert!(g.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn blow_up_scales_action_exactly() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let p = wiggly(3, 11);
        let a = p.action(&ms).unwrap();
        for lambda in [0.5, 2.0, 3.0] {
            let b = p.blow_up(lambda).unwrap().action(&ms).unwrap();
            assert!((b - lambda.powf(-1.0 / 3.0) * a).abs() < 1e-13 * a);
        }
        assert_eq!(p.blow_up(1.0).unwrap(), p);
    }

    #[test]
    fn residual_vanishes_where_gradient_does() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let p = wiggly(4, 6);
        let (_, g) = p.action_and_gradient(&ms, false).unwrap();
        let r = p.discrete_el_residual(&ms).unwrap();
        let h = p.step();
        for (k, chunk) in r.chunks(4).enumerate() {
            for ia in 0..4 {
                assert!((g[(k + 1) * 4 + ia] + h * chunk[ia]).abs() < 1e-10);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn gradient_matches_finite_differences(seed in 0u64..10_000, free in any::<bool>()) {
            let ms = MassSystem::new(2, vec![1.0, 0.6]).unwrap();
            let p = wiggly(seed, 8);
            let (_, g) = p.action_and_gradient(&ms, free).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let mut dir: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if !free {
                let last = p.node_count() - 1;
                dir[..4].iter_mut().for_each(|v| *v = 0.0);
                dir[last * 4..].iter_mut().for_each(|v| *v = 0.0);
            }
            let h = 1e-5;
            let f = |e: f64| {
                let x: Vec<f64> = p.nodes().iter().zip(&dir).map(|(a, b)| a + e * b).collect();
                p.with_nodes(x).unwrap().action(&ms).unwrap()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
            prop_assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-2), "{} vs {}", fd, an);
        }
    }
}
