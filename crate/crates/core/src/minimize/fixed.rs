use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{lbfgs, MinimizeOptions, MinimizeReport, Objective, DEFAULT_INTERIOR_NODES};
use crate::dynamics::{geometric_scale, Configuration, MassSystem};
use crate::error::{Error, Result};
use crate::path::{MinDistance, NodePath, Path};
use crate::symmetry::{p12_constraint, BoundaryConstraint};

/// Solves `(m/h)(tridiag(−1, d_k + shift, −1)) y = r` in place, one column
/// per body coordinate. `neumann` uses diagonal 1 at both ends.
fn laplace_solve(v: &mut [f64], ms: &MassSystem, nd: usize, h: f64, neumann: bool, shift: f64) {
    let rows = v.len() / nd;
    let mut c = vec![0.0; rows];
    let mut d = vec![0.0; rows];
    for col in 0..nd {
        let m = ms.mass(col / ms.dim());
        let diag = |k: usize| {
            let base = if neumann && (k == 0 || k == rows - 1) { 1.0 } else { 2.0 };
            (base + shift) * m / h
        };
        let off = -m / h;
        // forward sweep
        let b0 = diag(0);
        c[0] = off / b0;
        d[0] = v[col] / b0;
        for k in 1..rows {
            let den = diag(k) - off * c[k - 1];
            c[k] = off / den;
            d[k] = (v[k * nd + col] - off * d[k - 1]) / den;
        }
        v[(rows - 1) * nd + col] = d[rows - 1];
        for k in (0..rows - 1).rev() {
            v[k * nd + col] = d[k] - c[k] * v[(k + 1) * nd + col];
        }
    }
}

/// Interior nodes are the unknowns; endpoints stay fixed.
struct FixedObjective<'a> {
    ms: &'a MassSystem,
    template: NodePath,
}

impl FixedObjective<'_> {
    fn nd(&self) -> usize {
        self.ms.len()
    }

    fn as_path(&self, x: &[f64]) -> NodePath {
        let nd = self.nd();
        let mut nodes = self.template.nodes().to_vec();
        let last = self.template.node_count() - 1;
        nodes[nd..last * nd].copy_from_slice(x);
        self.template.with_nodes(nodes).expect("node count is fixed")
    }
}

impl Objective for FixedObjective<'_> {
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let nd = self.nd();
        let p = self.as_path(x);
        let (a, g) = p.action_and_gradient(self.ms, false)?;
        Ok((a, g[nd..g.len() - nd].to_vec()))
    }
    fn project(&self, _: &mut [f64]) {}
    fn precondition(&self, v: &mut [f64]) {
        laplace_solve(v, self.ms, self.nd(), self.template.step(), false, 0.0);
    }
    fn min_distance(&self, x: &[f64]) -> MinDistance {
        self.as_path(x).min_pairwise_distance()
    }
    fn full_gradient_converges(&self) -> bool {
        true
    }
}

fn rms_node_scale(p: &NodePath) -> f64 {
    let (n, d) = (p.n(), p.dim());
    let s2: f64 = (0..p.node_count())
        .map(|k| geometric_scale(p.node(k), n, d).powi(2))
        .sum::<f64>()
        / p.node_count() as f64;
    s2.sqrt()
}

/// Minimizes the action among paths from `start` to `end` in time
/// `duration`, moving only the interior nodes of `init`.
pub fn minimize_fixed_ends(
    ms: &MassSystem,
    start: &Configuration,
    end: &Configuration,
    duration: f64,
    init: &NodePath,
    opts: &MinimizeOptions,
) -> Result<(NodePath, MinimizeReport)> {
    if init.n() != ms.n()
        || init.dim() != ms.dim()
        || start.as_slice().len() != ms.len()
        || end.as_slice().len() != ms.len()
    {
        return Err(Error::DimMismatch {
            expected: ms.len(),
            got: init.n() * init.dim(),
        });
    }
    if duration != init.duration() {
        return Err(Error::bad(format!(
            "initial path lasts {}, expected {duration}",
            init.duration()
        )));
    }
    let mut nodes = init.nodes().to_vec();
    let nd = ms.len();
    let last = init.node_count() - 1;
    nodes[..nd].copy_from_slice(start.as_slice());
    nodes[last * nd..].copy_from_slice(end.as_slice());
    let template = init.with_nodes(nodes)?;
    let floor = opts.dmin * rms_node_scale(&template);
    let obj = FixedObjective { ms, template };
    let x0 = obj.template.nodes()[nd..last * nd].to_vec();
    let (x, report) = lbfgs::run(&obj, &x0, opts, floor)?;
    Ok((obj.as_path(&x), report))
}

/// Straight path from `start` to `end` plus a seeded bump `b sin(πs)` with
/// `b` uniform in `[−amplitude, amplitude]` per coordinate, `s = t/T`.
pub fn bumped_straight_path(
    start: &Configuration,
    end: &Configuration,
    interior: usize,
    duration: f64,
    amplitude: f64,
    seed: u64,
) -> Result<NodePath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bump: Vec<f64> = (0..start.as_slice().len())
        .map(|_| amplitude * rng.gen_range(-1.0..1.0))
        .collect();
    let (a, b) = (start.as_slice(), end.as_slice());
    NodePath::from_fn(start, end, interior, duration, |s| {
        a.iter()
            .zip(b)
            .zip(&bump)
            .map(|((p, q), c)| p + s * (q - p) + c * (PI * s).sin())
            .collect()
    })
}

/// Resolution and starting point of [`minimize_p12`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct P12Options {
    /// Number of interior nodes.
    pub interior: usize,
    /// Size of the vertical push away from the Lagrange arc, relative to
    /// the triangle side.
    pub push: f64,
    /// Size of the seeded noise, relative to the triangle side.
    pub noise: f64,
}

impl Default for P12Options {
    fn default() -> Self {
        Self {
            interior: DEFAULT_INTERIOR_NODES,
            push: 0.05,
            noise: 1e-3,
        }
    }
}

/// All nodes are unknowns; the endpoints are held in their symmetry sets.
struct P12Objective<'a> {
    ms: &'a MassSystem,
    constraint: BoundaryConstraint,
    template: NodePath,
}

impl P12Objective<'_> {
    fn as_path(&self, x: &[f64]) -> NodePath {
        self.template.with_nodes(x.to_vec()).expect("node count is fixed")
    }
}

impl Objective for P12Objective<'_> {
    fn value_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.as_path(x).action_and_gradient(self.ms, true)
    }
    fn project(&self, v: &mut [f64]) {
        let nd = self.ms.len();
        let last = v.len() - nd;
        let s = self.constraint.start.project(&v[..nd]);
        v[..nd].copy_from_slice(&s);
        let e = self.constraint.end.project(&v[last..]);
        v[last..].copy_from_slice(&e);
    }
    fn precondition(&self, v: &mut [f64]) {
        let h = self.template.step();
        let shift = (PI * h / self.template.duration()).powi(2);
        laplace_solve(v, self.ms, self.ms.len(), h, true, shift);
    }
    fn min_distance(&self, x: &[f64]) -> MinDistance {
        self.as_path(x).min_pairwise_distance_all()
    }
    fn full_gradient_converges(&self) -> bool {
        false
    }
}

/// Minimizes the action over `[0, T/12]` among paths of three unit masses
/// in space whose endpoints satisfy the P12 boundary conditions for `u`.
/// Starts from the horizontal Lagrange arc pushed along the vertical
/// variation, plus seeded noise.
pub fn minimize_p12(
    ms: &MassSystem,
    u: f64,
    period: f64,
    p12: &P12Options,
    opts: &MinimizeOptions,
) -> Result<(NodePath, MinimizeReport)> {
    if ms.n() != 3 || ms.dim() != 3 || ms.masses().iter().any(|&m| m != 1.0) {
        return Err(Error::bad("the P12 problem needs three unit masses in space"));
    }
    if !(0.0..PI / 3.0).contains(&u) {
        return Err(Error::bad(format!("u must lie in [0, π/3) for solving, got {u}")));
    }
    if p12.interior == 0 {
        return Err(Error::Grid("need at least one interior node".into()));
    }
    let constraint = p12_constraint(u, period)?;
    let arc = crate::verify::lagrange_arc(u, period)?;
    let xi = crate::verify::p12_vertical_variation(period);
    let side = crate::verify::lagrange_side(u, period)?;
    let duration = constraint.duration;
    let rows = p12.interior + 2;
    let h = duration / (rows - 1) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut nodes = Vec::with_capacity(rows * 9);
    for k in 0..rows {
        let t = if k == rows - 1 { duration } else { k as f64 * h };
        let base = arc.eval(t)?.config;
        let var = xi.eval(t)?.config;
        for (b, z) in base.as_slice().iter().zip(var.as_slice()) {
            nodes.push(b + p12.push * side * z + p12.noise * side * rng.gen_range(-1.0..1.0));
        }
    }
    let template = NodePath::from_nodes(3, 3, nodes, duration)?;
    let floor = opts.dmin * rms_node_scale(&template);
    let obj = P12Objective {
        ms,
        constraint,
        template,
    };
    let x0 = obj.template.nodes().to_vec();
    let (x, report) = lbfgs::run(&obj, &x0, opts, floor)?;
    Ok((obj.as_path(&x), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::p12_bound;

    fn pair(a: [f64; 2], b: [f64; 2]) -> Configuration {
        Configuration::new(2, 2, vec![a[0], a[1], b[0], b[1]]).unwrap()
    }

    #[test]
    fn laplace_solve_inverts_the_tridiagonal_operator() {
        let ms = MassSystem::new(2, vec![2.0, 0.5]).unwrap();
        let rows = 7;
        let h = 0.3;
        let nd = 4;
        for (neumann, shift) in [(false, 0.0), (true, 0.01)] {
            let y: Vec<f64> = (0..rows * nd).map(|i| (i as f64 * 0.7).sin()).collect();
            let mut r = vec![0.0; rows * nd];
            for col in 0..nd {
                let m = ms.mass(col / 2);
                for k in 0..rows {
                    let base = if neumann && (k == 0 || k == rows - 1) { 1.0 } else { 2.0 };
                    let mut v = (base + shift) * y[k * nd + col];
                    if k > 0 {
                        v -= y[(k - 1) * nd + col];
                    }
                    if k + 1 < rows {
                        v -= y[(k + 1) * nd + col];
                    }
                    r[k * nd + col] = m / h * v;
                }
            }
            laplace_solve(&mut r, &ms, nd, h, neumann, shift);
            for (a, b) in r.iter().zip(&y) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quarter_circle_arc() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let a = 2f64.cbrt();
        let tt = PI / 2.0;
        let start = pair([-0.5 * a, 0.0], [0.5 * a, 0.0]);
        let end = pair([0.0, -0.5 * a], [0.0, 0.5 * a]);
        let init = NodePath::straight(&start, &end, 128, tt).unwrap();
        let opts = MinimizeOptions {
            gtol: 1e-10,
            ..Default::default()
        };
        let (p, rep) = minimize_fixed_ends(&ms, &start, &end, tt, &init, &opts).unwrap();
        assert!(rep.converged(), "{rep:?}");
        assert_eq!(p.node(0), start.as_slice());
        assert_eq!(p.node(p.node_count() - 1), end.as_slice());
        let exact = 0.75 * a * a * tt;
        assert!((rep.action - exact).abs() < 1e-3 * exact, "{} vs {exact}", rep.action);
        for k in 0..p.node_count() {
            let c = Configuration::new(2, 2, p.node(k).to_vec()).unwrap();
            assert!((c.distance(0, 1) - a).abs() < 1e-3);
        }
        let res = p.discrete_el_residual(&ms).unwrap();
        let worst = res.iter().map(|r| r.abs()).fold(0.0, f64::max);
        assert!(worst * p.step() < 1e-8, "{worst}");
    }

    #[test]
    fn short_time_is_dominated_by_the_potential() {
        let ms = MassSystem::equal(3, 2).unwrap();
        let x = Configuration::new(3, 2, vec![0.0, 0.0, 10.0, 0.0, 0.0, 10.0]).unwrap();
        let tt = 1e-3;
        let init = NodePath::straight(&x, &x, 16, tt).unwrap();
        let (p, rep) = minimize_fixed_ends(&ms, &x, &x, tt, &init, &MinimizeOptions::default()).unwrap();
        let u = crate::dynamics::potential(&x, &ms).unwrap();
        assert!((rep.action - tt * u).abs() < 1e-6 * tt * u);
        assert!(p.kinetic_action(&ms) < 1e-12);
    }

    #[test]
    fn swap_bends_around_the_collision() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let start = pair([-1.0, 0.0], [1.0, 0.0]);
        let end = pair([1.0, 0.0], [-1.0, 0.0]);
        let tt = 2.0;
        let straight = NodePath::straight(&start, &end, 128, tt).unwrap();
        let straight_action = straight.action(&ms).unwrap();
        let opts = MinimizeOptions::default();
        let (col, col_rep) = minimize_fixed_ends(&ms, &start, &end, tt, &straight, &opts).unwrap();
        assert!(col.nodes().chunks(2).all(|r| r[1] == 0.0));
        let init = bumped_straight_path(&start, &end, 128, tt, 0.3, 7).unwrap();
        let (bent, rep) = minimize_fixed_ends(&ms, &start, &end, tt, &init, &opts).unwrap();
        assert!(rep.converged(), "{rep:?}");
        assert!(rep.action < straight_action);
        assert!(rep.action < col_rep.action, "{} vs {}", rep.action, col_rep.action);
        assert!(bent.min_pairwise_distance().value > 0.5);
    }

    #[test]
    fn p12_beats_the_lagrange_arc_below_pi_over_six() {
        let ms = MassSystem::equal(3, 3).unwrap();
        let tt = 12.0;
        let u = 0.2;
        let p12 = P12Options {
            interior: 48,
            ..Default::default()
        };
        let (p, rep) = minimize_p12(&ms, u, tt, &p12, &MinimizeOptions::default()).unwrap();
        assert!(rep.projected_grad_norm < 1e-6, "{rep:?}");
        let c = p12_constraint(u, tt).unwrap();
        assert!(c.start.defect(p.node(0)) < 1e-12);
        assert!(c.end.defect(p.node(p.node_count() - 1)) < 1e-12);
        assert!(rep.action < p12_bound(u, tt).unwrap());
        assert!(minimize_p12(&ms, PI / 3.0, tt, &p12, &MinimizeOptions::default()).is_err());
    }
}
