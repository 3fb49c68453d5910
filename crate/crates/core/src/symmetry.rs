//! Finite groups acting on loops by isometries, body permutations and time
//! maps, and the mixed reflection boundary conditions of the P12 family.
//!
//! An element `g = (ρ, π, ε, τ)` acts on a loop by
//! `(g·x)_{π(i)}(ε t + τ) = ρ x_i(t)`; a loop is invariant when `g·x = x`.
//! Time shifts are stored as exact fractions of the period.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::MassSystem;
use crate::error::{Error, Result};
use crate::path::FourierLoop;

const ORTHO_TOL: f64 = 1e-12;
const MAX_ORDER: usize = 4096;

/// A fraction of the period, kept reduced in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeriodFraction {
    num: i64,
    den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl PeriodFraction {
    pub fn new(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::bad("zero denominator in time shift"));
        }
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let num = num.rem_euclid(den);
        let g = gcd(num, den).max(1);
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn num(self) -> i64 {
        self.num
    }

    pub fn den(self) -> i64 {
        self.den
    }

    fn add(self, o: Self) -> Self {
        Self::new(self.num * o.den + o.num * self.den, self.den * o.den).expect("nonzero denominators")
    }

    fn neg(self) -> Self {
        Self::new(-self.num, self.den).expect("nonzero denominator")
    }

    fn signed(self, sign: i8) -> Self {
        if sign < 0 {
            self.neg()
        } else {
            self
        }
    }
}

/// One group element acting on `n` bodies in `dim` dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryElement {
    /// Row-major `dim × dim` orthogonal matrix.
    pub rho: Vec<f64>,
    pub perm: Vec<usize>,
    /// `+1` or `−1`.
    pub time_sign: i8,
    pub time_shift: PeriodFraction,
}

impl SymmetryElement {
    pub fn new(rho: Vec<f64>, perm: Vec<usize>, time_sign: i8, time_shift: PeriodFraction) -> Result<Self> {
        let d = (rho.len() as f64).sqrt() as usize;
        if d * d != rho.len() || !(1..=3).contains(&d) {
            return Err(Error::bad(format!(
                "isometry must be a square matrix, got {} entries",
                rho.len()
            )));
        }
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|k| rho[k * d + i] * rho[k * d + j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > ORTHO_TOL {
                    return Err(Error::bad("isometry is not orthogonal"));
                }
            }
        }
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || seen[p] {
                return Err(Error::bad(format!("{perm:?} is not a permutation")));
            }
            seen[p] = true;
        }
        if time_sign != 1 && time_sign != -1 {
            return Err(Error::bad(format!("time sign must be ±1, got {time_sign}")));
        }
        Ok(Self {
            rho,
            perm,
            time_sign,
            time_shift,
        })
    }

    pub fn identity(n: usize, dim: usize) -> Self {
        Self {
            rho: identity_matrix(dim),
            perm: (0..n).collect(),
            time_sign: 1,
            time_shift: PeriodFraction::zero(),
        }
    }

    pub fn dim(&self) -> usize {
        (self.rho.len() as f64).sqrt() as usize
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let d = self.dim();
        let mut rho = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                rho[i * d + j] = (0..d).map(|k| self.rho[i * d + k] * other.rho[k * d + j]).sum();
            }
        }
        snap(&mut rho);
        Self {
            rho,
            perm: other.perm.iter().map(|&p| self.perm[p]).collect(),
            time_sign: self.time_sign * other.time_sign,
            time_shift: other.time_shift.signed(self.time_sign).add(self.time_shift),
        }
    }

    pub fn inverse(&self) -> Self {
        let d = self.dim();
        let mut rho = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                rho[i * d + j] = self.rho[j * d + i];
            }
        }
        let mut perm = vec![0; self.n()];
        for (i, &p) in self.perm.iter().enumerate() {
            perm[p] = i;
        }
        // φ(s) = εs + τ  ⇒  φ⁻¹(t) = εt − ετ
        Self {
            rho,
            perm,
            time_sign: self.time_sign,
            time_shift: self.time_shift.signed(self.time_sign).neg(),
        }
    }

    /// Equality up to round-off in the isometry.
    pub fn same_as(&self, other: &Self) -> bool {
        self.perm == other.perm
            && self.time_sign == other.time_sign
            && self.time_shift == other.time_shift
            && self.rho.len() == other.rho.len()
            && self.rho.iter().zip(&other.rho).all(|(a, b)| (a - b).abs() <= 1e-12)
    }

    fn is_identity(&self) -> bool {
        self.same_as(&Self::identity(self.n(), self.dim()))
    }
}

fn identity_matrix(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// Rounds entries that are within round-off of 0 or ±1, so that products of
/// signed permutation matrices stay exact.
fn snap(m: &mut [f64]) {
    for v in m.iter_mut() {
        for t in [-1.0, 0.0, 1.0] {
            if (*v - t).abs() < 1e-14 {
                *v = t;
            }
        }
    }
}

/// A finite group of symmetries, every element listed once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryGroup {
    pub name: String,
    elements: Vec<SymmetryElement>,
}

impl SymmetryGroup {
    /// The group generated by `generators`, by breadth-first closure.
    pub fn generate(name: impl Into<String>, generators: &[SymmetryElement]) -> Result<Self> {
        let first = generators
            .first()
            .ok_or_else(|| Error::bad("need at least one generator"))?;
        let (n, d) = (first.n(), first.dim());
        if generators.iter().any(|g| g.n() != n || g.dim() != d) {
            return Err(Error::bad("generators act on different shapes"));
        }
        let mut elements = vec![SymmetryElement::identity(n, d)];
        let mut queue = VecDeque::from([0usize]);
        while let Some(idx) = queue.pop_front() {
            for g in generators {
                let h = g.compose(&elements[idx]);
                if !elements.iter().any(|e| e.same_as(&h)) {
                    if elements.len() >= MAX_ORDER {
                        return Err(Error::bad("generated group is too large"));
                    }
                    elements.push(h);
                    queue.push_back(elements.len() - 1);
                }
            }
        }
        Self::from_elements(name, elements)
    }

    /// Wraps a full element list, checking closure under composition and
    /// inverses.
    pub fn from_elements(name: impl Into<String>, elements: Vec<SymmetryElement>) -> Result<Self> {
        let group = Self {
            name: name.into(),
            elements,
        };
        group.verify()?;
        Ok(group)
    }

    fn verify(&self) -> Result<()> {
        if !self.elements.iter().any(SymmetryElement::is_identity) {
            return Err(Error::bad(format!("group {} lacks the identity", self.name)));
        }
        for a in &self.elements {
            if !self.contains(&a.inverse()) {
                return Err(Error::bad(format!("group {} is not closed under inverses", self.name)));
            }
            for b in &self.elements {
                if !self.contains(&a.compose(b)) {
                    return Err(Error::bad(format!(
                        "group {} is not closed under composition",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, g: &SymmetryElement) -> bool {
        self.elements.iter().any(|e| e.same_as(g))
    }

    pub fn elements(&self) -> &[SymmetryElement] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn n(&self) -> usize {
        self.elements[0].n()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// Whether some element moves a body to another one.
    pub fn permutes_bodies(&self) -> bool {
        self.elements
            .iter()
            .any(|e| e.perm.iter().enumerate().any(|(i, &p)| i != p))
    }

    /// Bodies that some element maps onto each other must have equal masses.
    pub fn check_masses(&self, ms: &MassSystem) -> Result<()> {
        if ms.n() != self.n() || ms.dim() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.n() * self.dim(),
                got: ms.n() * ms.dim(),
            });
        }
        for e in &self.elements {
            for (i, &p) in e.perm.iter().enumerate() {
                if ms.mass(i) != ms.mass(p) {
                    return Err(Error::bad(format!(
                        "group {} exchanges bodies {i} and {p} with different masses",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Named groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetGroup {
    /// Cyclic relabeling with a `T/n` lag.
    Choreography,
    /// `x(t + T/2) = −x(t)`.
    Italian,
    /// The Italian group restricted to four bodies in space.
    HipHop,
    D6Eight,
    Z6,
    D3,
    /// Only the identity.
    Trivial,
}

impl FromStr for PresetGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "choreography" => Self::Choreography,
            "italian" => Self::Italian,
            "hip_hop" | "hiphop" => Self::HipHop,
            "d6_eight" | "d6" | "eight" => Self::D6Eight,
            "z6" => Self::Z6,
            "d3" => Self::D3,
            "none" | "trivial" => Self::Trivial,
            other => return Err(Error::bad(format!("unknown symmetry preset {other:?}"))),
        })
    }
}

impl fmt::Display for PresetGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Choreography => "choreography",
            Self::Italian => "italian",
            Self::HipHop => "hip_hop",
            Self::D6Eight => "d6_eight",
            Self::Z6 => "z6",
            Self::D3 => "d3",
            Self::Trivial => "trivial",
        })
    }
}

/// Reflection through the horizontal plane `z = 0`.
pub fn horizontal_reflection() -> Vec<f64> {
    vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]
}

/// Half-turn about the horizontal `x` axis.
pub fn axis_half_turn() -> Vec<f64> {
    vec![1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0]
}

/// Generators `(s, σ)` of the order-12 group of the Eight.
pub fn d6_generators() -> (SymmetryElement, SymmetryElement) {
    // s: r_1(t + T/6) = Σ r_0(t), r_2(t + T/6) = Σ r_1(t), r_0(t + T/6) = Σ r_2(t)
    let s = SymmetryElement::new(
        horizontal_reflection(),
        vec![1, 2, 0],
        1,
        PeriodFraction::new(1, 6).expect("valid"),
    )
    .expect("valid generator");
    // σ: r_0(−t) = Δ r_0(t), r_1(−t) = Δ r_2(t), r_2(−t) = Δ r_1(t)
    let sigma =
        SymmetryElement::new(axis_half_turn(), vec![0, 2, 1], -1, PeriodFraction::zero()).expect("valid generator");
    (s, sigma)
}

/// Builds a named group for `n` bodies in `dim` dimensions. Time shifts are
/// fractions of the period, so the group does not depend on `T`.
pub fn preset_group(kind: PresetGroup, n: usize, dim: usize) -> Result<SymmetryGroup> {
    if n < 2 || !(dim == 2 || dim == 3) {
        return Err(Error::bad(format!("unsupported shape n = {n}, dim = {dim}")));
    }
    let d6 = |label: &str| -> Result<()> {
        if n != 3 || dim != 3 {
            return Err(Error::bad(format!(
                "{label} acts on 3 bodies in space, got n = {n}, dim = {dim}"
            )));
        }
        Ok(())
    };
    match kind {
        PresetGroup::Choreography => {
            let perm = (0..n).map(|j| (j + n - 1) % n).collect();
            let g = SymmetryElement::new(identity_matrix(dim), perm, 1, PeriodFraction::new(1, n as i64)?)?;
            SymmetryGroup::generate(format!("choreography({n})"), &[g])
        }
        PresetGroup::HipHop if n != 4 || dim != 3 => Err(Error::bad(format!(
            "hip_hop acts on 4 bodies in space, got n = {n}, dim = {dim}"
        ))),
        PresetGroup::Italian | PresetGroup::HipHop => {
            let mut rho = identity_matrix(dim);
            rho.iter_mut().for_each(|v| *v = -*v);
            let g = SymmetryElement::new(rho, (0..n).collect(), 1, PeriodFraction::new(1, 2)?)?;
            SymmetryGroup::generate("italian", &[g])
        }
        PresetGroup::D6Eight => {
            d6("d6_eight")?;
            let (s, sigma) = d6_generators();
            SymmetryGroup::generate("d6_eight", &[s, sigma])
        }
        PresetGroup::Z6 => {
            d6("z6")?;
            let (s, _) = d6_generators();
            SymmetryGroup::generate("z6", &[s])
        }
        PresetGroup::D3 => {
            d6("d3")?;
            let (s, sigma) = d6_generators();
            SymmetryGroup::generate("d3", &[s.compose(&s), sigma])
        }
        PresetGroup::Trivial => SymmetryGroup::generate("trivial", &[SymmetryElement::identity(n, dim)]),
    }
}

fn check_shape(g: &SymmetryElement, lp: &FourierLoop) -> Result<()> {
    if g.n() != lp.n() || g.dim() != lp.dim() {
        return Err(Error::DimMismatch {
            expected: g.n() * g.dim(),
            got: lp.n() * lp.dim(),
        });
    }
    Ok(())
}

/// Applies `g` to a coefficient vector laid out as in [`FourierLoop`].
pub(crate) fn apply_coeffs(g: &SymmetryElement, n: usize, dim: usize, modes: usize, src: &[f64], out: &mut [f64]) {
    let stride = 2 * modes + 1;
    let eps = g.time_sign as f64;
    let rot: Vec<(f64, f64)> = (1..=modes)
        .map(|k| {
            // exact phase k·τ mod 1 from the fraction
            let num = (k as i64 * g.time_shift.num()).rem_euclid(g.time_shift.den());
            let th = 2.0 * PI * num as f64 / g.time_shift.den() as f64;
            (th.cos(), th.sin())
        })
        .collect();
    // time map per body and axis
    let mut timed = vec![0.0; stride];
    out.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        let j = g.perm[i];
        for a in 0..dim {
            let b = (i * dim + a) * stride;
            timed[0] = src[b];
            for k in 1..=modes {
                let (c, s) = rot[k - 1];
                let (ak, bk) = (src[b + k], src[b + modes + k]);
                timed[k] = ak * c - eps * bk * s;
                timed[modes + k] = ak * s + eps * bk * c;
            }
            for r in 0..dim {
                let w = g.rho[r * dim + a];
                if w == 0.0 {
                    continue;
                }
                let ob = (j * dim + r) * stride;
                for q in 0..stride {
                    out[ob + q] += w * timed[q];
                }
            }
        }
    }
}

/// The loop `g·x`, computed exactly on coefficients.
pub fn apply_element(g: &SymmetryElement, lp: &FourierLoop) -> Result<FourierLoop> {
    check_shape(g, lp)?;
    let mut out = vec![0.0; lp.coeffs().len()];
    apply_coeffs(g, lp.n(), lp.dim(), lp.modes(), lp.coeffs(), &mut out);
    lp.with_coeffs(out)
}

/// `|G|⁻¹ Σ_g g·v` on a raw coefficient vector.
pub(crate) fn average_coeffs(group: &SymmetryGroup, n: usize, dim: usize, modes: usize, v: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; v.len()];
    let mut tmp = vec![0.0; v.len()];
    for g in group.elements() {
        apply_coeffs(g, n, dim, modes, v, &mut tmp);
        acc.iter_mut().zip(&tmp).for_each(|(a, t)| *a += t);
    }
    let w = 1.0 / group.order() as f64;
    acc.iter_mut().for_each(|a| *a *= w);
    acc
}

/// Orthogonal projection onto `G`-invariant loops.
pub fn group_average(group: &SymmetryGroup, lp: &FourierLoop) -> Result<FourierLoop> {
    check_shape(&group.elements()[0], lp)?;
    lp.with_coeffs(average_coeffs(group, lp.n(), lp.dim(), lp.modes(), lp.coeffs()))
}

/// `max_g max_s |(g·x)(t_s) − x(t_s)|`, the norm being `(Σ m_i |·|²)^{1/2}`,
/// over `samples` equally spaced times.
pub fn invariance_defect(group: &SymmetryGroup, lp: &FourierLoop, ms: &MassSystem, samples: usize) -> Result<f64> {
    check_shape(&group.elements()[0], lp)?;
    let mut worst = 0.0f64;
    let mut diff = vec![0.0; lp.coeffs().len()];
    for g in group.elements() {
        apply_coeffs(g, lp.n(), lp.dim(), lp.modes(), lp.coeffs(), &mut diff);
        diff.iter_mut().zip(lp.coeffs()).for_each(|(d, c)| *d -= c);
        let dl = lp.with_coeffs(diff.clone())?;
        for cfg in dl.sample(samples.max(1)) {
            let x = cfg.as_slice();
            worst = worst.max(ms.dot(x, x).sqrt());
        }
    }
    Ok(worst)
}

/// Invariance of one configuration under `x_{perm(i)} = ρ x_i`, with `ρ` an
/// involution commuting with the involutive relabeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSymmetry {
    pub rho: Vec<f64>,
    pub perm: Vec<usize>,
}

impl EndpointSymmetry {
    pub fn new(rho: Vec<f64>, perm: Vec<usize>) -> Result<Self> {
        let e = SymmetryElement::new(rho, perm, 1, PeriodFraction::zero())?;
        if !e.compose(&e).is_identity() {
            return Err(Error::bad("endpoint symmetry must be an involution"));
        }
        Ok(Self {
            rho: e.rho,
            perm: e.perm,
        })
    }

    fn dim(&self) -> usize {
        (self.rho.len() as f64).sqrt() as usize
    }

    /// The configuration `g x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; x.len()];
        for (i, &j) in self.perm.iter().enumerate() {
            for r in 0..d {
                out[j * d + r] = (0..d).map(|a| self.rho[r * d + a] * x[i * d + a]).sum();
            }
        }
        out
    }

    /// Orthogonal projection `(x + g x)/2` onto the invariant configurations.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x).iter().zip(x).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// `max_i |(g x − x)_i|`.
    pub fn defect(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        self.apply(x)
            .chunks(d)
            .zip(x.chunks(d))
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Symmetry types imposed at the two ends of a fixed-time problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConstraint {
    pub start: EndpointSymmetry,
    pub end: EndpointSymmetry,
    pub duration: f64,
    /// Angle between the axis used at the start and the mirror plane used
    /// at the end.
    pub angle: f64,
}

/// Reflection through the vertical plane containing the `z` axis and the
/// horizontal direction at angle `u` from the `x` axis.
pub fn vertical_mirror(u: f64) -> Vec<f64> {
    let (nx, ny) = (-u.sin(), u.cos());
    vec![
        1.0 - 2.0 * nx * nx,
        -2.0 * nx * ny,
        0.0,
        -2.0 * nx * ny,
        1.0 - 2.0 * ny * ny,
        0.0,
        0.0,
        0.0,
        1.0,
    ]
}

/// The P12 boundary conditions for period `T` on `[0, T/12]`: at the start,
/// invariance under the half-turn about the `x` axis with body 0 on it and
/// bodies 1, 2 exchanged; at the end, invariance under the mirror through
/// the vertical plane at angle `u`, containing body 2, with bodies 0, 1
/// exchanged.
pub fn p12_constraint(u: f64, period: f64) -> Result<BoundaryConstraint> {
    if !(0.0..=PI / 3.0).contains(&u) {
        return Err(Error::bad(format!("angle u must lie in [0, π/3], got {u}")));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::bad(format!("period must be positive, got {period}")));
    }
    Ok(BoundaryConstraint {
        start: EndpointSymmetry::new(axis_half_turn(), vec![0, 2, 1])?,
        end: EndpointSymmetry::new(vertical_mirror(u), vec![1, 0, 2])?,
        duration: period / 12.0,
        angle: u,
    })
}
