//! Parabolic Kepler motion and the averaging estimates that rule out
//! isolated collisions in minimizers.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{central_defect, central_multiplier, reduce_to_center_of_mass, Configuration, MassSystem};
use crate::error::{Error, Result};
use crate::quadrature::{bisect, gauss_legendre};

/// `(9/2)^{1/3}`, the radius coefficient of the unit parabolic ejection.
pub const GAMMA: f64 = 1.650_963_624_447_313_4;

const ROOT_TOL: f64 = 1e-12;

/// Homothetic parabolic ejection `r(t) = (9μ/2)^{1/3} t^{2/3} c` of the
/// Kepler problem `r̈ = −μ r/|r|³`, on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParabolicEjection {
    pub direction: Vec<f64>,
    pub attraction: f64,
    pub duration: f64,
}

impl ParabolicEjection {
    pub fn new(direction: Vec<f64>, attraction: f64, duration: f64) -> Result<Self> {
        let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(2..=3).contains(&direction.len()) || !(norm > 0.0) {
            return Err(Error::bad(
                "direction must be a nonzero vector in the plane or in space",
            ));
        }
        if !(attraction > 0.0 && attraction.is_finite()) {
            return Err(Error::bad(format!("attraction must be positive, got {attraction}")));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::bad(format!("duration must be positive, got {duration}")));
        }
        Ok(Self {
            direction: direction.iter().map(|v| v / norm).collect(),
            attraction,
            duration,
        })
    }

    /// Unit attraction along the first axis of space.
    pub fn unit(duration: f64) -> Result<Self> {
        Self::new(vec![1.0, 0.0, 0.0], 1.0, duration)
    }

    /// Radius coefficient `(9μ/2)^{1/3}`; equals [`GAMMA`] for `μ = 1`.
    pub fn gamma(&self) -> f64 {
        (4.5 * self.attraction).cbrt()
    }

    pub fn radius(&self, t: f64) -> f64 {
        self.gamma() * t.powf(2.0 / 3.0)
    }

    fn along(&self, s: f64) -> Vec<f64> {
        self.direction.iter().map(|c| s * c).collect()
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        self.along(self.radius(t))
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        self.along(2.0 / 3.0 * self.gamma() * t.powf(-1.0 / 3.0))
    }

    pub fn acceleration(&self, t: f64) -> Vec<f64> {
        self.along(-2.0 / 9.0 * self.gamma() * t.powf(-4.0 / 3.0))
    }

    /// `max |r̈ + μ r/|r|³|` over `samples` equally spaced times in
    /// `(0, T]`, relative to `|r̈|`.
    pub fn kepler_residual(&self, samples: usize) -> f64 {
        (1..=samples)
            .map(|k| {
                let t = self.duration * k as f64 / samples as f64;
                let r = self.radius(t);
                let a = self.acceleration(t);
                let x = self.position(t);
                let an = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                let res = a
                    .iter()
                    .zip(&x)
                    .map(|(ai, xi)| (ai + self.attraction * xi / (r * r * r)).powi(2))
                    .sum::<f64>()
                    .sqrt();
                res / an
            })
            .fold(0.0, f64::max)
    }

    /// Action `∫ (½|ṙ|² + μ/|r|) dt` over `[t1, t2]`, by quadrature in
    /// `τ = t^{1/3}`.
    pub fn action(&self, t1: f64, t2: f64, panels: usize) -> Result<f64> {
        if !(0.0 <= t1 && t1 < t2 && t2 <= self.duration) {
            return Err(Error::OutOfRange {
                t: if t1 < 0.0 { t1 } else { t2 },
                lo: 0.0,
                hi: self.duration,
            });
        }
        let g = self.gamma();
        let mu = self.attraction;
        // t = τ³: L dt = 3τ² L dτ and L ∝ τ^{-2}
        Ok(gauss_legendre(t1.cbrt(), t2.cbrt(), panels, |tau| {
            let t = tau * tau * tau;
            let v = 2.0 / 3.0 * g * t.powf(-1.0 / 3.0);
            let r = g * tau * tau;
            3.0 * tau * tau * (0.5 * v * v + mu / r)
        }))
    }
}

fn check_radius(r: f64, big_r: f64) -> Result<()> {
    if !(big_r > 0.0 && big_r.is_finite()) {
        return Err(Error::bad(format!("radius must be positive, got {big_r}")));
    }
    if !(r >= 0.0) {
        return Err(Error::bad(format!("distance must be nonnegative, got {r}")));
    }
    Ok(())
}

/// Potential at distance `r` of a unit mass spread uniformly on a sphere of
/// radius `R`.
pub fn sphere_shell_potential(r: f64, big_r: f64) -> Result<f64> {
    check_radius(r, big_r)?;
    Ok(if r <= big_r { 1.0 / big_r } else { 1.0 / r })
}

/// Potential, in the plane of the disk, of a unit mass spread on a disk of
/// radius `R` with the density `1/(2πR√(R² − x²))` obtained by projecting
/// the uniform sphere.
pub fn disk_potential(r: f64, big_r: f64) -> Result<f64> {
    check_radius(r, big_r)?;
    Ok(if r <= big_r {
        PI / (2.0 * big_r)
    } else {
        (big_r / r).asin() / big_r
    })
}

/// [`disk_potential`] by direct quadrature of the density against
/// `1/|r − s|`. The density becomes `sin φ dφ dθ / 2π` with `x = R sin φ`;
/// the `φ` range is split where the field point lies.
pub fn disk_potential_by_quadrature(r: f64, big_r: f64, panels: usize) -> Result<f64> {
    check_radius(r, big_r)?;
    let inner = |phi: f64| {
        let x = big_r * phi.sin();
        gauss_legendre(0.0, PI, panels, |th| {
            let (s, c) = th.sin_cos();
            let d = ((r - x * c).powi(2) + (x * s).powi(2)).sqrt();
            2.0 * phi.sin() / (2.0 * PI * d)
        })
    };
    let top = PI / 2.0;
    Ok(if r > 0.0 && r < big_r {
        let split = (r / big_r).asin();
        gauss_legendre(0.0, split, panels, inner) + gauss_legendre(split, top, panels, inner)
    } else {
        gauss_legendre(0.0, top, panels, inner)
    })
}

fn check_window(rho: f64, coefficient: f64, duration: f64) -> Result<()> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::bad(format!("duration must be positive, got {duration}")));
    }
    let max = 0.1 * coefficient * duration.powf(2.0 / 3.0);
    if !(rho > 0.0 && rho <= max) {
        return Err(Error::bad(format!("rho must lie in (0, {max:.6e}], got {rho}")));
    }
    Ok(())
}

/// Time at which `c t^{2/3}` overtakes the shrinking radius `ρ(1 − t/T)`.
fn exit_time(coefficient: f64, rho: f64, duration: f64) -> Result<f64> {
    bisect(0.0, duration, ROOT_TOL, |t| {
        coefficient * t.powf(2.0 / 3.0) - rho * (1.0 - t / duration)
    })
}

/// `∫₀^{t0} [1/R(t) − 1/(c t^{2/3})] dt` in `τ = t^{1/3}`.
fn inner_gap(coefficient: f64, rho: f64, duration: f64, t0: f64, panels: usize) -> f64 {
    gauss_legendre(0.0, t0.cbrt(), panels, |tau| {
        let t = tau * tau * tau;
        3.0 * tau * tau / (rho * (1.0 - t / duration)) - 3.0 / coefficient
    })
}

/// Average over the sphere (`dim = 3`) or projected disk (`dim = 2`) of
/// the action of `r(t) + R(t) s`, minus the action of the unit parabolic
/// ejection `r`, on `[0, T]` with `R(t) = ρ(1 − t/T)`. Returns
/// `(A_m − A, t0)` with `t0` the time at which the ejection leaves the
/// shrinking sphere. Needs `ρ ≤ 0.1 γ T^{2/3}`.
pub fn averaged_action_difference(dim: usize, rho: f64, duration: f64, panels: usize) -> Result<(f64, f64)> {
    if !(2..=3).contains(&dim) {
        return Err(Error::bad(format!("dimension must be 2 or 3, got {dim}")));
    }
    check_window(rho, GAMMA, duration)?;
    let t0 = exit_time(GAMMA, rho, duration)?;
    let kinetic = rho * rho / (2.0 * duration);
    let diff = match dim {
        3 => kinetic + inner_gap(GAMMA, rho, duration, t0, panels),
        _ => {
            let inside = gauss_legendre(0.0, t0.cbrt(), panels, |tau| {
                let t = tau * tau * tau;
                3.0 * tau * tau * PI / (2.0 * rho * (1.0 - t / duration)) - 3.0 / GAMMA
            });
            // outside, in σ = t^{1/3} again: the gap decays like t^{-2}
            let outside = gauss_legendre(t0.cbrt(), duration.cbrt(), panels, |tau| {
                let t = tau * tau * tau;
                let big_r = rho * (1.0 - t / duration);
                let r = GAMMA * tau * tau;
                let u0 = if big_r > 0.0 {
                    (big_r / r).asin() / big_r
                } else {
                    1.0 / r
                };
                3.0 * tau * tau * (u0 - 1.0 / r)
            });
            kinetic + inside + outside
        }
    };
    Ok((diff, t0))
}

/// `(A_m − A) γ / t0^{1/3}`: the constant in front of `t0^{1/3}/γ`.
pub fn normalized_difference(diff: f64, t0: f64) -> f64 {
    diff * GAMMA / t0.cbrt()
}

/// Collision followed by ejection: the averaged differences over
/// `[−T', 0]` with `R'(t) = ρ(1 + t/T')` and over `[0, T]`.
pub fn collision_ejection_difference(dim: usize, rho: f64, before: f64, after: f64, panels: usize) -> Result<f64> {
    let (a, _) = averaged_action_difference(dim, rho, before, panels)?;
    let (b, _) = averaged_action_difference(dim, rho, after, panels)?;
    Ok(a + b)
}

/// Spherical average of [`averaged_action_difference`] done the long way:
/// the action difference of every one of `directions` perturbed paths
/// (antipodal pairs of a Fibonacci lattice) by quadrature, then averaged.
pub fn averaged_action_difference_by_directions(
    rho: f64,
    duration: f64,
    directions: usize,
    panels: usize,
) -> Result<f64> {
    check_window(rho, GAMMA, duration)?;
    let half = directions.div_ceil(2).max(1);
    let golden = PI * (3.0 - 5f64.sqrt());
    let dirs: Vec<[f64; 3]> = (0..half)
        .flat_map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / half as f64;
            let s = (1.0 - z * z).sqrt();
            let (sn, cs) = (golden * k as f64).sin_cos();
            let d = [s * cs, s * sn, z];
            [d, [-d[0], -d[1], -d[2]]]
        })
        .collect();
    let rd = rho / duration;
    let per_dir: Vec<f64> = dirs
        .par_iter()
        .map(|s| {
            // ejection along the first axis, s_x = cos of the angle to it
            let a = s[0];
            gauss_legendre(0.0, duration.cbrt(), panels, |tau| {
                let t = tau * tau * tau;
                let r = GAMMA * tau * tau;
                let v = 2.0 / 3.0 * GAMMA / tau;
                let big_r = rho * (1.0 - t / duration);
                let d = (r * r + 2.0 * a * r * big_r + big_r * big_r).sqrt();
                let kin = -rd * a * v + 0.5 * rd * rd;
                3.0 * tau * tau * (kin + 1.0 / d - 1.0 / r)
            })
        })
        .collect();
    Ok(per_dir.iter().sum::<f64>() / per_dir.len() as f64)
}

/// Action of the unit parabolic ejection on `[0, T]` minus the action of
/// the deformation `r + εφ(t)s`, where `φ = 1` on `[0, ε^{3/2}]`, decreases
/// linearly to 0 at `ε^{3/2} + ε` and vanishes after. `s` is a unit vector
/// making angle `acos(cos_angle)` with the ejection ray.
pub fn montgomery_deformation_gain(eps: f64, cos_angle: f64, duration: f64, panels: usize) -> Result<f64> {
    if !(eps >= 0.0) || !(-1.0..=1.0).contains(&cos_angle) {
        return Err(Error::bad(format!("need ε ≥ 0 and |cos| ≤ 1, got {eps}, {cos_angle}")));
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let t1 = eps.powf(1.5);
    let t2 = t1 + eps;
    if t2 > duration {
        return Err(Error::bad(format!(
            "deformation support {t2} exceeds duration {duration}"
        )));
    }
    let a = cos_angle;
    let gap = |t: f64, phi: f64| {
        let r = GAMMA * t.powf(2.0 / 3.0);
        let e = eps * phi;
        1.0 / r - 1.0 / (r * r + 2.0 * a * r * e + e * e).sqrt()
    };
    let head = gauss_legendre(0.0, t1.cbrt(), panels, |tau| {
        let t = tau * tau * tau;
        3.0 * tau * tau * gap(t, 1.0)
    });
    let tail = gauss_legendre(t1, t2, panels, |t| {
        let phi = (t2 - t) / eps;
        let v = 2.0 / 3.0 * GAMMA * t.powf(-1.0 / 3.0);
        // kinetic change ε φ' ṙ·s + ½ ε² φ'² with ε φ' = −1
        gap(t, phi) + a * v - 0.5
    });
    Ok(head + tail)
}

/// Minimum distance to the attracting center of the deformed path on
/// `[0, ε^{3/2}]`, sampled.
pub fn montgomery_min_distance(eps: f64, cos_angle: f64, samples: usize) -> f64 {
    let t1 = eps.powf(1.5);
    (0..=samples)
        .map(|k| {
            let r = GAMMA * (t1 * k as f64 / samples as f64).powf(2.0 / 3.0);
            (r * r + 2.0 * cos_angle * r * eps + eps * eps).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Upper bound for `A_m^k − A` when body `k` of the homothetic parabolic
/// ejection generated by the central configuration `x0` is replaced by a
/// sphere of radius `R(t) = ρ(1 − t/T)`:
/// `m_k ρ²/2T + Σ_{j≠k} m_j m_k ∫₀^{t_jk} [1/R − 1/r_jk] dt`.
pub fn nbody_averaged_bound(
    x0: &Configuration,
    ms: &MassSystem,
    k: usize,
    rho: f64,
    duration: f64,
    panels: usize,
) -> Result<f64> {
    if k >= ms.n() {
        return Err(Error::bad(format!("body {k} out of range")));
    }
    if central_defect(x0, ms)? > 1e-8 {
        return Err(Error::bad("configuration is not central"));
    }
    let x = reduce_to_center_of_mass(x0, ms);
    let lambda = central_multiplier(&x, ms)?;
    // scale so that x t^{2/3} solves the equations of motion
    let x = x.scaled((4.5 * lambda).cbrt());
    let coeffs: Vec<(usize, f64)> = (0..ms.n()).filter(|&j| j != k).map(|j| (j, x.distance(j, k))).collect();
    let cmin = coeffs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    check_window(rho, cmin, duration)?;
    let mk = ms.mass(k);
    let mut bound = mk * rho * rho / (2.0 * duration);
    for (j, c) in coeffs {
        let t = exit_time(c, rho, duration)?;
        bound += ms.mass(j) * mk * inner_gap(c, rho, duration, t, panels);
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{preset_configuration, Preset};

    #[test]
    fn gamma_cubed() {
        assert!((GAMMA.powi(3) - 4.5).abs() < 1e-12);
        assert_eq!(ParabolicEjection::unit(1.0).unwrap().gamma(), 4.5f64.cbrt());
    }

    #[test]
    fn ejection_solves_kepler_and_has_closed_form_action() {
        let p = ParabolicEjection::new(vec![1.0, 2.0, 2.0], 1.0, 2.0).unwrap();
        assert!(p.kepler_residual(10_000) < 1e-12);
        let q = ParabolicEjection::new(vec![0.0, 3.0], 2.5, 1.0).unwrap();
        assert!(q.kepler_residual(1000) < 1e-12);
        for t1 in [0.0f64, 0.01, 0.5] {
            let exact = 6.0 * (2f64.cbrt() - t1.cbrt()) / GAMMA;
            let a = p.action(t1, 2.0, 16).unwrap();
            assert!((a - exact).abs() < 1e-10 * exact);
        }
    }

    #[test]
    fn shell_potentials() {
        assert_eq!(sphere_shell_potential(0.0, 2.0).unwrap(), 0.5);
        assert_eq!(sphere_shell_potential(5.0, 2.0).unwrap(), 0.2);
        assert_eq!(sphere_shell_potential(2.0, 2.0).unwrap(), 0.5);
        assert!(sphere_shell_potential(1.0, 0.0).is_err());
        assert_eq!(disk_potential(0.0, 2.0).unwrap(), PI / 4.0);
        assert_eq!(disk_potential(2.0, 2.0).unwrap(), PI / 4.0);
        assert!((disk_potential(20.0, 2.0).unwrap() * 20.0 - 1.0).abs() < 0.01);
        assert!(disk_potential(1.0, -1.0).is_err());
        let mut prev = f64::INFINITY;
        for k in 0..100 {
            let r = 0.05 * k as f64;
            let (s, d) = (sphere_shell_potential(r, 1.0).unwrap(), disk_potential(r, 1.0).unwrap());
            assert!(d <= prev);
            assert!(s <= 1.0);
            prev = d;
        }
    }

    #[test]
    fn disk_formula_matches_quadrature() {
        for r in [0.0, 0.5, 0.9, 1.5, 4.0] {
            let q = disk_potential_by_quadrature(r, 1.0, 200).unwrap();
            let f = disk_potential(r, 1.0).unwrap();
            assert!((q - f).abs() < 1e-3 * f, "{r}: {q} vs {f}");
        }
    }

    #[test]
    fn spatial_difference_matches_closed_form() {
        let (rho, tt) = (0.05, 1.0);
        let (d, t0) = averaged_action_difference(3, rho, tt, 32).unwrap();
        assert!((GAMMA * t0.powf(2.0 / 3.0) - rho * (1.0 - t0 / tt)).abs() < 1e-12);
        let exact = rho * rho / (2.0 * tt) - tt / rho * (1.0 - t0 / tt).ln() - 3.0 * t0.cbrt() / GAMMA;
        assert!((d - exact).abs() < 1e-12, "{d} vs {exact}");
        assert!(d < 0.0);
        assert!(averaged_action_difference(3, 0.2, tt, 32).is_err());
        assert!(averaged_action_difference(4, 0.05, tt, 32).is_err());
    }

    #[test]
    fn marchal_ladders_are_negative() {
        for dim in [2, 3] {
            let mut rho = 0.1 * GAMMA;
            for _ in 0..6 {
                let (d, _) = averaged_action_difference(dim, rho, 1.0, 200).unwrap();
                assert!(d < 0.0, "{dim} {rho}");
                rho *= 0.5;
            }
        }
    }

    #[test]
    fn spatial_constant_tends_to_two() {
        let (d, t0) = averaged_action_difference(3, 1e-5, 1.0, 64).unwrap();
        assert!((-normalized_difference(d, t0) - 2.0).abs() < 0.01);
    }

    #[test]
    fn direction_average_matches_shell_route() {
        let (rho, tt) = (0.08, 1.0);
        let (d, _) = averaged_action_difference(3, rho, tt, 64).unwrap();
        let b = averaged_action_difference_by_directions(rho, tt, 2000, 400).unwrap();
        assert!((b - d).abs() < 5e-3 * d.abs(), "{b} vs {d}");
    }

    #[test]
    fn montgomery_gain_scales_like_sqrt_eps() {
        assert_eq!(montgomery_deformation_gain(0.0, 0.0, 1.0, 64).unwrap(), 0.0);
        let mut eps = 1e-3;
        let mut prev = montgomery_deformation_gain(eps, 0.0, 1.0, 256).unwrap() / eps.sqrt();
        assert!(prev > 0.0);
        for _ in 0..4 {
            eps /= 4.0;
            let ratio = montgomery_deformation_gain(eps, 0.0, 1.0, 256).unwrap() / eps.sqrt();
            assert!(ratio > 0.0 && (ratio / prev - 1.0).abs() < 0.25, "{ratio} {prev}");
            prev = ratio;
        }
        assert!(montgomery_min_distance(1e-4, 0.0, 100) >= 1e-4 * (1.0 - 1e-12));
    }

    #[test]
    fn nbody_bound_is_negative_and_reduces_to_kepler() {
        let ms = MassSystem::equal(3, 3).unwrap();
        let tri = preset_configuration(Preset::Equilateral { side: 1.0 }, &ms).unwrap();
        for k in 0..3 {
            assert!(nbody_averaged_bound(&tri, &ms, k, 0.01, 1.0, 64).unwrap() < 0.0);
        }
        assert!(nbody_averaged_bound(&tri, &ms, 0, 10.0, 1.0, 64).is_err());
        // two half masses: relative motion is the unit Kepler problem
        let two = MassSystem::new(3, vec![0.5, 0.5]).unwrap();
        let x = Configuration::new(2, 3, vec![-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let (rho, tt) = (0.02, 1.0);
        let b = nbody_averaged_bound(&x, &two, 1, rho, tt, 64).unwrap();
        let (d, _) = averaged_action_difference(3, rho, tt, 64).unwrap();
        let kin = rho * rho / (2.0 * tt);
        assert!(((b - 0.5 * kin) - 0.25 * (d - kin)).abs() < 1e-12);
    }
}
