use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dynamics::{central_defect, central_multiplier, normalized_potential, Configuration, MassSystem};
use crate::error::{Error, Result};
use crate::path::{action_window, ClosedFormPath, FourierLoop, Path, Perturbed, QuadratureSpec};
use crate::quadrature::bisect;

/// Second difference `(A(x + hξ) − 2A(x) + A(x − hξ)) / h²` of the action
/// over `window`, by Gauss–Legendre quadrature with `panels` panels.
pub fn hessian_form<P: Path + ?Sized, V: Path + ?Sized>(
    base: &P,
    variation: &V,
    ms: &MassSystem,
    window: (f64, f64),
    panels: usize,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::bad(format!("step must be positive, got {h}")));
    }
    let act = |eps: f64| {
        let p = Perturbed { base, variation, eps };
        action_window(&p, ms, window.0, window.1, panels)
    };
    Ok((act(h)? - 2.0 * act(0.0)? + act(-h)?) / (h * h))
}

/// [`hessian_form`] for loops, using the discretized loop action.
pub fn hessian_form_loop(
    base: &FourierLoop,
    variation: &FourierLoop,
    ms: &MassSystem,
    quad: &QuadratureSpec,
    h: f64,
) -> Result<f64> {
    if variation.coeffs().len() != base.coeffs().len() || variation.period() != base.period() {
        return Err(Error::DimMismatch {
            expected: base.coeffs().len(),
            got: variation.coeffs().len(),
        });
    }
    if !(h > 0.0) {
        return Err(Error::bad(format!("step must be positive, got {h}")));
    }
    let act = |eps: f64| {
        let c = base
            .coeffs()
            .iter()
            .zip(variation.coeffs())
            .map(|(a, b)| a + eps * b)
            .collect();
        base.with_coeffs(c)?.action(ms, quad)
    };
    Ok((act(h)? - 2.0 * act(0.0)? + act(-h)?) / (h * h))
}

/// Action over `T/12` of the equilateral triangle turning by `π/3`:
/// `2^{-5/3} 3^{2/3} π^{2/3} T^{1/3}` for unit masses.
pub fn a2_hat(period: f64) -> f64 {
    2f64.powf(-5.0 / 3.0) * 3f64.powf(2.0 / 3.0) * PI.powf(2.0 / 3.0) * period.cbrt()
}

/// Action of the horizontal Lagrange arc turning by `π/3 − u` in `T/12`.
pub fn p12_bound(u: f64, period: f64) -> Result<f64> {
    if !(0.0..=PI / 3.0).contains(&u) {
        return Err(Error::bad(format!("angle u must lie in [0, π/3], got {u}")));
    }
    Ok(a2_hat(period) * (3.0 / PI * (PI / 3.0 - u)).powf(2.0 / 3.0))
}

fn arc_rate(u: f64, period: f64) -> Result<f64> {
    if !(0.0..PI / 3.0).contains(&u) {
        return Err(Error::bad(format!("the Lagrange arc needs u in [0, π/3), got {u}")));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::bad(format!("period must be positive, got {period}")));
    }
    Ok((PI / 3.0 - u) * 12.0 / period)
}

/// Side of the equilateral triangle of the Lagrange arc `x_u`.
pub fn lagrange_side(u: f64, period: f64) -> Result<f64> {
    let w = arc_rate(u, period)?;
    Ok((3.0 / (w * w)).cbrt())
}

/// The horizontal Lagrange arc `x_u` on `[0, T/12]`, three unit masses in
/// space: body `k` starts at angle `2πk/3` and the triangle turns clockwise
/// by `π/3 − u`.
pub fn lagrange_arc(u: f64, period: f64) -> Result<ClosedFormPath> {
    let w = arc_rate(u, period)?;
    let r = lagrange_side(u, period)? / 3f64.sqrt();
    Ok(ClosedFormPath::new(3, 3, (0.0, period / 12.0), move |t| {
        let mut x = Vec::with_capacity(9);
        let mut v = Vec::with_capacity(9);
        for k in 0..3 {
            let th = 2.0 * PI * k as f64 / 3.0 - w * t;
            let (s, c) = th.sin_cos();
            x.extend([r * c, r * s, 0.0]);
            v.extend([w * r * s, -w * r * c, 0.0]);
        }
        (x, v)
    }))
}

/// The vertical variation `z_k(t) = sin(2πt/T + 2πk/3)` on `[0, T/12]`.
pub fn p12_vertical_variation(period: f64) -> ClosedFormPath {
    let w = 2.0 * PI / period;
    ClosedFormPath::new(3, 3, (0.0, period / 12.0), move |t| {
        let mut x = vec![0.0; 9];
        let mut v = vec![0.0; 9];
        for k in 0..3 {
            let ph = w * t + 2.0 * PI * k as f64 / 3.0;
            x[3 * k + 2] = ph.sin();
            v[3 * k + 2] = w * ph.cos();
        }
        (x, v)
    })
}

/// Second variation of the action of `x_u` along the vertical variation,
/// by finite differences with step `h_rel` times the triangle side.
pub fn p12_hessian(u: f64, period: f64, h_rel: f64, panels: usize) -> Result<f64> {
    let ms = MassSystem::equal(3, 3)?;
    let base = lagrange_arc(u, period)?;
    let xi = p12_vertical_variation(period);
    let h = h_rel * lagrange_side(u, period)?;
    hessian_form(&base, &xi, &ms, (0.0, period / 12.0), panels, h)
}

/// Closed form of [`p12_hessian`]: `(T/12)(3/2)[(2π/T)² − ω²]` with `ω`
/// the rotation rate of the arc.
pub fn p12_hessian_exact(u: f64, period: f64) -> Result<f64> {
    let w = arc_rate(u, period)?;
    Ok(period / 12.0 * 1.5 * ((2.0 * PI / period).powi(2) - w * w))
}

/// Angle in `[lo, hi]` where [`p12_hessian`] changes sign, by bisection.
pub fn p12_sign_flip(period: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let f = |u: f64| p12_hessian(u, period, 1e-3, 64).unwrap_or(f64::NAN);
    if f(lo).is_nan() || f(hi).is_nan() {
        return Err(Error::bad(format!("Hessian undefined on [{lo}, {hi}]")));
    }
    bisect(lo, hi, tol / hi.abs().max(1e-300), f)
}

fn vertical_config(x0: &Configuration, heights: &[f64], eps: f64) -> Vec<f64> {
    let mut x = x0.as_slice().to_vec();
    for (i, z) in heights.iter().enumerate() {
        x[i * 3 + 2] += eps * z;
    }
    x
}

fn check_planar_central(x0: &Configuration, ms: &MassSystem) -> Result<()> {
    if ms.dim() != 3 || x0.dim() != 3 || x0.n() != ms.n() {
        return Err(Error::bad("vertical variations need a configuration in space"));
    }
    let scale = x0.scale();
    if x0.rows().iter().any(|r| r[2].abs() > 1e-12 * scale) {
        return Err(Error::bad("configuration is not horizontal"));
    }
    let defect = central_defect(x0, ms)?;
    if defect > 1e-8 {
        return Err(Error::bad(format!("configuration is not central (defect {defect:e})")));
    }
    Ok(())
}

fn check_heights(heights: &[f64], ms: &MassSystem) -> Result<()> {
    if heights.len() != ms.n() {
        return Err(Error::DimMismatch {
            expected: ms.n(),
            got: heights.len(),
        });
    }
    let mean: f64 = heights.iter().zip(ms.masses()).map(|(z, m)| z * m).sum::<f64>() / ms.total_mass();
    let size = heights.iter().map(|z| z.abs()).fold(0.0, f64::max);
    if size == 0.0 || mean.abs() > 1e-12 * size {
        return Err(Error::bad(
            "vertical variation must be nonzero with zero mass-weighted mean",
        ));
    }
    Ok(())
}

/// Central second difference of `Ũ = I^{1/2} U` along a vertical variation,
/// step `1e-4 · I^{1/2}`.
pub fn vertical_d2_normalized_potential(x0: &Configuration, heights: &[f64], ms: &MassSystem) -> Result<f64> {
    let x = x0.as_slice();
    let h = 1e-4 * ms.metric_dot(x, x).sqrt();
    let f = |e: f64| normalized_potential(&vertical_config(x0, heights, e), ms);
    Ok((f(h)? - 2.0 * f(0.0)? + f(-h)?) / (h * h))
}

/// Compares the second variation of the action of the relative equilibrium
/// generated by a horizontal central configuration, along
/// `z(t) = z₀ cos(2πt/T)`, with `I^{-1/2} d²Ũ(z₀, z₀) · T/2`. The
/// configuration is first rescaled so that the relative equilibrium has
/// period `T`. Returns `(lhs, rhs)`.
pub fn vertical_hessian_identity(
    x0: &Configuration,
    heights: &[f64],
    ms: &MassSystem,
    period: f64,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    check_planar_central(x0, ms)?;
    check_heights(heights, ms)?;
    let w = 2.0 * PI / period;
    let lambda = central_multiplier(x0, ms)?;
    let x = crate::dynamics::reduce_to_center_of_mass(&x0.scaled((lambda / (w * w)).cbrt()), ms);
    let modes = 4;
    let re = FourierLoop::rigid_rotation(&x, period, 1, modes)?;
    let mut var = FourierLoop::zeros(ms.n(), 3, period, modes)?;
    for (i, z) in heights.iter().enumerate() {
        *var.cos_mut(i, 2, 1) = *z;
    }
    let xs = x.as_slice();
    let size = ms.metric_dot(xs, xs).sqrt();
    let zsize = heights
        .iter()
        .zip(ms.masses())
        .map(|(z, m)| m * z * z)
        .sum::<f64>()
        .sqrt();
    let lhs = hessian_form_loop(&re, &var, ms, quad, 1e-3 * size / zsize)?;
    let d2 = vertical_d2_normalized_potential(&x, heights, ms)?;
    let rhs = d2 / size * 0.5 * period;
    Ok((lhs, rhs))
}

/// Smallest Rayleigh quotient `d²Ũ(z, z) / |z|²` over vertical variations
/// with zero mass-weighted mean, and a minimizing height vector.
pub fn min_vertical_rayleigh(x0: &Configuration, ms: &MassSystem) -> Result<(f64, Vec<f64>)> {
    check_planar_central(x0, ms)?;
    let n = ms.n();
    let x = x0.as_slice();
    let h = 1e-4 * ms.metric_dot(x, x).sqrt();
    let ut = |dz: &[f64]| normalized_potential(&vertical_config(x0, dz, 1.0), ms);
    let mut hess = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let e = |si: f64, sj: f64| {
                let mut dz = vec![0.0; n];
                dz[i] += si * h;
                dz[j] += sj * h;
                ut(&dz)
            };
            let v = (e(1.0, 1.0)? - e(1.0, -1.0)? - e(-1.0, 1.0)? + e(-1.0, -1.0)?) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    // mass-orthonormal basis of the mean-zero heights
    let mt = ms.total_mass();
    let mdot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).zip(ms.masses()).map(|((p, q), m)| m * p * q).sum() };
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        let mean = ms.mass(k) / mt;
        v.iter_mut().for_each(|c| *c -= mean);
        for b in &basis {
            let p = mdot(&v, b);
            v.iter_mut().zip(b).for_each(|(c, bb)| *c -= p * bb);
        }
        let nv = mdot(&v, &v).sqrt();
        if nv > 1e-8 {
            v.iter_mut().for_each(|c| *c /= nv);
            basis.push(v);
        }
    }
    let b = DMatrix::from_fn(n, basis.len(), |r, c| basis[c][r]);
    let reduced = b.transpose() * &hess * &b;
    let eig = SymmetricEigen::new(reduced);
    let (k, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    let z = &b * eig.eigenvectors.column(k);
    Ok((val, z.iter().cloned().collect()))
}
