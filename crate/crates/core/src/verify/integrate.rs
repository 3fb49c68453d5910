use serde::{Deserialize, Serialize};

use crate::dynamics::{
    accelerations_flat, closest_pair, geometric_scale, scalar_invariants, Configuration, MassSystem, PhaseState,
};
use crate::error::{Error, Result};
use crate::path::{FourierLoop, Path};

/// Uniformly sampled solution of the equations of motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhaseState>,
    /// Order of the integration scheme.
    pub order: usize,
    pub step: f64,
    pub steps: usize,
    /// `max_t |H(t) − H(0)| / |H(0)|`.
    pub energy_drift: f64,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.states.last().expect("trajectories are never empty")
    }
}

fn rhs(x: &[f64], v: &[f64], ms: &MassSystem, dx: &mut [f64], dv: &mut [f64]) -> Result<()> {
    dx.copy_from_slice(v);
    accelerations_flat(x, ms, dv)?;
    Ok(())
}

/// Classical fixed-step fourth-order Runge–Kutta over `[0, duration]`.
/// Stops with `CloseApproach` when two bodies come within the collision
/// threshold.
pub fn integrate(ms: &MassSystem, state0: &PhaseState, duration: f64, steps: usize) -> Result<Trajectory> {
    if steps == 0 || !(duration.is_finite() && duration > 0.0) {
        return Err(Error::bad(format!(
            "need positive duration and steps, got {duration}, {steps}"
        )));
    }
    let len = ms.len();
    if state0.config.as_slice().len() != len {
        return Err(Error::DimMismatch {
            expected: len,
            got: state0.config.as_slice().len(),
        });
    }
    let (n, d) = (ms.n(), ms.dim());
    let h = duration / steps as f64;
    let mut x = state0.config.as_slice().to_vec();
    let mut v = state0.velocities.clone();
    let threshold = ms.collision_eps() * geometric_scale(&x, n, d);
    let (r0, _, _) = closest_pair(&x, n, d);
    if r0 <= threshold {
        return Err(Error::CloseApproach {
            time: 0.0,
            distance: r0,
        });
    }
    let h0 = scalar_invariants(state0, ms)?.h;

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(state0.clone());
    let mut drift = 0.0f64;

    let [mut k1x, mut k1v, mut k2x, mut k2v, mut k3x, mut k3v, mut k4x, mut k4v] =
        std::array::from_fn(|_| vec![0.0; len]);
    let mut xt = vec![0.0; len];
    let mut vt = vec![0.0; len];
    for s in 0..steps {
        let t = s as f64 * h;
        let close = |e: Error, at: f64| match e {
            Error::Collision { distance, .. } => Error::CloseApproach { time: at, distance },
            other => other,
        };
        rhs(&x, &v, ms, &mut k1x, &mut k1v).map_err(|e| close(e, t))?;
        for i in 0..len {
            xt[i] = x[i] + 0.5 * h * k1x[i];
            vt[i] = v[i] + 0.5 * h * k1v[i];
        }
        rhs(&xt, &vt, ms, &mut k2x, &mut k2v).map_err(|e| close(e, t + 0.5 * h))?;
        for i in 0..len {
            xt[i] = x[i] + 0.5 * h * k2x[i];
            vt[i] = v[i] + 0.5 * h * k2v[i];
        }
        rhs(&xt, &vt, ms, &mut k3x, &mut k3v).map_err(|e| close(e, t + 0.5 * h))?;
        for i in 0..len {
            xt[i] = x[i] + h * k3x[i];
            vt[i] = v[i] + h * k3v[i];
        }
        rhs(&xt, &vt, ms, &mut k4x, &mut k4v).map_err(|e| close(e, t + h))?;
        for i in 0..len {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
        let tn = (s + 1) as f64 * h;
        let (r, _, _) = closest_pair(&x, n, d);
        if r <= threshold {
            return Err(Error::CloseApproach { time: tn, distance: r });
        }
        let st = PhaseState::new(Configuration::new(n, d, x.clone())?, v.clone())?;
        let e = scalar_invariants(&st, ms)?.h;
        drift = drift.max((e - h0).abs() / h0.abs().max(f64::MIN_POSITIVE));
        times.push(tn);
        states.push(st);
    }
    Ok(Trajectory {
        times,
        states,
        order: 4,
        step: h,
        steps,
        energy_drift: drift,
    })
}

fn phase_norm(x: &[f64], v: &[f64], ms: &MassSystem, vscale: f64) -> f64 {
    (ms.metric_dot(x, x) + vscale * vscale * ms.metric_dot(v, v)).sqrt()
}

/// Integrates from the loop's state at `t = 0` over one period and returns
/// the phase-space distance to the starting state, relative to the size of
/// that state. Velocities are weighted by `T/2π`.
pub fn closure_error(ms: &MassSystem, lp: &FourierLoop, steps: usize) -> Result<f64> {
    let s0 = lp.eval(0.0)?;
    let traj = integrate(ms, &s0, lp.period(), steps)?;
    let end = traj.last();
    let w = lp.period() / (2.0 * std::f64::consts::PI);
    let dx: Vec<f64> = end
        .config
        .as_slice()
        .iter()
        .zip(s0.config.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let dv: Vec<f64> = end.velocities.iter().zip(&s0.velocities).map(|(a, b)| a - b).collect();
    Ok(phase_norm(&dx, &dv, ms, w) / phase_norm(s0.config.as_slice(), &s0.velocities, ms, w))
}

/// `H(t)` at every sample.
pub fn energy_series(traj: &Trajectory, ms: &MassSystem) -> Result<Vec<f64>> {
    traj.states.iter().map(|s| Ok(scalar_invariants(s, ms)?.h)).collect()
}

/// Energy of a sub-cluster: kinetic energy relative to the cluster's center
/// of mass minus the cluster's internal potential.
pub fn cluster_energy(traj: &Trajectory, ms: &MassSystem, cluster: &[usize]) -> Result<Vec<f64>> {
    if cluster.is_empty() || cluster.iter().any(|&i| i >= ms.n()) {
        return Err(Error::bad(format!("invalid cluster {cluster:?}")));
    }
    let d = ms.dim();
    let mut sorted = cluster.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mc: f64 = sorted.iter().map(|&i| ms.mass(i)).sum();
    traj.states
        .iter()
        .map(|s| {
            let x = s.config.as_slice();
            let v = &s.velocities;
            let mut vg = vec![0.0; d];
            for &i in &sorted {
                for a in 0..d {
                    vg[a] += ms.mass(i) * v[i * d + a] / mc;
                }
            }
            let mut kin = 0.0;
            for &i in &sorted {
                for a in 0..d {
                    let w = v[i * d + a] - vg[a];
                    kin += 0.5 * ms.mass(i) * w * w;
                }
            }
            let mut pot = 0.0;
            for (p, &i) in sorted.iter().enumerate() {
                for &j in &sorted[p + 1..] {
                    let r = crate::dynamics::dist(&x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]);
                    if r == 0.0 {
                        return Err(Error::Collision {
                            i,
                            j,
                            distance: 0.0,
                            time: None,
                        });
                    }
                    pot += ms.mass(i) * ms.mass(j) / r;
                }
            }
            Ok(kin - pot)
        })
        .collect()
}

/// Energy along the loop itself, at `samples` equally spaced times.
pub fn loop_energy(lp: &FourierLoop, ms: &MassSystem, samples: usize) -> Result<Vec<f64>> {
    lp.sample_states(samples)
        .iter()
        .map(|s| Ok(scalar_invariants(s, ms)?.h))
        .collect()
}

/// `max − min` of a series divided by the mean absolute value.
pub fn relative_variation(series: &[f64]) -> f64 {
    let lo = series.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = series.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = series.iter().map(|v| v.abs()).sum::<f64>() / series.len() as f64;
    (hi - lo) / mean
}
