use std::collections::VecDeque;

use super::{dot, norm, MinimizeOptions, MinimizeReport, Objective, Termination};
use crate::error::{Error, Result};

const MAX_BACKTRACKS: usize = 60;
/// A predicted decrease below this many ulps of the objective cannot be
/// resolved by the line search.
const ROUND_OFF_ULPS: f64 = 100.0;

struct Pair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

fn direction(obj: &dyn Objective, pairs: &VecDeque<Pair>, gp: &[f64]) -> Vec<f64> {
    let mut q = gp.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for p in pairs.iter().rev() {
        let a = p.rho * dot(&p.s, &q);
        q.iter_mut().zip(&p.y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    let mut r = q;
    obj.precondition(&mut r);
    if let Some(last) = pairs.back() {
        let mut hy = last.y.clone();
        obj.precondition(&mut hy);
        let yhy = dot(&last.y, &hy);
        if yhy > 0.0 {
            let gamma = dot(&last.s, &last.y) / yhy;
            r.iter_mut().for_each(|v| *v *= gamma);
        }
    }
    for (p, a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = p.rho * dot(&p.y, &r);
        r.iter_mut().zip(&p.s).for_each(|(ri, si)| *ri += (a - b) * si);
    }
    r.iter_mut().for_each(|v| *v = -*v);
    obj.project(&mut r);
    r
}

fn steepest(obj: &dyn Objective, gp: &[f64]) -> Vec<f64> {
    let mut d: Vec<f64> = gp.iter().map(|v| -v).collect();
    obj.precondition(&mut d);
    obj.project(&mut d);
    d
}

/// Preconditioned, projected L-BFGS with backtracking and a soft collision
/// floor. `floor` is absolute.
pub(crate) fn run(
    obj: &dyn Objective,
    x0: &[f64],
    opts: &MinimizeOptions,
    floor: f64,
) -> Result<(Vec<f64>, MinimizeReport)> {
    opts.validate()?;
    let mut x = x0.to_vec();
    obj.project(&mut x);
    let start_dist = obj.min_distance(&x);
    if start_dist.value < floor {
        return Err(Error::CollisionFloor {
            iteration: 0,
            distance: start_dist.value,
            floor,
        });
    }
    let (mut f, mut g) = obj.value_grad(&x)?;
    let mut gp = g.clone();
    obj.project(&mut gp);
    let mut evaluations = 1;
    let mut trace = vec![f];
    let mut pairs: VecDeque<Pair> = VecDeque::new();
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;

    let converged = |g: &[f64], gp: &[f64]| {
        let n = if obj.full_gradient_converges() {
            norm(g)
        } else {
            norm(gp)
        };
        n <= opts.gtol
    };

    while iterations < opts.max_iter {
        if converged(&g, &gp) {
            termination = Termination::Converged;
            break;
        }
        let mut d = direction(obj, &pairs, &gp);
        let mut slope = dot(&d, &gp);
        if !(slope < 0.0) {
            pairs.clear();
            d = steepest(obj, &gp);
            slope = dot(&d, &gp);
            if !(slope < 0.0) {
                termination = Termination::Stalled;
                break;
            }
        }
        // the first step of a fresh memory is kept to a modest length
        let mut alpha = if pairs.is_empty() {
            (0.1 * norm(&x).max(1.0) / norm(&d)).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        let mut blocked = false;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            obj.project(&mut trial);
            let md = obj.min_distance(&trial);
            if md.value < floor {
                blocked = true;
                alpha *= opts.backtrack;
                continue;
            }
            match obj.value_grad(&trial) {
                Ok((ft, gt)) => {
                    evaluations += 1;
                    blocked = false;
                    if ft <= f + opts.sufficient_decrease * alpha * slope {
                        accepted = Some((trial, ft, gt));
                        break;
                    }
                }
                Err(Error::Collision { .. }) => blocked = true,
                Err(e) => return Err(e),
            }
            alpha *= opts.backtrack;
        }
        let Some((xn, fn_, gn)) = accepted else {
            termination = if blocked {
                Termination::CollisionFloor
            } else if -slope <= ROUND_OFF_ULPS * f64::EPSILON * f.abs() {
                // the model decrease is below round-off: a minimum to working precision
                Termination::Converged
            } else {
                Termination::Stalled
            };
            break;
        };
        let mut gpn = gn.clone();
        obj.project(&mut gpn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gpn.iter().zip(&gp).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) && sy > 0.0 {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back(Pair { s, y, rho: 1.0 / sy });
        }
        x = xn;
        f = fn_;
        g = gn;
        gp = gpn;
        trace.push(f);
        iterations += 1;
    }
    if termination == Termination::MaxIter && converged(&g, &gp) {
        termination = Termination::Converged;
    }
    let report = MinimizeReport {
        action: f,
        grad_norm: norm(&g),
        projected_grad_norm: norm(&gp),
        iterations,
        evaluations,
        min_distance: obj.min_distance(&x),
        termination,
        trace,
        seed: opts.seed,
    };
    Ok((x, report))
}
