//! Sampled trajectories as CSV and as a static SVG.

use std::fmt::Write as _;

use orbitforge::Path;

use crate::orbit::Orbit;
use crate::CliError;

const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const CANVAS: f64 = 600.0;
const MARGIN: f64 = 20.0;

/// Positions of every body at common sample times.
#[derive(Debug, Clone)]
pub struct Curves {
    pub dim: usize,
    pub times: Vec<f64>,
    /// `points[i][k]` is body `i` at `times[k]`.
    pub points: Vec<Vec<Vec<f64>>>,
    /// Whether the last sample connects back to the first.
    pub closed: bool,
}

/// Loops are sampled at `samples` equally spaced times over one period;
/// node paths are reported at their nodes.
pub fn sample_orbit(orbit: &Orbit, samples: usize) -> Result<Curves, CliError> {
    let (n, dim, times, closed) = match orbit {
        Orbit::Loop(lp) => {
            if samples == 0 {
                return Err(CliError::Input("need at least one sample".into()));
            }
            let t: Vec<f64> = (0..samples).map(|k| lp.period() * k as f64 / samples as f64).collect();
            (lp.n(), lp.dim(), t, true)
        }
        Orbit::Nodes(p) => {
            let t: Vec<f64> = (0..p.node_count()).map(|k| k as f64 * p.step()).collect();
            (p.n(), p.dim(), t, false)
        }
    };
    let mut points = vec![Vec::with_capacity(times.len()); n];
    for (k, &t) in times.iter().enumerate() {
        let x = match orbit {
            Orbit::Loop(lp) => lp.eval(t)?.config.into_vec(),
            Orbit::Nodes(p) => p.node(k).to_vec(),
        };
        for (i, body) in x.chunks(dim).enumerate() {
            points[i].push(body.to_vec());
        }
    }
    Ok(Curves {
        dim,
        times,
        points,
        closed,
    })
}

pub fn csv(c: &Curves) -> String {
    let axes = ["x", "y", "z"];
    let mut out = format!("t,body,{}\n", axes[..c.dim].join(","));
    for (k, t) in c.times.iter().enumerate() {
        for (i, body) in c.points.iter().enumerate() {
            let coords: Vec<String> = body[k].iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{t},{i},{}", coords.join(","));
        }
    }
    out
}

/// The two coordinate axes with the largest spread, in index order.
pub fn projection_axes(c: &Curves) -> (usize, usize) {
    if c.dim == 2 {
        return (0, 1);
    }
    let spread: Vec<f64> = (0..c.dim)
        .map(|a| {
            let vals = c.points.iter().flatten().map(|p| p[a]);
            let lo = vals.clone().fold(f64::INFINITY, f64::min);
            let hi = vals.fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .collect();
    let mut order: Vec<usize> = (0..c.dim).collect();
    order.sort_by(|&a, &b| spread[b].total_cmp(&spread[a]));
    let (a, b) = (order[0], order[1]);
    (a.min(b), a.max(b))
}

/// One polyline per body, projected on [`projection_axes`] with equal
/// scales.
pub fn svg(c: &Curves) -> String {
    let (ax, ay) = projection_axes(c);
    let all = || c.points.iter().flatten();
    let lo_x = all().map(|p| p[ax]).fold(f64::INFINITY, f64::min);
    let hi_x = all().map(|p| p[ax]).fold(f64::NEG_INFINITY, f64::max);
    let lo_y = all().map(|p| p[ay]).fold(f64::INFINITY, f64::min);
    let hi_y = all().map(|p| p[ay]).fold(f64::NEG_INFINITY, f64::max);
    let span = (hi_x - lo_x).max(hi_y - lo_y).max(f64::MIN_POSITIVE);
    let scale = (CANVAS - 2.0 * MARGIN) / span;
    let (cx, cy) = (0.5 * (lo_x + hi_x), 0.5 * (lo_y + hi_y));
    let px = |v: f64| CANVAS / 2.0 + (v - cx) * scale;
    let py = |v: f64| CANVAS / 2.0 - (v - cy) * scale;

    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{CANVAS}\" viewBox=\"0 0 {CANVAS} {CANVAS}\">\n"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for (i, body) in c.points.iter().enumerate() {
        let mut pts: Vec<String> = body
            .iter()
            .map(|p| format!("{:.3},{:.3}", px(p[ax]), py(p[ay])))
            .collect();
        if c.closed {
            if let Some(first) = pts.first().cloned() {
                pts.push(first);
            }
        }
        let _ = writeln!(
            out,
            "<polyline id=\"body{i}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
            COLORS[i % COLORS.len()],
            pts.join(" ")
        );
    }
    out.push_str("</svg>\n");
    out
}
