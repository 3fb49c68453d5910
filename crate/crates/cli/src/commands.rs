//! The subcommands, independent of argument parsing.

use std::f64::consts::FRAC_PI_6;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use orbitforge::dynamics::{lagrange_jacobi_residual, potential, scalar_invariants};
use orbitforge::kepler::{averaged_action_difference, normalized_difference, ParabolicEjection, GAMMA};
use orbitforge::minimize::{
    bumped_straight_path, minimize_fixed_ends, minimize_p12, multistart_loop, MinimizeOptions, MinimizeReport,
    MultistartReport, P12Options, Termination,
};
use orbitforge::path::MinDistance;
use orbitforge::symmetry::{invariance_defect, p12_constraint, preset_group, PresetGroup};
use orbitforge::verify::{
    a2_hat, closure_error, integrate, loop_energy, p12_bound, p12_hessian_exact, principal_extents, relative_variation,
};
use orbitforge::{Configuration, FourierLoop, MassSystem, NodePath, Path, QuadratureSpec};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Config, P12Problem, Prepared, Resolution, Thresholds};
use crate::orbit::{Orbit, OrbitFile, Provenance, SymmetryTag};
use crate::{CliError, Status};

/// Quadrature panels of the one-dimensional Marchal integrals.
const MARCHAL_PANELS: usize = 400;
/// Rungs of the default rho ladder.
const MARCHAL_RUNGS: usize = 7;

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct SolveOverrides {
    pub seed: Option<u64>,
    pub modes: Option<usize>,
    pub samples: Option<usize>,
    pub symmetry: Option<String>,
    pub u: Option<f64>,
}

impl SolveOverrides {
    pub fn apply(&self, cfg: &mut Config) -> Result<(), CliError> {
        use crate::config::Problem;
        if let Some(s) = self.seed {
            cfg.solver.seed = s;
        }
        if let Some(m) = self.modes {
            cfg.resolution.modes = m;
        }
        if let Some(s) = self.samples {
            cfg.resolution.samples = s;
        }
        match (&mut cfg.problem, &self.symmetry) {
            (Problem::Loop(p), Some(s)) => p.symmetry = s.clone(),
            (_, Some(_)) => return Err(CliError::Input("--symmetry only applies to loop problems".into())),
            _ => {}
        }
        match (&mut cfg.problem, self.u) {
            (Problem::P12(p), Some(u)) => p.u = u,
            (_, Some(_)) => return Err(CliError::Input("--u only applies to p12 problems".into())),
            _ => {}
        }
        cfg.prepare()?;
        Ok(())
    }
}

/// The parts of a minimizer report worth printing.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub action: f64,
    pub termination: Termination,
    pub grad_norm: f64,
    pub projected_grad_norm: f64,
    pub iterations: usize,
    pub min_distance: MinDistance,
}

impl From<&MinimizeReport> for RunSummary {
    fn from(r: &MinimizeReport) -> Self {
        Self {
            seed: r.seed,
            action: r.action,
            termination: r.termination,
            grad_norm: r.grad_norm,
            projected_grad_norm: r.projected_grad_norm,
            iterations: r.iterations,
            min_distance: r.min_distance,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub problem: &'static str,
    pub orbit: String,
    pub best: RunSummary,
    /// Action of the comparison path, when the problem has one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison_action: Option<f64>,
    pub runs: Vec<RunSummary>,
    pub failures: Vec<(u64, String)>,
}

#[derive(Debug, Clone, Serialize)]
struct FullReport<'a> {
    summary: &'a SolveSummary,
    runs: &'a [MinimizeReport],
}

/// Solves the configured problem, writes the orbit file to `out` and the
/// summary to `stdout`. With `report`, also writes every run's full
/// report, traces included.
pub fn solve(cfg: &Config, out: &FsPath, report: Option<&FsPath>, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let res = &cfg.resolution;
    let opts = &cfg.solver;
    let provenance = Provenance::new(opts, res);
    let (file, summary, runs) = match cfg.prepare()? {
        Prepared::Loop {
            ms,
            group,
            preset,
            problem,
        } => {
            let quad = QuadratureSpec::for_loop(res.samples, res.modes)?;
            let (lp, ms_report) = multistart_loop(
                &ms,
                &group,
                problem.period,
                res.modes,
                &quad,
                problem.amplitude,
                problem.starts,
                opts,
            )?;
            let tag = SymmetryTag {
                preset: preset.to_string(),
                u: None,
            };
            let comparison = (preset == PresetGroup::D6Eight).then(|| 12.0 * a2_hat(problem.period));
            let summary = loop_summary(&ms_report, comparison, out);
            (
                OrbitFile::from_loop(&ms, &lp, Some(tag), provenance),
                summary,
                ms_report.runs,
            )
        }
        Prepared::FixedEnds {
            ms,
            start,
            end,
            problem,
        } => {
            let init = bumped_straight_path(
                &start,
                &end,
                res.interior,
                problem.duration,
                problem.amplitude,
                opts.seed,
            )?;
            let (path, rep) = minimize_fixed_ends(&ms, &start, &end, problem.duration, &init, opts)?;
            let summary = single_summary("fixed-ends", &rep, None, out);
            (OrbitFile::from_nodes(&ms, &path, None, provenance), summary, vec![rep])
        }
        Prepared::P12 { ms, problem } => {
            let (path, rep) = solve_p12(&ms, &problem, res, opts)?;
            let bound = p12_bound(problem.u, problem.period)?;
            let tag = SymmetryTag {
                preset: "p12".into(),
                u: Some(problem.u),
            };
            let summary = single_summary("p12", &rep, Some(bound), out);
            (
                OrbitFile::from_nodes(&ms, &path, Some(tag), provenance),
                summary,
                vec![rep],
            )
        }
    };
    file.write(out)?;
    if let Some(path) = report {
        let full = FullReport {
            summary: &summary,
            runs: &runs,
        };
        let text = serde_json::to_string_pretty(&full).expect("reports always serialize") + "\n";
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    }
    emit_json(stdout, &summary)?;
    Ok(Status::from_ok(summary.best.termination == Termination::Converged))
}

fn solve_p12(
    ms: &MassSystem,
    problem: &P12Problem,
    res: &Resolution,
    opts: &MinimizeOptions,
) -> Result<(NodePath, MinimizeReport), CliError> {
    let p12 = P12Options {
        interior: res.interior,
        push: problem.push,
        noise: problem.noise,
    };
    Ok(minimize_p12(ms, problem.u, problem.period, &p12, opts)?)
}

fn loop_summary(rep: &MultistartReport, comparison: Option<f64>, out: &FsPath) -> SolveSummary {
    SolveSummary {
        problem: "loop",
        orbit: out.display().to_string(),
        best: rep.best_report().into(),
        comparison_action: comparison,
        runs: rep.runs.iter().map(RunSummary::from).collect(),
        failures: rep.failures.clone(),
    }
}

fn single_summary(problem: &'static str, rep: &MinimizeReport, comparison: Option<f64>, out: &FsPath) -> SolveSummary {
    SolveSummary {
        problem,
        orbit: out.display().to_string(),
        best: rep.into(),
        comparison_action: comparison,
        runs: vec![rep.into()],
        failures: Vec::new(),
    }
}

fn emit_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports always serialize");
    writeln!(w, "{text}").map_err(stdout_err)
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::io(FsPath::new("<stdout>"), e)
}

/// One verification measurement. `value` is absent when the measurement
/// itself failed, which counts as a failed check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: Option<f64>,
    /// Upper limit, or lower limit for `min_distance`.
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    fn below(name: &'static str, value: Result<f64, orbitforge::Error>, threshold: f64) -> Self {
        Self::compare(name, value, threshold, |v| v <= threshold)
    }

    fn above(name: &'static str, value: Result<f64, orbitforge::Error>, threshold: f64) -> Self {
        Self::compare(name, value, threshold, |v| v >= threshold)
    }

    fn compare(
        name: &'static str,
        value: Result<f64, orbitforge::Error>,
        threshold: f64,
        ok: impl Fn(f64) -> bool,
    ) -> Self {
        match value {
            Ok(v) => Self {
                name,
                value: Some(v),
                threshold,
                pass: v.is_finite() && ok(v),
                error: None,
            },
            Err(e) => Self {
                name,
                value: None,
                threshold,
                pass: false,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub representation: &'static str,
    pub action: f64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub fn verify_file(file: &OrbitFile, th: &Thresholds) -> Result<VerifyReport, CliError> {
    let ms = file.mass_system()?;
    let (representation, action, checks) = match file.orbit()? {
        Orbit::Loop(lp) => {
            let quad = QuadratureSpec::for_loop(th.samples, lp.modes())?;
            (
                "fourier",
                lp.action(&ms, &quad)?,
                verify_loop(&ms, &lp, file.symmetry.as_ref(), th)?,
            )
        }
        Orbit::Nodes(path) => (
            "nodes",
            path.action(&ms)?,
            verify_nodes(&ms, &path, file.symmetry.as_ref(), th)?,
        ),
    };
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        representation,
        action,
        checks,
        pass,
    })
}

/// `√(Σ m_i |x_i|² / M)` averaged over the samples.
fn rms_size(cfgs: &[Configuration], ms: &MassSystem) -> f64 {
    let s2 = cfgs.iter().map(|c| ms.dot(c.as_slice(), c.as_slice())).sum::<f64>() / cfgs.len() as f64;
    (s2 / ms.total_mass()).sqrt()
}

fn verify_loop(
    ms: &MassSystem,
    lp: &FourierLoop,
    symmetry: Option<&SymmetryTag>,
    th: &Thresholds,
) -> Result<Vec<Check>, CliError> {
    let samples = th.samples.max(3);
    let cfgs = lp.sample(samples);
    let size = rms_size(&cfgs, ms);
    let mut checks = vec![Check::below(
        "closure",
        closure_error(ms, lp, th.integration_steps),
        th.closure,
    )];
    let traj = lp
        .eval(0.0)
        .and_then(|s0| integrate(ms, &s0, lp.period(), th.integration_steps));
    checks.push(Check::below(
        "energy_drift",
        traj.as_ref().map(|t| t.energy_drift).map_err(Clone::clone),
        th.energy_drift,
    ));
    let lj = traj.as_ref().map_err(Clone::clone).and_then(|t| {
        let res = lagrange_jacobi_residual(&t.states, t.step, ms)?;
        let scale = t
            .states
            .iter()
            .map(|s| Ok(2.0 * scalar_invariants(s, ms)?.u.abs()))
            .collect::<orbitforge::Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        Ok(res.iter().fold(0.0f64, |m, r| m.max(r.abs())) / scale)
    });
    checks.push(Check::below("lagrange_jacobi", lj, th.lagrange_jacobi));
    checks.push(Check::below(
        "loop_energy",
        loop_energy(lp, ms, samples).map(|e| relative_variation(&e)),
        th.loop_energy,
    ));
    if let Some(tag) = symmetry {
        let preset: PresetGroup = tag.preset.parse()?;
        let group = preset_group(preset, lp.n(), lp.dim())?;
        checks.push(Check::below(
            "invariance",
            invariance_defect(&group, lp, ms, samples).map(|d| d / (size * ms.total_mass().sqrt())),
            th.invariance,
        ));
    }
    let quad = QuadratureSpec::for_loop(samples, lp.modes())?;
    checks.push(Check::above(
        "min_distance",
        Ok(lp.min_pairwise_distance(&quad).value / size),
        th.min_distance,
    ));
    Ok(checks)
}

fn verify_nodes(
    ms: &MassSystem,
    path: &NodePath,
    symmetry: Option<&SymmetryTag>,
    th: &Thresholds,
) -> Result<Vec<Check>, CliError> {
    let cfgs: Vec<Configuration> = (0..path.node_count())
        .map(|k| Configuration::new(path.n(), path.dim(), path.node(k).to_vec()))
        .collect::<orbitforge::Result<_>>()?;
    let size = rms_size(&cfgs, ms);
    let h = path.step();
    let el = path.discrete_el_residual(ms).map(|res| {
        let nd = ms.len();
        let mut worst_acc = 0.0f64;
        for k in 1..path.node_count() - 1 {
            let (p, c, q) = (path.node(k - 1), path.node(k), path.node(k + 1));
            for ia in 0..nd {
                worst_acc = worst_acc.max(((q[ia] - 2.0 * c[ia] + p[ia]) / (h * h)).abs());
            }
        }
        res.iter().fold(0.0f64, |m, r| m.max(r.abs())) / worst_acc
    });
    let mut checks = vec![Check::below("euler_lagrange", el, th.euler_lagrange)];
    let energy = (0..path.node_count() - 1)
        .map(|k| {
            let (a, b) = (path.node(k), path.node(k + 1));
            let vel: Vec<f64> = b.iter().zip(a).map(|(q, p)| (q - p) / h).collect();
            let u = 0.5 * (potential(&cfgs[k], ms)? + potential(&cfgs[k + 1], ms)?);
            Ok(0.5 * ms.dot(&vel, &vel) - u)
        })
        .collect::<orbitforge::Result<Vec<f64>>>()
        .map(|e| relative_variation(&e));
    checks.push(Check::below("path_energy", energy, th.path_energy));
    if let Some(SymmetryTag { preset, u: Some(u) }) = symmetry {
        if preset == "p12" {
            let c = p12_constraint(*u, path.duration() * 12.0)?;
            let defect = c
                .start
                .defect(path.node(0))
                .max(c.end.defect(path.node(path.node_count() - 1)));
            checks.push(Check::below("invariance", Ok(defect / size), th.invariance));
        }
    }
    checks.push(Check::above(
        "min_distance",
        Ok(path.min_pairwise_distance_all().value / size),
        th.min_distance,
    ));
    Ok(checks)
}

pub fn verify(file: &OrbitFile, th: &Thresholds, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let report = verify_file(file, th)?;
    emit_json(stdout, &report)?;
    Ok(Status::from_ok(report.pass))
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionReport {
    pub action: f64,
    pub kinetic: f64,
    pub potential: f64,
}

pub fn action_eval(file: &OrbitFile, samples: Option<usize>, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let ms = file.mass_system()?;
    let (action, kinetic) = match file.orbit()? {
        Orbit::Loop(lp) => {
            let samples = samples.unwrap_or(file.provenance.resolution.samples);
            let quad = QuadratureSpec::for_loop(samples, lp.modes())?;
            (lp.action(&ms, &quad)?, lp.kinetic_action(&ms))
        }
        Orbit::Nodes(path) => (path.action(&ms)?, path.kinetic_action(&ms)),
    };
    emit_json(
        stdout,
        &ActionReport {
            action,
            kinetic,
            potential: action - kinetic,
        },
    )?;
    Ok(Status::Success)
}

/// One row of the P12 sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub u: f64,
    pub action: f64,
    pub bound: f64,
    /// Smallest over largest principal extent of all node positions.
    pub planarity: f64,
    /// Side lengths `r01, r02, r12` of the triangle at each end.
    pub start_sides: [f64; 3],
    pub end_sides: [f64; 3],
    pub hessian: f64,
    pub termination: Termination,
}

pub const SWEEP_HEADER: &str =
    "u,action,bound,planarity,start_r01,start_r02,start_r12,end_r01,end_r02,end_r12,hessian,hessian_sign,termination";

impl SweepRow {
    pub fn csv(&self) -> String {
        let s = &self.start_sides;
        let e = &self.end_sides;
        let sign = if self.hessian > 0.0 {
            1
        } else if self.hessian < 0.0 {
            -1
        } else {
            0
        };
        let term = serde_json::to_value(self.termination).expect("terminations serialize");
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.u,
            self.action,
            self.bound,
            self.planarity,
            s[0],
            s[1],
            s[2],
            e[0],
            e[1],
            e[2],
            self.hessian,
            sign,
            term.as_str().unwrap_or_default()
        )
    }
}

fn sides(x: &[f64]) -> [f64; 3] {
    let d = |i: usize, j: usize| {
        (0..3)
            .map(|a| (x[3 * i + a] - x[3 * j + a]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    [d(0, 1), d(0, 2), d(1, 2)]
}

pub fn sweep_p12_rows(
    grid: &[f64],
    problem: &P12Problem,
    res: &Resolution,
    opts: &MinimizeOptions,
) -> Result<Vec<SweepRow>, CliError> {
    if let Some(&u) = grid.iter().find(|u| !(0.0..=FRAC_PI_6).contains(*u)) {
        return Err(CliError::Input(format!("grid value {u} lies outside [0, π/6]")));
    }
    let ms = MassSystem::equal(3, 3)?;
    grid.par_iter()
        .map(|&u| {
            let p = P12Problem { u, ..problem.clone() };
            let (path, rep) = solve_p12(&ms, &p, res, opts)?;
            let cloud: Vec<Configuration> = (0..path.node_count())
                .map(|k| Configuration::new(3, 3, path.node(k).to_vec()))
                .collect::<orbitforge::Result<_>>()?;
            let ext = principal_extents(&cloud)?;
            Ok(SweepRow {
                u,
                action: rep.action,
                bound: p12_bound(u, p.period)?,
                planarity: ext[2] / ext[0],
                start_sides: sides(path.node(0)),
                end_sides: sides(path.node(path.node_count() - 1)),
                hessian: p12_hessian_exact(u, p.period)?,
                termination: rep.termination,
            })
        })
        .collect()
}

/// Writes the sweep table. Fails (status 1) when a row did not converge.
pub fn sweep_p12(
    grid: &[f64],
    problem: &P12Problem,
    res: &Resolution,
    opts: &MinimizeOptions,
    out: &mut dyn Write,
) -> Result<Status, CliError> {
    let rows = sweep_p12_rows(grid, problem, res, opts)?;
    writeln!(out, "{SWEEP_HEADER}").map_err(stdout_err)?;
    for r in &rows {
        writeln!(out, "{}", r.csv()).map_err(stdout_err)?;
    }
    Ok(Status::from_ok(
        rows.iter().all(|r| r.termination == Termination::Converged),
    ))
}

/// One rung of the averaged-action demonstration.
#[derive(Debug, Clone, Copy)]
pub struct MarchalRow {
    pub rho: f64,
    pub exit_time: f64,
    pub ejection_action: f64,
    pub averaged_action: f64,
    pub normalized: f64,
}

pub const MARCHAL_HEADER: &str = "rho,t0,A,A_m,normalized";

/// Rows for the given radii, or for a halving ladder starting at the
/// largest admissible radius when `rhos` is empty.
pub fn marchal_rows(dim: usize, rhos: &[f64], duration: f64) -> Result<Vec<MarchalRow>, CliError> {
    let ladder: Vec<f64> = if rhos.is_empty() {
        let top = 0.1 * GAMMA * duration.powf(2.0 / 3.0);
        (0..MARCHAL_RUNGS).map(|k| top / 2f64.powi(k as i32)).collect()
    } else {
        rhos.to_vec()
    };
    let ejection = ParabolicEjection::unit(duration)?;
    let a = ejection.action(0.0, duration, MARCHAL_PANELS)?;
    ladder
        .iter()
        .map(|&rho| {
            let (diff, t0) = averaged_action_difference(dim, rho, duration, MARCHAL_PANELS)?;
            Ok(MarchalRow {
                rho,
                exit_time: t0,
                ejection_action: a,
                averaged_action: a + diff,
                normalized: normalized_difference(diff, t0),
            })
        })
        .collect()
}

pub fn marchal_demo(dim: usize, rhos: &[f64], duration: f64, out: &mut dyn Write) -> Result<Status, CliError> {
    let rows = marchal_rows(dim, rhos, duration)?;
    writeln!(out, "{MARCHAL_HEADER}").map_err(stdout_err)?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.rho, r.exit_time, r.ejection_action, r.averaged_action, r.normalized
        )
        .map_err(stdout_err)?;
    }
    Ok(Status::Success)
}

/// `<prefix>.csv` and `<prefix>.svg`.
pub fn plot_paths(prefix: &FsPath) -> (PathBuf, PathBuf) {
    let base = prefix.as_os_str().to_os_string();
    let mut csv = base.clone();
    csv.push(".csv");
    let mut svg = base;
    svg.push(".svg");
    (csv.into(), svg.into())
}

pub fn plot(file: &OrbitFile, samples: usize, prefix: &FsPath, stdout: &mut dyn Write) -> Result<Status, CliError> {
    let curves = crate::plot::sample_orbit(&file.orbit()?, samples)?;
    let (csv, svg) = plot_paths(prefix);
    std::fs::write(&csv, crate::plot::csv(&curves)).map_err(|e| CliError::io(&csv, e))?;
    std::fs::write(&svg, crate::plot::svg(&curves)).map_err(|e| CliError::io(&svg, e))?;
    writeln!(stdout, "{}\n{}", csv.display(), svg.display()).map_err(stdout_err)?;
    Ok(Status::Success)
}
