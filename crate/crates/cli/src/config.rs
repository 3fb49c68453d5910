//! TOML run configuration.

use std::path::Path;

use orbitforge::minimize::{MinimizeOptions, DEFAULT_INTERIOR_NODES, DEFAULT_LOOP_MODES, DEFAULT_LOOP_SAMPLES};
use orbitforge::symmetry::{preset_group, PresetGroup, SymmetryGroup};
use orbitforge::{Configuration, MassSystem};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A run configuration. The problem is given by exactly one of the
/// tables `[loop]`, `[fixed-ends]` and `[p12]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct Config {
    pub problem: Problem,
    pub resolution: Resolution,
    pub solver: MinimizeOptions,
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Loop(LoopProblem),
    FixedEnds(FixedProblem),
    P12(P12Problem),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct RawConfig {
    #[serde(rename = "loop")]
    loop_problem: Option<LoopProblem>,
    fixed_ends: Option<FixedProblem>,
    p12: Option<P12Problem>,
    #[serde(default)]
    resolution: Resolution,
    #[serde(default)]
    solver: MinimizeOptions,
    #[serde(default)]
    thresholds: Thresholds,
}

impl TryFrom<RawConfig> for Config {
    type Error = String;

    fn try_from(raw: RawConfig) -> Result<Self, String> {
        let problem = match (raw.loop_problem, raw.fixed_ends, raw.p12) {
            (Some(p), None, None) => Problem::Loop(p),
            (None, Some(p), None) => Problem::FixedEnds(p),
            (None, None, Some(p)) => Problem::P12(p),
            _ => return Err("exactly one of the tables [loop], [fixed-ends] and [p12] is required".into()),
        };
        Ok(Self {
            problem,
            resolution: raw.resolution,
            solver: raw.solver,
            thresholds: raw.thresholds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopProblem {
    pub n: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Unit masses when absent.
    pub masses: Option<Vec<f64>>,
    pub period: f64,
    #[serde(default = "default_symmetry")]
    pub symmetry: String,
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// Size of the random initial coefficients.
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedProblem {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub masses: Vec<f64>,
    pub duration: f64,
    /// One row of coordinates per body.
    pub start: Vec<Vec<f64>>,
    pub end: Vec<Vec<f64>>,
    /// Size of the seeded bump added to the straight initial path.
    #[serde(default)]
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P12Problem {
    pub u: f64,
    pub period: f64,
    #[serde(default = "default_push")]
    pub push: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolution {
    pub modes: usize,
    pub samples: usize,
    pub interior: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Self {
            modes: DEFAULT_LOOP_MODES,
            samples: DEFAULT_LOOP_SAMPLES,
            interior: DEFAULT_INTERIOR_NODES,
        }
    }
}

/// Pass limits for `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Relative phase-space gap after integrating one period.
    pub closure: f64,
    /// Relative energy drift of the integration.
    pub energy_drift: f64,
    /// Relative energy variation along the loop itself.
    pub loop_energy: f64,
    /// Relative variation of the discrete energy of a node path, which is
    /// only second-order accurate in the node spacing.
    pub path_energy: f64,
    /// Lagrange–Jacobi residual relative to `2|U|`.
    pub lagrange_jacobi: f64,
    /// Symmetry defect relative to the size of the loop.
    pub invariance: f64,
    /// Smallest allowed ratio of closest approach to rms size.
    pub min_distance: f64,
    /// Discrete Euler–Lagrange residual relative to the largest acceleration.
    pub euler_lagrange: f64,
    pub integration_steps: usize,
    pub samples: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            closure: 1e-3,
            energy_drift: 1e-6,
            loop_energy: 1e-3,
            path_energy: 2e-2,
            lagrange_jacobi: 1e-4,
            invariance: 1e-8,
            min_distance: 1e-2,
            euler_lagrange: 1e-4,
            integration_steps: 20_000,
            samples: 512,
        }
    }
}

fn default_dim() -> usize {
    3
}
fn default_symmetry() -> String {
    "trivial".into()
}
fn default_starts() -> usize {
    8
}
fn default_amplitude() -> f64 {
    1.0
}
fn default_push() -> f64 {
    orbitforge::minimize::P12Options::default().push
}
fn default_noise() -> f64 {
    orbitforge::minimize::P12Options::default().noise
}

/// Everything `solve` needs, checked.
pub enum Prepared {
    Loop {
        ms: MassSystem,
        group: SymmetryGroup,
        preset: PresetGroup,
        problem: LoopProblem,
    },
    FixedEnds {
        ms: MassSystem,
        start: Configuration,
        end: Configuration,
        problem: FixedProblem,
    },
    P12 {
        ms: MassSystem,
        problem: P12Problem,
    },
}

impl Config {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Input(format!("{origin}: {e}")))?;
        cfg.prepare().map_err(|e| CliError::Input(format!("{origin}: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn prepare(&self) -> Result<Prepared, CliError> {
        self.solver.validate()?;
        let r = &self.resolution;
        if r.modes == 0 || r.samples == 0 || r.interior == 0 {
            return Err(CliError::Input(
                "resolution: modes, samples and interior must be positive".into(),
            ));
        }
        Ok(match &self.problem {
            Problem::Loop(p) => {
                positive("loop.period", p.period)?;
                if p.starts == 0 {
                    return Err(CliError::Input("loop.starts must be at least 1".into()));
                }
                let masses = p.masses.clone().unwrap_or_else(|| vec![1.0; p.n]);
                if masses.len() != p.n {
                    return Err(CliError::Input(format!(
                        "loop.masses has {} entries but n = {}",
                        masses.len(),
                        p.n
                    )));
                }
                let ms = MassSystem::new(p.dim, masses)?;
                let preset: PresetGroup = p.symmetry.parse()?;
                let group = preset_group(preset, p.n, p.dim)?;
                group.check_masses(&ms)?;
                Prepared::Loop {
                    ms,
                    group,
                    preset,
                    problem: p.clone(),
                }
            }
            Problem::FixedEnds(p) => {
                positive("fixed-ends.duration", p.duration)?;
                let ms = MassSystem::new(p.dim, p.masses.clone())?;
                let start = rows_config("fixed-ends.start", &p.start, &ms)?;
                let end = rows_config("fixed-ends.end", &p.end, &ms)?;
                Prepared::FixedEnds {
                    ms,
                    start,
                    end,
                    problem: p.clone(),
                }
            }
            Problem::P12(p) => {
                positive("p12.period", p.period)?;
                if !(0.0..=std::f64::consts::FRAC_PI_6).contains(&p.u) {
                    return Err(CliError::Input(format!("p12.u must lie in [0, π/6], got {}", p.u)));
                }
                Prepared::P12 {
                    ms: MassSystem::equal(3, 3)?,
                    problem: p.clone(),
                }
            }
        })
    }
}

fn positive(field: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!("{field} must be positive, got {v}")))
    }
}

fn rows_config(field: &str, rows: &[Vec<f64>], ms: &MassSystem) -> Result<Configuration, CliError> {
    if rows.len() != ms.n() || rows.iter().any(|r| r.len() != ms.dim()) {
        return Err(CliError::Input(format!(
            "{field} must have {} rows of {} coordinates",
            ms.n(),
            ms.dim()
        )));
    }
    Ok(Configuration::from_rows(rows)?)
}

/// Thresholds from a config file that may hold nothing else.
pub fn load_thresholds(path: &Path) -> Result<Thresholds, CliError> {
    #[derive(Deserialize)]
    struct Only {
        #[serde(default)]
        thresholds: Thresholds,
    }
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let only: Only = toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(only.thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EIGHT: &str = r#"
[loop]
n = 3
period = 12.0
symmetry = "d6_eight"

[resolution]
modes = 16
"#;

    #[test]
    fn eight_config_parses() {
        let cfg = Config::parse(EIGHT, "eight.toml").unwrap();
        assert_eq!(cfg.resolution.modes, 16);
        assert_eq!(cfg.resolution.samples, DEFAULT_LOOP_SAMPLES);
        assert!(matches!(cfg.prepare().unwrap(), Prepared::Loop { .. }));
    }

    #[test]
    fn four_body_preset_on_three_bodies_is_rejected() {
        let text = EIGHT.replace("d6_eight", "hip_hop");
        let err = Config::parse(&text, "bad.toml").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("hip_hop"), "{err}");
    }

    #[test]
    fn unknown_key_reports_its_line() {
        let text = EIGHT.replace("modes = 16", "modes = 16\nmodez = 3");
        let err = Config::parse(&text, "typo.toml").unwrap_err().to_string();
        assert!(err.contains("modez"), "{err}");
        assert!(err.contains("line 9"), "{err}");
    }

    #[test]
    fn fixed_end_rows_must_match_bodies() {
        let text = r#"
[fixed-ends]
dim = 2
masses = [1.0, 1.0]
duration = 1.0
start = [[1.0, 0.0], [-1.0, 0.0]]
end = [[0.0, 1.0]]
"#;
        let err = Config::parse(text, "f.toml").unwrap_err().to_string();
        assert!(err.contains("fixed-ends.end"), "{err}");
    }

    #[test]
    fn exactly_one_problem_table() {
        let both = format!("{EIGHT}\n[p12]\nu = 0.1\nperiod = 12.0\n");
        assert!(Config::parse(&both, "two.toml").is_err());
        assert!(Config::parse("[resolution]\nmodes = 4\n", "none.toml").is_err());
    }

    #[test]
    fn p12_angle_outside_sweep_range() {
        let text = "[p12]\nu = 0.9\nperiod = 12.0\n";
        assert!(Config::parse(text, "p.toml").is_err());
    }
}
