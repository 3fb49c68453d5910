//! JSON orbit files.

use std::path::Path as FsPath;

use orbitforge::minimize::MinimizeOptions;
use orbitforge::{Configuration, FourierLoop, MassSystem, NodePath};
use serde::{Deserialize, Serialize};

use crate::config::Resolution;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitFile {
    pub schema_version: u32,
    pub dim: usize,
    pub masses: Vec<f64>,
    #[serde(flatten)]
    pub payload: Payload,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetry: Option<SymmetryTag>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "kebab-case")]
pub enum Payload {
    /// Coefficients per body and axis: constant, cosines, sines.
    Fourier {
        period: f64,
        modes: usize,
        coefficients: Vec<f64>,
    },
    /// Node positions, one row per body, from `t = 0` to `t = duration`.
    Nodes { duration: f64, nodes: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryTag {
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub tool_version: String,
    pub solver: MinimizeOptions,
    pub resolution: Resolution,
}

impl Provenance {
    pub fn new(solver: &MinimizeOptions, resolution: &Resolution) -> Self {
        Self {
            seed: solver.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            solver: solver.clone(),
            resolution: resolution.clone(),
        }
    }
}

/// What an orbit file describes, rebuilt as library objects.
pub enum Orbit {
    Loop(FourierLoop),
    Nodes(NodePath),
}

impl OrbitFile {
    pub fn from_loop(ms: &MassSystem, lp: &FourierLoop, symmetry: Option<SymmetryTag>, provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            dim: ms.dim(),
            masses: ms.masses().to_vec(),
            payload: Payload::Fourier {
                period: lp.period(),
                modes: lp.modes(),
                coefficients: lp.coeffs().to_vec(),
            },
            symmetry,
            provenance,
        }
    }

    pub fn from_nodes(ms: &MassSystem, path: &NodePath, symmetry: Option<SymmetryTag>, provenance: Provenance) -> Self {
        let nodes = (0..path.node_count())
            .map(|k| path.node(k).chunks(path.dim()).map(<[f64]>::to_vec).collect())
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            dim: ms.dim(),
            masses: ms.masses().to_vec(),
            payload: Payload::Nodes {
                duration: path.duration(),
                nodes,
            },
            symmetry,
            provenance,
        }
    }

    pub fn mass_system(&self) -> Result<MassSystem, CliError> {
        Ok(MassSystem::new(self.dim, self.masses.clone())?)
    }

    pub fn orbit(&self) -> Result<Orbit, CliError> {
        let n = self.masses.len();
        Ok(match &self.payload {
            Payload::Fourier {
                period,
                modes,
                coefficients,
            } => Orbit::Loop(FourierLoop::new(n, self.dim, *period, *modes, coefficients.clone())?),
            Payload::Nodes { duration, nodes } => {
                let mut flat = Vec::with_capacity(nodes.len() * n * self.dim);
                for (k, node) in nodes.iter().enumerate() {
                    let cfg = Configuration::from_rows(node).map_err(|e| CliError::Input(format!("node {k}: {e}")))?;
                    if cfg.n() != n || cfg.dim() != self.dim {
                        return Err(CliError::Input(format!(
                            "node {k} has {} bodies in dimension {}, expected {n} in {}",
                            cfg.n(),
                            cfg.dim(),
                            self.dim
                        )));
                    }
                    flat.extend_from_slice(cfg.as_slice());
                }
                Orbit::Nodes(NodePath::from_nodes(n, self.dim, flat, *duration)?)
            }
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("orbit files always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("{origin}: {e}")))?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(CliError::Input(format!(
                    "{origin}: schema version {v} is not supported (expected {SCHEMA_VERSION})"
                )))
            }
            None => return Err(CliError::Input(format!("{origin}: missing schema_version"))),
        }
        let file: Self = serde_json::from_value(value).map_err(|e| CliError::Input(format!("{origin}: {e}")))?;
        file.mass_system()?;
        file.orbit()?;
        Ok(file)
    }

    pub fn read(path: &FsPath) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &FsPath) -> Result<(), CliError> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn provenance() -> Provenance {
        Provenance::new(&MinimizeOptions::default(), &Resolution::default())
    }

    proptest! {
        #[test]
        fn fourier_round_trip_is_bit_exact(coeffs in prop::collection::vec(-1e3f64..1e3, 2 * 2 * 7)) {
            let ms = MassSystem::equal(2, 2).unwrap();
            let lp = FourierLoop::new(2, 2, 6.5, 3, coeffs).unwrap();
            let file = OrbitFile::from_loop(&ms, &lp, None, provenance());
            let back = OrbitFile::from_json(&file.to_json(), "mem").unwrap();
            let Orbit::Loop(again) = back.orbit().unwrap() else { panic!("wrong representation") };
            let same = again.coeffs().iter().zip(lp.coeffs()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
            prop_assert_eq!(back, file);
        }

        #[test]
        fn node_round_trip_is_bit_exact(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 4 * 2 * 3)) {
            let ms = MassSystem::new(3, vec![1.0, 2.0]).unwrap();
            let path = NodePath::from_nodes(2, 3, vals, 0.75).unwrap();
            let file = OrbitFile::from_nodes(&ms, &path, Some(SymmetryTag { preset: "p12".into(), u: Some(0.1) }), provenance());
            let back = OrbitFile::from_json(&file.to_json(), "mem").unwrap();
            let Orbit::Nodes(again) = back.orbit().unwrap() else { panic!("wrong representation") };
            let same = again.nodes().iter().zip(path.nodes()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }
    }

    #[test]
    fn future_schema_is_rejected() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let lp = FourierLoop::zeros(2, 2, 1.0, 1).unwrap();
        let text = OrbitFile::from_loop(&ms, &lp, None, provenance())
            .to_json()
            .replace("\"schema_version\": 1", "\"schema_version\": 2");
        let err = OrbitFile::from_json(&text, "x.json").unwrap_err();
        assert!(err.to_string().contains("schema version 2"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn coefficient_count_is_checked() {
        let ms = MassSystem::equal(2, 2).unwrap();
        let lp = FourierLoop::zeros(2, 2, 1.0, 1).unwrap();
        let mut file = OrbitFile::from_loop(&ms, &lp, None, provenance());
        if let Payload::Fourier { coefficients, .. } = &mut file.payload {
            coefficients.pop();
        }
        assert!(OrbitFile::from_json(&file.to_json(), "x.json").is_err());
    }
}
