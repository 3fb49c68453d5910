//! Command-line front end: configuration files, orbit files, reports and
//! plots.

pub mod commands;
pub mod config;
pub mod orbit;
pub mod plot;

use std::path::Path;

use thiserror::Error;

pub use config::{Config, Thresholds};
pub use orbit::{OrbitFile, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] orbitforge::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// 2 for bad input, 1 for a numerical failure.
    pub fn exit_code(&self) -> u8 {
        use orbitforge::Error as E;
        match self {
            Self::Core(E::Collision { .. } | E::CloseApproach { .. } | E::CollisionFloor { .. }) => 1,
            _ => 2,
        }
    }
}

/// How a command ended when it did not error out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Did not converge, or a check failed.
    Failure,
}

impl Status {
    pub fn from_ok(ok: bool) -> Self {
        if ok {
            Self::Success
        } else {
            Self::Failure
        }
    }

    pub fn exit_code(self) -> u8 {
        match self {
            Self::Success => 0,
            Self::Failure => 1,
        }
    }
}

/// Caps the rayon pool from `ORBITFORGE_THREADS`, if set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ORBITFORGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("ORBITFORGE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Input(format!("cannot size the thread pool: {e}")))
}
