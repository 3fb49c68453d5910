use thiserror::Error;

/// Errors produced by the orbit machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two bodies coincide (up to the collision threshold) where the potential
    /// has to be evaluated.
    #[error("collision between bodies {i} and {j} (distance {distance:e}){}", fmt_time(.time))]
    Collision {
        i: usize,
        j: usize,
        distance: f64,
        time: Option<f64>,
    },

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("time {t} outside of the path domain [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("grid error: {0}")]
    Grid(String),

    /// The integrator came closer to a collision than it can resolve.
    #[error("close approach at t = {time} (distance {distance:e})")]
    CloseApproach { time: f64, distance: f64 },

    /// The minimizer could not find an admissible step above the soft
    /// collision floor.
    #[error("collision floor hit at iteration {iteration} (min distance {distance:e} < {floor:e})")]
    CollisionFloor {
        iteration: usize,
        distance: f64,
        floor: f64,
    },
}

fn fmt_time(t: &Option<f64>) -> String {
    match t {
        Some(t) => format!(" at t = {t}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn bad(msg: impl Into<String>) -> Self {
        Error::BadParams(msg.into())
    }

    /// Attach a sample time to a collision error.
    pub fn at_time(self, t: f64) -> Self {
        match self {
            Error::Collision { i, j, distance, .. } => Error::Collision {
                i,
                j,
                distance,
                time: Some(t),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
