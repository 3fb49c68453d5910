//! Action-minimizing solutions of the Newtonian n-body problem.

pub mod dynamics;
pub mod error;
pub mod kepler;
pub mod minimize;
pub mod path;
pub mod quadrature;
pub mod symmetry;
pub mod verify;

pub use dynamics::{Configuration, InvariantSet, MassSystem, PhaseState, Preset};
pub use error::{Error, Result};
pub use path::{FourierLoop, NodePath, Path, QuadratureSpec};
