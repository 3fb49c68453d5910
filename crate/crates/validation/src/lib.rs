//! Tolerances of the acceptance suite in `tests/acceptance.rs`. Run it with
//! `cargo test -p orbitforge-validation --test acceptance`.

pub const GAMMA_CUBE_TOL: f64 = 1e-12;
pub const KEPLER_RESIDUAL_TOL: f64 = 1e-8;
pub const BLOW_UP_TOL: f64 = 1e-6;
pub const MARCHAL_REL_TOL: f64 = 0.10;
pub const DIRECTION_AVERAGE_TOL: f64 = 1e-3;
pub const DISK_QUADRATURE_TOL: f64 = 1e-3;
pub const A2_TOL: f64 = 1e-8;
pub const EIGHT_MIN_DISTANCE: f64 = 0.1;
pub const INVARIANCE_TOL: f64 = 1e-10;
pub const CLOSURE_TOL: f64 = 1e-3;
pub const PLANARITY_RATIO: f64 = 1e-2;
pub const HESSIAN_IDENTITY_TOL: f64 = 1e-3;
pub const SIGN_FLIP_TOL: f64 = 0.02;
pub const ENERGY_DRIFT_TOL: f64 = 1e-8;
pub const LAGRANGE_JACOBI_TOL: f64 = 1e-4;
pub const LOOP_ENERGY_TOL: f64 = 1e-3;
/// Multistart count of the loop minimizations.
pub const STARTS: usize = 8;
