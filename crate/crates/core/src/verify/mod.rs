//! Independent checks on minimizers: integration, energy, Hessian forms.

mod hessian;
mod integrate;
mod shape;

pub use hessian::{
    a2_hat, hessian_form, hessian_form_loop, lagrange_arc, lagrange_side, min_vertical_rayleigh, p12_bound,
    p12_hessian, p12_hessian_exact, p12_sign_flip, p12_vertical_variation, vertical_d2_normalized_potential,
    vertical_hessian_identity,
};
pub use integrate::{
    closure_error, cluster_energy, energy_series, integrate, loop_energy, relative_variation, Trajectory,
};
pub use shape::principal_extents;
