//! Multiview body fitting: robust reprojection and bone-orientation terms,
//! pose priors, a staged per-frame solve and windowed refinement with
//! temporal smoothness.

mod batch;
mod config;
pub mod energy;
mod frame;
mod loss;
mod result;
mod solver;

pub use batch::{energy_window_with_gradient, fit_batch};
pub use config::EnergyConfig;
pub use energy::{
    bone_residual, energy_bones, energy_bones_with_gradient, energy_frame_with_gradient, energy_joints,
    energy_joints_with_gradient, energy_priors, energy_priors_with_gradient, smoothness_energies, EnergyBreakdown,
    FrameProblem,
};
pub use frame::{fit_frame, Weighting};
pub use loss::gm_loss;
pub use result::FitResult;
