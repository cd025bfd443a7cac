//! Metadynamics when the biased variable is not an autonomous Markov
//! process.
//!
//! * [`two_d`]: a 2D overdamped Langevin dynamics biased along `x` only, by
//!   Gaussians deposited on a periodic mesh.
//! * [`binned`]: the discrete walk with bias shared across bins of sites.
//! * [`simp`]: a three-state caricature of the two-bin case whose invariant
//!   law is explicit.

pub mod binned;
pub mod simp;
pub mod two_d;

pub use binned::{
    binned_simulate, four_state_model, BinnedModel, BinnedState, FourStateSummary,
};
pub use simp::{
    simp_invariant_density, simp_mean_quadrature, simp_simulate, SimpDensity, SimpParams,
    SimpPhase, SimpState, SimpSummary,
};
pub use two_d::{grad_v, minus_free_energy_slope, potential_v, run_2d, BiasMesh, TwoDConfig, TwoDResult, TwoDState};
