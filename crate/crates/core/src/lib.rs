//! Simulation, estimation and property checks for metadynamics.
//!
//! * [`torus`]: adiabatic metadynamics on the circle in its Fourier form.
//! * [`pdmp`]: exact event-driven simulation of the discrete self-repelling
//!   walk and its ergodic estimators.
//! * [`sand`]: computational sand, separated configurations and plateaus.
//! * [`ray_knight`]: auxiliary η processes and local-time profiles.
//! * [`nonadiabatic`]: the 2D Gaussian-deposition model and the binned and
//!   three-state discrete models.
//! * [`stats`]: KS and chi-square tests, quadrature, batch means.

pub mod error;
pub mod hazard;
pub mod nonadiabatic;
pub mod pdmp;
pub mod ray_knight;
pub mod rng;
pub mod sand;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};
pub use hazard::Direction;
pub use rng::{derive_stream, run_replicas, Stream};
