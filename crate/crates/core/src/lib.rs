//! Simulation and analysis of an energy-time entangled photon pair whose
//! second photon is moved to a new wavelength by sum-frequency generation,
//! with Franson-type two-photon interference as the coherence witness.
//!
//! - [`quantum`]: exact state algebra of the transfer and the time-bin pair.
//! - [`optics`]: coherence lengths, validity conditions, budgets and rates.
//! - [`sim`]: seeded Monte Carlo of detector clicks.
//! - [`analysis`]: coincidence histograms, peak windows and fringe fits.
//! - [`experiment`]: sweep and histogram pipelines built from the above.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod events_io;
pub mod experiment;
pub mod optics;
pub mod quantum;
pub mod sim;

pub use num_complex::Complex64;
