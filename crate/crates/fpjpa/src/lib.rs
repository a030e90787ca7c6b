//! Modeling, simulation and fitting toolkit for flux-driven Josephson
//! parametric amplifiers whose input-output waveguide contains a weakly
//! reflecting element, forming an unintended Fabry-Perot cavity.
//!
//! The crate covers the full workflow:
//!
//! - [`circuit`]: SQUID-array circuit model with finite loop inductance,
//!   from physical elements to Hamiltonian-level parameters.
//! - [`design`]: inverse synthesis of circuit values from target
//!   dimensionless parameters.
//! - [`interference`]: closed-form reflection, gain and reference spectra
//!   of the JPA dressed by the Fabry-Perot environment.
//! - [`noise`]: input-output coefficients, the effective-amplifier
//!   decomposition, added-noise prediction and the SNR-based calibration.
//! - [`metrics`]: bandwidth, gain-bandwidth exponent, ripple visibility
//!   and saturation scaling.
//! - [`fitting`]: least-squares parameter extraction from measured
//!   spectra, including the shared-environment multi-power gain fit.
//! - [`oracle`]: independent brute-force references (round-trip series,
//!   numeric matrix solve, transcendental SQUID solve, time-domain delay
//!   integration) validating every closed form.

pub mod circuit;
pub mod constants;
pub mod design;
pub mod error;
pub mod fitting;
pub mod interference;
pub mod metrics;
pub mod noise;
pub mod oracle;
pub mod spectrum;

pub use error::{Error, Result};
