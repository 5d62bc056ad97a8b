//! Simulation toolkit for qubit-mediated unconventional optomechanics.
//!
//! A transmon-like qubit couples longitudinally to a microwave cavity and
//! transversely to a surface-acoustic-wave phonon mode. Eliminating the
//! qubit leaves a photon-modulated phonon frequency, which this crate
//! studies through exact diagonalization, Lindblad dynamics, output-field
//! statistics and parametric-amplifier gain.
//!
//! All frequencies and rates are angular (rad/s); times are in seconds.

pub mod dynamics;
pub mod effective;
pub mod error;
pub mod hamiltonians;
pub mod hilbert;
pub mod mpa;
pub mod parallel;
pub mod sparse;
pub mod spectra;

pub use error::{Result, UomError};
