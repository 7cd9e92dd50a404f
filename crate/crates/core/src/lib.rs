//! Pulse-level simulation of flux-tunable transmon devices.
//!
//! The crate solves the time-dependent Schrödinger equation for small
//! superconducting circuits (fixed-frequency and flux-tunable transmons,
//! LC resonators, two-level systems) with second- and fourth-order
//! product-formula propagators, executes compiled gate programs on the
//! resulting device models and reports gate-error quantifiers (diamond
//! distance bounds, average infidelity, leakage and statistical distance).
//!
//! Two device models are supported:
//!
//! * the *circuit* model, propagated in the bare transmon basis obtained by
//!   truncating the charge-basis circuit Hamiltonian ([`circuit`]), and
//! * the *effective* model, an anharmonic-oscillator approximation
//!   propagated in the harmonic basis ([`effective`]), with switchable
//!   non-adiabatic drive terms, time-dependent interaction strengths and
//!   spectrum parametrisations.
//!
//! Everything is built on three mixed-radix state-vector kernels
//! ([`tensor`]) whose cost scales linearly with the Hilbert-space
//! dimension. Dense reference implementations used for cross-checking live
//! in [`oracle`].
//!
//! Units: configuration frequencies are plain frequencies `ν = ω/2π` in
//! GHz, as printed in device data sheets; internal Hamiltonians are angular
//! (rad/ns), time is in ns and `ħ = 1`.

pub mod calibrate;
pub mod circuit;
pub mod device;
pub mod effective;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod program;
pub mod pulse;
pub mod schedule;
pub mod spectrum;
pub mod subsystem;
pub mod tensor;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use tensor::{IndexMap, StateVector, SubspaceMatrix};

/// Conversion factor between table frequencies (GHz) and internal angular
/// frequencies (rad/ns).
pub const TWO_PI: f64 = std::f64::consts::TAU;
