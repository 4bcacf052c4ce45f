//! Simulation of a two-resonator circuit-QED single-photon source.
//!
//! A gap-tunable qubit couples longitudinally and transversally to two
//! capacitively coupled resonators. Rewritten in terms of the two normal
//! modes, one supermode acquires a quadratic coupling to the qubit, which
//! blockades the two-photon manifold. The crate builds the lab-frame and
//! effective Hamiltonians, solves the Lindblad master equation, and evaluates
//! the output-port photon statistics, s-parametrized quasiprobability
//! distributions, nonclassical depth, and inter-resonator entanglement.

pub mod circuit_model;
pub mod error;
pub mod experiment;
pub mod fockspace;
pub mod lindblad_dynamics;
pub mod phase_space;

pub use error::{Error, Result};
