//! Simulation and Fisher-information toolkit for entanglement-assisted
//! three-parameter sensing with a sensor qubit and an ancilla qubit.
//!
//! The crate is organized bottom-up: [`numerics`] supplies small dense complex
//! matrices, [`quantum_state`] density matrices and the Bell probe,
//! [`evolution`] the Hamiltonians and pulse sequences, [`readout`] the Bell
//! measurement with SPAM errors, [`fisher`] the information matrices and error
//! propagation, and [`experiments`] the orchestration of sweeps, scaling runs,
//! sensitivity maps and strategy comparisons.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod evolution;
pub mod experiments;
pub mod fisher;
pub mod numerics;
pub mod quantum_state;
pub mod readout;

pub use error::{Error, Result};
