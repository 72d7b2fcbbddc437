//! Simulation and analysis core for polarization-encoded BB84 over an
//! underwater optical channel.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! algorithms: Stokes/Mueller algebra, Monte Carlo photon transport,
//! Mueller-matrix estimation from polarimetric counts, and the BB84
//! post-processing pipeline (sifting, CASCADE, Toeplitz privacy
//! amplification). File formats, the CLI and parallel drivers live in the
//! `aqua-qkd` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod bb84;
pub mod cascade;
pub mod channel;
pub mod characterization;
mod error;
pub mod linalg;
pub mod polarization;
pub mod privacy;
pub mod rng;
pub mod transport;

pub use error::Error;

/// Bit string used throughout the key pipeline.
pub type Bits = alloc::vec::Vec<bool>;
