//! Simulation core for a memoryless (all-photonic) quantum repeater built from
//! SPDC pair sources, a four-photon GHZ state and passive-choice measurement
//! (PCM) devices.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function over immutable values; the `aprsim` companion crate adds file
//! formats, parallel runners and the command line front end.
//!
//! Conventions used throughout:
//!
//! * a qubit is a photon's polarization, bit `0` is `|H>` and bit `1` is `|V>`;
//! * qubit `q` of a register is bit `q` of the amplitude index (little endian);
//! * `|D/A> = (|H> ± |V>)/√2`, `|R/L> = (|H> ± i|V>)/√2`.

#![no_std]

extern crate alloc;

pub mod error;
pub mod linalg;
pub mod network;
pub mod noise;
pub mod optics;
pub mod pcm;
pub mod quantum;
pub mod rng;
pub mod source;
pub mod tomography;

pub(crate) use error::layout_err;
pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Tolerance for exact algebraic identities.
pub const TOL_EXACT: f64 = 1e-12;
/// Tolerance for quantities accumulated over long pipelines.
pub const TOL_PIPELINE: f64 = 1e-10;
