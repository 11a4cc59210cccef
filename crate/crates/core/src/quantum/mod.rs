//! Registers of polarization qubits: pure states, density matrices, Pauli
//! strings and projectors.

mod density;
mod pauli;
mod projector;
mod state;

pub use density::{DensityMatrix, MAX_DENSITY_QUBITS};
pub use pauli::{Pauli, PauliString};
pub use projector::Projector;
pub use state::{bitstring, fidelity_pure, ket, Ket, PureState, Selection, DEFAULT_MAX_QUBITS};

/// Single-photon polarization kets.
pub mod kets {
    use super::Ket;
    use crate::C64;
    use core::f64::consts::FRAC_1_SQRT_2 as S;

    pub const H: Ket = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    pub const V: Ket = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
    pub const D: Ket = [C64::new(S, 0.0), C64::new(S, 0.0)];
    pub const A: Ket = [C64::new(S, 0.0), C64::new(-S, 0.0)];
    pub const R: Ket = [C64::new(S, 0.0), C64::new(0.0, S)];
    pub const L: Ket = [C64::new(S, 0.0), C64::new(0.0, -S)];
}
