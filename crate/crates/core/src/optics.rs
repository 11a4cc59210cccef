//! Jones-calculus elements and the post-selected two-photon gates built from
//! them.
//!
//! Phase conventions: `HWP(θ) = [[cos2θ, sin2θ], [sin2θ, -cos2θ]]` and
//! `QWP(θ) = [[cos²θ + i sin²θ, (1-i) sinθ cosθ], [(1-i) sinθ cosθ, sin²θ + i cos²θ]]`,
//! so `QWP(45°)|H>` is proportional to `|L>`.

use crate::linalg::Matrix;
use crate::quantum::{PureState, Selection};
use crate::{Error, Result, C64};
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PlateKind {
    Half,
    Quarter,
}

/// A wave plate; `angle` is the fast axis from horizontal, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WavePlate {
    pub kind: PlateKind,
    pub angle: f64,
}

impl WavePlate {
    pub fn half_deg(deg: f64) -> Self {
        WavePlate {
            kind: PlateKind::Half,
            angle: deg * core::f64::consts::PI / 180.0,
        }
    }

    pub fn quarter_deg(deg: f64) -> Self {
        WavePlate {
            kind: PlateKind::Quarter,
            angle: deg * core::f64::consts::PI / 180.0,
        }
    }

    pub fn matrix(&self) -> Matrix {
        waveplate_matrix(self)
    }
}

pub fn waveplate_matrix(wp: &WavePlate) -> Matrix {
    let (s, c) = (libm::sin(wp.angle), libm::cos(wp.angle));
    let d = match wp.kind {
        PlateKind::Half => {
            let (s2, c2) = (libm::sin(2.0 * wp.angle), libm::cos(2.0 * wp.angle));
            [
                C64::new(c2, 0.0),
                C64::new(s2, 0.0),
                C64::new(s2, 0.0),
                C64::new(-c2, 0.0),
            ]
        }
        PlateKind::Quarter => {
            let off = C64::new(s * c, -s * c);
            [C64::new(c * c, s * s), off, off, C64::new(s * s, c * c)]
        }
    };
    Matrix::from_rows(2, 2, d.to_vec())
}

/// Half-wave plate at 22.5°, the Hadamard-like rotation `H -> D`, `V -> A`.
pub fn hwp_22_5() -> Matrix {
    WavePlate::half_deg(22.5).matrix()
}

/// Two spatial modes overlapped on a polarizing beam splitter, seen through
/// coincidence post-selection (one photon per output port).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PbsGate {
    pub qubit_a: usize,
    pub qubit_b: usize,
}

/// Keeps the `|HH>`, `|VV>` components of the two qubits.
pub fn pbs_postselect(state: &PureState, gate: PbsGate) -> Result<Selection> {
    check_pair(state, gate.qubit_a, gate.qubit_b)?;
    state.project(&crate::quantum::Projector::parity_even(gate.qubit_a, gate.qubit_b))
}

/// A PBS between four 22.5° half-wave plates. `qubit_a` enters the left
/// input port, `qubit_b` the right one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CpbsDevice {
    pub qubit_a: usize,
    pub qubit_b: usize,
}

/// Detector-level result of a CPBS. `Coinc` labels name the polarization
/// found in the left and right output ports; `Both*` means both photons left
/// through the same port (they bunch onto one detector).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum BranchLabel {
    CoincHH,
    CoincHV,
    CoincVH,
    CoincVV,
    BothLeft,
    BothRight,
}

impl BranchLabel {
    pub const ALL: [BranchLabel; 6] = [
        BranchLabel::CoincHH,
        BranchLabel::CoincHV,
        BranchLabel::CoincVH,
        BranchLabel::CoincVV,
        BranchLabel::BothLeft,
        BranchLabel::BothRight,
    ];

    /// Bra applied to the two input qubits, first qubit on the low bit.
    pub fn kraus(self) -> [C64; 4] {
        let h = 0.5;
        let r =
            |a: f64, b: f64, c: f64, d: f64| [C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0), C64::new(d, 0.0)];
        match self {
            // <Φ+|/√2
            BranchLabel::CoincHH | BranchLabel::CoincVV => r(h, 0.0, 0.0, h),
            // <Ψ+|/√2
            BranchLabel::CoincHV | BranchLabel::CoincVH => r(0.0, h, h, 0.0),
            // <D|_a <A|_b
            BranchLabel::BothLeft => r(h, h, -h, -h),
            // <A|_a <D|_b
            BranchLabel::BothRight => r(h, -h, h, -h),
        }
    }

    /// Detector bits (0 = left H, 1 = left V, 2 = right H, 3 = right V). A
    /// bunched pair is reported on the H detector of its port.
    pub fn clicks(self) -> u8 {
        match self {
            BranchLabel::CoincHH => 0b0101,
            BranchLabel::CoincHV => 0b1001,
            BranchLabel::CoincVH => 0b0110,
            BranchLabel::CoincVV => 0b1010,
            BranchLabel::BothLeft => 0b0001,
            BranchLabel::BothRight => 0b0100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpbsBranch {
    pub label: BranchLabel,
    /// State of the remaining qubits; both CPBS qubits are consumed.
    pub outcome: Selection,
    pub probability: f64,
}

/// All six detector-level branches of a CPBS acting on two qubits of
/// `state`. The measured qubits are removed from the register.
pub fn cpbs_apply(state: &PureState, dev: CpbsDevice) -> Result<Vec<CpbsBranch>> {
    check_pair(state, dev.qubit_a, dev.qubit_b)?;
    BranchLabel::ALL
        .iter()
        .map(|&label| {
            let outcome = state.project_out(&[dev.qubit_a, dev.qubit_b], &label.kraus())?;
            Ok(CpbsBranch {
                label,
                probability: outcome.probability(),
                outcome,
            })
        })
        .collect()
}

fn check_pair(state: &PureState, a: usize, b: usize) -> Result<()> {
    let n = state.num_qubits();
    for q in [a, b] {
        if q >= n {
            return Err(Error::QubitIndex {
                index: q,
                num_qubits: n,
            });
        }
    }
    if a == b {
        return Err(Error::Invalid("gate qubits must differ".into()));
    }
    Ok(())
}
