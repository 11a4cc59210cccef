use alloc::vec::Vec;

use super::state::{Ket, PureState};
use crate::linalg::Matrix;
use crate::{Error, Result, C64};

/// A post-selection. `Local` is a product of single-qubit rank-one
/// projectors; `Operator` is an explicit projector on the listed qubits
/// (first listed qubit = low bit of the operator index).
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    Local(Vec<(usize, Ket)>),
    Operator { qubits: Vec<usize>, matrix: Matrix },
}

impl Projector {
    pub fn local(parts: Vec<(usize, Ket)>) -> Self {
        Projector::Local(parts)
    }

    /// Projector onto `span{|HH>, |VV>}` of two qubits.
    pub fn parity_even(a: usize, b: usize) -> Self {
        Projector::Operator {
            qubits: alloc::vec![a, b],
            matrix: Matrix::from_diag(&[1.0, 0.0, 0.0, 1.0]),
        }
    }

    /// Unnormalized projected amplitudes.
    pub(crate) fn apply_to(&self, state: &PureState) -> Result<Vec<C64>> {
        match self {
            Projector::Local(parts) => {
                let mut out = state.clone();
                for (q, k) in parts {
                    if *q >= state.num_qubits() {
                        return Err(Error::QubitIndex {
                            index: *q,
                            num_qubits: state.num_qubits(),
                        });
                    }
                    let unit = PureState::from_ket(*k);
                    out.apply_single_unchecked(*q, &Matrix::outer(unit.amplitudes()));
                }
                Ok(out.into_amplitudes())
            }
            Projector::Operator { qubits, matrix } => Ok(state.apply_operator(qubits, matrix)?.into_amplitudes()),
        }
    }

    /// Dense form on an `n`-qubit register.
    pub fn materialize(&self, n: usize) -> Result<Matrix> {
        let dim = 1usize << n;
        let mut out = Matrix::zeros(dim, dim);
        for c in 0..dim {
            let col = self.apply_to(&PureState::basis(n, c)?)?;
            for (r, v) in col.into_iter().enumerate() {
                out[(r, c)] = v;
            }
        }
        Ok(out)
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Projector::Local(parts) => parts.iter().map(|(q, _)| *q).collect(),
            Projector::Operator { qubits, .. } => qubits.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::kets;

    #[test]
    fn projectors_are_idempotent() {
        for p in [
            Projector::local(alloc::vec![(0, kets::D), (2, kets::R)]),
            Projector::parity_even(1, 2),
        ] {
            let m = p.materialize(3).unwrap();
            assert!(m.matmul(&m).distance(&m) < 1e-12);
            assert!(m.hermiticity_defect() < 1e-12);
        }
    }
}
