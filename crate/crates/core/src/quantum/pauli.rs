use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::linalg::{Matrix, I, ONE, ZERO};
use crate::{Error, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix {
        let d = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        Matrix::from_rows(2, 2, d.to_vec())
    }

    /// Bit flip and phase picked up on `|b>`: `P|b> = phase |b ^ flip>`.
    fn action(self, b: usize) -> (usize, C64) {
        match (self, b) {
            (Pauli::I, _) => (0, ONE),
            (Pauli::X, _) => (1, ONE),
            (Pauli::Y, 0) => (1, I),
            (Pauli::Y, _) => (1, -I),
            (Pauli::Z, 0) => (0, ONE),
            (Pauli::Z, _) => (0, -ONE),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_letter(c: char) -> Option<Pauli> {
        match c.to_ascii_uppercase() {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// One Pauli letter per qubit, qubit 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn new(letters: Vec<Pauli>) -> Self {
        PauliString { letters }
    }

    pub fn identity(n: usize) -> Self {
        PauliString {
            letters: alloc::vec![Pauli::I; n],
        }
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// Dense operator; qubit 0 acts on the low index bit.
    pub fn matrix(&self) -> Matrix {
        let n = self.letters.len();
        Matrix::from_fn(1 << n, 1 << n, |r, c| {
            let (flip, phase) = self.action(c);
            if r == c ^ flip {
                phase
            } else {
                ZERO
            }
        })
    }

    /// `P|i> = phase |i ^ flip>`.
    pub(crate) fn action(&self, i: usize) -> (usize, C64) {
        let mut flip = 0;
        let mut phase = ONE;
        for (q, p) in self.letters.iter().enumerate() {
            let (f, ph) = p.action(i >> q & 1);
            flip |= f << q;
            phase *= ph;
        }
        (flip, phase)
    }

    /// Every string of length `n`, qubit 0 varying fastest.
    pub fn all(n: usize) -> Vec<PauliString> {
        (0..1usize << (2 * n))
            .map(|k| PauliString {
                letters: (0..n).map(|q| Pauli::ALL[k >> (2 * q) & 3]).collect(),
            })
            .collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.letters {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        s.chars()
            .map(|c| Pauli::from_letter(c).ok_or_else(|| Error::Invalid(alloc::format!("not a Pauli letter: {c:?}"))))
            .collect::<Result<Vec<_>, _>>()
            .map(PauliString::new)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_matches_kron_order() {
        let xz: PauliString = "XZ".parse().unwrap();
        // qubit 1 is the high bit, so the dense form is Z ⊗ X
        let expect = Pauli::Z.matrix().kron(&Pauli::X.matrix());
        assert!(xz.matrix().distance(&expect) < 1e-15);
    }

    #[test]
    fn paulis_are_unitary_and_hermitian() {
        for p in Pauli::ALL {
            let m = p.matrix();
            assert!(m.unitarity_defect() < 1e-15);
            assert!(m.hermiticity_defect() < 1e-15);
        }
        assert_eq!(PauliString::all(2).len(), 16);
        assert!("XQ".parse::<PauliString>().is_err());
    }
}
