use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_1_SQRT_2;

use super::density::DensityMatrix;
use super::projector::Projector;
use crate::linalg::{Matrix, ONE, ZERO};
use crate::{Error, Result, C64, TOL_EXACT};

/// Hard cap on dense register size.
pub const DEFAULT_MAX_QUBITS: usize = 14;

/// Single-qubit ket `(<H|ψ>, <V|ψ>)`.
pub type Ket = [C64; 2];

pub const fn ket(h: C64, v: C64) -> Ket {
    [h, v]
}

/// Renders `index` with qubit 0 first, `0` for H and `1` for V.
pub fn bitstring(index: usize, num_qubits: usize) -> String {
    (0..num_qubits)
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Dense state vector over `num_qubits` polarization qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    num_qubits: usize,
    amps: Vec<C64>,
}

/// Result of a post-selection. Zero-probability branches come back as
/// `Empty` instead of an error, because exhaustive branch enumeration hits
/// them all the time.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Kept { state: PureState, probability: f64 },
    Empty,
}

impl Selection {
    pub fn probability(&self) -> f64 {
        match self {
            Selection::Kept { probability, .. } => *probability,
            Selection::Empty => 0.0,
        }
    }

    pub fn state(&self) -> Option<&PureState> {
        match self {
            Selection::Kept { state, .. } => Some(state),
            Selection::Empty => None,
        }
    }

    pub fn into_state(self) -> Option<PureState> {
        match self {
            Selection::Kept { state, .. } => Some(state),
            Selection::Empty => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Selection::Empty)
    }

    /// Renormalizes an unnormalized vector into a selection.
    pub(crate) fn from_unnormalized(num_qubits: usize, amps: Vec<C64>) -> Selection {
        let p: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if p <= 1e-28 {
            return Selection::Empty;
        }
        let s = 1.0 / libm::sqrt(p);
        Selection::Kept {
            state: PureState {
                num_qubits,
                amps: amps.into_iter().map(|a| a * s).collect(),
            },
            probability: p.min(1.0),
        }
    }
}

impl PureState {
    /// Computational basis state; bit `q` of `bits` is the value of qubit `q`.
    pub fn basis(num_qubits: usize, bits: usize) -> Result<Self> {
        check_capacity(num_qubits, DEFAULT_MAX_QUBITS)?;
        let mut amps = vec![ZERO; 1 << num_qubits];
        amps[bits & ((1 << num_qubits) - 1)] = ONE;
        Ok(PureState { num_qubits, amps })
    }

    pub fn from_ket(k: Ket) -> Self {
        let mut s = PureState {
            num_qubits: 1,
            amps: k.to_vec(),
        };
        s.normalize();
        s
    }

    /// Product state, one ket per qubit.
    pub fn product(kets: &[Ket]) -> Result<Self> {
        check_capacity(kets.len(), DEFAULT_MAX_QUBITS)?;
        let n = kets.len();
        let amps = (0..1usize << n)
            .map(|i| kets.iter().enumerate().map(|(q, k)| k[i >> q & 1]).product())
            .collect();
        let mut s = PureState { num_qubits: n, amps };
        s.normalize();
        Ok(s)
    }

    /// Wraps an amplitude vector; its length must be a power of two. The
    /// vector is normalized.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Invalid(alloc::format!(
                "amplitude vector length {len} is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        check_capacity(n, DEFAULT_MAX_QUBITS)?;
        let mut s = PureState { num_qubits: n, amps };
        if s.norm_sqr() <= 1e-28 {
            return Err(Error::Invalid("zero amplitude vector".into()));
        }
        s.normalize();
        Ok(s)
    }

    /// `(|H...H> + sign |V...V>)/√2` on `n` qubits.
    pub fn ghz(n: usize, sign: f64) -> Result<Self> {
        check_capacity(n, DEFAULT_MAX_QUBITS)?;
        if n == 0 {
            return Err(Error::Invalid("GHZ state needs at least one qubit".into()));
        }
        let mut amps = vec![ZERO; 1 << n];
        amps[0] = C64::new(FRAC_1_SQRT_2, 0.0);
        amps[(1 << n) - 1] += C64::new(sign * FRAC_1_SQRT_2, 0.0);
        Ok(PureState { num_qubits: n, amps })
    }

    pub fn phi_plus() -> Self {
        bell(0b00, 0b11, 1.0)
    }

    pub fn phi_minus() -> Self {
        bell(0b00, 0b11, -1.0)
    }

    pub fn psi_plus() -> Self {
        bell(0b01, 0b10, 1.0)
    }

    pub fn psi_minus() -> Self {
        bell(0b01, 0b10, -1.0)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn amplitude(&self, index: usize) -> C64 {
        self.amps[index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr();
        if n > 0.0 {
            let s = 1.0 / libm::sqrt(n);
            for a in &mut self.amps {
                *a *= s;
            }
        }
    }

    pub fn inner(&self, other: &PureState) -> Result<C64> {
        self.check_same_dim(other)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Kronecker product, `self` on the low qubits.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        self.tensor_capped(other, DEFAULT_MAX_QUBITS)
    }

    pub fn tensor_capped(&self, other: &PureState, max_qubits: usize) -> Result<PureState> {
        let n = self.num_qubits + other.num_qubits;
        check_capacity(n, max_qubits)?;
        let mut amps = Vec::with_capacity(1 << n);
        for b in &other.amps {
            for a in &self.amps {
                amps.push(a * b);
            }
        }
        Ok(PureState { num_qubits: n, amps })
    }

    /// Applies a 2×2 unitary to qubit `q`.
    pub fn apply_single(&self, q: usize, u: &Matrix) -> Result<PureState> {
        self.check_qubit(q)?;
        check_unitary(u, 2)?;
        let mut out = self.clone();
        out.apply_single_unchecked(q, u);
        Ok(out)
    }

    pub(crate) fn apply_single_unchecked(&mut self, q: usize, u: &Matrix) {
        let bit = 1usize << q;
        let (u00, u01, u10, u11) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let a0 = self.amps[i];
                let a1 = self.amps[i | bit];
                self.amps[i] = u00 * a0 + u01 * a1;
                self.amps[i | bit] = u10 * a0 + u11 * a1;
            }
        }
    }

    /// Applies a `2^k × 2^k` operator to the listed qubits; the first listed
    /// qubit is the low bit of the operator index. The operator need not be
    /// unitary; no renormalization happens.
    pub fn apply_operator(&self, qubits: &[usize], op: &Matrix) -> Result<PureState> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        check_distinct(qubits)?;
        let k = qubits.len();
        if op.rows() != 1 << k || op.cols() != 1 << k {
            return Err(Error::Dimension {
                expected: 1 << k,
                found: op.rows(),
            });
        }
        let mask: usize = qubits.iter().map(|&q| 1usize << q).sum();
        let mut out = vec![ZERO; self.amps.len()];
        for base in 0..self.amps.len() {
            if base & mask != 0 {
                continue;
            }
            let local: Vec<C64> = (0..1usize << k).map(|j| self.amps[base | scatter(j, qubits)]).collect();
            let mapped = op.apply(&local);
            for (j, v) in mapped.into_iter().enumerate() {
                out[base | scatter(j, qubits)] = v;
            }
        }
        Ok(PureState {
            num_qubits: self.num_qubits,
            amps: out,
        })
    }

    /// Post-selects onto `proj`, keeping the register size.
    pub fn project(&self, proj: &Projector) -> Result<Selection> {
        let amps = proj.apply_to(self)?;
        Ok(Selection::from_unnormalized(self.num_qubits, amps))
    }

    /// Projects the listed qubits onto `bra` (a `2^k` vector, first listed
    /// qubit = low bit) and removes them from the register.
    pub fn project_out(&self, qubits: &[usize], target: &[C64]) -> Result<Selection> {
        for &q in qubits {
            self.check_qubit(q)?;
        }
        check_distinct(qubits)?;
        let k = qubits.len();
        if target.len() != 1 << k {
            return Err(Error::Dimension {
                expected: 1 << k,
                found: target.len(),
            });
        }
        let rest: Vec<usize> = (0..self.num_qubits).filter(|q| !qubits.contains(q)).collect();
        let m = rest.len();
        let mut amps = vec![ZERO; 1 << m];
        for (r, slot) in amps.iter_mut().enumerate() {
            let base = scatter(r, &rest);
            *slot = target
                .iter()
                .enumerate()
                .map(|(j, t)| t.conj() * self.amps[base | scatter(j, qubits)])
                .sum();
        }
        Ok(Selection::from_unnormalized(m, amps))
    }

    /// Reorders qubits: qubit `q` of the result is qubit `order[q]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<PureState> {
        if order.len() != self.num_qubits {
            return Err(Error::Dimension {
                expected: self.num_qubits,
                found: order.len(),
            });
        }
        check_distinct(order)?;
        let mut amps = vec![ZERO; self.amps.len()];
        for (i, slot) in amps.iter_mut().enumerate() {
            let mut src = 0;
            for (q, &o) in order.iter().enumerate() {
                if i >> q & 1 == 1 {
                    src |= 1 << o;
                }
            }
            *slot = self.amps[src];
        }
        Ok(PureState {
            num_qubits: self.num_qubits,
            amps,
        })
    }

    /// Probability of each computational basis outcome.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn to_density(&self) -> Result<DensityMatrix> {
        DensityMatrix::from_pure(self)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.num_qubits {
            Err(Error::QubitIndex {
                index: q,
                num_qubits: self.num_qubits,
            })
        } else {
            Ok(())
        }
    }

    fn check_same_dim(&self, other: &PureState) -> Result<()> {
        if self.num_qubits != other.num_qubits {
            Err(Error::Dimension {
                expected: self.num_qubits,
                found: other.num_qubits,
            })
        } else {
            Ok(())
        }
    }
}

/// `|<a|b>|^2` for normalized states.
pub fn fidelity_pure(a: &PureState, b: &PureState) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr().clamp(0.0, 1.0))
}

fn bell(i: usize, j: usize, sign: f64) -> PureState {
    let mut amps = vec![ZERO; 4];
    amps[i] = C64::new(FRAC_1_SQRT_2, 0.0);
    amps[j] = C64::new(sign * FRAC_1_SQRT_2, 0.0);
    PureState { num_qubits: 2, amps }
}

/// Places bit `b` of `j` at position `qubits[b]`.
pub(crate) fn scatter(j: usize, qubits: &[usize]) -> usize {
    qubits
        .iter()
        .enumerate()
        .filter(|(b, _)| j >> b & 1 == 1)
        .map(|(_, &q)| 1usize << q)
        .sum()
}

fn check_capacity(n: usize, max: usize) -> Result<()> {
    if n > max {
        Err(Error::Capacity { requested: n, max })
    } else {
        Ok(())
    }
}

fn check_distinct(qubits: &[usize]) -> Result<()> {
    for (i, a) in qubits.iter().enumerate() {
        if qubits[i + 1..].contains(a) {
            return Err(Error::Invalid(alloc::format!("qubit {a} listed twice")));
        }
    }
    Ok(())
}

pub(crate) fn check_unitary(u: &Matrix, dim: usize) -> Result<()> {
    if u.rows() != dim || u.cols() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: u.rows(),
        });
    }
    let deviation = u.unitarity_defect();
    if deviation > TOL_EXACT {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::kets;

    fn hadamard_like() -> Matrix {
        let s = FRAC_1_SQRT_2;
        Matrix::from_rows(
            2,
            2,
            vec![C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)],
        )
    }

    fn pauli_x() -> Matrix {
        Matrix::from_rows(2, 2, vec![ZERO, ONE, ONE, ZERO])
    }

    #[test]
    fn tensor_of_basis_kets() {
        let h = PureState::from_ket(kets::H);
        let v = PureState::from_ket(kets::V);
        let hv = h.tensor(&v).unwrap();
        assert_eq!(hv.num_qubits(), 2);
        // qubit 0 = H, qubit 1 = V
        assert_eq!(bitstring(2, 2), "01");
        assert!((hv.amplitude(2) - ONE).norm() < 1e-15);
    }

    #[test]
    fn two_bell_pairs_expand_to_four_terms() {
        let s = PureState::phi_plus().tensor(&PureState::phi_plus()).unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            let expect = if [0b0000, 0b0011, 0b1100, 0b1111].contains(&i) {
                0.5
            } else {
                0.0
            };
            assert!((a.re - expect).abs() < 1e-15 && a.im.abs() < 1e-15, "index {i}");
        }
    }

    #[test]
    fn ghz2_is_phi_plus() {
        assert_eq!(PureState::ghz(2, 1.0).unwrap(), PureState::phi_plus());
    }

    #[test]
    fn capacity_is_enforced() {
        let big = PureState::basis(10, 0).unwrap();
        let err = big.tensor(&PureState::basis(5, 0).unwrap()).unwrap_err();
        assert_eq!(err, Error::Capacity { requested: 15, max: 14 });
        assert!(PureState::basis(15, 0).is_err());
    }

    #[test]
    fn single_qubit_gates() {
        let h = PureState::from_ket(kets::H);
        let d = h.apply_single(0, &hadamard_like()).unwrap();
        assert!(fidelity_pure(&d, &PureState::from_ket(kets::D)).unwrap() > 1.0 - 1e-15);

        let phi = PureState::phi_plus();
        assert_eq!(phi.apply_single(1, &Matrix::identity(2)).unwrap(), phi);
        let flipped = phi.apply_single(0, &pauli_x()).unwrap();
        assert!(fidelity_pure(&flipped, &PureState::psi_plus()).unwrap() > 1.0 - 1e-15);
    }

    #[test]
    fn apply_single_rejects_bad_input() {
        let phi = PureState::phi_plus();
        assert!(matches!(phi.apply_single(2, &pauli_x()), Err(Error::QubitIndex { .. })));
        let not_unitary = Matrix::from_rows(2, 2, vec![ONE, ONE, ZERO, ONE]);
        assert!(matches!(
            phi.apply_single(0, &not_unitary),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn project_examples() {
        let phi = PureState::phi_plus();
        let sel = phi.project(&Projector::local(vec![(0, kets::H)])).unwrap();
        assert!((sel.probability() - 0.5).abs() < 1e-15);
        let hh = PureState::basis(2, 0).unwrap();
        assert!(fidelity_pure(sel.state().unwrap(), &hh).unwrap() > 1.0 - 1e-15);

        let none = phi
            .project(&Projector::local(vec![(0, kets::H), (1, kets::V)]))
            .unwrap();
        assert!(none.is_empty());
        assert_eq!(none.probability(), 0.0);
    }

    #[test]
    fn projecting_one_ghz_photon_on_d_leaves_smaller_ghz() {
        // <D|_0 (|HHHH> + |VVVV>)/√2 = (|HHH> + |VVV>)/2, norm² 1/2
        let ghz4 = PureState::ghz(4, 1.0).unwrap();
        let sel = ghz4.project_out(&[0], &kets::D).unwrap();
        assert!((sel.probability() - 0.5).abs() < 1e-15);
        let ghz3 = PureState::ghz(3, 1.0).unwrap();
        assert!(fidelity_pure(sel.state().unwrap(), &ghz3).unwrap() > 1.0 - 1e-15);

        let kept = ghz4.project(&Projector::local(vec![(0, kets::D)])).unwrap();
        let expect = PureState::from_ket(kets::D).tensor(&ghz3).unwrap();
        assert!(fidelity_pure(kept.state().unwrap(), &expect).unwrap() > 1.0 - 1e-15);
    }

    #[test]
    fn permute_moves_qubits() {
        let hv = PureState::product(&[kets::H, kets::V]).unwrap();
        let vh = hv.permute(&[1, 0]).unwrap();
        assert_eq!(vh, PureState::product(&[kets::V, kets::H]).unwrap());
    }
}
