use alloc::vec::Vec;

use super::pauli::PauliString;
use super::state::PureState;
use crate::linalg::{Matrix, ZERO};
use crate::{Error, Result, C64, TOL_PIPELINE};

/// Largest register held as a dense density matrix.
pub const MAX_DENSITY_QUBITS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    m: Matrix,
}

impl DensityMatrix {
    pub fn from_pure(s: &PureState) -> Result<Self> {
        check_cap(s.num_qubits())?;
        Ok(DensityMatrix {
            num_qubits: s.num_qubits(),
            m: Matrix::outer(s.amplitudes()),
        })
    }

    /// Validates Hermiticity, unit trace and positivity within 1e-10.
    pub fn from_matrix(m: Matrix) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(m)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a square matrix of power-of-two size without physical checks.
    pub fn from_matrix_unchecked(m: Matrix) -> Result<Self> {
        let n = m.rows();
        if n != m.cols() || n == 0 || !n.is_power_of_two() {
            return Err(Error::Dimension {
                expected: n.next_power_of_two(),
                found: m.cols(),
            });
        }
        let num_qubits = n.trailing_zeros() as usize;
        check_cap(num_qubits)?;
        Ok(DensityMatrix { num_qubits, m })
    }

    pub fn maximally_mixed(n: usize) -> Result<Self> {
        check_cap(n)?;
        let d = 1usize << n;
        Ok(DensityMatrix {
            num_qubits: n,
            m: Matrix::identity(d).scale_re(1.0 / d as f64),
        })
    }

    /// `Σ w_k |ψ_k><ψ_k|` renormalized by `Σ w_k`.
    pub fn from_ensemble(items: &[(f64, PureState)]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::Invalid("empty ensemble".into()))?;
        let n = first.1.num_qubits();
        check_cap(n)?;
        let mut m = Matrix::zeros(1 << n, 1 << n);
        let mut total = 0.0;
        for (w, s) in items {
            if s.num_qubits() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: s.num_qubits(),
                });
            }
            m.add_scaled(&Matrix::outer(s.amplitudes()), C64::new(*w, 0.0));
            total += w;
        }
        if total <= 0.0 {
            return Err(Error::ZeroTrace);
        }
        Ok(DensityMatrix {
            num_qubits: n,
            m: m.scale_re(1.0 / total),
        })
    }

    /// `(1-w) self + w other`.
    pub fn mix(&self, other: &DensityMatrix, w: f64) -> Result<Self> {
        self.check_same(other.num_qubits)?;
        let mut m = self.m.scale_re(1.0 - w);
        m.add_scaled(&other.m, C64::new(w, 0.0));
        Ok(DensityMatrix {
            num_qubits: self.num_qubits,
            m,
        })
    }

    /// White-noise admixture `(1-λ) ρ + λ I/d`.
    pub fn depolarize(&self, lambda: f64) -> Self {
        let d = self.m.rows();
        let mut m = self.m.scale_re(1.0 - lambda);
        m.add_scaled(&Matrix::identity(d), C64::new(lambda / d as f64, 0.0));
        DensityMatrix {
            num_qubits: self.num_qubits,
            m,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    pub fn purity(&self) -> f64 {
        self.m.matmul(&self.m).trace().re
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.m.hermiticity_defect();
        if herm > TOL_PIPELINE {
            return Err(Error::Invalid(alloc::format!(
                "density matrix not Hermitian (defect {herm:.3e})"
            )));
        }
        let tr = self.m.trace();
        if (tr.re - 1.0).abs() > TOL_PIPELINE || tr.im.abs() > TOL_PIPELINE {
            return Err(Error::Invalid(alloc::format!(
                "density matrix trace {} + {}i",
                tr.re,
                tr.im
            )));
        }
        let min = self.m.eigh().values[0];
        if min < -TOL_PIPELINE {
            return Err(Error::Invalid(alloc::format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }

    /// `<ψ|ρ|ψ>`, clamped to `[0, 1]`.
    pub fn fidelity(&self, target: &PureState) -> Result<f64> {
        self.check_same(target.num_qubits())?;
        let v = self.m.sandwich(target.amplitudes(), target.amplitudes());
        Ok(v.re.clamp(0.0, 1.0))
    }

    /// `tr(ρ P)`.
    pub fn expectation(&self, p: &PauliString) -> Result<f64> {
        self.check_same(p.len())?;
        let d = self.m.rows();
        let mut acc = ZERO;
        for i in 0..d {
            let (flip, phase) = p.action(i);
            acc += self.m[(i, i ^ flip)] * phase;
        }
        Ok(acc.re.clamp(-1.0, 1.0))
    }

    /// Diagonal in the computational basis.
    pub fn probabilities(&self) -> Vec<f64> {
        (0..self.m.rows()).map(|i| self.m[(i, i)].re.max(0.0)).collect()
    }

    /// `u ρ u†` with a single-qubit `u` on qubit `q`.
    pub fn rotate(&self, q: usize, u: &Matrix) -> Result<Self> {
        if q >= self.num_qubits {
            return Err(Error::QubitIndex {
                index: q,
                num_qubits: self.num_qubits,
            });
        }
        let bit = 1usize << q;
        let d = self.m.rows();
        let mut m = self.m.clone();
        // left multiply, then right multiply by u†
        for c in 0..d {
            for r in 0..d {
                if r & bit == 0 {
                    let a0 = m[(r, c)];
                    let a1 = m[(r | bit, c)];
                    m[(r, c)] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
                    m[(r | bit, c)] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
                }
            }
        }
        for r in 0..d {
            for c in 0..d {
                if c & bit == 0 {
                    let a0 = m[(r, c)];
                    let a1 = m[(r, c | bit)];
                    m[(r, c)] = a0 * u[(0, 0)].conj() + a1 * u[(0, 1)].conj();
                    m[(r, c | bit)] = a0 * u[(1, 0)].conj() + a1 * u[(1, 1)].conj();
                }
            }
        }
        Ok(DensityMatrix {
            num_qubits: self.num_qubits,
            m,
        })
    }

    /// Reduced state on `keep` (in the listed order, first = qubit 0).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        for &q in keep {
            if q >= self.num_qubits {
                return Err(Error::QubitIndex {
                    index: q,
                    num_qubits: self.num_qubits,
                });
            }
        }
        let rest: Vec<usize> = (0..self.num_qubits).filter(|q| !keep.contains(q)).collect();
        let k = keep.len();
        let place = |j: usize, qs: &[usize]| -> usize {
            qs.iter()
                .enumerate()
                .filter(|(b, _)| j >> b & 1 == 1)
                .map(|(_, &q)| 1usize << q)
                .sum()
        };
        let m = Matrix::from_fn(1 << k, 1 << k, |r, c| {
            let (br, bc) = (place(r, keep), place(c, keep));
            (0..1usize << rest.len())
                .map(|e| {
                    let be = place(e, &rest);
                    self.m[(br | be, bc | be)]
                })
                .sum()
        });
        Ok(DensityMatrix { num_qubits: k, m })
    }

    fn check_same(&self, n: usize) -> Result<()> {
        if n != self.num_qubits {
            Err(Error::Dimension {
                expected: self.num_qubits,
                found: n,
            })
        } else {
            Ok(())
        }
    }
}

fn check_cap(n: usize) -> Result<()> {
    if n > MAX_DENSITY_QUBITS {
        Err(Error::Capacity {
            requested: n,
            max: MAX_DENSITY_QUBITS,
        })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fidelity_examples() {
        let ghz = PureState::ghz(4, 1.0).unwrap();
        let rho = ghz.to_density().unwrap();
        assert!((rho.fidelity(&ghz).unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(4).unwrap();
        assert!((mixed.fidelity(&ghz).unwrap() - 1.0 / 16.0).abs() < 1e-12);

        // 0.896 GHZ+ plus 0.104 GHZ-, which is orthogonal
        let minus = PureState::ghz(4, -1.0).unwrap();
        let rho = DensityMatrix::from_ensemble(&[(0.896, ghz.clone()), (0.104, minus)]).unwrap();
        rho.validate().unwrap();
        assert!((rho.fidelity(&ghz).unwrap() - 0.896).abs() < 1e-12);
    }

    #[test]
    fn bell_stabilizers() {
        let phi = PureState::phi_plus().to_density().unwrap();
        let e = |s: &str| phi.expectation(&s.parse().unwrap()).unwrap();
        assert!((e("XX") - 1.0).abs() < 1e-12);
        assert!((e("YY") + 1.0).abs() < 1e-12);
        assert!((e("ZZ") - 1.0).abs() < 1e-12);
        let psi = PureState::psi_plus().to_density().unwrap();
        assert!((psi.expectation(&"ZZ".parse().unwrap()).unwrap() + 1.0).abs() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        for p in PauliString::all(2).into_iter().skip(1) {
            assert!(mixed.expectation(&p).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn expectation_agrees_with_dense_trace() {
        let s = PureState::from_amplitudes(
            (0..8)
                .map(|k| C64::new(libm::cos(k as f64), libm::sin(0.3 * k as f64)))
                .collect(),
        )
        .unwrap();
        let rho = s.to_density().unwrap();
        for p in PauliString::all(3) {
            let dense = rho.matrix().matmul(&p.matrix()).trace().re;
            assert!((rho.expectation(&p).unwrap() - dense).abs() < 1e-12, "{p}");
        }
    }

    #[test]
    fn partial_trace_of_ghz_is_classical() {
        let rho = PureState::ghz(3, 1.0).unwrap().to_density().unwrap();
        let r = rho.partial_trace(&[0, 2]).unwrap();
        let expect = Matrix::from_diag(&[0.5, 0.0, 0.0, 0.5]);
        assert!(r.matrix().distance(&expect) < 1e-12);
    }

    #[test]
    fn rotate_matches_state_rotation() {
        let s = PureState::ghz(3, 1.0).unwrap();
        let u = crate::quantum::Pauli::Y.matrix();
        let a = s.apply_single(1, &u).unwrap().to_density().unwrap();
        let b = s.to_density().unwrap().rotate(1, &u).unwrap();
        assert!(a.matrix().distance(b.matrix()) < 1e-12);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(DensityMatrix::maximally_mixed(9).is_err());
    }
}
