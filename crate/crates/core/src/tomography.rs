//! Maximum-likelihood state and detector tomography, synthetic count
//! generation and the Pauli-expectation fidelity estimator.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::linalg::Matrix;
use crate::pcm::PcmPovm;
use crate::quantum::{kets, DensityMatrix, Ket, PureState};
use crate::rng::substream;
use crate::source::range;
use crate::{Error, Result, C64};

/// Iterations after which a fixed-point reconstruction stops.
pub const MAX_ITERATIONS: usize = 100_000;
/// Largest step factor of the line search; factors above one extrapolate
/// the fixed-point update.
pub const MAX_STEP: f64 = 8.0;
/// Stop once the log-likelihood per recorded event gains less than this.
pub const LIKELIHOOD_TOL: f64 = 1e-14;

/// Single-qubit measurement basis; outcome 0 is the `+1` eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LocalBasis {
    X,
    Y,
    Z,
}

impl LocalBasis {
    pub const ALL: [LocalBasis; 3] = [LocalBasis::X, LocalBasis::Y, LocalBasis::Z];

    pub fn kets(self) -> [Ket; 2] {
        match self {
            LocalBasis::X => [kets::D, kets::A],
            LocalBasis::Y => [kets::R, kets::L],
            LocalBasis::Z => [kets::H, kets::V],
        }
    }

    pub fn letter(self) -> char {
        match self {
            LocalBasis::X => 'X',
            LocalBasis::Y => 'Y',
            LocalBasis::Z => 'Z',
        }
    }
}

/// One local basis per qubit, qubit 0 first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TomographySetting {
    pub bases: Vec<LocalBasis>,
}

impl TomographySetting {
    pub fn new(bases: Vec<LocalBasis>) -> Self {
        TomographySetting { bases }
    }

    pub fn num_qubits(&self) -> usize {
        self.bases.len()
    }

    /// All `3^n` settings, qubit 0 varying slowest.
    pub fn all(n: usize) -> Vec<TomographySetting> {
        let mut out = vec![TomographySetting { bases: Vec::new() }];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|s| {
                    LocalBasis::ALL.into_iter().map(move |b| {
                        let mut s = s.clone();
                        s.bases.push(b);
                        s
                    })
                })
                .collect();
        }
        out
    }

    pub fn parse(label: &str) -> Option<Self> {
        label
            .chars()
            .map(|c| match c {
                'X' | 'x' => Some(LocalBasis::X),
                'Y' | 'y' => Some(LocalBasis::Y),
                'Z' | 'z' => Some(LocalBasis::Z),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(TomographySetting::new)
    }

    /// Eigenvector of outcome `k`; bit `q` of `k` is qubit `q`'s result.
    pub fn outcome_state(&self, k: usize) -> Result<PureState> {
        let ks: Vec<Ket> = self
            .bases
            .iter()
            .enumerate()
            .map(|(q, b)| b.kets()[k >> q & 1])
            .collect();
        PureState::product(&ks)
    }
}

impl fmt::Display for TomographySetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bases {
            write!(f, "{}", b.letter())?;
        }
        Ok(())
    }
}

/// Counts per outcome of one setting, indexed like
/// [`TomographySetting::outcome_state`].
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TomographyRecord {
    pub setting: TomographySetting,
    pub counts: Vec<u64>,
}

impl TomographyRecord {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Born-rule outcome probabilities of `state` under `setting`.
pub fn outcome_probabilities(state: &DensityMatrix, setting: &TomographySetting) -> Result<Vec<f64>> {
    let n = setting.num_qubits();
    if state.num_qubits() != n {
        return Err(Error::Dimension {
            expected: state.num_qubits(),
            found: n,
        });
    }
    (0..1usize << n)
        .map(|k| {
            let e = setting.outcome_state(k)?;
            Ok(state.matrix().sandwich(e.amplitudes(), e.amplitudes()).re.max(0.0))
        })
        .collect()
}

/// Multinomial draw of `shots` events over `probs` (renormalized).
pub fn multinomial<R: Rng + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut left = shots;
    let mut mass: f64 = probs.iter().sum();
    let mut out = vec![0; probs.len()];
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = if i + 1 == probs.len() || q >= 1.0 {
            left
        } else {
            Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0)
        };
        out[i] = k;
        left -= k;
        mass -= p;
    }
    out
}

/// Synthetic counts of `shots` measurements of `state` in `setting`.
pub fn simulate_counts(
    state: &DensityMatrix,
    setting: &TomographySetting,
    shots: u64,
    seed: u64,
) -> Result<TomographyRecord> {
    if shots == 0 {
        return Err(Error::Invalid("shots must be at least 1".into()));
    }
    let probs = outcome_probabilities(state, setting)?;
    let mut rng = substream(seed, 0);
    Ok(TomographyRecord {
        setting: setting.clone(),
        counts: multinomial(&probs, shots, &mut rng),
    })
}

/// Counts for every setting of a full tomography, setting `i` drawn from
/// stream `i` of `seed`.
pub fn simulate_full(state: &DensityMatrix, shots: u64, seed: u64) -> Result<Vec<TomographyRecord>> {
    if shots == 0 {
        return Err(Error::Invalid("shots must be at least 1".into()));
    }
    TomographySetting::all(state.num_qubits())
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let probs = outcome_probabilities(state, &s)?;
            let mut rng = substream(seed, i as u64);
            Ok(TomographyRecord {
                counts: multinomial(&probs, shots, &mut rng),
                setting: s,
            })
        })
        .collect()
}

/// Result of a fixed-point maximum-likelihood reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Mle<T> {
    pub estimate: T,
    /// Log-likelihood per recorded event.
    pub log_likelihood: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit first; the estimate is then the
    /// last iterate.
    pub converged: bool,
}

/// Whether every Pauli string has a measured setting that agrees with it on
/// all of its non-identity qubits.
fn complete(settings: &[&TomographySetting], n: usize) -> bool {
    (0..1usize << (2 * n)).all(|code| {
        settings.iter().any(|s| {
            (0..n).all(|q| match code >> (2 * q) & 3 {
                0 => true,
                1 => s.bases[q] == LocalBasis::X,
                2 => s.bases[q] == LocalBasis::Y,
                _ => s.bases[q] == LocalBasis::Z,
            })
        })
    })
}

/// Fixed-point ascent with a line search: tries the current step factor,
/// halves it until the likelihood rises and doubles it (up to
/// [`MAX_STEP`]) after every accepted step. Stops when the accepted gain
/// drops below [`LIKELIHOOD_TOL`] or no step helps.
fn ascend<T>(start: T, loglik: &dyn Fn(&T) -> f64, step: &dyn Fn(&T, f64) -> T) -> (T, f64, usize, bool) {
    let mut x = start;
    let mut ll = loglik(&x);
    let mut eps = 1.0;
    for it in 1..=MAX_ITERATIONS {
        let mut accepted = None;
        let mut trial = eps;
        for _ in 0..40 {
            let y = step(&x, trial);
            let l = loglik(&y);
            if l.is_finite() && l >= ll {
                accepted = Some((y, l));
                break;
            }
            trial *= 0.5;
        }
        let Some((y, l)) = accepted else {
            return (x, ll, it, true);
        };
        debug_assert!(l >= ll, "log-likelihood decreased from {ll} to {l}");
        let gain = l - ll;
        x = y;
        ll = l;
        // grow the step after a success, recover gradually after a cut
        eps = (trial * 2.0).min(MAX_STEP);
        if gain < LIKELIHOOD_TOL {
            return (x, ll, it, true);
        }
    }
    (x, ll, MAX_ITERATIONS, false)
}

/// Maximum-likelihood density matrix from counts, by the `RρR` fixed-point
/// iteration started from the maximally mixed state.
pub fn mle_state(records: &[TomographyRecord]) -> Result<Mle<DensityMatrix>> {
    let n = records
        .first()
        .ok_or_else(|| Error::RankDeficient("no records".into()))?
        .setting
        .num_qubits();
    let dim = 1usize << n;
    let mut terms: Vec<(Vec<C64>, f64)> = Vec::new();
    let mut used: Vec<&TomographySetting> = Vec::new();
    let mut events = 0.0;
    for r in records {
        if r.setting.num_qubits() != n || r.counts.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: r.counts.len(),
            });
        }
        if r.total() == 0 {
            continue;
        }
        used.push(&r.setting);
        let total = r.total() as f64;
        for (k, &c) in r.counts.iter().enumerate() {
            if c > 0 {
                terms.push((r.setting.outcome_state(k)?.into_amplitudes(), c as f64 / total));
                events += c as f64 / total;
            }
        }
    }
    if !complete(&used, n) {
        return Err(Error::RankDeficient(format!(
            "{} settings with counts do not determine every Pauli expectation",
            used.len()
        )));
    }
    let loglik = |rho: &Matrix| -> f64 {
        terms
            .iter()
            .map(|(e, f)| f * libm::log(rho.sandwich(e, e).re.max(1e-300)))
            .sum::<f64>()
            / events
    };
    let settings = used.len() as f64;
    let step = |rho: &Matrix, eps: f64| -> Matrix {
        // Q = I + ε (R/m - I); ε = 1 is the plain RρR step
        let mut q = Matrix::identity(dim).scale_re(1.0 - eps);
        for (e, f) in &terms {
            let p = rho.sandwich(e, e).re.max(1e-300);
            q.add_scaled(&Matrix::outer(e), C64::new(eps * f / (p * settings), 0.0));
        }
        let next = q.matmul(rho).matmul(&q).hermitize();
        let tr = next.trace().re;
        next.scale_re(1.0 / tr)
    };
    let start = Matrix::identity(dim).scale_re(1.0 / dim as f64);
    let (rho, ll, iterations, converged) = ascend(start, &loglik, &step);
    Ok(Mle {
        estimate: DensityMatrix::from_matrix_unchecked(rho)?,
        log_likelihood: ll,
        iterations,
        converged,
    })
}

/// Single-qubit probe preparation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProbeLabel {
    H,
    V,
    D,
    R,
}

impl ProbeLabel {
    pub const ALL: [ProbeLabel; 4] = [ProbeLabel::H, ProbeLabel::V, ProbeLabel::D, ProbeLabel::R];

    pub fn ket(self) -> Ket {
        match self {
            ProbeLabel::H => kets::H,
            ProbeLabel::V => kets::V,
            ProbeLabel::D => kets::D,
            ProbeLabel::R => kets::R,
        }
    }
}

/// Product probe state, one label per qubit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeState {
    pub labels: Vec<ProbeLabel>,
}

impl ProbeState {
    /// All `4^n` probes, qubit 0 varying slowest.
    pub fn all(n: usize) -> Vec<ProbeState> {
        let mut out = vec![ProbeState { labels: Vec::new() }];
        for _ in 0..n {
            out = out
                .into_iter()
                .flat_map(|s| {
                    ProbeLabel::ALL.into_iter().map(move |l| {
                        let mut s = s.clone();
                        s.labels.push(l);
                        s
                    })
                })
                .collect();
        }
        out
    }

    pub fn state(&self) -> Result<PureState> {
        let ks: Vec<Ket> = self.labels.iter().map(|l| l.ket()).collect();
        PureState::product(&ks)
    }

    pub fn label(&self) -> String {
        self.labels
            .iter()
            .map(|l| match l {
                ProbeLabel::H => 'H',
                ProbeLabel::V => 'V',
                ProbeLabel::D => 'D',
                ProbeLabel::R => 'R',
            })
            .collect()
    }
}

/// Outcome-class counts of `shots` probe preparations sent into a PCM with
/// POVM `povm`, indexed by [`crate::pcm::PcmTag::index`].
pub fn simulate_probe_counts(povm: &PcmPovm, probe: &ProbeState, shots: u64, seed: u64) -> Result<[u64; 5]> {
    let rho = probe.state()?.to_density()?;
    if rho.num_qubits() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            found: rho.num_qubits(),
        });
    }
    let probs = povm.probabilities(rho.matrix());
    let mut rng = substream(seed, 0);
    let c = multinomial(&probs, shots, &mut rng);
    Ok([c[0], c[1], c[2], c[3], c[4]])
}

/// Counts for all 16 two-qubit probes, probe `i` drawn from stream `i`.
pub fn simulate_detector(povm: &PcmPovm, shots: u64, seed: u64) -> Result<BTreeMap<ProbeState, [u64; 5]>> {
    ProbeState::all(2)
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let rho = p.state()?.to_density()?;
            let probs = povm.probabilities(rho.matrix());
            let mut rng = substream(seed, i as u64);
            let c = multinomial(&probs, shots, &mut rng);
            Ok((p, [c[0], c[1], c[2], c[3], c[4]]))
        })
        .collect()
}

/// Maximum-likelihood PCM POVM from probe counts. Each iteration maps
/// `E_k -> G^{-1/2} R_k E_k R_k G^{-1/2}` with `G = Σ R_k E_k R_k`, which
/// keeps the elements positive and summing to the identity.
pub fn mle_povm(data: &BTreeMap<ProbeState, [u64; 5]>) -> Result<Mle<PcmPovm>> {
    let mut probes: Vec<(Matrix, [u64; 5])> = Vec::new();
    for (p, counts) in data {
        if p.labels.len() != 2 {
            return Err(Error::Dimension {
                expected: 2,
                found: p.labels.len(),
            });
        }
        if counts.iter().sum::<u64>() > 0 {
            probes.push((p.state()?.to_density()?.into_matrix(), *counts));
        }
    }
    let gram = Matrix::from_fn(probes.len(), probes.len(), |i, j| {
        probes[i].0.matmul(&probes[j].0).trace()
    });
    let rank = gram.eigh().values.iter().filter(|&&x| x > 1e-9).count();
    if rank < 16 {
        return Err(Error::RankDeficient(format!(
            "probes span {rank} of the 16 two-qubit operator dimensions"
        )));
    }
    let events: f64 = probes.iter().flat_map(|(_, c)| c.iter()).sum::<u64>() as f64;
    let loglik = |e: &[Matrix; 5]| -> f64 {
        // a near-singular normalization can break completeness or positivity
        let mut sum = Matrix::identity(4).scale_re(-1.0);
        for m in e {
            sum.add_scaled(m, C64::new(1.0, 0.0));
        }
        if sum.frobenius() > 1e-9 || e.iter().any(|m| m.eigh().values[0] < -1e-12) {
            return f64::NEG_INFINITY;
        }
        let mut acc = 0.0;
        for (rho, counts) in &probes {
            for (k, &c) in counts.iter().enumerate() {
                if c > 0 {
                    acc += c as f64 * libm::log(e[k].matmul(rho).trace().re.max(1e-300));
                }
            }
        }
        acc / events
    };
    let mut frame = Matrix::zeros(4, 4);
    for (rho, counts) in &probes {
        frame.add_scaled(rho, C64::new(counts.iter().sum::<u64>() as f64, 0.0));
    }
    let norm = frame.eigh().values.last().copied().unwrap_or(1.0);
    let step = |e: &[Matrix; 5], eps: f64| -> [Matrix; 5] {
        // Q_k = I + ε (R_k - S)/|S|, S the count-weighted probe frame
        let q: [Matrix; 5] = core::array::from_fn(|k| {
            let mut q = Matrix::identity(4);
            q.add_scaled(&frame, C64::new(-eps / norm, 0.0));
            for (rho, counts) in &probes {
                if counts[k] > 0 {
                    let p = e[k].matmul(rho).trace().re.max(1e-300);
                    q.add_scaled(rho, C64::new(eps * counts[k] as f64 / (p * norm), 0.0));
                }
            }
            q
        });
        let qeq: [Matrix; 5] = core::array::from_fn(|k| q[k].matmul(&e[k]).matmul(&q[k]).hermitize());
        let mut g = Matrix::zeros(4, 4);
        for m in &qeq {
            g.add_scaled(m, C64::new(1.0, 0.0));
        }
        let w = g.map_spectrum(|x| 1.0 / libm::sqrt(x.max(1e-300)));
        core::array::from_fn(|k| w.matmul(&qeq[k]).matmul(&w).hermitize())
    };
    let start: [Matrix; 5] = core::array::from_fn(|_| Matrix::identity(4).scale_re(0.2));
    let (e, ll, iterations, converged) = ascend(start, &loglik, &step);
    Ok(Mle {
        estimate: PcmPovm { elements: e },
        log_likelihood: ll,
        iterations,
        converged,
    })
}

/// `(1 + <XX> - <YY> + <ZZ>) / 4`, the fidelity to `|Φ+>` from the three
/// correlators.
pub fn pauli_fidelity(xx: f64, yy: f64, zz: f64) -> Result<f64> {
    range("xx", xx, -1.0, 1.0)?;
    range("yy", yy, -1.0, 1.0)?;
    range("zz", zz, -1.0, 1.0)?;
    Ok((1.0 + xx - yy + zz) / 4.0)
}

/// `<t| E / tr E |t>`.
pub fn povm_fidelity(element: &Matrix, target: &PureState) -> Result<f64> {
    if element.dim() != target.dim() {
        return Err(Error::Dimension {
            expected: element.dim(),
            found: target.dim(),
        });
    }
    let tr = element.trace().re;
    if tr.abs() < 1e-14 {
        return Err(Error::ZeroTrace);
    }
    let a = target.amplitudes();
    Ok(element.sandwich(a, a).re / tr)
}

/// Uhlmann fidelity of two positive operators after normalizing each to
/// unit trace.
pub fn operator_fidelity(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let (ta, tb) = (a.trace().re, b.trace().re);
    if ta.abs() < 1e-14 || tb.abs() < 1e-14 {
        return Err(Error::ZeroTrace);
    }
    Ok(crate::linalg::uhlmann_fidelity(
        &a.scale_re(1.0 / ta),
        &b.scale_re(1.0 / tb),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcm::{ideal_povm, PcmTag};
    use alloc::string::ToString;

    #[test]
    fn settings_and_probes_count() {
        assert_eq!(TomographySetting::all(4).len(), 81);
        assert_eq!(ProbeState::all(2).len(), 16);
        assert_eq!(TomographySetting::all(2)[0].to_string(), "XX");
    }

    #[test]
    fn phi_plus_zz_counts_only_even_outcomes() {
        let rho = PureState::phi_plus().to_density().unwrap();
        let r = simulate_counts(&rho, &TomographySetting::parse("ZZ").unwrap(), 10_000, 1).unwrap();
        assert_eq!(r.counts[1] + r.counts[2], 0);
        assert!((r.counts[0] as f64 / 10_000.0 - 0.5).abs() < 0.03);
    }

    #[test]
    fn missing_settings_are_rank_deficient() {
        let rho = PureState::phi_plus().to_density().unwrap();
        let r = simulate_counts(&rho, &TomographySetting::parse("ZZ").unwrap(), 100, 1).unwrap();
        assert!(matches!(mle_state(&[r]), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn two_qubit_round_trip() {
        let rho = PureState::psi_plus().to_density().unwrap().depolarize(0.2);
        let recs = simulate_full(&rho, 20_000, 3).unwrap();
        let est = mle_state(&recs).unwrap();
        let f = est.estimate.fidelity(&PureState::psi_plus()).unwrap();
        let want = rho.fidelity(&PureState::psi_plus()).unwrap();
        assert!((f - want).abs() < 0.01, "{f} vs {want}");
    }

    #[test]
    fn povm_reconstruction_is_complete() {
        let data = simulate_detector(&ideal_povm(0.9).unwrap(), 20_000, 5).unwrap();
        let est = mle_povm(&data).unwrap().estimate;
        assert!(est.completeness_defect() < 1e-8);
        let f = povm_fidelity(est.element(PcmTag::BellPhiPlus), &PureState::phi_plus()).unwrap();
        assert!(f > 0.85, "{f}");
    }

    #[test]
    fn fidelity_helpers() {
        assert_eq!(pauli_fidelity(1.0, -1.0, 1.0).unwrap(), 1.0);
        assert_eq!(pauli_fidelity(0.0, 0.0, 0.0).unwrap(), 0.25);
        assert!(pauli_fidelity(1.5, 0.0, 0.0).is_err());
        let id = Matrix::identity(4).scale_re(0.25);
        assert!((povm_fidelity(&id, &PureState::phi_plus()).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(
            povm_fidelity(&Matrix::zeros(4, 4), &PureState::phi_plus()),
            Err(Error::ZeroTrace)
        );
    }
}
