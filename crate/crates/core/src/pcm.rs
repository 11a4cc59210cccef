//! Passive-choice measurement: a CPBS whose detector pattern either performs a
//! Bell measurement (one click in each output port) or, when a single port
//! fires, an X-basis projection of the photon entering the left input.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::Matrix;
use crate::quantum::{kets, Pauli, PureState, Selection};
use crate::source::{range, SourceModel};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PcmTag {
    #[cfg_attr(feature = "serde", serde(rename = "phi_plus"))]
    BellPhiPlus,
    #[cfg_attr(feature = "serde", serde(rename = "psi_plus"))]
    BellPsiPlus,
    #[cfg_attr(feature = "serde", serde(rename = "single_left"))]
    SingleLeft,
    #[cfg_attr(feature = "serde", serde(rename = "single_right"))]
    SingleRight,
    #[cfg_attr(feature = "serde", serde(rename = "no_decision"))]
    NoDecision,
}

impl PcmTag {
    pub const ALL: [PcmTag; 5] = [
        PcmTag::BellPhiPlus,
        PcmTag::BellPsiPlus,
        PcmTag::SingleLeft,
        PcmTag::SingleRight,
        PcmTag::NoDecision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PcmTag::BellPhiPlus => "phi_plus",
            PcmTag::BellPsiPlus => "psi_plus",
            PcmTag::SingleLeft => "single_left",
            PcmTag::SingleRight => "single_right",
            PcmTag::NoDecision => "no_decision",
        }
    }

    pub fn parse(s: &str) -> Option<PcmTag> {
        PcmTag::ALL.into_iter().find(|t| t.as_str() == s)
    }

    pub fn is_bell(self) -> bool {
        matches!(self, PcmTag::BellPhiPlus | PcmTag::BellPsiPlus)
    }

    pub fn is_single(self) -> bool {
        matches!(self, PcmTag::SingleLeft | PcmTag::SingleRight)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for PcmTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A classified detector pattern and the Pauli correction it calls for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PcmOutcome {
    pub tag: PcmTag,
    pub correction: Pauli,
}

impl PcmOutcome {
    pub fn from_tag(tag: PcmTag) -> Self {
        let correction = match tag {
            PcmTag::BellPsiPlus => Pauli::X,
            PcmTag::SingleRight => Pauli::Z,
            _ => Pauli::I,
        };
        PcmOutcome { tag, correction }
    }
}

pub const LEFT_H: u8 = 0b0001;
pub const LEFT_V: u8 = 0b0010;
pub const RIGHT_H: u8 = 0b0100;
pub const RIGHT_V: u8 = 0b1000;

/// Classifies the click mask of one PCM (bits: left H, left V, right H,
/// right V).
pub fn classify(clicks: u8) -> PcmOutcome {
    let left = clicks & 0b0011;
    let right = clicks & 0b1100;
    let tag = match (left.count_ones(), right.count_ones()) {
        (1, 1) => {
            let same = (left == LEFT_H) == (right == RIGHT_H);
            if same {
                PcmTag::BellPhiPlus
            } else {
                PcmTag::BellPsiPlus
            }
        }
        (1, 0) => PcmTag::SingleLeft,
        (0, 1) => PcmTag::SingleRight,
        _ => PcmTag::NoDecision,
    };
    PcmOutcome::from_tag(tag)
}

/// State update for a PCM outcome on `left` (and `right`, if that photon is
/// part of the register). Bell outcomes project the pair onto the Bell
/// state; single outcomes project `left` onto `|D>` (left) or `|A>` (right)
/// and `right` onto the orthogonal partner. Measured qubits are removed and
/// the outcome's correction is applied to `target`, which is given in the
/// numbering before removal.
pub fn apply_outcome(
    state: &PureState,
    left: usize,
    right: Option<usize>,
    outcome: PcmOutcome,
    target: Option<usize>,
) -> Result<Selection> {
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let re = |x: f64| C64::new(x, 0.0);
    let (qubits, bra): (Vec<usize>, Vec<C64>) = match (outcome.tag, right) {
        (PcmTag::BellPhiPlus, Some(r)) => (vec![left, r], vec![re(h), re(0.0), re(0.0), re(h)]),
        (PcmTag::BellPsiPlus, Some(r)) => (vec![left, r], vec![re(0.0), re(h), re(h), re(0.0)]),
        (PcmTag::SingleLeft, Some(r)) => (vec![left, r], product(kets::D, kets::A)),
        (PcmTag::SingleRight, Some(r)) => (vec![left, r], product(kets::A, kets::D)),
        (PcmTag::SingleLeft, None) => (vec![left], kets::D.to_vec()),
        (PcmTag::SingleRight, None) => (vec![left], kets::A.to_vec()),
        (PcmTag::NoDecision, _) => return Err(Error::Invalid("no state update for a no_decision outcome".into())),
        (_, None) => return Err(Error::Invalid("a Bell outcome needs both photons".into())),
    };
    if let Some(t) = target {
        if qubits.contains(&t) {
            return Err(Error::Invalid("correction target is a measured qubit".into()));
        }
    }
    let sel = state.project_out(&qubits, &bra)?;
    match (sel, target) {
        (Selection::Kept { state, probability }, Some(t)) if outcome.correction != Pauli::I => {
            let shifted = t - qubits.iter().filter(|&&q| q < t).count();
            let state = state.apply_single(shifted, &outcome.correction.matrix())?;
            Ok(Selection::Kept { state, probability })
        }
        (sel, _) => Ok(sel),
    }
}

fn product(a: [C64; 2], b: [C64; 2]) -> Vec<C64> {
    vec![a[0] * b[0], a[1] * b[0], a[0] * b[1], a[1] * b[1]]
}

/// Two-qubit POVM of a PCM, indexed by [`PcmTag`]. The left photon is qubit 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmPovm {
    pub elements: [Matrix; 5],
}

impl PcmPovm {
    pub fn element(&self, tag: PcmTag) -> &Matrix {
        &self.elements[tag.index()]
    }

    /// Largest entry of `Σ M - 1`.
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = Matrix::zeros(4, 4);
        for m in &self.elements {
            sum.add_scaled(m, C64::new(1.0, 0.0));
        }
        (&sum - &Matrix::identity(4))
            .data()
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    /// Outcome probabilities for a two-qubit input state.
    pub fn probabilities(&self, rho: &Matrix) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (o, m) in out.iter_mut().zip(&self.elements) {
            *o = m.matmul(rho).trace().re.max(0.0);
        }
        out
    }
}

fn proj(k: [C64; 4]) -> Matrix {
    Matrix::outer(&k)
}

/// `v · ideal + (1 - v) · distinguishable-photon` POVM.
pub fn ideal_povm(v: f64) -> Result<PcmPovm> {
    range("visibility", v, 0.0, 1.0)?;
    let phi = proj(to4(PureState::phi_plus()));
    let psi = proj(to4(PureState::psi_plus()));
    let dd = proj(product4(kets::D, kets::D));
    let aa = proj(product4(kets::A, kets::A));
    let da = proj(product4(kets::D, kets::A));
    let ad = proj(product4(kets::A, kets::D));
    let parity = (&dd + &aa).scale_re(0.5);
    let mix = |a: &Matrix, b: &Matrix| {
        let mut m = a.scale_re(v);
        m.add_scaled(b, C64::new(1.0 - v, 0.0));
        m
    };
    Ok(PcmPovm {
        elements: [
            mix(&phi, &parity),
            mix(&psi, &parity),
            mix(&da, &da.scale_re(0.5)),
            mix(&ad, &ad.scale_re(0.5)),
            (&da + &ad).scale_re(0.5 * (1.0 - v)),
        ],
    })
}

fn to4(s: PureState) -> [C64; 4] {
    let a = s.amplitudes();
    [a[0], a[1], a[2], a[3]]
}

fn product4(a: [C64; 2], b: [C64; 2]) -> [C64; 4] {
    [a[0] * b[0], a[1] * b[0], a[0] * b[1], a[1] * b[1]]
}

/// Misclassification estimate for one repeater node.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FalseBsm {
    /// `P(wrong | accepted)`.
    pub rate: f64,
    pub accepted: f64,
    pub wrong: f64,
}

/// Probability that an accepted node event is not the intended one.
///
/// The node has two EPR sources feeding the right inputs of its two PCMs
/// and the local party's analyzers; the GHZ photons on the left inputs are
/// always present and locally maximally mixed. EPR photons survive with
/// `model.efficiency`. Accepted: one PCM reports a Bell tag, the other a
/// single click, and the local party sees exactly one photon. Intended: one
/// source delivered exactly its first pair (one photon to its PCM, one to
/// the party), everything else was lost, and the Bell tag came from that
/// source's PCM.
pub fn false_bsm_rate(model: &SourceModel) -> Result<FalseBsm> {
    let weights = model.pair_weights()?;
    let eta = model.efficiency;
    let per_source = source_outcomes(&weights, eta);

    let mut accepted = 0.0;
    let mut good = 0.0;
    for a in &per_source {
        for b in &per_source {
            let w = a.weight * b.weight;
            if w == 0.0 || a.party + b.party != 1 {
                continue;
            }
            let ta = pcm_tags(a.primary_pcm, a.extra_pcm);
            let tb = pcm_tags(b.primary_pcm, b.extra_pcm);
            let bell_a = ta.0 * tb.1;
            let bell_b = ta.1 * tb.0;
            accepted += w * (bell_a + bell_b);
            if a.clean && b.silent {
                good += w * bell_a;
            }
            if b.clean && a.silent {
                good += w * bell_b;
            }
        }
    }
    let wrong = accepted - good;
    Ok(FalseBsm {
        rate: if accepted > 0.0 { wrong / accepted } else { 0.0 },
        accepted,
        wrong: wrong.max(0.0),
    })
}

struct SourceOutcome {
    weight: f64,
    primary_pcm: bool,
    extra_pcm: usize,
    party: usize,
    clean: bool,
    silent: bool,
}

fn source_outcomes(weights: &[f64], eta: f64) -> Vec<SourceOutcome> {
    let mut out = Vec::new();
    for (k, &wk) in weights.iter().enumerate() {
        let photons = 2 * k;
        for mask in 0..1usize << photons {
            let mut w = wk;
            for i in 0..photons {
                w *= if mask >> i & 1 == 1 { eta } else { 1.0 - eta };
            }
            if w == 0.0 {
                continue;
            }
            // bit 2j: photon of pair j heading to the PCM, bit 2j+1: to the party
            let primary_pcm = k > 0 && mask & 1 == 1;
            let primary_party = k > 0 && mask & 2 == 2;
            let extra_pcm = (1..k).filter(|j| mask >> (2 * j) & 1 == 1).count();
            let extra_party = (1..k).filter(|j| mask >> (2 * j + 1) & 1 == 1).count();
            out.push(SourceOutcome {
                weight: w,
                primary_pcm,
                extra_pcm,
                party: primary_party as usize + extra_party,
                clean: primary_pcm && primary_party && extra_pcm == 0 && extra_party == 0,
                silent: mask == 0,
            });
        }
    }
    out
}

/// `(P(Bell), P(single))` for one PCM holding the GHZ photon, optionally
/// the primary EPR photon, and `extras` distinguishable photons that each
/// add a click on a free detector.
fn pcm_tags(primary: bool, extras: usize) -> (f64, f64) {
    let base: &[(u8, f64)] = if primary {
        &[
            (0b0101, 0.125),
            (0b1001, 0.125),
            (0b0110, 0.125),
            (0b1010, 0.125),
            (0b0001, 0.125),
            (0b0010, 0.125),
            (0b0100, 0.125),
            (0b1000, 0.125),
        ]
    } else {
        &[(0b0001, 0.25), (0b0010, 0.25), (0b0100, 0.25), (0b1000, 0.25)]
    };
    let mut dist: Vec<(u8, f64)> = base.to_vec();
    for _ in 0..extras {
        dist = add_click(&dist, 4);
    }
    let mut bell = 0.0;
    let mut single = 0.0;
    for (m, p) in dist {
        let t = classify(m).tag;
        if t.is_bell() {
            bell += p;
        } else if t.is_single() {
            single += p;
        }
    }
    (bell, single)
}

/// One more click on a uniformly chosen free detector out of `n`.
pub(crate) fn add_click(dist: &[(u8, f64)], n: u32) -> Vec<(u8, f64)> {
    let full = ((1u16 << n) - 1) as u8;
    let mut out: Vec<(u8, f64)> = Vec::new();
    for &(m, p) in dist {
        let free = n - m.count_ones();
        if free == 0 {
            push(&mut out, full, p);
            continue;
        }
        for d in 0..n {
            if m >> d & 1 == 0 {
                push(&mut out, m | 1 << d, p / free as f64);
            }
        }
    }
    out
}

fn push(v: &mut Vec<(u8, f64)>, m: u8, p: f64) {
    match v.iter_mut().find(|(k, _)| *k == m) {
        Some(e) => e.1 += p,
        None => v.push((m, p)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{cpbs_apply, CpbsDevice};
    use crate::quantum::fidelity_pure;

    #[test]
    fn classify_examples() {
        assert_eq!(classify(LEFT_H | RIGHT_H).tag, PcmTag::BellPhiPlus);
        assert_eq!(classify(LEFT_V | RIGHT_V).tag, PcmTag::BellPhiPlus);
        assert_eq!(classify(LEFT_H | RIGHT_V).tag, PcmTag::BellPsiPlus);
        let single = classify(LEFT_V);
        assert_eq!(single.tag, PcmTag::SingleLeft);
        assert_eq!(single.correction, Pauli::I);
        assert_eq!(classify(RIGHT_H).correction, Pauli::Z);
        assert_eq!(classify(0).tag, PcmTag::NoDecision);
        assert_eq!(classify(LEFT_H | LEFT_V).tag, PcmTag::NoDecision);
        assert_eq!(classify(0b0111).tag, PcmTag::NoDecision);
    }

    #[test]
    fn bell_inputs_give_deterministic_tags() {
        let dev = CpbsDevice { qubit_a: 0, qubit_b: 1 };
        for (state, tag) in [
            (PureState::phi_plus(), PcmTag::BellPhiPlus),
            (PureState::psi_plus(), PcmTag::BellPsiPlus),
        ] {
            for b in cpbs_apply(&state, dev).unwrap() {
                let t = classify(b.label.clicks()).tag;
                if b.probability > 1e-15 {
                    assert_eq!(t, tag);
                }
            }
        }
        // Φ- and Ψ- never coincide across ports
        for state in [PureState::phi_minus(), PureState::psi_minus()] {
            for b in cpbs_apply(&state, dev).unwrap() {
                if b.probability > 1e-15 {
                    assert!(classify(b.label.clicks()).tag.is_single());
                }
            }
        }
    }

    #[test]
    fn swap_two_pairs() {
        let s = PureState::phi_plus().tensor(&PureState::phi_plus()).unwrap();
        let out = apply_outcome(&s, 1, Some(2), PcmOutcome::from_tag(PcmTag::BellPhiPlus), Some(3)).unwrap();
        assert!((out.probability() - 0.25).abs() < 1e-12);
        assert!(fidelity_pure(out.state().unwrap(), &PureState::phi_plus()).unwrap() > 1.0 - 1e-12);

        let out = apply_outcome(&s, 1, Some(2), PcmOutcome::from_tag(PcmTag::BellPsiPlus), Some(3)).unwrap();
        assert!(fidelity_pure(out.state().unwrap(), &PureState::phi_plus()).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn single_right_on_ghz4_gives_ghz3_after_z() {
        let ghz4 = PureState::ghz(4, 1.0).unwrap();
        let raw = ghz4.project_out(&[0], &kets::A).unwrap();
        let minus = PureState::ghz(3, -1.0).unwrap();
        assert!(fidelity_pure(raw.state().unwrap(), &minus).unwrap() > 1.0 - 1e-12);
        let out = apply_outcome(&ghz4, 0, None, PcmOutcome::from_tag(PcmTag::SingleRight), Some(1)).unwrap();
        let plus = PureState::ghz(3, 1.0).unwrap();
        assert!(fidelity_pure(out.state().unwrap(), &plus).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn ghz_fusion_sizes() {
        for m in 2..=4 {
            for n in 2..=4 {
                let s = PureState::ghz(m, 1.0)
                    .unwrap()
                    .tensor(&PureState::ghz(n, 1.0).unwrap())
                    .unwrap();
                for tag in [PcmTag::BellPhiPlus, PcmTag::BellPsiPlus] {
                    let out = apply_outcome(&s, m - 1, Some(m), PcmOutcome::from_tag(tag), Some(m + n - 1)).unwrap();
                    // a Ψ+ merge flips the whole second fragment, not only the target
                    let mut state = out.into_state().unwrap();
                    if tag == PcmTag::BellPsiPlus {
                        for q in m - 1..m + n - 3 {
                            state = state.apply_single(q, &Pauli::X.matrix()).unwrap();
                        }
                    }
                    let target = PureState::ghz(m + n - 2, 1.0).unwrap();
                    let f = fidelity_pure(&state, &target).unwrap();
                    assert!((f - 1.0).abs() < 1e-10, "m={m} n={n} {tag}");
                }
            }
        }
    }

    #[test]
    fn no_decision_has_no_update() {
        let s = PureState::phi_plus();
        assert!(apply_outcome(&s, 0, Some(1), PcmOutcome::from_tag(PcmTag::NoDecision), None).is_err());
    }

    #[test]
    fn povm_is_complete_and_positive() {
        for i in 0..=10 {
            let p = ideal_povm(i as f64 / 10.0).unwrap();
            assert!(p.completeness_defect() < 1e-10);
            for m in &p.elements {
                assert!(m.eigh().values[0] > -1e-10);
            }
        }
        assert!(ideal_povm(1.2).is_err());
    }

    #[test]
    fn povm_matches_cpbs_branches() {
        // Exact POVM at v = 1 agrees with the CPBS branch probabilities.
        let s = PureState::from_amplitudes(vec![
            C64::new(0.5, 0.1),
            C64::new(-0.3, 0.2),
            C64::new(0.1, 0.6),
            C64::new(0.2, -0.1),
        ])
        .unwrap();
        let rho = Matrix::outer(s.amplitudes());
        let probs = ideal_povm(1.0).unwrap().probabilities(&rho);
        let mut by_tag = [0.0; 5];
        for b in cpbs_apply(&s, CpbsDevice { qubit_a: 0, qubit_b: 1 }).unwrap() {
            by_tag[classify(b.label.clicks()).tag.index()] += b.probability;
        }
        for t in 0..5 {
            assert!((probs[t] - by_tag[t]).abs() < 1e-12, "tag {t}");
        }
    }

    #[test]
    fn false_bsm_vanishes_without_multi_pairs() {
        let r = false_bsm_rate(&SourceModel::with_p(0.0)).unwrap();
        assert_eq!(r.rate, 0.0);
        let small = false_bsm_rate(&SourceModel::with_p(1e-6)).unwrap();
        assert!(small.rate < 1e-5);
    }

    #[test]
    fn false_bsm_grows_with_p() {
        let a = false_bsm_rate(&SourceModel::with_p(0.0344)).unwrap().rate;
        let b = false_bsm_rate(&SourceModel::with_p(0.0483)).unwrap().rate;
        assert!(a > 0.0 && b > a);
    }
}
