//! Imperfection knobs: photon loss, partial two-photon interference and
//! white noise on the pair sources.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::optics::{cpbs_apply, pbs_postselect, BranchLabel, CpbsDevice, PbsGate};
use crate::quantum::{kets, DensityMatrix, Projector, PureState, Selection};
use crate::source::range;
use crate::{Result, C64};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NoiseModel {
    /// Survival probability of every photon not listed in `photon_efficiency`.
    pub efficiency: f64,
    pub photon_efficiency: BTreeMap<u8, f64>,
    /// Visibility at every overlap point not listed in `point_visibility`.
    pub visibility: f64,
    /// Keyed by PBS element or PCM device name.
    pub point_visibility: BTreeMap<String, f64>,
    pub include_multi_pair: bool,
    /// White-noise weight `λ` of every source not listed in `source_white_noise`.
    pub white_noise: f64,
    pub source_white_noise: BTreeMap<String, f64>,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            efficiency: 0.38,
            photon_efficiency: BTreeMap::new(),
            visibility: 1.0,
            point_visibility: BTreeMap::new(),
            include_multi_pair: true,
            white_noise: 0.0,
            source_white_noise: BTreeMap::new(),
        }
    }
}

impl NoiseModel {
    /// No loss, perfect interference, no white noise. Multi-pair emission
    /// stays on.
    pub fn ideal() -> Self {
        NoiseModel {
            efficiency: 1.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        range("efficiency", self.efficiency, 0.0, 1.0)?;
        range("visibility", self.visibility, 0.0, 1.0)?;
        range("white_noise", self.white_noise, 0.0, 1.0)?;
        for v in self.photon_efficiency.values() {
            range("photon_efficiency", *v, 0.0, 1.0)?;
        }
        for v in self.point_visibility.values() {
            range("point_visibility", *v, 0.0, 1.0)?;
        }
        for v in self.source_white_noise.values() {
            range("source_white_noise", *v, 0.0, 1.0)?;
        }
        Ok(())
    }

    pub fn efficiency_of(&self, photon: u8) -> f64 {
        *self.photon_efficiency.get(&photon).unwrap_or(&self.efficiency)
    }

    pub fn visibility_at(&self, point: &str) -> f64 {
        *self.point_visibility.get(point).unwrap_or(&self.visibility)
    }

    pub fn white_noise_of(&self, source: &str) -> f64 {
        *self.source_white_noise.get(source).unwrap_or(&self.white_noise)
    }
}

/// A place where two photons are meant to interfere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlapPoint {
    Pbs(PbsGate),
    Pcm(CpbsDevice),
}

/// One branch of [`apply_visibility`].
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityBranch {
    /// Detector mask for PCM branches (see [`crate::pcm::classify`]); zero
    /// for PBS branches.
    pub clicks: u8,
    pub label: Option<BranchLabel>,
    /// PBS branches keep the register; PCM branches remove both photons.
    pub state: PureState,
    pub weight: f64,
    pub coherent: bool,
}

/// Splits `state` at an overlap point into the interfering branches (total
/// weight `v`) and the distinguishable-photon branches (weight `1 - v`).
/// Weights are branch probabilities; zero-probability branches are dropped.
pub fn apply_visibility(state: &PureState, point: OverlapPoint, v: f64) -> Result<Vec<VisibilityBranch>> {
    range("visibility", v, 0.0, 1.0)?;
    let mut out = Vec::new();
    match point {
        OverlapPoint::Pbs(gate) => {
            if v > 0.0 {
                if let Selection::Kept { state, probability } = pbs_postselect(state, gate)? {
                    out.push(VisibilityBranch {
                        clicks: 0,
                        label: None,
                        state,
                        weight: v * probability,
                        coherent: true,
                    });
                }
            }
            if v < 1.0 {
                for k in [kets::H, kets::V] {
                    let proj = Projector::local(alloc::vec![(gate.qubit_a, k), (gate.qubit_b, k)]);
                    if let Selection::Kept { state, probability } = state.project(&proj)? {
                        out.push(VisibilityBranch {
                            clicks: 0,
                            label: None,
                            state,
                            weight: (1.0 - v) * probability,
                            coherent: false,
                        });
                    }
                }
            }
        }
        OverlapPoint::Pcm(dev) => {
            if v > 0.0 {
                for b in cpbs_apply(state, dev)? {
                    if let Selection::Kept { state, probability } = b.outcome {
                        out.push(VisibilityBranch {
                            clicks: b.label.clicks(),
                            label: Some(b.label),
                            state,
                            weight: v * probability,
                            coherent: true,
                        });
                    }
                }
            }
            if v < 1.0 {
                distinguishable_pcm(state, dev, 1.0 - v, &mut out)?;
            }
        }
    }
    Ok(out)
}

/// Without interference each photon is analyzed in D/A independently: `D`
/// on the left input and `A` on the right exit left (and vice versa), and
/// every photon lands on either detector of its port with probability 1/2.
fn distinguishable_pcm(state: &PureState, dev: CpbsDevice, scale: f64, out: &mut Vec<VisibilityBranch>) -> Result<()> {
    let pair = |a: [C64; 2], b: [C64; 2]| [a[0] * b[0], a[1] * b[0], a[0] * b[1], a[1] * b[1]];
    let cases: [([C64; 2], [C64; 2], &[(u8, Option<BranchLabel>, f64)]); 4] = [
        (kets::D, kets::D, COINC),
        (kets::A, kets::A, COINC),
        (kets::D, kets::A, LEFT),
        (kets::A, kets::D, RIGHT),
    ];
    for (ka, kb, outcomes) in cases {
        let sel = state.project_out(&[dev.qubit_a, dev.qubit_b], &pair(ka, kb))?;
        if let Selection::Kept { state: s, probability } = sel {
            for &(clicks, label, share) in outcomes {
                out.push(VisibilityBranch {
                    clicks,
                    label,
                    state: s.clone(),
                    weight: scale * probability * share,
                    coherent: false,
                });
            }
        }
    }
    Ok(())
}

const COINC: &[(u8, Option<BranchLabel>, f64)] = &[
    (0b0101, Some(BranchLabel::CoincHH), 0.25),
    (0b1001, Some(BranchLabel::CoincHV), 0.25),
    (0b0110, Some(BranchLabel::CoincVH), 0.25),
    (0b1010, Some(BranchLabel::CoincVV), 0.25),
];
const LEFT: &[(u8, Option<BranchLabel>, f64)] = &[(0b0001, Some(BranchLabel::BothLeft), 0.5), (0b0011, None, 0.5)];
const RIGHT: &[(u8, Option<BranchLabel>, f64)] = &[(0b0100, Some(BranchLabel::BothRight), 0.5), (0b1100, None, 0.5)];

/// Four-photon GHZ state made by a PBS (visibility `v`) on one photon of
/// each of two pairs, each pair `(1-λ)|Φ+><Φ+| + λ I/4`. Qubits are the
/// photons 5, 6, 7, 8 of the repeater, the PBS acting on qubits 0 and 2.
pub fn noisy_ghz4(v: f64, lambda: f64) -> Result<DensityMatrix> {
    range("visibility", v, 0.0, 1.0)?;
    range("white_noise", lambda, 0.0, 1.0)?;
    let mut pair: Vec<(f64, PureState)> = Vec::new();
    if lambda < 1.0 {
        pair.push((1.0 - lambda, PureState::phi_plus()));
    }
    if lambda > 0.0 {
        for bits in 0..4 {
            pair.push((lambda / 4.0, PureState::basis(2, bits)?));
        }
    }
    let gate = PbsGate { qubit_a: 0, qubit_b: 2 };
    let mut items = Vec::new();
    for (wa, a) in &pair {
        for (wb, b) in &pair {
            for br in apply_visibility(&a.tensor(b)?, OverlapPoint::Pbs(gate), v)? {
                items.push((wa * wb * br.weight, br.state));
            }
        }
    }
    DensityMatrix::from_ensemble(&items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pcm::{classify, PcmTag};

    fn two_pairs() -> PureState {
        PureState::phi_plus().tensor(&PureState::phi_plus()).unwrap()
    }

    #[test]
    fn full_visibility_is_the_ideal_gate() {
        let b = apply_visibility(&two_pairs(), OverlapPoint::Pbs(PbsGate { qubit_a: 0, qubit_b: 2 }), 1.0).unwrap();
        assert_eq!(b.len(), 1);
        assert!(b[0].coherent && (b[0].weight - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ghz_fidelity_follows_visibility() {
        let ghz = PureState::ghz(4, 1.0).unwrap();
        for v in [0.0, 0.3, 0.8, 1.0] {
            let b = apply_visibility(&two_pairs(), OverlapPoint::Pbs(PbsGate { qubit_a: 0, qubit_b: 2 }), v).unwrap();
            let total: f64 = b.iter().map(|x| x.weight).sum();
            assert!((total - 0.5).abs() < 1e-12);
            let items: Vec<_> = b.iter().map(|x| (x.weight, x.state.clone())).collect();
            let rho = DensityMatrix::from_ensemble(&items).unwrap();
            assert!((rho.fidelity(&ghz).unwrap() - (1.0 + v) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn probability_is_conserved_at_a_pcm() {
        let s = PureState::from_amplitudes(
            (0..8)
                .map(|k| C64::new(libm::cos(1.3 * k as f64), libm::sin(0.7 * k as f64)))
                .collect(),
        )
        .unwrap();
        for v in [0.0, 0.25, 0.5, 1.0] {
            let b = apply_visibility(&s, OverlapPoint::Pcm(CpbsDevice { qubit_a: 2, qubit_b: 0 }), v).unwrap();
            let total: f64 = b.iter().map(|x| x.weight).sum();
            assert!((total - 1.0).abs() < 1e-10, "v={v}");
        }
    }

    #[test]
    fn zero_visibility_bell_tags_are_classical() {
        // With distinguishable photons Φ+ gives Φ+ and Ψ+ tags equally often.
        let b = apply_visibility(
            &PureState::phi_plus(),
            OverlapPoint::Pcm(CpbsDevice { qubit_a: 0, qubit_b: 1 }),
            0.0,
        )
        .unwrap();
        let mut tags = [0.0; 5];
        for x in &b {
            tags[classify(x.clicks).tag.index()] += x.weight;
        }
        assert!((tags[PcmTag::BellPhiPlus.index()] - 0.5).abs() < 1e-12);
        assert!((tags[PcmTag::BellPsiPlus.index()] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn noisy_ghz_limits() {
        let ghz = PureState::ghz(4, 1.0).unwrap();
        assert!((noisy_ghz4(1.0, 0.0).unwrap().fidelity(&ghz).unwrap() - 1.0).abs() < 1e-12);
        assert!((noisy_ghz4(0.6, 0.0).unwrap().fidelity(&ghz).unwrap() - 0.8).abs() < 1e-12);
        let mut last = 1.0;
        for k in 1..=5 {
            let f = noisy_ghz4(1.0, 0.1 * k as f64).unwrap().fidelity(&ghz).unwrap();
            assert!(f < last);
            last = f;
        }
    }
}
