//! Outcome-to-pair table from qubit-level propagation of the ideal
//! single-pair events.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::layout::{Basis, Device, Element, ExperimentLayout, PhotonId, Rule};
use super::{DeviceOutcome, FinalPairRecord, RunResult};
use crate::linalg::Matrix;
use crate::optics::{pbs_postselect, PbsGate};
use crate::pcm::{apply_outcome, PcmOutcome, PcmTag};
use crate::quantum::{kets, DensityMatrix, Pauli, PureState, Selection, MAX_DENSITY_QUBITS};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FinalPairRow {
    pub herald: String,
    pub outcomes: BTreeMap<String, DeviceOutcome>,
    pub pair: [PhotonId; 2],
    pub correction: Pauli,
    /// Photon the correction acts on; `None` when neither pair photon is a
    /// correction target.
    pub target: Option<PhotonId>,
    /// Probability of the pattern given that the sources it needs each
    /// delivered one pair.
    pub probability: f64,
    /// Fidelity to `|Φ+>` after the correction.
    pub fidelity: f64,
}

#[derive(Debug, Clone)]
struct Assignment {
    outcomes: Vec<(usize, DeviceOutcome)>,
    chosen: Vec<usize>,
    /// Devices of each party rule.
    parties: Vec<Vec<usize>>,
}

fn rule_choices(layout: &ExperimentLayout, rule: &Rule) -> Vec<(Vec<(usize, DeviceOutcome)>, Option<usize>)> {
    let dev = |n: &str| layout.device(n).unwrap().0;
    match rule {
        Rule::Node { pcms, bells } => {
            let devs: Vec<usize> = pcms.iter().map(|n| dev(n)).collect();
            let n = devs.len();
            let mut out = Vec::new();
            for subset in 0..1u32 << n {
                if subset.count_ones() as usize != *bells {
                    continue;
                }
                for tags in 0..1u32 << n {
                    let v = devs
                        .iter()
                        .enumerate()
                        .map(|(j, &d)| {
                            let bit = tags >> j & 1 == 1;
                            let tag = match (subset >> j & 1 == 1, bit) {
                                (true, false) => PcmTag::BellPhiPlus,
                                (true, true) => PcmTag::BellPsiPlus,
                                (false, false) => PcmTag::SingleLeft,
                                (false, true) => PcmTag::SingleRight,
                            };
                            (d, DeviceOutcome::Pcm(tag))
                        })
                        .collect();
                    out.push((v, None));
                }
            }
            out
        }
        Rule::Click { analyzer } => {
            let d = dev(analyzer);
            (0..2).map(|k| (vec![(d, DeviceOutcome::Click(k))], None)).collect()
        }
        Rule::Party { finals } => finals.iter().map(|n| (Vec::new(), Some(dev(n)))).collect(),
    }
}

fn assignments(layout: &ExperimentLayout, rules: &[Rule]) -> Vec<Assignment> {
    let dev = |n: &str| layout.device(n).unwrap().0;
    let mut acc = vec![Assignment {
        outcomes: Vec::new(),
        chosen: Vec::new(),
        parties: Vec::new(),
    }];
    for r in rules {
        let choices = rule_choices(layout, r);
        let mut next = Vec::with_capacity(acc.len() * choices.len());
        for a in &acc {
            for (outs, party) in &choices {
                let mut b = a.clone();
                b.outcomes.extend(outs.iter().copied());
                if let (Some(f), Rule::Party { finals }) = (party, r) {
                    b.chosen.push(*f);
                    b.parties.push(finals.iter().map(|n| dev(n)).collect());
                }
                next.push(b);
            }
        }
        acc = next;
    }
    acc
}

fn consistent(layout: &ExperimentLayout, a: &Assignment, present: &dyn Fn(PhotonId) -> bool) -> bool {
    for e in &layout.elements {
        if let Element::Pbs { a: x, b: y, .. } = e {
            if present(*x) != present(*y) {
                return false;
            }
        }
    }
    for &(d, o) in &a.outcomes {
        match (&layout.devices[d], o) {
            (Device::Pcm { left, right, .. }, DeviceOutcome::Pcm(t)) => {
                let (l, r) = (present(*left), present(*right));
                let ok = if t.is_bell() { l && r } else { l != r };
                if !ok {
                    return false;
                }
            }
            (Device::Analyzer { path, .. }, _) => {
                if !present(*path) {
                    return false;
                }
            }
            _ => return false,
        }
    }
    for (party, &chosen) in a.parties.iter().zip(&a.chosen) {
        for &d in party {
            let path = layout.devices[d].paths()[0];
            if present(path) != (d == chosen) {
                return false;
            }
        }
    }
    true
}

fn take(sel: Result<Selection>, prob: &mut f64) -> Result<Option<PureState>> {
    match sel? {
        Selection::Kept { state, probability } => {
            *prob *= probability;
            Ok(Some(state))
        }
        Selection::Empty => Ok(None),
    }
}

/// Pair state and probability for one assignment, or `None` when the
/// pattern cannot occur.
fn propagate(layout: &ExperimentLayout, a: &Assignment, active: &[usize]) -> Result<Option<(DensityMatrix, f64)>> {
    let mut live: Vec<PhotonId> = Vec::new();
    let mut state: Option<PureState> = None;
    for &s in active {
        let pair = PureState::phi_plus();
        state = Some(match state {
            None => pair,
            Some(st) => st.tensor(&pair)?,
        });
        live.extend(layout.sources[s].photons);
    }
    let Some(mut state) = state else {
        return Ok(None);
    };
    let q = |live: &[PhotonId], p: PhotonId| live.iter().position(|&x| x == p);
    let mut prob = 1.0;
    for e in &layout.elements {
        match e {
            Element::Pbs { a: x, b: y, .. } => {
                if let (Some(qa), Some(qb)) = (q(&live, *x), q(&live, *y)) {
                    let sel = pbs_postselect(
                        &state,
                        PbsGate {
                            qubit_a: qa,
                            qubit_b: qb,
                        },
                    );
                    match take(sel, &mut prob)? {
                        Some(s) => state = s,
                        None => return Ok(None),
                    }
                }
            }
            Element::WavePlate { path, plate } => {
                if let Some(k) = q(&live, *path) {
                    state = state.apply_single(k, &plate.matrix())?;
                }
            }
        }
    }
    for &(d, o) in &a.outcomes {
        let (sel, gone) = match (&layout.devices[d], o) {
            (Device::Pcm { left, right, .. }, DeviceOutcome::Pcm(tag)) => {
                let (ql, qr) = (q(&live, *left), q(&live, *right));
                match (ql, qr) {
                    (Some(l), Some(r)) => (
                        apply_outcome(&state, l, Some(r), PcmOutcome::from_tag(tag), None),
                        vec![*left, *right],
                    ),
                    (Some(l), None) => (
                        apply_outcome(&state, l, None, PcmOutcome::from_tag(tag), None),
                        vec![*left],
                    ),
                    (None, Some(r)) => {
                        // a lone photon on the right input leaves by the
                        // opposite port for the same X eigenstate
                        let mirrored = match tag {
                            PcmTag::SingleLeft => PcmTag::SingleRight,
                            _ => PcmTag::SingleLeft,
                        };
                        (
                            apply_outcome(&state, r, None, PcmOutcome::from_tag(mirrored), None),
                            vec![*right],
                        )
                    }
                    (None, None) => return Ok(None),
                }
            }
            (Device::Analyzer { path, basis, .. }, DeviceOutcome::Click(k)) => {
                let ket = match (basis, k) {
                    (Basis::X, 0) => kets::D,
                    (Basis::X, _) => kets::A,
                    (Basis::Z, 0) => kets::H,
                    (Basis::Z, _) => kets::V,
                };
                let qa = q(&live, *path).ok_or_else(|| Error::Invalid("analyzer photon missing".into()))?;
                (state.project_out(&[qa], &ket), vec![*path])
            }
            _ => return Err(Error::Invalid("outcome does not match its device".into())),
        };
        match take(sel, &mut prob)? {
            Some(s) => state = s,
            None => return Ok(None),
        }
        live.retain(|p| !gone.contains(p));
    }
    if prob < 1e-12 {
        return Ok(None);
    }
    if live.len() > MAX_DENSITY_QUBITS {
        return Err(Error::Capacity {
            requested: live.len(),
            max: MAX_DENSITY_QUBITS,
        });
    }
    let pair: Vec<usize> = a
        .chosen
        .iter()
        .map(|&d| q(&live, layout.devices[d].paths()[0]).unwrap())
        .collect();
    let rho = state.to_density()?.partial_trace(&pair)?;
    Ok(Some((rho, prob)))
}

/// Every outcome pattern that a herald accepts in the ideal single-pair
/// regime, with the entangled pair and the Pauli correction that maps it to
/// `|Φ+>`. Rows are in herald order, then rule order.
pub fn final_pair_table(layout: &ExperimentLayout) -> Result<Vec<FinalPairRow>> {
    layout.validate()?;
    let free: Vec<usize> = (0..layout.sources.len())
        .filter(|&s| !layout.sources[s].heralded)
        .collect();
    let mut subsets: Vec<u32> = (0..1u32 << free.len()).collect();
    subsets.sort_by_key(|s| (s.count_ones(), *s));
    let phi = PureState::phi_plus();
    let mut rows = Vec::new();
    for h in &layout.heralds {
        for a in assignments(layout, &h.rules) {
            let found = subsets.iter().find_map(|&mask| {
                let active: Vec<usize> = (0..layout.sources.len())
                    .filter(|&s| {
                        layout.sources[s].heralded
                            || free.iter().position(|&f| f == s).is_some_and(|j| mask >> j & 1 == 1)
                    })
                    .collect();
                let present = |p: PhotonId| layout.source_of(p).is_some_and(|(s, _)| active.contains(&s));
                consistent(layout, &a, &present).then_some(active)
            });
            let Some(active) = found else { continue };
            let Some((rho, probability)) = propagate(layout, &a, &active)? else {
                continue;
            };
            let pair = [0, 1].map(|j| layout.devices[a.chosen[j]].paths()[0]);
            let target = pair
                .iter()
                .rev()
                .copied()
                .find(|p| layout.correction_targets.contains(p));
            let qubit = target.map(|t| pair.iter().position(|&p| p == t).unwrap());
            let mut best = (Pauli::I, -1.0);
            for p in Pauli::ALL {
                let r = match qubit {
                    Some(k) => rho.rotate(k, &p.matrix())?,
                    None if p == Pauli::I => rho.clone(),
                    None => continue,
                };
                let f = r.fidelity(&phi)?;
                if f > best.1 + 1e-12 {
                    best = (p, f);
                }
            }
            rows.push(FinalPairRow {
                herald: h.name.clone(),
                outcomes: a
                    .outcomes
                    .iter()
                    .map(|&(d, o)| (String::from(layout.devices[d].name()), o))
                    .collect(),
                pair,
                correction: best.0,
                target,
                probability,
                fidelity: best.1,
            });
        }
    }
    Ok(rows)
}

fn row_for<'a>(record: &FinalPairRecord, table: &'a [FinalPairRow]) -> Option<&'a FinalPairRow> {
    table
        .iter()
        .find(|r| r.herald == record.herald && r.outcomes == record.outcomes && r.pair == record.pair)
}

/// Record state after the correction of its table row; the raw state when
/// no row matches.
pub fn corrected_state(record: &FinalPairRecord, table: &[FinalPairRow]) -> Result<DensityMatrix> {
    let Some(row) = row_for(record, table) else {
        return Ok(record.state.clone());
    };
    match row.target.and_then(|t| record.pair.iter().position(|&p| p == t)) {
        Some(k) => record.state.rotate(k, &row.correction.matrix()),
        None => Ok(record.state.clone()),
    }
}

/// Fidelity to `|Φ+>` of a record after the correction its table row
/// prescribes. `None` when no row matches the record.
pub fn corrected_fidelity(record: &FinalPairRecord, table: &[FinalPairRow]) -> Option<f64> {
    row_for(record, table)?;
    corrected_state(record, table)
        .ok()?
        .fidelity(&PureState::phi_plus())
        .ok()
}

/// Heralded pair after correction, averaged over outcome patterns.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub pair: [PhotonId; 2],
    /// Probability per pulse of heralding this pair.
    pub probability: f64,
    pub state: DensityMatrix,
}

/// Corrected states per final pair, weighted by record probability, in
/// order of first appearance among the layout's candidates (pairs outside
/// the candidate list follow in record order).
pub fn pair_states(result: &RunResult, table: &[FinalPairRow], candidates: &[[PhotonId; 2]]) -> Result<Vec<PairState>> {
    let mut order: Vec<[PhotonId; 2]> = candidates.to_vec();
    for r in &result.records {
        if !order.contains(&r.pair) {
            order.push(r.pair);
        }
    }
    let mut out = Vec::new();
    for pair in order {
        let mut acc: Option<Matrix> = None;
        let mut total = 0.0;
        for r in result.records.iter().filter(|r| r.pair == pair) {
            let w = r.probability.value;
            if w <= 0.0 {
                continue;
            }
            let rho = corrected_state(r, table)?;
            let m = acc.get_or_insert_with(|| Matrix::zeros(4, 4));
            m.add_scaled(rho.matrix(), C64::new(w, 0.0));
            total += w;
        }
        if let Some(m) = acc {
            out.push(PairState {
                pair,
                probability: total,
                state: DensityMatrix::from_matrix_unchecked(m.scale_re(1.0 / total))?,
            });
        }
    }
    Ok(out)
}
