use aprsim_core::linalg::Matrix;
use aprsim_core::pcm::{ideal_povm, PcmTag};
use aprsim_core::quantum::{DensityMatrix, PureState};
use aprsim_core::tomography::*;
use aprsim_core::Error;
use proptest::prelude::*;

fn ghz4() -> PureState {
    PureState::ghz(4, 1.0).unwrap()
}

/// GHZ state mixed with white noise down to fidelity `f`.
fn noisy_ghz4(f: f64) -> DensityMatrix {
    let p = (f - 1.0 / 16.0) / (15.0 / 16.0);
    ghz4().to_density().unwrap().depolarize(1.0 - p)
}

#[test]
fn ghz4_round_trip_from_ideal_counts() {
    let rho = ghz4().to_density().unwrap();
    let recs = simulate_full(&rho, 100_000, 11).unwrap();
    assert_eq!(recs.len(), 81);
    let est = mle_state(&recs).unwrap();
    assert!(est.converged);
    assert!(est.estimate.fidelity(&ghz4()).unwrap() >= 0.999);
    est.estimate.validate().unwrap();
}

#[test]
fn noisy_ghz4_fidelity_is_recovered() {
    let rho = noisy_ghz4(0.896);
    assert!((rho.fidelity(&ghz4()).unwrap() - 0.896).abs() < 1e-12);
    let est = mle_state(&simulate_full(&rho, 100_000, 12).unwrap()).unwrap();
    let f = est.estimate.fidelity(&ghz4()).unwrap();
    assert!((f - 0.896).abs() <= 0.01, "{f}");
}

#[test]
fn zero_counts_are_rank_deficient() {
    let recs: Vec<TomographyRecord> = TomographySetting::all(2)
        .into_iter()
        .map(|setting| TomographyRecord {
            setting,
            counts: vec![0; 4],
        })
        .collect();
    assert!(matches!(mle_state(&recs), Err(Error::RankDeficient(_))));
}

#[test]
fn counts_follow_the_born_rule() {
    let phi = PureState::phi_plus().to_density().unwrap();
    let xy = simulate_counts(&phi, &TomographySetting::parse("XY").unwrap(), 40_000, 2).unwrap();
    for c in &xy.counts {
        assert!((*c as f64 / 40_000.0 - 0.25).abs() < 0.01);
    }
    let mixed = DensityMatrix::maximally_mixed(2).unwrap();
    for s in TomographySetting::all(2) {
        let p = outcome_probabilities(&mixed, &s).unwrap();
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-12));
    }
    let a = simulate_counts(&phi, &TomographySetting::parse("ZZ").unwrap(), 1000, 9).unwrap();
    let b = simulate_counts(&phi, &TomographySetting::parse("ZZ").unwrap(), 1000, 9).unwrap();
    assert_eq!(a, b);
}

#[test]
fn reconstruction_error_shrinks_with_shots() {
    let target = PureState::psi_plus();
    let rho = target.to_density().unwrap().depolarize(0.3);
    let exact = rho.fidelity(&target).unwrap();
    let err = |shots: u64| -> f64 {
        (0..4)
            .map(|seed| {
                let est = mle_state(&simulate_full(&rho, shots, 100 + seed).unwrap()).unwrap();
                (est.estimate.fidelity(&target).unwrap() - exact).abs()
            })
            .sum::<f64>()
            / 4.0
    };
    let e = [err(1_000), err(10_000), err(100_000)];
    assert!(e[0] > e[1] && e[1] > e[2], "{e:?}");
}

fn povm_round_trip(v: f64) {
    let generator = ideal_povm(v).unwrap();
    let est = mle_povm(&simulate_detector(&generator, 100_000, 21).unwrap()).unwrap();
    let est = est.estimate;
    assert!(est.completeness_defect() < 1e-8);
    for tag in PcmTag::ALL {
        let g = generator.element(tag);
        let e = est.element(tag);
        if g.trace().re < 1e-9 {
            assert!(e.trace().re < 0.01, "{tag:?}");
            continue;
        }
        let f = operator_fidelity(g, e).unwrap();
        assert!(f >= 0.99, "v={v} {tag:?}: {f}");
    }
}

#[test]
fn pcm_povm_round_trip_ideal() {
    povm_round_trip(1.0);
}

#[test]
fn pcm_povm_round_trip_partial_visibility() {
    povm_round_trip(0.8);
}

#[test]
fn ideal_pcm_bell_elements() {
    let r = mle_povm(&simulate_detector(&ideal_povm(1.0).unwrap(), 1_000_000, 3).unwrap()).unwrap();
    let est = r.estimate;
    let phi = povm_fidelity(est.element(PcmTag::BellPhiPlus), &PureState::phi_plus()).unwrap();
    let psi = povm_fidelity(est.element(PcmTag::BellPsiPlus), &PureState::psi_plus()).unwrap();
    assert!(phi >= 0.999 && psi >= 0.999, "{phi} {psi}");
}

#[test]
fn incomplete_probes_are_rejected() {
    let mut data = simulate_detector(&ideal_povm(1.0).unwrap(), 100, 1).unwrap();
    data.retain(|p, _| p.labels[0] == ProbeLabel::H);
    assert!(matches!(mle_povm(&data), Err(Error::RankDeficient(_))));
}

#[test]
fn povm_fidelity_of_classical_element() {
    // v = 0: the Φ+ element is the D/A parity mixture, half of which
    // overlaps Φ+
    let m = ideal_povm(0.0).unwrap();
    let f = povm_fidelity(m.element(PcmTag::BellPhiPlus), &PureState::phi_plus()).unwrap();
    assert!((f - 0.5).abs() < 1e-12);
    assert_eq!(
        povm_fidelity(&Matrix::zeros(4, 4), &PureState::phi_plus()),
        Err(Error::ZeroTrace)
    );
}

fn random_state(seed: &[f64]) -> DensityMatrix {
    // ρ = A A† / tr with a 4x4 complex A
    let a = Matrix::from_fn(4, 4, |r, c| {
        aprsim_core::C64::new(seed[2 * (4 * r + c)], seed[2 * (4 * r + c) + 1])
    });
    let m = a.matmul(&a.dagger());
    let tr = m.trace().re;
    DensityMatrix::from_matrix(m.scale_re(1.0 / tr)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn pauli_fidelity_matches_state_fidelity(seed in prop::collection::vec(-1.0f64..1.0, 32)) {
        prop_assume!(seed.iter().any(|x| x.abs() > 1e-3));
        let rho = random_state(&seed);
        let e = |s: &str| rho.expectation(&s.parse().unwrap()).unwrap();
        let f = pauli_fidelity(e("XX"), e("YY"), e("ZZ")).unwrap();
        prop_assert!((f - rho.fidelity(&PureState::phi_plus()).unwrap()).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mle_output_is_always_physical(
        counts in prop::collection::vec(prop::collection::vec(0u64..50, 4), 9),
    ) {
        let recs: Vec<TomographyRecord> = TomographySetting::all(2)
            .into_iter()
            .zip(counts)
            .map(|(setting, counts)| TomographyRecord { setting, counts })
            .collect();
        if let Ok(est) = mle_state(&recs) {
            est.estimate.validate().unwrap();
        }
    }
}
