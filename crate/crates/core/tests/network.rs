use std::collections::BTreeMap;

use aprsim_core::network::*;
use aprsim_core::noise::NoiseModel;
use aprsim_core::pcm::PcmTag;
use aprsim_core::quantum::PureState;
use aprsim_core::source::{EmissionSeries, SourceModel};

const PS: [f64; 4] = [0.01, 0.0344, 0.0483, 0.1];

/// Lossless detectors, perfect interference, single pairs only.
fn clean() -> NoiseModel {
    NoiseModel {
        include_multi_pair: false,
        ..NoiseModel::ideal()
    }
}

fn r_theory(p: f64) -> f64 {
    2.0 - 4.0 * p + 2.0 * p * p
}

fn layouts() -> [ExperimentLayout; 3] {
    [
        layout_all_photonic_2x2(),
        layout_conventional_2x2(Channel::Upper),
        layout_conventional_2x2(Channel::Lower),
    ]
}

fn enumerate(layout: &ExperimentLayout, src: &SourceModel, noise: &NoiseModel) -> RunResult {
    run_enumerate(&Network::new(layout, src, noise).unwrap(), DEFAULT_BUDGET).unwrap()
}

fn ratio_enumerated(src: &SourceModel, noise: &NoiseModel) -> f64 {
    let [a, u, l] = layouts().map(|x| enumerate(&x, src, noise).success);
    rate_ratio(&a, &u, &l).value
}

/// Probability-weighted corrected fidelity over all records.
fn mean_fidelity(r: &RunResult, table: &[FinalPairRow]) -> f64 {
    let (mut f, mut w) = (0.0, 0.0);
    for rec in &r.records {
        let rho = corrected_state(rec, table).unwrap();
        f += rec.probability.value * rho.fidelity(&PureState::phi_plus()).unwrap();
        w += rec.probability.value;
    }
    f / w
}

#[test]
fn ratio_law_by_enumeration() {
    for p in PS {
        let r = ratio_enumerated(&SourceModel::with_p(p), &clean());
        assert!((r - r_theory(p)).abs() < 1e-6, "p={p}: {r} vs {}", r_theory(p));
    }
}

#[test]
fn ratio_law_by_sampling() {
    for (i, p) in PS.into_iter().enumerate() {
        let src = SourceModel::with_p(p);
        let [a, u, l] = layouts()
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let net = Network::new(x, &src, &clean()).unwrap();
                run_sample(&net, 1_000_000, 100 + 10 * i as u64 + k as u64)
                    .unwrap()
                    .success
            })
            .collect::<Vec<_>>()
            .try_into()
            .unwrap();
        let r = rate_ratio(&a, &u, &l);
        assert!(r.std_error > 0.0);
        let z = (r.value - r_theory(p)) / r.std_error;
        assert!(z.abs() <= 3.0, "p={p}: {} ± {} (z={z:.2})", r.value, r.std_error);
    }
}

#[test]
fn leading_order_ratio_is_two() {
    let src = SourceModel {
        series: EmissionSeries::LeadingOrder,
        ..SourceModel::with_p(0.0344)
    };
    let r = ratio_enumerated(&src, &clean());
    assert!((r - 2.0).abs() < 1e-12, "{r}");
}

#[test]
fn ratio_tends_to_two_for_small_p() {
    let r = ratio_enumerated(&SourceModel::with_p(1e-6), &clean());
    assert!((r - 2.0).abs() < 1e-5);
}

#[test]
fn sampling_matches_enumeration_on_every_layout() {
    let shipped = [
        layout_all_photonic_2x2(),
        layout_conventional_2x2(Channel::Upper),
        layout_conventional_2x2(Channel::Lower),
        layout_conventional_2x2(Channel::Both),
    ];
    let noise = NoiseModel::ideal();
    for layout in &shipped {
        for (i, p) in [0.01, 0.0344, 0.1].into_iter().enumerate() {
            let net = Network::new(layout, &SourceModel::with_p(p), &noise).unwrap();
            let exact = run_enumerate(&net, DEFAULT_BUDGET).unwrap().success.value;
            let est = run_sample(&net, 1_000_000, 7 + i as u64).unwrap().success;
            let z = (est.value - exact) / est.std_error;
            assert!(
                z.abs() <= 3.0,
                "{} p={p}: {} vs {exact} (z={z:.2})",
                layout.name,
                est.value
            );
        }
    }
}

#[test]
fn sampling_is_deterministic() {
    let net = Network::new(&layout_all_photonic_2x2(), &SourceModel::default(), &clean()).unwrap();
    let a = run_sample(&net, 50_000, 3).unwrap();
    let b = run_sample(&net, 50_000, 3).unwrap();
    assert_eq!(a, b);
    let c = run_sample(&net, 50_000, 4).unwrap();
    assert_ne!(a.success.value, c.success.value);
}

#[test]
fn enumeration_reports_zero_error() {
    let r = enumerate(
        &layout_conventional_2x2(Channel::Upper),
        &SourceModel::default(),
        &clean(),
    );
    assert_eq!(r.method, Method::Enumerate);
    assert_eq!(r.success.std_error, 0.0);
    assert!(r.records.iter().all(|x| x.probability.std_error == 0.0));
}

#[test]
fn budget_guard_advises_sampling() {
    let net = Network::new(
        &layout_all_photonic_2x2(),
        &SourceModel::default(),
        &NoiseModel::default(),
    )
    .unwrap();
    let err = run_enumerate(&net, 1000).unwrap_err();
    assert!(matches!(err, aprsim_core::Error::BudgetExceeded { .. }));
    assert!(err.to_string().contains("sampling"));
}

fn pcm_pattern(row: &FinalPairRow) -> BTreeMap<String, bool> {
    row.outcomes
        .iter()
        .filter_map(|(k, o)| match o {
            DeviceOutcome::Pcm(t) => Some((k.clone(), t.is_bell())),
            _ => None,
        })
        .collect()
}

#[test]
fn table_rows_have_ideal_fidelity_one() {
    for layout in layouts().into_iter().chain([layout_conventional_2x2(Channel::Both)]) {
        let table = final_pair_table(&layout).unwrap();
        assert!(!table.is_empty());
        let r = enumerate(&layout, &SourceModel::default(), &clean());
        for row in &table {
            assert!((row.fidelity - 1.0).abs() < 1e-10, "{}: {row:?}", layout.name);
            let rec = r
                .records
                .iter()
                .find(|x| x.herald == row.herald && x.outcomes == row.outcomes && x.pair == row.pair)
                .unwrap_or_else(|| panic!("{}: no record for {row:?}", layout.name));
            let f = corrected_fidelity(rec, &table).unwrap();
            assert!((f - 1.0).abs() < 1e-10, "{}: {f}", layout.name);
        }
    }
}

#[test]
fn table_partitions_the_success_set() {
    for layout in layouts() {
        let table = final_pair_table(&layout).unwrap();
        let r = enumerate(&layout, &SourceModel::default(), &clean());
        let mut total = 0.0;
        for rec in &r.records {
            let hits = table
                .iter()
                .filter(|x| x.herald == rec.herald && x.outcomes == rec.outcomes && x.pair == rec.pair)
                .count();
            assert_eq!(hits, 1, "{}: {:?}", layout.name, rec.outcomes);
            assert!(layout.final_candidates.contains(&rec.pair));
            total += rec.probability.value;
        }
        assert!((total - r.success.value).abs() <= 1e-12 * r.success.value.max(1e-300));
    }
}

#[test]
fn table_is_injective_per_node_pattern() {
    let table = final_pair_table(&layout_all_photonic_2x2()).unwrap();
    let mut seen: BTreeMap<BTreeMap<String, bool>, [PhotonId; 2]> = BTreeMap::new();
    for row in &table {
        let pair = *seen.entry(pcm_pattern(row)).or_insert(row.pair);
        assert_eq!(pair, row.pair, "{row:?}");
    }
    assert_eq!(seen.len(), 4);
    let bells = |a: &str, b: &str| -> [PhotonId; 2] {
        *seen
            .iter()
            .find(|(k, _)| k.iter().filter(|(_, &bell)| bell).map(|(n, _)| n.as_str()).eq([a, b]))
            .unwrap()
            .1
    };
    assert_eq!(bells("pcm_2_6", "pcm_8_12"), [1, 11]);
    assert_eq!(bells("pcm_3_7", "pcm_5_9"), [4, 10]);
    assert_eq!(bells("pcm_2_6", "pcm_5_9"), [1, 10]);
    assert_eq!(bells("pcm_3_7", "pcm_8_12"), [4, 11]);
}

#[test]
fn two_bells_at_one_node_never_herald() {
    let table = final_pair_table(&layout_all_photonic_2x2()).unwrap();
    for row in &table {
        let bell = |n: &str| matches!(row.outcomes[n], DeviceOutcome::Pcm(t) if t.is_bell());
        assert!(!(bell("pcm_2_6") && bell("pcm_3_7")));
        assert!(!(bell("pcm_5_9") && bell("pcm_8_12")));
        assert!(row
            .outcomes
            .values()
            .all(|o| *o != DeviceOutcome::Pcm(PcmTag::NoDecision)));
    }
}

#[test]
fn fidelity_decreases_with_visibility_loss() {
    let layout = layout_all_photonic_2x2();
    let table = final_pair_table(&layout).unwrap();
    let mut last = f64::INFINITY;
    for v in [1.0, 0.95, 0.9, 0.85, 0.8] {
        let noise = NoiseModel {
            visibility: v,
            ..clean()
        };
        let f = mean_fidelity(&enumerate(&layout, &SourceModel::default(), &noise), &table);
        assert!(f <= last + 1e-12, "v={v}: {f} > {last}");
        last = f;
    }
    assert!(last < 0.9);
}

#[test]
fn fidelity_decreases_with_white_noise() {
    let layout = layout_all_photonic_2x2();
    let table = final_pair_table(&layout).unwrap();
    let mut last = f64::INFINITY;
    for lambda in [0.0, 0.05, 0.1, 0.15, 0.2] {
        let noise = NoiseModel {
            white_noise: lambda,
            ..clean()
        };
        let f = mean_fidelity(&enumerate(&layout, &SourceModel::default(), &noise), &table);
        assert!(f <= last + 1e-12, "λ={lambda}: {f} > {last}");
        last = f;
    }
    assert!(last < 0.9);
}

#[test]
fn fidelity_decreases_with_loss() {
    let layout = layout_all_photonic_2x2();
    let table = final_pair_table(&layout).unwrap();
    let mut last = f64::INFINITY;
    for eta in [1.0, 0.85, 0.7, 0.55, 0.38] {
        let noise = NoiseModel {
            efficiency: eta,
            ..NoiseModel::default()
        };
        let f = mean_fidelity(&enumerate(&layout, &SourceModel::default(), &noise), &table);
        assert!(f <= last + 1e-12, "η={eta}: {f} > {last}");
        last = f;
    }
}

#[test]
fn pair_states_of_the_ideal_run() {
    let layout = layout_all_photonic_2x2();
    let table = final_pair_table(&layout).unwrap();
    let r = enumerate(&layout, &SourceModel::default(), &clean());
    let pairs = pair_states(&r, &table, &layout.final_candidates).unwrap();
    assert_eq!(
        pairs.iter().map(|x| x.pair).collect::<Vec<_>>(),
        layout.final_candidates
    );
    let total: f64 = pairs.iter().map(|x| x.probability).sum();
    assert!((total - r.success.value).abs() < 1e-12 * r.success.value);
    for x in &pairs {
        assert!((x.state.fidelity(&PureState::phi_plus()).unwrap() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn mismatched_conventional_pair_is_uncorrelated() {
    let layout = layout_conventional_2x2(Channel::Upper).with_pair([1, 10]).unwrap();
    let table = final_pair_table(&layout).unwrap();
    let r = enumerate(&layout, &SourceModel::default(), &clean());
    let pairs = pair_states(&r, &table, &layout.final_candidates).unwrap();
    assert_eq!(pairs.len(), 1);
    let rho = &pairs[0].state;
    for p in rho.probabilities() {
        assert!((p - 0.25).abs() < 1e-10);
    }
    assert!((rho.fidelity(&PureState::phi_plus()).unwrap() - 0.25).abs() < 1e-10);
}

#[test]
fn with_pair_rejects_registered_photons() {
    assert!(layout_conventional_2x2(Channel::Upper).with_pair([1, 7]).is_err());
}

#[test]
fn scaling_law_is_m_to_the_n() {
    for m in 2..=4u32 {
        for n in 1..=3u32 {
            for eta in [1.0, 0.9, 0.38] {
                let c = rate_formula(m, n, eta, Scheme::Conventional).unwrap();
                let a = rate_formula(m, n, eta, Scheme::AllPhotonic).unwrap();
                assert!((a / c - (m as f64).powi(n as i32)).abs() < 1e-12 * a / c);
            }
        }
    }
    assert_eq!(rate_formula(2, 1, 1.0, Scheme::Conventional).unwrap(), 2.0);
    assert_eq!(rate_formula(2, 1, 1.0, Scheme::AllPhotonic).unwrap(), 4.0);
    assert_eq!(rate_formula(2, 1, 0.5, Scheme::Conventional).unwrap(), 0.5);
    assert_eq!(rate_formula(2, 1, 0.5, Scheme::AllPhotonic).unwrap(), 1.0);
    assert_eq!(rate_formula(5, 0, 1.0, Scheme::AllPhotonic).unwrap(), 5.0);
    assert!(rate_formula(0, 1, 0.5, Scheme::Conventional).is_err());
    assert!(rate_formula(2, 1, 0.0, Scheme::Conventional).is_err());
    assert!(rate_formula(2, 1, 1.5, Scheme::Conventional).is_err());
}

#[test]
fn twelve_fold_z_distribution() {
    for v in [0.0, 0.3, 0.7, 1.0] {
        let d = twelve_fold_zbasis(v).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].0, "0".repeat(12));
        assert_eq!(d[1].0, "1".repeat(12));
        assert!((d[0].1 - 0.5).abs() < 1e-12 && (d[1].1 - 0.5).abs() < 1e-12);
    }
}
