//! Fits PCM visibility and GHZ white noise to measured fidelities, checks
//! them by simulated tomography and predicts the final-pair fidelities.

use std::collections::BTreeMap;

use aprsim_core::network::Method;
use aprsim_core::noise::{noisy_ghz4, NoiseModel};
use aprsim_core::pcm::{ideal_povm, PcmTag};
use aprsim_core::quantum::PureState;
use aprsim_core::tomography::{mle_povm, mle_state, povm_fidelity, simulate_detector, simulate_full};
use serde::Serialize;
use serde_json::json;

use crate::cli::CalibrateArgs;
use crate::commands::{derive_seed, network_pairs, overall, pair_fidelities};
use crate::config::Config;
use crate::error::CliError;
use crate::report::{num, Format, Output, Table};

const PAIR_ORDER: [[u8; 2]; 4] = [[1, 11], [4, 11], [1, 10], [4, 10]];

/// Fidelities of the `Φ+` and `Ψ+` elements of an ideal PCM of visibility `v`.
pub fn pcm_fidelities(v: f64) -> Result<(f64, f64), CliError> {
    let povm = ideal_povm(v)?;
    Ok((
        povm_fidelity(povm.element(PcmTag::BellPhiPlus), &PureState::phi_plus())?,
        povm_fidelity(povm.element(PcmTag::BellPsiPlus), &PureState::psi_plus())?,
    ))
}

/// Least-squares visibility for the two measured element fidelities, by
/// golden-section search on [0, 1].
pub fn fit_pcm_visibility(phi: f64, psi: f64) -> Result<f64, CliError> {
    let cost = |v: f64| -> Result<f64, CliError> {
        let (a, b) = pcm_fidelities(v)?;
        Ok((a - phi).powi(2) + (b - psi).powi(2))
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (cost(x1)?, cost(x2)?);
    while hi - lo > 1e-10 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2)?;
        }
    }
    Ok((lo + hi) / 2.0)
}

/// White noise on each pair that gives the GHZ state fidelity `target` at
/// PBS visibility `v`. Fidelity falls monotonically in the noise, so
/// bisection suffices.
pub fn fit_ghz_white_noise(target: f64, v: f64) -> Result<f64, CliError> {
    let ghz = PureState::ghz(4, 1.0)?;
    let f = |l: f64| -> Result<f64, CliError> { Ok(noisy_ghz4(v, l)?.fidelity(&ghz)?) };
    let (f0, f1) = (f(0.0)?, f(1.0)?);
    if target > f0 || target < f1 {
        return Err(CliError::Config(format!(
            "GHZ fidelity {target} unreachable at visibility {v}: range [{f1:.6}, {f0:.6}]"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-12 {
        let mid = (lo + hi) / 2.0;
        if f(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / 2.0)
}

/// Network noise implied by the fitted parameters.
pub fn calibrated_noise(cfg: &Config, v_pcm: f64, v_pbs: f64, lambda: f64) -> NoiseModel {
    let layout = &cfg.layouts.all_photonic;
    let mut point_visibility: BTreeMap<String, f64> = layout
        .pcms()
        .into_iter()
        .map(|(name, _, _)| (name.to_string(), v_pcm))
        .collect();
    for p in layout.overlap_points() {
        point_visibility.entry(p.to_string()).or_insert(v_pbs);
    }
    let source_white_noise = layout
        .sources
        .iter()
        .filter(|s| s.heralded)
        .map(|s| (s.name.clone(), lambda))
        .collect();
    NoiseModel {
        efficiency: cfg.calibration.network_efficiency,
        photon_efficiency: BTreeMap::new(),
        visibility: 1.0,
        point_visibility,
        include_multi_pair: cfg.calibration.network_multi_pair,
        white_noise: 0.0,
        source_white_noise,
    }
}

#[derive(Debug, Serialize)]
struct PairPrediction {
    pair: [u8; 2],
    predicted: f64,
    measured: Option<f64>,
}

pub fn calibrate(cfg: &Config, a: &CalibrateArgs, seed: u64) -> Result<Output, CliError> {
    let cal = &cfg.calibration;
    let shots = match a.shots.unwrap_or(cfg.tomography.shots) {
        0 => return Err(CliError::Config("--shots must be at least 1".into())),
        s => s,
    };
    let mut summary = Table::new(&["quantity", "fitted", "reconstructed", "measured"]);
    let mut not_converged = Vec::new();

    let v_pcm = fit_pcm_visibility(cal.povm_phi_plus, cal.povm_psi_plus)?;
    let (phi_fit, psi_fit) = pcm_fidelities(v_pcm)?;
    let det = mle_povm(&simulate_detector(&ideal_povm(v_pcm)?, shots, derive_seed(seed, 0))?)?;
    if !det.converged {
        not_converged.push("detector reconstruction");
    }
    let phi_rec = povm_fidelity(det.estimate.element(PcmTag::BellPhiPlus), &PureState::phi_plus())?;
    let psi_rec = povm_fidelity(det.estimate.element(PcmTag::BellPsiPlus), &PureState::psi_plus())?;
    summary.push(vec![
        "pcm_visibility".into(),
        format!("{v_pcm:.6}"),
        "-".into(),
        "-".into(),
    ]);
    summary.push(vec![
        "povm_phi_plus".into(),
        format!("{phi_fit:.4}"),
        format!("{phi_rec:.4}"),
        num(cal.povm_phi_plus),
    ]);
    summary.push(vec![
        "povm_psi_plus".into(),
        format!("{psi_fit:.4}"),
        format!("{psi_rec:.4}"),
        num(cal.povm_psi_plus),
    ]);

    let v_pbs = cfg.tomography.ghz_visibility;
    let lambda = fit_ghz_white_noise(cal.ghz4_fidelity, v_pbs)?;
    let ghz = PureState::ghz(4, 1.0)?;
    let rho = noisy_ghz4(v_pbs, lambda)?;
    let ghz_fit = rho.fidelity(&ghz)?;
    let st = mle_state(&simulate_full(&rho, shots, derive_seed(seed, 1))?)?;
    if !st.converged {
        not_converged.push("state reconstruction");
    }
    let ghz_rec = st.estimate.fidelity(&ghz)?;
    summary.push(vec![
        "ghz_white_noise".into(),
        format!("{lambda:.6}"),
        "-".into(),
        "-".into(),
    ]);
    summary.push(vec![
        "ghz4_fidelity".into(),
        format!("{ghz_fit:.4}"),
        format!("{ghz_rec:.4}"),
        num(cal.ghz4_fidelity),
    ]);

    let mut results = json!({
        "shots": shots,
        "pcm": {
            "visibility": v_pcm,
            "phi_plus": { "fitted": phi_fit, "reconstructed": phi_rec, "measured": cal.povm_phi_plus },
            "psi_plus": { "fitted": psi_fit, "reconstructed": psi_rec, "measured": cal.povm_psi_plus },
            "iterations": det.iterations,
            "converged": det.converged,
        },
        "ghz4": {
            "pbs_visibility": v_pbs,
            "white_noise": lambda,
            "fitted": ghz_fit,
            "reconstructed": ghz_rec,
            "measured": cal.ghz4_fidelity,
            "iterations": st.iterations,
            "converged": st.converged,
        },
    });

    let mut notes = Vec::new();
    if !a.no_network {
        let noise = calibrated_noise(cfg, v_pcm, v_pbs, lambda);
        let (_, pairs) = network_pairs(&cfg.layouts.all_photonic, cfg, &noise, Method::Enumerate, 0, 0)?;
        let fids = pair_fidelities(&pairs, 0, 0)?;
        let mut preds = Vec::new();
        for (k, want) in PAIR_ORDER.iter().enumerate() {
            let Some(f) = fids.iter().find(|f| f.pair == *want) else {
                continue;
            };
            let measured = cal.pair_fidelities.get(k).copied();
            summary.push(vec![
                format!("pair_{}&{}", want[0], want[1]),
                format!("{:.4}", f.pauli_fidelity),
                "-".into(),
                measured.map_or("-".into(), num),
            ]);
            preds.push(PairPrediction {
                pair: *want,
                predicted: f.pauli_fidelity,
                measured,
            });
        }
        let total = overall(&fids);
        summary.push(vec![
            "overall_fidelity".into(),
            format!("{total:.4}"),
            "-".into(),
            num(cal.overall_fidelity),
        ]);
        results["network"] = json!({
            "noise": noise,
            "pairs": preds,
            "overall": { "predicted": total, "measured": cal.overall_fidelity },
        });
        notes.push(format!(
            "network prediction at efficiency {}, multi-pair {}",
            cal.network_efficiency,
            if cal.network_multi_pair { "on" } else { "off" }
        ));
    }

    let mut out = Output::new(results, summary.clone(), Format::Json);
    out.notes = notes;
    if !not_converged.is_empty() {
        out.not_converged = Some(format!("{} hit the iteration cap", not_converged.join(" and ")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visibility_fit_recovers_its_own_output() {
        let (a, b) = pcm_fidelities(0.7).unwrap();
        assert!((fit_pcm_visibility(a, b).unwrap() - 0.7).abs() < 1e-6);
    }

    #[test]
    fn white_noise_fit_hits_the_target() {
        let l = fit_ghz_white_noise(0.896, 1.0).unwrap();
        let f = noisy_ghz4(1.0, l)
            .unwrap()
            .fidelity(&PureState::ghz(4, 1.0).unwrap())
            .unwrap();
        assert!((f - 0.896).abs() < 1e-9);
        assert!(fit_ghz_white_noise(0.99, 0.5).is_err());
    }
}
