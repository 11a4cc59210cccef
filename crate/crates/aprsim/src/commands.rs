//! One function per subcommand. Each returns an [`Output`] and leaves
//! writing to the caller.

use aprsim_core::network::{
    final_pair_table, pair_states, rate_formula, rate_ratio, twelve_fold_zbasis, ExperimentLayout, Method, PairState,
    RunResult, Scheme,
};
use aprsim_core::noise::{noisy_ghz4, NoiseModel};
use aprsim_core::pcm::{false_bsm_rate, ideal_povm, PcmTag};
use aprsim_core::quantum::PureState;
use aprsim_core::rng::substream;
use aprsim_core::source::{twofold_rate, SourceModel, MAX_P};
use aprsim_core::tomography::{
    mle_povm, mle_state, multinomial, operator_fidelity, outcome_probabilities, pauli_fidelity, povm_fidelity,
    simulate_detector, simulate_full, LocalBasis, TomographySetting,
};
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use crate::calibrate::fit_ghz_white_noise;
use crate::cli::{FidelityArgs, Ghz4Args, PcmArgs, RatesArgs, RatioScanArgs, TableArgs, ZbasisArgs};
use crate::config::Config;
use crate::error::CliError;
use crate::par;
use crate::report::{num, Estimate, Format, MatrixJson, Output, Table};

/// Seed for work item `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    substream(seed, index).random()
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

#[derive(Debug, Serialize)]
struct RatioRow {
    p: f64,
    r_theory: f64,
    r_simulated: f64,
    std_error: f64,
    all_photonic: Estimate,
    upper: Estimate,
    lower: Estimate,
}

pub fn ratio_scan(cfg: &Config, a: &RatioScanArgs, seed: u64) -> Result<Output, CliError> {
    if !(0.0 <= a.p_min && a.p_min < a.p_max && a.p_max <= MAX_P) {
        return Err(config_err(format!("need 0 <= p_min < p_max <= {MAX_P}")));
    }
    if a.steps < 2 {
        return Err(config_err("--steps must be at least 2"));
    }
    let method = Method::from(a.method);
    if method == Method::Sample && a.trials == 0 {
        return Err(config_err("--trials must be at least 1"));
    }
    let layouts = [
        &cfg.layouts.all_photonic,
        &cfg.layouts.conventional_upper,
        &cfg.layouts.conventional_lower,
    ];
    let mut rows = Vec::new();
    let mut table = Table::new(&[
        "p",
        "r_theory",
        "r_simulated",
        "std_error",
        "rate_all_photonic",
        "rate_upper",
        "rate_lower",
    ]);
    for i in 0..a.steps {
        let p = a.p_min + (a.p_max - a.p_min) * i as f64 / (a.steps - 1) as f64;
        let src = SourceModel { p, ..cfg.source };
        let mut rates = Vec::new();
        for (k, layout) in layouts.iter().enumerate() {
            let net = par::build(layout, &src, &cfg.noise)?;
            let s = derive_seed(seed, (3 * i + k) as u64);
            rates.push(par::run(&net, method, a.trials, s, cfg.budget)?.success);
        }
        let r = rate_ratio(&rates[0], &rates[1], &rates[2]);
        let row = RatioRow {
            p,
            r_theory: 2.0 - 4.0 * p + 2.0 * p * p,
            r_simulated: r.value,
            std_error: r.std_error,
            all_photonic: (&rates[0]).into(),
            upper: (&rates[1]).into(),
            lower: (&rates[2]).into(),
        };
        table.push(vec![
            num(row.p),
            num(row.r_theory),
            num(row.r_simulated),
            num(row.std_error),
            num(rates[0].value),
            num(rates[1].value),
            num(rates[2].value),
        ]);
        rows.push(row);
    }
    let results = json!({
        "method": method.name(),
        "trials": (method == Method::Sample).then_some(a.trials),
        "rows": rows,
    });
    Ok(Output::new(results, table, Format::Csv))
}

pub fn rates(a: &RatesArgs) -> Result<Output, CliError> {
    let c = rate_formula(a.m, a.n, a.eta, Scheme::Conventional)?;
    let ap = rate_formula(a.m, a.n, a.eta, Scheme::AllPhotonic)?;
    let mut table = Table::new(&["m", "n", "eta", "conventional", "all_photonic", "ratio"]);
    table.push(vec![
        a.m.to_string(),
        a.n.to_string(),
        num(a.eta),
        num(c),
        num(ap),
        num(ap / c),
    ]);
    let results = json!({ "conventional": c, "all_photonic": ap, "ratio": ap / c });
    Ok(Output::new(results, table, Format::Json))
}

pub fn sources(cfg: &Config) -> Result<Output, CliError> {
    let src = &cfg.source;
    let w = src.pair_weights()?;
    let twofold = twofold_rate(src);
    let fb = false_bsm_rate(src)?;
    let mut table = Table::new(&["quantity", "value"]);
    for (k, x) in w.iter().enumerate() {
        table.push(vec![format!("w({k})"), num(*x)]);
    }
    table.push(vec!["twofold_rate_hz".into(), num(twofold)]);
    table.push(vec!["false_bsm_rate".into(), num(fb.rate)]);
    let results = json!({
        "series": src.series.name(),
        "pair_weights": w,
        "twofold_rate_hz": twofold,
        "false_bsm": { "rate": fb.rate, "accepted": fb.accepted, "wrong": fb.wrong },
    });
    Ok(Output::new(results, table, Format::Json))
}

fn unit_arg(name: &str, x: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(config_err(format!("{name} = {x} outside [0, 1]")))
    }
}

fn shots_arg(shots: Option<u64>, cfg: &Config) -> Result<u64, CliError> {
    match shots.unwrap_or(cfg.tomography.shots) {
        0 => Err(config_err("--shots must be at least 1")),
        s => Ok(s),
    }
}

fn summary(rows: &[(&str, String)]) -> Table {
    let mut t = Table::new(&["quantity", "value"]);
    for (k, v) in rows {
        t.push(vec![k.to_string(), v.clone()]);
    }
    t
}

pub fn tomo_ghz4(cfg: &Config, a: &Ghz4Args, seed: u64) -> Result<Output, CliError> {
    let shots = shots_arg(a.shots, cfg)?;
    let v = unit_arg("visibility", a.visibility.unwrap_or(cfg.tomography.ghz_visibility))?;
    let lambda = match a.target_fidelity {
        Some(f) => fit_ghz_white_noise(unit_arg("target fidelity", f)?, v)?,
        None => unit_arg("white noise", a.white_noise.unwrap_or(cfg.tomography.ghz_white_noise))?,
    };
    let ghz = PureState::ghz(4, 1.0)?;
    let rho = noisy_ghz4(v, lambda)?;
    let model_f = rho.fidelity(&ghz)?;
    let records = simulate_full(&rho, shots, seed)?;
    let mle = mle_state(&records)?;
    let f = mle.estimate.fidelity(&ghz)?;

    let mut table = Table::new(&["setting", "outcome", "count"]);
    for r in &records {
        for (k, c) in r.counts.iter().enumerate() {
            let bits: String = (0..4).map(|q| if k >> q & 1 == 0 { '0' } else { '1' }).collect();
            table.push(vec![r.setting.to_string(), bits, c.to_string()]);
        }
    }
    let results = json!({
        "settings": records.len(),
        "shots_per_setting": shots,
        "visibility": v,
        "white_noise": lambda,
        "target_fidelity": a.target_fidelity,
        "model_fidelity": model_f,
        "reconstructed_fidelity": f,
        "log_likelihood_per_event": mle.log_likelihood,
        "iterations": mle.iterations,
        "converged": mle.converged,
        "density_matrix": MatrixJson::from(mle.estimate.matrix()),
    });
    let mut out = Output::new(results, table, Format::Json);
    out.display = Some(summary(&[
        ("settings", records.len().to_string()),
        ("shots_per_setting", shots.to_string()),
        ("visibility", num(v)),
        ("white_noise", num(lambda)),
        ("model_fidelity", format!("{model_f:.6}")),
        ("reconstructed_fidelity", format!("{f:.6}")),
        ("iterations", mle.iterations.to_string()),
        ("converged", mle.converged.to_string()),
    ]));
    if !mle.converged {
        out.not_converged = Some(format!(
            "state reconstruction stopped after {} iterations",
            mle.iterations
        ));
    }
    Ok(out)
}

fn bell_target(tag: PcmTag) -> Option<PureState> {
    match tag {
        PcmTag::BellPhiPlus => Some(PureState::phi_plus()),
        PcmTag::BellPsiPlus => Some(PureState::psi_plus()),
        _ => None,
    }
}

pub fn tomo_pcm(cfg: &Config, a: &PcmArgs, seed: u64) -> Result<Output, CliError> {
    let shots = shots_arg(a.shots, cfg)?;
    let v = unit_arg("visibility", a.visibility.unwrap_or(cfg.tomography.pcm_visibility))?;
    let povm = ideal_povm(v)?;
    let data = simulate_detector(&povm, shots, seed)?;
    let mle = mle_povm(&data)?;

    let mut table = Table::new(&[
        "probe",
        "phi_plus",
        "psi_plus",
        "single_left",
        "single_right",
        "no_decision",
    ]);
    for (probe, counts) in &data {
        let mut row = vec![probe.label()];
        row.extend(counts.iter().map(|c| c.to_string()));
        table.push(row);
    }
    let mut display = Table::new(&["element", "trace", "fidelity", "overlap", "generator_fidelity"]);
    let mut elements = Vec::new();
    for tag in PcmTag::ALL {
        let e = mle.estimate.element(tag);
        let trace = e.trace().re;
        let (fid, overlap) = match bell_target(tag) {
            Some(t) => (
                Some(povm_fidelity(e, &t)?),
                Some(e.sandwich(t.amplitudes(), t.amplitudes()).re),
            ),
            None => (None, None),
        };
        let generator = operator_fidelity(e, povm.element(tag)).ok();
        let opt = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{x:.6}"));
        display.push(vec![
            tag.as_str().to_string(),
            format!("{trace:.6}"),
            opt(fid),
            opt(overlap),
            opt(generator),
        ]);
        elements.push(json!({
            "tag": tag.as_str(),
            "trace": trace,
            "fidelity": fid,
            "overlap": overlap,
            "generator_fidelity": generator,
            "matrix": MatrixJson::from(e),
        }));
    }
    let results = json!({
        "probes": data.len(),
        "shots_per_probe": shots,
        "visibility": v,
        "fidelity_convention": "normalized: <t|E|t> / tr E; overlap is the unnormalized <t|E|t>",
        "elements": elements,
        "completeness_defect": mle.estimate.completeness_defect(),
        "log_likelihood_per_event": mle.log_likelihood,
        "iterations": mle.iterations,
        "converged": mle.converged,
    });
    let mut out = Output::new(results, table, Format::Json);
    out.display = Some(display);
    out.notes.push(format!(
        "{} probes x {shots} shots, visibility {v}, {} iterations",
        data.len(),
        mle.iterations
    ));
    if !mle.converged {
        out.not_converged = Some(format!(
            "detector reconstruction stopped after {} iterations",
            mle.iterations
        ));
    }
    Ok(out)
}

/// Noise-free network with the config's source model: the setting in
/// which every table row must reach fidelity one.
pub fn ideal_noise() -> NoiseModel {
    NoiseModel {
        include_multi_pair: false,
        ..NoiseModel::ideal()
    }
}

fn pair_label(p: [u8; 2]) -> String {
    format!("{}&{}", p[0], p[1])
}

pub fn table(cfg: &Config, a: &TableArgs) -> Result<Output, CliError> {
    let layout = cfg.layouts.get(a.layout);
    let rows = final_pair_table(layout)?;
    let net = par::build(layout, &cfg.source, &ideal_noise())?;
    let run = par::enumerate(&net, cfg.budget)?;
    let mut table = Table::new(&[
        "herald",
        "outcomes",
        "pair",
        "correction",
        "target",
        "probability",
        "fidelity",
        "verified_fidelity",
    ]);
    let mut covered = 0.0;
    let mut json_rows = Vec::new();
    for row in &rows {
        let rec = run
            .records
            .iter()
            .find(|r| r.herald == row.herald && r.outcomes == row.outcomes && r.pair == row.pair);
        let verified = rec.and_then(|r| aprsim_core::network::corrected_fidelity(r, &rows));
        covered += rec.map_or(0.0, |r| r.probability.value);
        let outcomes: Vec<String> = row.outcomes.iter().map(|(k, o)| format!("{k}={o}")).collect();
        table.push(vec![
            row.herald.clone(),
            outcomes.join(";"),
            pair_label(row.pair),
            row.correction.letter().to_string(),
            row.target.map_or("-".into(), |t| t.to_string()),
            num(row.probability),
            num(row.fidelity),
            verified.map_or("-".into(), num),
        ]);
        json_rows.push(json!({ "row": row, "verified_fidelity": verified }));
    }
    let results = json!({
        "layout": layout.name,
        "rows": json_rows,
        "success_probability": run.success.value,
        "covered_probability": covered,
    });
    let mut out = Output::new(results, table, Format::Json);
    out.notes.push(format!(
        "{} rows; they cover {:.12} of the ideal success probability {:.6e}",
        rows.len(),
        if run.success.value > 0.0 {
            covered / run.success.value
        } else {
            0.0
        },
        run.success.value
    ));
    Ok(out)
}

/// Fractions of one basis, outcomes `++, +-, -+, --` with photon one first.
#[derive(Debug, Clone, Serialize)]
pub struct BasisFractions {
    pub basis: String,
    pub fractions: [f64; 4],
    pub correlator: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairFidelity {
    pub pair: [u8; 2],
    pub probability: f64,
    pub bases: Vec<BasisFractions>,
    pub pauli_fidelity: f64,
    /// `<Φ+|ρ|Φ+>` of the simulated state.
    pub fidelity: f64,
}

/// XX, YY and ZZ fractions of each pair, exact when `shots` is zero and
/// drawn from stream `3 i + b` of `seed` otherwise.
pub fn pair_fidelities(pairs: &[PairState], shots: u64, seed: u64) -> Result<Vec<PairFidelity>, CliError> {
    let phi = PureState::phi_plus();
    let mut out = Vec::new();
    for (i, ps) in pairs.iter().enumerate() {
        let mut bases = Vec::new();
        for (b, basis) in [LocalBasis::X, LocalBasis::Y, LocalBasis::Z].into_iter().enumerate() {
            let setting = TomographySetting::new(vec![basis, basis]);
            let probs = outcome_probabilities(&ps.state, &setting)?;
            let total: f64 = probs.iter().sum();
            let fr: Vec<f64> = if shots == 0 {
                probs.iter().map(|p| p / total).collect()
            } else {
                let mut rng = substream(seed, (3 * i + b) as u64);
                multinomial(&probs, shots, &mut rng)
                    .into_iter()
                    .map(|c| c as f64 / shots as f64)
                    .collect()
            };
            let correlator = (fr[0] - fr[1] - fr[2] + fr[3]).clamp(-1.0, 1.0);
            bases.push(BasisFractions {
                basis: format!("{}{}", basis.letter(), basis.letter()),
                fractions: [fr[0], fr[1], fr[2], fr[3]],
                correlator,
            });
        }
        let pf = pauli_fidelity(bases[0].correlator, bases[1].correlator, bases[2].correlator)?;
        out.push(PairFidelity {
            pair: ps.pair,
            probability: ps.probability,
            pauli_fidelity: pf,
            fidelity: ps.state.fidelity(&phi)?,
            bases,
        });
    }
    Ok(out)
}

/// Pair fidelities weighted by heralding probability.
pub fn overall(pairs: &[PairFidelity]) -> f64 {
    let w: f64 = pairs.iter().map(|p| p.probability).sum();
    pairs.iter().map(|p| p.probability * p.pauli_fidelity).sum::<f64>() / w
}

/// Heralded pair states of a layout under the given models.
pub fn network_pairs(
    layout: &ExperimentLayout,
    cfg: &Config,
    noise: &NoiseModel,
    method: Method,
    trials: u64,
    seed: u64,
) -> Result<(RunResult, Vec<PairState>), CliError> {
    let rows = final_pair_table(layout)?;
    let net = par::build(layout, &cfg.source, noise)?;
    let run = par::run(&net, method, trials, seed, cfg.budget)?;
    let pairs = pair_states(&run, &rows, &layout.final_candidates)?;
    Ok((run, pairs))
}

pub fn fidelity_table(pairs: &[PairFidelity]) -> (Table, Table) {
    let mut header = vec!["pair".to_string(), "probability".to_string()];
    for b in ["XX", "YY", "ZZ"] {
        for o in ["++", "+-", "-+", "--"] {
            header.push(format!("{b}_{o}"));
        }
    }
    for h in ["xx", "yy", "zz", "pauli_fidelity", "fidelity"] {
        header.push(h.into());
    }
    let mut full = Table {
        header,
        rows: Vec::new(),
    };
    let mut short = Table::new(&["pair", "probability", "xx", "yy", "zz", "fidelity"]);
    for p in pairs {
        let mut row = vec![pair_label(p.pair), num(p.probability)];
        for b in &p.bases {
            row.extend(b.fractions.iter().map(|x| num(*x)));
        }
        row.extend(p.bases.iter().map(|b| num(b.correlator)));
        row.push(num(p.pauli_fidelity));
        row.push(num(p.fidelity));
        full.push(row);
        short.push(vec![
            pair_label(p.pair),
            format!("{:.6e}", p.probability),
            format!("{:+.4}", p.bases[0].correlator),
            format!("{:+.4}", p.bases[1].correlator),
            format!("{:+.4}", p.bases[2].correlator),
            format!("{:.4}", p.pauli_fidelity),
        ]);
    }
    (full, short)
}

pub fn fidelity(cfg: &Config, a: &FidelityArgs, seed: u64) -> Result<Output, CliError> {
    let method = Method::from(a.method);
    if method == Method::Sample && a.trials == 0 {
        return Err(config_err("--trials must be at least 1"));
    }
    let base = cfg.layouts.get(a.layout);
    let layout = match a.pair {
        Some(p) => base.with_pair(p)?,
        None => base.clone(),
    };
    let (run, pairs) = network_pairs(&layout, cfg, &cfg.noise, method, a.trials, derive_seed(seed, 0))?;
    let fids = pair_fidelities(&pairs, a.shots, derive_seed(seed, 1))?;
    let total = if fids.is_empty() { f64::NAN } else { overall(&fids) };
    let (table, short) = fidelity_table(&fids);
    let results = json!({
        "layout": layout.name,
        "method": method.name(),
        "shots_per_basis": a.shots,
        "success": Estimate::from(&run.success),
        "pairs": fids,
        "overall_fidelity": total,
    });
    let mut out = Output::new(results, table, Format::Json);
    out.display = Some(short);
    out.notes.push(format!("overall fidelity {total:.4}"));
    Ok(out)
}

pub fn zbasis(a: &ZbasisArgs) -> Result<Output, CliError> {
    let dist = twelve_fold_zbasis(a.visibility)?;
    let mut table = Table::new(&["outcome", "probability"]);
    let hv = |s: &str| -> String { s.chars().map(|c| if c == '0' { 'H' } else { 'V' }).collect() };
    for (s, p) in &dist {
        table.push(vec![hv(s), num(*p)]);
    }
    let results = json!({
        "visibility": a.visibility,
        "nonzero": dist.iter().map(|(s, p)| json!({ "outcome": hv(s), "probability": p })).collect::<Vec<_>>(),
        "outcomes": 1u32 << 12,
    });
    let mut out = Output::new(results, table, Format::Csv);
    out.notes
        .push(format!("the other {} outcomes have probability 0", 4096 - dist.len()));
    Ok(out)
}
