//! Pulse-level event model: per-source emission options on top of the
//! exact primary-photon atoms, with extra pairs adding clicks.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng;

use super::fock::{atoms, Atom, Presence, MAXP};
use super::layout::{Element, ExperimentLayout, SourceSpec};
use super::plan::{viable_with, PDev, PRule, Plan, Reach};

type Cache = BTreeMap<(usize, Reach), Vec<u32>>;
use super::{DeviceOutcome, FinalPairRecord, Method, RateEstimate, RunResult};
use crate::linalg::Matrix;
use crate::noise::NoiseModel;
use crate::pcm::{classify, PcmTag};
use crate::quantum::DensityMatrix;
use crate::rng::substream;
use crate::source::SourceModel;
use crate::{Error, Result, C64};

/// Default enumeration budget in branches.
pub const DEFAULT_BUDGET: u64 = 100_000_000;
/// Trials per independently seeded sampling batch.
pub const SAMPLE_BATCH: u64 = 1 << 14;

/// One way a source's pulse can play out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceOption {
    pub presence: Presence,
    /// Surviving photons of additional pairs on the source's two paths.
    pub extra: [u8; 2],
    pub weight: f64,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn survive(n: usize, k: usize, eta: f64) -> f64 {
    binomial(n, k) * libm::pow(eta, k as f64) * libm::pow(1.0 - eta, (n - k) as f64)
}

/// Emission and survival options of one source with merged weights.
pub fn source_options(model: &SourceModel, noise: &NoiseModel, spec: &SourceSpec) -> Result<Vec<SourceOption>> {
    if spec.heralded {
        return Ok(vec![SourceOption {
            presence: Presence::Both,
            extra: [0, 0],
            weight: 1.0,
        }]);
    }
    let mut w = model.pair_weights()?;
    if !noise.include_multi_pair {
        let tail: f64 = w[1..].iter().sum();
        w = vec![w[0], tail];
    }
    let eta = [
        noise.efficiency_of(spec.photons[0]),
        noise.efficiency_of(spec.photons[1]),
    ];
    let mut out: Vec<SourceOption> = Vec::new();
    let mut add = |presence, extra: [u8; 2], weight: f64| {
        if weight <= 0.0 {
            return;
        }
        match out.iter_mut().find(|o| o.presence == presence && o.extra == extra) {
            Some(o) => o.weight += weight,
            None => out.push(SourceOption {
                presence,
                extra,
                weight,
            }),
        }
    };
    add(Presence::None, [0, 0], w[0]);
    for (k, &wk) in w.iter().enumerate().skip(1) {
        for (presence, pa, pb) in [
            (Presence::Both, eta[0], eta[1]),
            (Presence::OnlyA, eta[0], 1.0 - eta[1]),
            (Presence::OnlyB, 1.0 - eta[0], eta[1]),
            (Presence::None, 1.0 - eta[0], 1.0 - eta[1]),
        ] {
            for ea in 0..k {
                for eb in 0..k {
                    let x = survive(k - 1, ea, eta[0]) * survive(k - 1, eb, eta[1]);
                    add(presence, [ea as u8, eb as u8], wk * pa * pb * x);
                }
            }
        }
    }
    Ok(out)
}

/// A layout with its noise and source models, ready to compute atoms.
#[derive(Debug, Clone)]
pub struct NetworkPlan {
    plan: Plan,
    noise: NoiseModel,
    options: Vec<Vec<SourceOption>>,
    configs: Vec<Vec<Presence>>,
    /// Presence code (two bits per source) to config index.
    config_index: BTreeMap<u32, usize>,
}

fn presence_code(config: impl Iterator<Item = Presence>) -> u32 {
    config.enumerate().map(|(s, p)| (p.code() as u32) << (2 * s)).sum()
}

impl NetworkPlan {
    pub fn new(layout: &ExperimentLayout, source: &SourceModel, noise: &NoiseModel) -> Result<Self> {
        source.validate()?;
        noise.validate()?;
        let plan = Plan::new(layout)?;
        if layout.sources.len() > 8 {
            return Err(Error::Layout("at most 8 sources are supported".into()));
        }
        // photons of an idle source never reach a registered device or pass
        // a PBS, so the source is summed out with total weight one
        let idle = |s: &SourceSpec| {
            s.photons.iter().all(|&p| {
                let mixed = layout
                    .elements
                    .iter()
                    .any(|e| matches!(e, Element::Pbs { a, b, .. } if *a == p || *b == p));
                let dev = layout.devices.iter().position(|d| d.paths().contains(&p));
                !mixed && dev.is_some_and(|d| !plan.registered[d] && !layout.devices[d].is_final())
            })
        };
        let options = layout
            .sources
            .iter()
            .map(|s| {
                if idle(s) {
                    Ok(vec![SourceOption {
                        presence: Presence::None,
                        extra: [0, 0],
                        weight: 1.0,
                    }])
                } else {
                    source_options(source, noise, s)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let mut configs: Vec<Vec<Presence>> = vec![Vec::new()];
        for opts in &options {
            let mut kinds: Vec<Presence> = opts.iter().map(|o| o.presence).collect();
            kinds.sort();
            kinds.dedup();
            configs = configs
                .into_iter()
                .flat_map(|c| {
                    kinds.iter().map(move |&k| {
                        let mut c = c.clone();
                        c.push(k);
                        c
                    })
                })
                .collect();
        }
        let config_index = configs
            .iter()
            .enumerate()
            .map(|(i, c)| (presence_code(c.iter().copied()), i))
            .collect();
        Ok(NetworkPlan {
            plan,
            noise: noise.clone(),
            options,
            configs,
            config_index,
        })
    }

    pub fn layout(&self) -> &ExperimentLayout {
        &self.plan.layout
    }

    pub fn options(&self) -> &[Vec<SourceOption>] {
        &self.options
    }

    /// Presence configurations with nonzero weight; atoms are computed per
    /// configuration.
    pub fn configs(&self) -> &[Vec<Presence>] {
        &self.configs
    }

    pub fn atoms_for(&self, config: usize) -> Result<Vec<Atom>> {
        atoms(&self.plan, &self.noise, &self.configs[config])
    }

    /// Attaches atoms computed elsewhere (for instance in parallel), one list
    /// per configuration.
    pub fn with_atoms(self, atoms: Vec<Vec<Atom>>) -> Result<Network> {
        if atoms.len() != self.configs.len() {
            return Err(Error::Dimension {
                expected: self.configs.len(),
                found: atoms.len(),
            });
        }
        let cumulative = atoms
            .iter()
            .map(|list| {
                let mut acc = 0.0;
                list.iter()
                    .map(|a| {
                        acc += a.weight;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(Network {
            inner: self,
            atoms,
            cumulative,
        })
    }

    pub fn build(self) -> Result<Network> {
        let atoms = (0..self.configs.len())
            .map(|i| self.atoms_for(i))
            .collect::<Result<Vec<_>>>()?;
        self.with_atoms(atoms)
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    inner: NetworkPlan,
    atoms: Vec<Vec<Atom>>,
    cumulative: Vec<Vec<f64>>,
}

/// Raw accumulation of a run, keyed by `(event key, config, atom, extra-only
/// bits)`. Enumeration stores weights, sampling stores hit counts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tally {
    entries: BTreeMap<(u64, u32, u32, u8), f64>,
    /// Trials for sampling, enumerated weight for enumeration.
    pub total: f64,
}

impl Tally {
    /// Adds `other` entry by entry. Merging in a fixed order keeps results
    /// reproducible.
    pub fn merge(&mut self, other: &Tally) {
        for (k, v) in &other.entries {
            *self.entries.entry(*k).or_insert(0.0) += v;
        }
        self.total += other.total;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Network {
    pub fn new(layout: &ExperimentLayout, source: &SourceModel, noise: &NoiseModel) -> Result<Self> {
        NetworkPlan::new(layout, source, noise)?.build()
    }

    pub fn layout(&self) -> &ExperimentLayout {
        self.inner.layout()
    }

    pub fn atoms(&self) -> &[Vec<Atom>] {
        &self.atoms
    }

    /// Number of source-option combinations; enumeration ranges index them
    /// with source 0 varying fastest.
    pub fn combinations(&self) -> u64 {
        self.inner
            .options
            .iter()
            .fold(1u64, |acc, o| acc.saturating_mul(o.len() as u64))
    }

    fn combo(&self, mut index: u64, picks: &mut [usize]) {
        for (s, opts) in self.inner.options.iter().enumerate() {
            let n = opts.len() as u64;
            picks[s] = (index % n) as usize;
            index /= n;
        }
    }

    fn extras(&self, picks: &[usize], out: &mut Vec<usize>) {
        out.clear();
        for (s, &k) in picks.iter().enumerate() {
            let o = &self.inner.options[s][k];
            for (j, &n) in o.extra.iter().enumerate() {
                for _ in 0..n {
                    out.push(self.inner.plan.sources[s][j]);
                }
            }
        }
    }

    fn config_of(&self, picks: &[usize]) -> usize {
        let code = presence_code(
            picks
                .iter()
                .enumerate()
                .map(|(s, &k)| self.inner.options[s][k].presence),
        );
        self.inner.config_index[&code]
    }

    /// Number of placements the extras fan out to.
    fn fan(&self, extras: &[usize]) -> u64 {
        let plan = &self.inner.plan;
        extras.iter().fold(1u64, |acc, &p| {
            let f: u64 = plan.routes[p]
                .iter()
                .map(|&(d, _)| match plan.devices[d] {
                    PDev::Pcm { .. } | PDev::Analyzer { .. } if plan.registered[d] => {
                        plan.devices[d].detectors() as u64
                    }
                    _ => 1,
                })
                .sum();
            acc.saturating_mul(f)
        })
    }

    fn candidates<'a>(&self, cache: &'a mut Cache, cfg: usize, extras: &[usize]) -> &'a [u32] {
        let reach = Reach::of(&self.inner.plan, extras);
        cache.entry((cfg, reach)).or_insert_with_key(|(_, reach)| {
            self.atoms[cfg]
                .iter()
                .enumerate()
                .filter(|(_, a)| viable_with(&self.inner.plan, &a.masks, reach))
                .map(|(i, _)| i as u32)
                .collect()
        })
    }

    /// Number of leaf evaluations [`Network::enumerate_range`] performs.
    pub fn enumeration_cost(&self) -> u64 {
        let mut picks = vec![0; self.inner.options.len()];
        let mut extras = Vec::new();
        let mut cache = Cache::new();
        let mut total = 0u64;
        for i in 0..self.combinations() {
            self.combo(i, &mut picks);
            self.extras(&picks, &mut extras);
            let n = self.candidates(&mut cache, self.config_of(&picks), &extras).len() as u64;
            if n > 0 {
                total = total.saturating_add(n.saturating_mul(self.fan(&extras)));
            }
        }
        total
    }

    /// Exact accumulation over the option combinations in `range`.
    pub fn enumerate_range(&self, range: Range<u64>) -> Tally {
        let mut tally = Tally::default();
        let mut picks = vec![0; self.inner.options.len()];
        let mut extras = Vec::new();
        let mut cache = Cache::new();
        for i in range {
            self.combo(i, &mut picks);
            let w: f64 = picks
                .iter()
                .enumerate()
                .map(|(s, &k)| self.inner.options[s][k].weight)
                .product();
            tally.total += w;
            if w == 0.0 {
                continue;
            }
            self.extras(&picks, &mut extras);
            let cfg = self.config_of(&picks);
            for &ai in self.candidates(&mut cache, cfg, &extras) {
                let atom = &self.atoms[cfg][ai as usize];
                let mut masks = [0u8; MAXP];
                masks[..atom.masks.len()].copy_from_slice(&atom.masks);
                self.place(&extras, masks, w, &mut |m, p| {
                    if let Some((key, chosen)) = evaluate(&self.inner.plan, m) {
                        let x = extra_bits(atom, chosen);
                        *tally.entries.entry((key, cfg as u32, ai, x)).or_insert(0.0) += p;
                    }
                });
            }
        }
        tally
    }

    fn place(&self, extras: &[usize], masks: [u8; MAXP], p: f64, leaf: &mut impl FnMut(&[u8], f64)) {
        let Some((&path, rest)) = extras.split_first() else {
            leaf(&masks[..self.atoms_len()], p);
            return;
        };
        let plan = &self.inner.plan;
        for &(d, q) in &plan.routes[path] {
            let n = plan.devices[d].detectors();
            let free: Vec<u8> = (0..n).filter(|b| masks[d] >> b & 1 == 0).collect();
            if free.is_empty() || !plan.registered[d] {
                self.place(rest, masks, p * q, leaf);
                continue;
            }
            if let PDev::Final { .. } = plan.devices[d] {
                // only the click count of a final analyzer matters
                let mut m = masks;
                m[d] |= 1 << free[0];
                self.place(rest, m, p * q, leaf);
                continue;
            }
            let share = q / free.len() as f64;
            for b in free {
                let mut m = masks;
                m[d] |= 1 << b;
                self.place(rest, m, p * share, leaf);
            }
        }
    }

    fn atoms_len(&self) -> usize {
        self.inner.plan.devices.len()
    }

    /// Monte Carlo trials of batch `batch` drawn from stream `(seed, batch)`.
    pub fn sample_batch(&self, seed: u64, batch: u64, trials: u64) -> Tally {
        let mut rng = substream(seed, batch);
        let mut tally = Tally {
            entries: BTreeMap::new(),
            total: trials as f64,
        };
        let opts = &self.inner.options;
        let sums: Vec<f64> = opts.iter().map(|o| o.iter().map(|x| x.weight).sum()).collect();
        let plan = &self.inner.plan;
        let mut picks = vec![0; opts.len()];
        let mut extras = Vec::new();
        for _ in 0..trials {
            for (s, o) in opts.iter().enumerate() {
                let mut u = rng.random::<f64>() * sums[s];
                picks[s] = o.len() - 1;
                for (k, x) in o.iter().enumerate() {
                    if u < x.weight {
                        picks[s] = k;
                        break;
                    }
                    u -= x.weight;
                }
            }
            let cfg = self.config_of(&picks);
            let cum = &self.cumulative[cfg];
            let u = rng.random::<f64>();
            let ai = cum.partition_point(|&c| c <= u);
            if ai >= cum.len() {
                continue;
            }
            let atom = &self.atoms[cfg][ai];
            self.extras(&picks, &mut extras);
            let mut masks = [0u8; MAXP];
            masks[..atom.masks.len()].copy_from_slice(&atom.masks);
            for &path in &extras {
                let route = &plan.routes[path];
                let mut u = rng.random::<f64>();
                let mut d = route[route.len() - 1].0;
                for &(dev, q) in route {
                    if u < q {
                        d = dev;
                        break;
                    }
                    u -= q;
                }
                let n = plan.devices[d].detectors();
                let free: Vec<u8> = (0..n).filter(|b| masks[d] >> b & 1 == 0).collect();
                if free.is_empty() || !plan.registered[d] {
                    continue;
                }
                let b = match plan.devices[d] {
                    PDev::Final { .. } => free[0],
                    _ => free[rng.random_range(0..free.len())],
                };
                masks[d] |= 1 << b;
            }
            if let Some((key, chosen)) = evaluate(plan, &masks[..atom.masks.len()]) {
                let x = extra_bits(atom, chosen);
                *tally.entries.entry((key, cfg as u32, ai as u32, x)).or_insert(0.0) += 1.0;
            }
        }
        tally
    }

    fn weight_norm(&self) -> f64 {
        self.inner
            .options
            .iter()
            .map(|o| o.iter().map(|x| x.weight).sum::<f64>())
            .product()
    }

    /// Turns a complete tally into rates and final-pair records.
    pub fn finish(&self, tally: &Tally, method: Method) -> Result<RunResult> {
        let plan = &self.inner.plan;
        let norm = self.weight_norm();
        let trials = tally.total;
        // per event key: (probability, hits, unnormalized pair state)
        let mut events: BTreeMap<u64, (f64, f64, Matrix)> = BTreeMap::new();
        let mut cache: BTreeMap<(u32, u32, u64, u8), Matrix> = BTreeMap::new();
        for (&(key, cfg, ai, x), &c) in &tally.entries {
            let atom = &self.atoms[cfg as usize][ai as usize];
            let chosen = chosen_finals(plan, key);
            let rho = match cache.get(&(cfg, ai, key, x)) {
                Some(r) => r.clone(),
                None => {
                    let r = pair_state(plan, atom, chosen, x)?;
                    cache.insert((cfg, ai, key, x), r.clone());
                    r
                }
            };
            let coeff = match method {
                Method::Enumerate => c,
                Method::Sample => c * norm / trials / atom.weight,
            };
            let e = events.entry(key).or_insert_with(|| (0.0, 0.0, Matrix::zeros(4, 4)));
            e.0 += coeff * atom.weight;
            e.1 += c;
            e.2.add_scaled(&rho, C64::new(coeff, 0.0));
        }

        let estimate = |p: f64, hits: f64| match method {
            Method::Enumerate => RateEstimate {
                value: p,
                std_error: 0.0,
                trials_or_weight: trials,
                method,
            },
            Method::Sample => {
                let f = if trials > 0.0 { hits / trials } else { 0.0 };
                RateEstimate {
                    value: f * norm,
                    std_error: if trials > 0.0 {
                        norm * libm::sqrt(f * (1.0 - f) / trials)
                    } else {
                        0.0
                    },
                    trials_or_weight: trials,
                    method,
                }
            }
        };

        let mut per_herald = vec![(0.0, 0.0); plan.heralds.len()];
        let mut records = Vec::new();
        for (&key, (p, hits, rho)) in &events {
            let h = (key & 0xF) as usize;
            per_herald[h].0 += p;
            per_herald[h].1 += hits;
            let state = if *p > 0.0 {
                DensityMatrix::from_matrix_unchecked(rho.scale_re(1.0 / *p).hermitize())?
            } else {
                DensityMatrix::maximally_mixed(2)?
            };
            let (herald, outcomes, pair) = decode_key(plan, key);
            records.push(FinalPairRecord {
                herald,
                outcomes,
                pair,
                probability: estimate(*p, *hits),
                state,
            });
        }
        let total_p: f64 = per_herald.iter().map(|x| x.0).sum();
        let total_hits: f64 = per_herald.iter().map(|x| x.1).sum();
        Ok(RunResult {
            layout: plan.layout.name.clone(),
            method,
            success: estimate(total_p, total_hits),
            heralds: plan
                .layout
                .heralds
                .iter()
                .zip(&per_herald)
                .map(|(h, &(p, n))| (h.name.clone(), estimate(p, n)))
                .collect(),
            records,
        })
    }
}

/// Exact enumeration of every option combination and atom. Fails with
/// [`Error::BudgetExceeded`] when more than `budget` branches are needed.
pub fn run_enumerate(net: &Network, budget: u64) -> Result<RunResult> {
    check_budget(net, budget)?;
    let tally = net.enumerate_range(0..net.combinations());
    net.finish(&tally, Method::Enumerate)
}

pub fn check_budget(net: &Network, budget: u64) -> Result<()> {
    let combos = net.combinations();
    if combos > budget {
        return Err(Error::BudgetExceeded { needed: combos, budget });
    }
    let needed = net.enumeration_cost();
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// Monte Carlo estimate from `trials` pulses in batches of
/// [`SAMPLE_BATCH`], batch `b` drawing from stream `(seed, b)`.
pub fn run_sample(net: &Network, trials: u64, seed: u64) -> Result<RunResult> {
    let mut tally = Tally::default();
    for (b, n) in sample_batches(trials) {
        tally.merge(&net.sample_batch(seed, b, n));
    }
    net.finish(&tally, Method::Sample)
}

/// `(batch index, trials)` for a run of `trials` pulses.
pub fn sample_batches(trials: u64) -> impl Iterator<Item = (u64, u64)> {
    let full = trials / SAMPLE_BATCH;
    let rest = trials % SAMPLE_BATCH;
    (0..full)
        .map(|b| (b, SAMPLE_BATCH))
        .chain((rest > 0).then_some((full, rest)))
}

/// Herald check on complete masks. Returns the event key and the two
/// chosen final devices.
pub(crate) fn evaluate(plan: &Plan, masks: &[u8]) -> Option<(u64, [usize; 2])> {
    'herald: for (hi, h) in plan.heralds.iter().enumerate() {
        let mut key = hi as u64;
        let mut shift = 4;
        let mut chosen = [usize::MAX; 2];
        let mut parties = 0;
        let mut push = |v: u64, key: &mut u64| {
            *key |= v << shift;
            shift += 3;
        };
        for r in &h.rules {
            match r {
                PRule::Node { devs, bells } => {
                    let mut b = 0;
                    for &d in devs {
                        let tag = classify(masks[d]).tag;
                        if tag.is_bell() {
                            b += 1;
                        } else if !tag.is_single() {
                            continue 'herald;
                        }
                        push(tag.index() as u64, &mut key);
                    }
                    if b != *bells {
                        continue 'herald;
                    }
                }
                PRule::Click { dev } => {
                    if masks[*dev].count_ones() != 1 {
                        continue 'herald;
                    }
                    push(masks[*dev].trailing_zeros() as u64, &mut key);
                }
                PRule::Party { devs } => {
                    let clicks: u32 = devs.iter().map(|&d| masks[d].count_ones()).sum();
                    if clicks != 1 {
                        continue 'herald;
                    }
                    for &d in devs {
                        let on = masks[d] != 0;
                        if on {
                            chosen[parties] = d;
                        }
                        push(on as u64, &mut key);
                    }
                    parties += 1;
                }
            }
        }
        return Some((key, chosen));
    }
    None
}

fn chosen_finals(plan: &Plan, key: u64) -> [usize; 2] {
    let h = &plan.heralds[(key & 0xF) as usize];
    let mut chosen = [0; 2];
    let mut j = 0;
    let mut shift = 4;
    for r in &h.rules {
        let devs: Vec<usize> = match r {
            PRule::Node { devs, .. } => devs.clone(),
            PRule::Click { dev } => vec![*dev],
            PRule::Party { devs } => devs.clone(),
        };
        for d in devs {
            if matches!(r, PRule::Party { .. }) && key >> shift & 7 == 1 {
                chosen[j] = d;
                j += 1;
            }
            shift += 3;
        }
    }
    chosen
}

fn decode_key(plan: &Plan, key: u64) -> (String, BTreeMap<String, DeviceOutcome>, [u8; 2]) {
    let hi = (key & 0xF) as usize;
    let layout = &plan.layout;
    let mut outcomes = BTreeMap::new();
    let mut shift = 4;
    for &d in &plan.heralds[hi].devices {
        let v = (key >> shift & 7) as usize;
        shift += 3;
        let name = layout.devices[d].name().into();
        match plan.devices[d] {
            PDev::Pcm { .. } => {
                outcomes.insert(name, DeviceOutcome::Pcm(PcmTag::ALL[v]));
            }
            PDev::Analyzer { .. } => {
                outcomes.insert(name, DeviceOutcome::Click(v as u8));
            }
            PDev::Final { .. } => {}
        }
    }
    let chosen = chosen_finals(plan, key);
    let pair = chosen.map(|d| match plan.devices[d] {
        PDev::Final { path } => plan.photons[path],
        _ => unreachable!(),
    });
    (layout.heralds[hi].name.clone(), outcomes, pair)
}

fn extra_bits(atom: &Atom, chosen: [usize; 2]) -> u8 {
    (atom.masks[chosen[0]] == 0) as u8 | ((atom.masks[chosen[1]] == 0) as u8) << 1
}

/// Two-qubit state of the chosen finals (first chosen on the low bit) with
/// trace equal to the atom weight. A final reached only by extra photons
/// contributes a maximally mixed qubit.
fn pair_state(plan: &Plan, atom: &Atom, chosen: [usize; 2], x: u8) -> Result<Matrix> {
    let present: Vec<usize> = plan.finals().map(|(d, _)| d).filter(|&d| atom.masks[d] == 1).collect();
    let rho = DensityMatrix::from_matrix_unchecked(atom.rho.clone())?;
    let pos = |d: usize| present.iter().position(|&p| p == d);
    let half = Matrix::identity(2).scale_re(0.5);
    Ok(match x {
        0 => {
            let keep = [pos(chosen[0]).unwrap(), pos(chosen[1]).unwrap()];
            rho.partial_trace(&keep)?.into_matrix()
        }
        1 => {
            let r1 = rho.partial_trace(&[pos(chosen[1]).unwrap()])?.into_matrix();
            r1.kron(&half)
        }
        2 => {
            let r0 = rho.partial_trace(&[pos(chosen[0]).unwrap()])?.into_matrix();
            half.kron(&r0)
        }
        _ => Matrix::identity(4).scale_re(0.25 * atom.weight),
    })
}
