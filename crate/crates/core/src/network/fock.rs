//! Exact multi-photon propagation of the primary photons.
//!
//! A state is a sparse sum of creation-operator monomials. Every photon
//! occupies a mode `(path, polarization, tag)`; detected photons stay in the
//! monomial as dead modes so that distinct detector records never
//! interfere. Mixedness (white noise, unpolarized single photons,
//! distinguishable PBS inputs) is carried by an environment word.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::plan::{pcm_hopeless, PDev, PElem, PRule, Plan, Unitary};
use crate::layout_err;
use crate::linalg::Matrix;
use crate::noise::NoiseModel;
use crate::pcm::classify;
use crate::{Result, C64};

pub(crate) const MAXP: usize = 16;
const EMPTY: u8 = u8::MAX;
const TAG: u8 = 1 << 5;
const DEAD: u8 = 1 << 6;
const SOURCE_BITS: u32 = 3;
const PBS_ENV_SHIFT: u32 = 24;

/// What survives of a source's first pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Presence {
    None,
    Both,
    OnlyA,
    OnlyB,
}

impl Presence {
    pub const ALL: [Presence; 4] = [Presence::None, Presence::Both, Presence::OnlyA, Presence::OnlyB];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn has(self, which: usize) -> bool {
        match self {
            Presence::None => false,
            Presence::Both => true,
            Presence::OnlyA => which == 0,
            Presence::OnlyB => which == 1,
        }
    }
}

/// One detector-level outcome class of a presence configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    /// Click mask per device. Final devices hold 1 when their primary photon
    /// arrived.
    pub masks: Vec<u8>,
    pub weight: f64,
    /// State of the present final photons (device order, first on the low
    /// bit), with trace `weight`.
    pub rho: Matrix,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Mono {
    env: u64,
    m: [u8; MAXP],
}

impl Mono {
    fn new(env: u64) -> Self {
        Mono { env, m: [EMPTY; MAXP] }
    }

    fn len(&self) -> usize {
        self.m.iter().position(|&x| x == EMPTY).unwrap_or(MAXP)
    }

    fn sort(&mut self) {
        let n = self.len();
        self.m[..n].sort_unstable();
    }

    fn push(&mut self, x: u8) {
        let n = self.len();
        self.m[n] = x;
    }
}

type Fock = Vec<(Mono, C64)>;

fn mode(path: usize, pol: u8) -> u8 {
    (path as u8) << 1 | pol
}

fn path_of(x: u8) -> usize {
    (x >> 1 & 0xF) as usize
}

fn alive(x: u8) -> bool {
    x < DEAD
}

fn compact(f: &mut Fock) {
    f.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut out: Fock = Vec::with_capacity(f.len());
    for (m, a) in f.drain(..) {
        match out.last_mut() {
            Some(last) if last.0 == m => last.1 += a,
            _ => out.push((m, a)),
        }
    }
    out.retain(|x| x.1.norm_sqr() > 1e-30);
    *f = out;
}

fn rotate(f: &Fock, path: usize, u: &Unitary) -> Fock {
    let mut out = Vec::with_capacity(f.len() * 2);
    for &(mono, amp) in f {
        let n = mono.len();
        let mut idx = [0usize; MAXP];
        let mut k = 0;
        for i in 0..n {
            if alive(mono.m[i]) && path_of(mono.m[i]) == path {
                idx[k] = i;
                k += 1;
            }
        }
        if k == 0 {
            out.push((mono, amp));
            continue;
        }
        'combo: for combo in 0..1u32 << k {
            let mut m2 = mono;
            let mut a = amp;
            for (j, &i) in idx[..k].iter().enumerate() {
                let pin = (mono.m[i] & 1) as usize;
                let pout = (combo >> j & 1) as u8;
                let c = u[pout as usize][pin];
                if c.norm_sqr() == 0.0 {
                    continue 'combo;
                }
                a *= c;
                m2.m[i] = mono.m[i] & !1 | pout;
            }
            m2.sort();
            out.push((m2, a));
        }
    }
    compact(&mut out);
    out
}

/// Single-photon map of a PCM's optics on the modes `(left H, left V,
/// right H, right V)`: half-wave plates at 22.5°, V exchange, half-wave
/// plates again. Column is the input mode.
pub(crate) fn pcm_optics(hwp: &Unitary) -> [[C64; 4]; 4] {
    let zero = C64::new(0.0, 0.0);
    let plates = |m: [[C64; 4]; 4]| {
        let mut out = [[zero; 4]; 4];
        for side in 0..2 {
            for po in 0..2 {
                for i in 0..4 {
                    for pi in 0..2 {
                        out[2 * side + po][i] += hwp[po][pi] * m[2 * side + pi][i];
                    }
                }
            }
        }
        out
    };
    let mut id = [[zero; 4]; 4];
    for (i, row) in id.iter_mut().enumerate() {
        row[i] = C64::new(1.0, 0.0);
    }
    let a = plates(id);
    // left V <-> right V
    let b = [a[0], a[3], a[2], a[1]];
    plates(b)
}

/// Applies a single-photon linear map on the modes of two paths (see
/// [`pcm_optics`]) to every photon on them.
fn transform(f: &Fock, left: usize, right: usize, u: &[[C64; 4]; 4]) -> Fock {
    let mut out = Vec::with_capacity(f.len() * 4);
    let mut stack: Vec<(Mono, C64, usize)> = Vec::new();
    for &(mono, amp) in f {
        let n = mono.len();
        let mut idx = [0usize; MAXP];
        let mut k = 0;
        for i in 0..n {
            let x = mono.m[i];
            if alive(x) && (path_of(x) == left || path_of(x) == right) {
                idx[k] = i;
                k += 1;
            }
        }
        if k == 0 {
            out.push((mono, amp));
            continue;
        }
        stack.push((mono, amp, 0));
        while let Some((m, a, j)) = stack.pop() {
            if j == k {
                let mut m = m;
                m.sort();
                out.push((m, a));
                continue;
            }
            let x = mono.m[idx[j]];
            let input = if path_of(x) == left { 0 } else { 2 } + (x & 1) as usize;
            for (o, row) in u.iter().enumerate() {
                let c = row[input];
                if c.norm_sqr() == 0.0 {
                    continue;
                }
                let path = if o < 2 { left } else { right };
                let mut m2 = m;
                m2.m[idx[j]] = (x & TAG) | mode(path, (o & 1) as u8);
                stack.push((m2, a * c, j + 1));
            }
        }
    }
    compact(&mut out);
    out
}

fn swap_v(f: &mut Fock, a: usize, b: usize) {
    for (mono, _) in f.iter_mut() {
        let n = mono.len();
        for x in mono.m[..n].iter_mut() {
            if alive(*x) && *x & 1 == 1 {
                let p = path_of(*x);
                if p == a {
                    *x = *x & !(0xF << 1) | (b as u8) << 1;
                } else if p == b {
                    *x = *x & !(0xF << 1) | (a as u8) << 1;
                }
            }
        }
        mono.sort();
    }
    compact(f);
}

fn occupied(mono: &Mono, path: usize) -> bool {
    mono.m[..mono.len()].iter().any(|&x| alive(x) && path_of(x) == path)
}

/// Whether some monomial has photons on both paths, so that their
/// distinguishability can matter.
fn meet(f: &Fock, a: usize, b: usize) -> bool {
    f.iter().any(|(m, _)| occupied(m, a) && occupied(m, b))
}

/// Records the H/V content of both inputs in the environment wherever both
/// are occupied: those photons no longer interfere at this PBS.
fn dephase(f: &mut Fock, a: usize, b: usize, slot: usize) -> Result<()> {
    for (mono, _) in f.iter_mut() {
        if !(occupied(mono, a) && occupied(mono, b)) {
            continue;
        }
        let mut counts = [0u64; 4];
        for &x in mono.m[..mono.len()].iter().filter(|&&x| alive(x)) {
            let p = path_of(x);
            let pol = (x & 1) as usize;
            if p == a {
                counts[pol] += 1;
            } else if p == b {
                counts[2 + pol] += 1;
            }
        }
        if counts.iter().any(|&c| c > 3) {
            return Err(layout_err("more than three photons in one PBS input mode"));
        }
        let rec = counts[0] | counts[1] << 2 | counts[2] << 4 | counts[3] << 6;
        mono.env |= rec << (PBS_ENV_SHIFT + 8 * slot as u32);
    }
    compact(f);
    Ok(())
}

fn tag_path(f: &mut Fock, path: usize) {
    for (mono, _) in f.iter_mut() {
        let n = mono.len();
        for x in mono.m[..n].iter_mut() {
            if alive(*x) && path_of(*x) == path {
                *x |= TAG;
            }
        }
        mono.sort();
    }
    compact(f);
}

/// Detects the photons on `paths`. `det` maps a mode to its detector bit.
fn measure(f: Fock, paths: &[usize], det: impl Fn(u8) -> u8) -> BTreeMap<u8, Fock> {
    let mut groups: BTreeMap<u8, Fock> = BTreeMap::new();
    for (mut mono, amp) in f {
        let n = mono.len();
        let mut mask = 0u8;
        let mut factor = 1.0;
        let mut run = 0.0;
        let mut prev = EMPTY;
        for i in 0..n {
            let x = mono.m[i];
            if alive(x) && paths.contains(&path_of(x)) {
                mask |= 1 << det(x);
                if x == prev {
                    run += 1.0;
                    factor *= run;
                } else {
                    run = 1.0;
                    prev = x;
                }
                mono.m[i] = x | DEAD;
            }
        }
        mono.sort();
        groups.entry(mask).or_default().push((mono, amp * libm::sqrt(factor)));
    }
    for g in groups.values_mut() {
        compact(g);
    }
    groups
}

pub(crate) fn viable(plan: &Plan, masks: &[u8], measured: &[bool]) -> bool {
    plan.heralds.iter().any(|h| {
        h.rules.iter().all(|r| match r {
            PRule::Node { devs, bells } => {
                let mut b = 0;
                for &d in devs {
                    if measured[d] {
                        if pcm_hopeless(masks[d]) {
                            return false;
                        }
                        if classify(masks[d]).tag.is_bell() {
                            b += 1;
                        }
                    }
                }
                b <= *bells
            }
            PRule::Click { dev } => !measured[*dev] || masks[*dev].count_ones() <= 1,
            PRule::Party { devs } => {
                devs.iter()
                    .filter(|&&d| measured[d])
                    .map(|&d| masks[d] as u32)
                    .sum::<u32>()
                    <= 1
            }
        })
    })
}

struct Ctx<'a> {
    plan: &'a Plan,
    pcm: [[C64; 4]; 4],
    vis: Vec<f64>,
    order: Vec<usize>,
    finals: Vec<(usize, usize)>,
    out: BTreeMap<Vec<u8>, Matrix>,
}

/// Propagates the primary photons of one presence configuration and
/// returns its atoms in a fixed order. Branches that no herald can accept,
/// even after extra clicks, are dropped.
pub(crate) fn atoms(plan: &Plan, noise: &NoiseModel, config: &[Presence]) -> Result<Vec<Atom>> {
    let (early, late) = split_noise(plan, noise, config);
    let initial = initial_state(plan, &early, config)?;
    let mut ctx = Ctx {
        plan,
        pcm: pcm_optics(&plan.hwp),
        vis: plan.points.iter().map(|p| noise.visibility_at(p)).collect(),
        order: (0..plan.devices.len())
            .filter(|&d| !matches!(plan.devices[d], PDev::Final { .. }))
            .collect(),
        finals: plan.finals().collect(),
        out: BTreeMap::new(),
    };
    elements(&mut ctx, 0, initial, 1.0)?;
    let mut atoms: Vec<Atom> = ctx
        .out
        .into_iter()
        .map(|(masks, mut rho)| {
            for &(d, lambda) in &late {
                if masks[d] == 1 {
                    let k = ctx
                        .finals
                        .iter()
                        .take_while(|&&(f, _)| f != d)
                        .filter(|&&(f, _)| masks[f] == 1)
                        .count();
                    rho = depolarize(&rho, k, lambda);
                }
            }
            Atom {
                masks,
                weight: rho.trace().re,
                rho,
            }
        })
        .filter(|a| a.weight > 0.0)
        .collect();
    atoms.shrink_to_fit();
    Ok(atoms)
}

/// Splits `scale` between the interfering branch (first) and the
/// distinguishable one at an overlap point. A point whose inputs never meet
/// does not branch.
fn branches(v: f64, meets: bool, scale: f64) -> [(bool, f64); 2] {
    if meets && v < 1.0 {
        [(false, scale * v), (true, scale * (1.0 - v))]
    } else {
        [(false, scale), (false, 0.0)]
    }
}

fn elements(ctx: &mut Ctx, k: usize, mut f: Fock, scale: f64) -> Result<()> {
    let plan = ctx.plan;
    let Some(e) = plan.elements.get(k) else {
        let n = plan.devices.len();
        descend(ctx, 0, vec![0; n], vec![false; n], f, scale);
        return Ok(());
    };
    match *e {
        PElem::Rotate { path, ref u } => elements(ctx, k + 1, rotate(&f, path, u), scale),
        PElem::Pbs { a, b, slot } => {
            for (distinct, w) in branches(ctx.vis[slot], meet(&f, a, b), scale) {
                if w == 0.0 {
                    continue;
                }
                let mut g = f.clone();
                if distinct {
                    dephase(&mut g, a, b, slot)?;
                }
                swap_v(&mut g, a, b);
                elements(ctx, k + 1, g, w)?;
            }
            f.clear();
            Ok(())
        }
    }
}

fn descend(ctx: &mut Ctx, pos: usize, masks: Vec<u8>, mut measured: Vec<bool>, f: Fock, scale: f64) {
    if f.is_empty() {
        return;
    }
    if pos == ctx.order.len() {
        finish(ctx, masks, measured, f, scale);
        return;
    }
    let d = ctx.order[pos];
    let plan = ctx.plan;
    let hwp = &plan.hwp;
    measured[d] = true;
    let options = match plan.devices[d] {
        PDev::Pcm { left, right, point } => branches(ctx.vis[point], meet(&f, left, right), scale),
        _ => [(false, scale), (false, 0.0)],
    };
    for (distinct, w) in options {
        if w == 0.0 {
            continue;
        }
        let mut f = f.clone();
        let groups = match plan.devices[d] {
            PDev::Pcm { left, right, .. } => {
                if distinct {
                    tag_path(&mut f, right);
                }
                let f = transform(&f, left, right, &ctx.pcm);
                measure(f, &[left, right], |x| {
                    let base = if path_of(x) == left { 0 } else { 2 };
                    base + (x & 1)
                })
            }
            PDev::Analyzer { path, basis } => {
                if basis == super::layout::Basis::X {
                    f = rotate(&f, path, hwp);
                }
                measure(f, &[path], |x| x & 1)
            }
            PDev::Final { .. } => unreachable!(),
        };
        for (mask, g) in groups {
            let mut m = masks.clone();
            m[d] = mask;
            if viable(plan, &m, &measured) {
                descend(ctx, pos + 1, m, measured.clone(), g, w);
            }
        }
    }
}

fn finish(ctx: &mut Ctx, masks: Vec<u8>, mut measured: Vec<bool>, f: Fock, scale: f64) {
    let plan = ctx.plan;
    // (presence, environment and detector record) -> amplitudes over the
    // polarizations of the present finals
    let mut groups: BTreeMap<(u16, Mono), Vec<C64>> = BTreeMap::new();
    for (mono, amp) in f {
        let mut rest = Mono::new(mono.env);
        let mut presence = 0u16;
        let mut pols = 0u16;
        for &x in &mono.m[..mono.len()] {
            if alive(x) {
                let j = ctx.finals.iter().position(|&(_, p)| p == path_of(x)).unwrap();
                presence |= 1 << j;
                pols |= ((x & 1) as u16) << j;
            } else {
                rest.push(x);
            }
        }
        let k = presence.count_ones();
        let mut index = 0usize;
        let mut bit = 0;
        for j in 0..ctx.finals.len() {
            if presence >> j & 1 == 1 {
                index |= ((pols >> j & 1) as usize) << bit;
                bit += 1;
            }
        }
        let v = groups
            .entry((presence, rest))
            .or_insert_with(|| vec![C64::new(0.0, 0.0); 1 << k]);
        v[index] += amp;
    }
    for &(d, _) in &ctx.finals {
        measured[d] = true;
    }
    for ((presence, _), v) in groups {
        let mut m = masks.clone();
        for (j, &(d, _)) in ctx.finals.iter().enumerate() {
            m[d] = (presence >> j & 1) as u8;
        }
        if !viable(plan, &m, &measured) {
            continue;
        }
        let dim = v.len();
        let acc = ctx.out.entry(m).or_insert_with(|| Matrix::zeros(dim, dim));
        acc.add_scaled(&Matrix::outer(&v), C64::new(scale, 0.0));
    }
}

/// White noise of each source that has to enter the photon state, and the
/// `(final device, λ)` pairs that can instead be applied as a depolarizing
/// channel on a final photon that no optics act on. White noise on a pair is
/// the same channel on either of its photons.
fn split_noise(plan: &Plan, noise: &NoiseModel, config: &[Presence]) -> (Vec<f64>, Vec<(usize, f64)>) {
    let touched = |p: usize| {
        plan.elements.iter().any(|e| match *e {
            PElem::Rotate { path, .. } => path == p,
            PElem::Pbs { a, b, .. } => a == p || b == p,
        })
    };
    let mut early = Vec::new();
    let mut late = Vec::new();
    for (s, (paths, &presence)) in plan.sources.iter().zip(config).enumerate() {
        let lambda = noise.white_noise_of(&plan.layout.sources[s].name);
        let free = paths
            .iter()
            .find_map(|&p| plan.finals().find(|&(_, fp)| fp == p && !touched(p)).map(|(d, _)| d));
        match free {
            Some(d) if lambda > 0.0 && presence == Presence::Both => {
                early.push(0.0);
                late.push((d, lambda));
            }
            _ => early.push(lambda),
        }
    }
    (early, late)
}

/// `(1-λ) ρ + λ I/2 ⊗ tr_k ρ` on qubit `k`.
fn depolarize(m: &Matrix, k: usize, lambda: f64) -> Matrix {
    let bit = 1usize << k;
    Matrix::from_fn(m.rows(), m.cols(), |r, c| {
        let keep = m[(r, c)].scale(1.0 - lambda);
        if (r ^ c) & bit != 0 {
            return keep;
        }
        let (r0, c0) = (r & !bit, c & !bit);
        keep + (m[(r0, c0)] + m[(r0 | bit, c0 | bit)]).scale(lambda / 2.0)
    })
}

fn initial_state(plan: &Plan, lambdas: &[f64], config: &[Presence]) -> Result<Fock> {
    if plan.sources.len() > 8 {
        return Err(layout_err("at most 8 sources are supported"));
    }
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let mut f: Fock = vec![(Mono::new(0), C64::new(1.0, 0.0))];
    for (s, (&[a, b], &presence)) in plan.sources.iter().zip(config).enumerate() {
        let lambda = lambdas[s];
        let shift = SOURCE_BITS * s as u32;
        // (environment digit, photons, amplitude)
        let mut terms: Vec<(u64, Vec<u8>, f64)> = Vec::new();
        match presence {
            Presence::None => terms.push((0, vec![], 1.0)),
            Presence::Both => {
                let c = libm::sqrt(1.0 - lambda) * h;
                if c > 0.0 {
                    terms.push((0, vec![mode(a, 0), mode(b, 0)], c));
                    terms.push((0, vec![mode(a, 1), mode(b, 1)], c));
                }
                if lambda > 0.0 {
                    let c = libm::sqrt(lambda / 4.0);
                    for (j, (pa, pb)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
                        terms.push((1 + j as u64, vec![mode(a, pa), mode(b, pb)], c));
                    }
                }
            }
            Presence::OnlyA | Presence::OnlyB => {
                let p = if presence == Presence::OnlyA { a } else { b };
                terms.push((0, vec![mode(p, 0)], h));
                terms.push((1, vec![mode(p, 1)], h));
            }
        }
        let mut next = Vec::with_capacity(f.len() * terms.len());
        for &(mono, amp) in &f {
            for (digit, photons, c) in &terms {
                let mut m = mono;
                m.env |= digit << shift;
                for &x in photons {
                    m.push(x);
                }
                m.sort();
                next.push((m, amp * *c));
            }
        }
        f = next;
    }
    compact(&mut f);
    Ok(f)
}
