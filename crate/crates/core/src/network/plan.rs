//! Layout compiled to dense indices.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::layout::{Basis, Device, Element, ExperimentLayout, PhotonId, Rule};
use crate::optics::hwp_22_5;
use crate::{Result, C64};

pub(crate) type Unitary = [[C64; 2]; 2];

pub(crate) fn unitary(m: &crate::linalg::Matrix) -> Unitary {
    [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]]
}

#[derive(Debug, Clone)]
pub(crate) enum PElem {
    Rotate {
        path: usize,
        u: Unitary,
    },
    /// `slot` indexes the PBS among PBS elements.
    Pbs {
        a: usize,
        b: usize,
        slot: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PDev {
    Pcm { left: usize, right: usize, point: usize },
    Analyzer { path: usize, basis: Basis },
    Final { path: usize },
}

impl PDev {
    pub fn detectors(self) -> u8 {
        match self {
            PDev::Pcm { .. } => 4,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum PRule {
    Node { devs: Vec<usize>, bells: usize },
    Click { dev: usize },
    Party { devs: Vec<usize> },
}

#[derive(Debug, Clone)]
pub(crate) struct PHerald {
    pub rules: Vec<PRule>,
    /// Device indices in rule order; outcome keys follow this order.
    pub devices: Vec<usize>,
    /// Total clicks on `devices` of an accepted event.
    pub clicks: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct Plan {
    pub layout: ExperimentLayout,
    /// Path index to photon id.
    pub photons: Vec<PhotonId>,
    /// Path indices of each source's two photons.
    pub sources: Vec<[usize; 2]>,
    pub elements: Vec<PElem>,
    pub devices: Vec<PDev>,
    pub heralds: Vec<PHerald>,
    /// Overlap point names: PBS elements in order, then PCMs.
    pub points: Vec<String>,
    /// Where a depolarized photon starting on each path ends up:
    /// `(device, probability)`.
    pub routes: Vec<Vec<(usize, f64)>>,
    /// Devices named by at least one herald.
    pub registered: Vec<bool>,
    pub hwp: Unitary,
}

impl Plan {
    pub fn new(layout: &ExperimentLayout) -> Result<Plan> {
        layout.validate()?;
        let photons = layout.photons();
        let idx = |p: PhotonId| photons.iter().position(|&q| q == p).unwrap();
        let sources = layout
            .sources
            .iter()
            .map(|s| [idx(s.photons[0]), idx(s.photons[1])])
            .collect();
        let mut points: Vec<String> = Vec::new();
        let mut elements = Vec::new();
        let mut slot = 0;
        for e in &layout.elements {
            match e {
                Element::Pbs { name, a, b } => {
                    elements.push(PElem::Pbs {
                        a: idx(*a),
                        b: idx(*b),
                        slot,
                    });
                    slot += 1;
                    points.push(name.clone());
                }
                Element::WavePlate { path, plate } => elements.push(PElem::Rotate {
                    path: idx(*path),
                    u: unitary(&plate.matrix()),
                }),
            }
        }
        let mut device_of_path = vec![0; photons.len()];
        let mut devices = Vec::new();
        for (i, d) in layout.devices.iter().enumerate() {
            for p in d.paths() {
                device_of_path[idx(p)] = i;
            }
            devices.push(match d {
                Device::Pcm { name, left, right } => {
                    points.push(name.clone());
                    PDev::Pcm {
                        left: idx(*left),
                        right: idx(*right),
                        point: points.len() - 1,
                    }
                }
                Device::Analyzer { path, basis, .. } => PDev::Analyzer {
                    path: idx(*path),
                    basis: *basis,
                },
                Device::Final { path, .. } => PDev::Final { path: idx(*path) },
            });
        }
        let dev = |name: &str| layout.device(name).unwrap().0;
        let heralds = layout
            .heralds
            .iter()
            .map(|h| {
                let rules: Vec<PRule> = h
                    .rules
                    .iter()
                    .map(|r| match r {
                        Rule::Node { pcms, bells } => PRule::Node {
                            devs: pcms.iter().map(|n| dev(n)).collect(),
                            bells: *bells,
                        },
                        Rule::Click { analyzer } => PRule::Click { dev: dev(analyzer) },
                        Rule::Party { finals } => PRule::Party {
                            devs: finals.iter().map(|n| dev(n)).collect(),
                        },
                    })
                    .collect();
                let clicks = rules
                    .iter()
                    .map(|r| match r {
                        PRule::Node { devs, bells } => (devs.len() + bells) as u32,
                        _ => 1,
                    })
                    .sum();
                PHerald {
                    rules,
                    devices: h.devices().iter().map(|n| dev(n)).collect(),
                    clicks,
                }
            })
            .collect();

        let n = photons.len();
        let routes = (0..n)
            .map(|start| {
                let mut dist = vec![0.0; n];
                dist[start] = 1.0;
                for e in &elements {
                    if let PElem::Pbs { a, b, .. } = *e {
                        let m = 0.5 * (dist[a] + dist[b]);
                        dist[a] = m;
                        dist[b] = m;
                    }
                }
                let mut out: Vec<(usize, f64)> = Vec::new();
                for (p, &w) in dist.iter().enumerate() {
                    if w > 0.0 {
                        let d = device_of_path[p];
                        match out.iter_mut().find(|x| x.0 == d) {
                            Some(x) => x.1 += w,
                            None => out.push((d, w)),
                        }
                    }
                }
                out
            })
            .collect();

        let mut registered = vec![false; devices.len()];
        for h in &layout.heralds {
            for name in h.devices() {
                registered[dev(name)] = true;
            }
        }
        Ok(Plan {
            registered,
            layout: layout.clone(),
            photons,
            sources,
            elements,
            devices,
            heralds,
            points,
            routes,
            hwp: unitary(&hwp_22_5()),
        })
    }

    pub fn finals(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.devices.iter().enumerate().filter_map(|(i, d)| match d {
            PDev::Final { path } => Some((i, *path)),
            _ => None,
        })
    }
}

/// What extra photons can do to the registered devices: `reach` has a bit
/// per device they may land on, `counts[h]` is the number of extras certain
/// to land on herald `h`'s devices and the number that may.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub(crate) struct Reach {
    pub reach: u32,
    pub counts: Vec<(u8, u8)>,
}

impl Reach {
    pub fn of(plan: &Plan, extras: &[usize]) -> Reach {
        let mut out = Reach {
            reach: 0,
            counts: vec![(0, 0); plan.heralds.len()],
        };
        for &p in extras {
            let route = &plan.routes[p];
            for &(d, _) in route {
                if plan.registered[d] {
                    out.reach |= 1 << d;
                }
            }
            for (h, c) in plan.heralds.iter().zip(out.counts.iter_mut()) {
                let inside = route.iter().filter(|(d, _)| h.devices.contains(d)).count();
                if inside == route.len() {
                    c.0 += 1;
                }
                if inside > 0 {
                    c.1 += 1;
                }
            }
        }
        out
    }
}

/// Whether a herald could still accept `masks` once the extras described by
/// `reach` have landed. Loose: never rejects an event that some placement
/// makes acceptable. Extras only ever add clicks on free detectors.
pub(crate) fn viable_with(plan: &Plan, masks: &[u8], reach: &Reach) -> bool {
    let open = |d: usize| reach.reach >> d & 1 == 1;
    plan.heralds.iter().zip(&reach.counts).any(|(h, &(cert, poss))| {
        let c: u32 = h.devices.iter().map(|&d| masks[d].count_ones()).sum();
        if c + (cert as u32) > h.clicks || c + (poss as u32) < h.clicks {
            return false;
        }
        h.rules.iter().all(|r| match r {
            PRule::Node { devs, bells } => {
                let mut fixed_bells = 0;
                let mut open_count = 0;
                for &d in devs {
                    if open(d) {
                        if pcm_hopeless(masks[d]) {
                            return false;
                        }
                        open_count += 1;
                    } else {
                        let tag = crate::pcm::classify(masks[d]).tag;
                        if tag.is_bell() {
                            fixed_bells += 1;
                        } else if !tag.is_single() {
                            return false;
                        }
                    }
                }
                fixed_bells <= *bells && fixed_bells + open_count >= *bells
            }
            PRule::Click { dev } => {
                let c = masks[*dev].count_ones();
                if open(*dev) {
                    c <= 1
                } else {
                    c == 1
                }
            }
            PRule::Party { devs } => {
                let c: u32 = devs.iter().map(|&d| masks[d].count_ones()).sum();
                if devs.iter().any(|&d| open(d)) {
                    c <= 1
                } else {
                    c == 1
                }
            }
        })
    })
}

/// Hopeless means no superset of the mask can satisfy the rule kind.
pub(crate) fn pcm_hopeless(mask: u8) -> bool {
    mask & 0b0011 == 0b0011 || mask & 0b1100 == 0b1100
}
