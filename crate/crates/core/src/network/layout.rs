use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::optics::WavePlate;
use crate::{Error, Result};

pub type PhotonId = u8;

/// A pair source. Photon ids double as the names of the spatial paths the
/// photons start on.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct SourceSpec {
    pub name: String,
    pub photons: [PhotonId; 2],
    /// Heralded sources deliver exactly one lossless pair per pulse.
    #[cfg_attr(feature = "serde", serde(default))]
    pub heralded: bool,
}

/// Linear optics applied before the detection stages, in order.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Element {
    /// Transmits H and reflects V: the V components of paths `a` and `b`
    /// trade places. Counts as a two-photon overlap point.
    Pbs {
        name: String,
        a: PhotonId,
        b: PhotonId,
    },
    WavePlate {
        path: PhotonId,
        plate: WavePlate,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Basis {
    Z,
    X,
}

/// Terminal stages. Every path ends in exactly one device.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Device {
    /// CPBS with four detectors; `left` is the GHZ-side input.
    Pcm {
        name: String,
        left: PhotonId,
        right: PhotonId,
    },
    /// Single-photon polarization analyzer with two detectors.
    Analyzer { name: String, path: PhotonId, basis: Basis },
    /// Analyzer of a photon of the distributed pair. Its polarization is
    /// kept as the output state; only its presence counts as a click.
    Final { name: String, path: PhotonId },
}

impl Device {
    pub fn name(&self) -> &str {
        match self {
            Device::Pcm { name, .. } | Device::Analyzer { name, .. } | Device::Final { name, .. } => name,
        }
    }

    pub fn paths(&self) -> Vec<PhotonId> {
        match self {
            Device::Pcm { left, right, .. } => vec![*left, *right],
            Device::Analyzer { path, .. } | Device::Final { path, .. } => vec![*path],
        }
    }

    pub fn detectors(&self) -> u32 {
        match self {
            Device::Pcm { .. } => 4,
            _ => 2,
        }
    }

    pub fn is_final(&self) -> bool {
        matches!(self, Device::Final { .. })
    }
}

/// One requirement of a coincidence condition.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Rule {
    /// Exactly `bells` of the PCMs report a Bell tag and the rest a single
    /// click.
    Node { pcms: Vec<String>, bells: usize },
    /// The analyzer registers exactly one click.
    Click { analyzer: String },
    /// Exactly one click summed over these final analyzers.
    Party { finals: Vec<String> },
}

impl Rule {
    pub fn devices(&self) -> Vec<&str> {
        match self {
            Rule::Node { pcms, .. } => pcms.iter().map(String::as_str).collect(),
            Rule::Click { analyzer } => vec![analyzer.as_str()],
            Rule::Party { finals } => finals.iter().map(String::as_str).collect(),
        }
    }
}

/// A coincidence condition. Devices it does not mention are not registered.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Herald {
    pub name: String,
    pub rules: Vec<Rule>,
}

impl Herald {
    pub fn devices(&self) -> Vec<&str> {
        self.rules.iter().flat_map(|r| r.devices()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ExperimentLayout {
    pub name: String,
    pub sources: Vec<SourceSpec>,
    pub elements: Vec<Element>,
    pub devices: Vec<Device>,
    /// Alternative coincidence conditions; an event counts for the first one
    /// it satisfies.
    pub heralds: Vec<Herald>,
    pub final_candidates: Vec<[PhotonId; 2]>,
    /// Photons that absorb the Pauli correction (whichever is in the pair).
    pub correction_targets: Vec<PhotonId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Channel {
    Upper,
    Lower,
    Both,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Upper => "upper",
            Channel::Lower => "lower",
            Channel::Both => "both",
        }
    }
}

fn pcm(left: PhotonId, right: PhotonId) -> Device {
    let (a, b) = if left < right { (left, right) } else { (right, left) };
    Device::Pcm {
        name: pcm_name(a, b),
        left,
        right,
    }
}

fn pcm_name(a: PhotonId, b: PhotonId) -> String {
    format!("pcm_{a}_{b}")
}

fn analyzer(path: PhotonId) -> Device {
    Device::Analyzer {
        name: format!("x{path}"),
        path,
        basis: Basis::X,
    }
}

fn fin(path: PhotonId) -> Device {
    Device::Final {
        name: format!("f{path}"),
        path,
    }
}

fn sources(heralded_charlie: bool) -> Vec<SourceSpec> {
    [(1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12)]
        .iter()
        .map(|&(a, b)| SourceSpec {
            name: format!("s{a}_{b}"),
            photons: [a, b],
            heralded: heralded_charlie && (a == 5 || a == 7),
        })
        .collect()
}

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn ghz_pbs() -> Element {
    Element::Pbs {
        name: "pbs_5_7".into(),
        a: 5,
        b: 7,
    }
}

/// Twelve photons, GHZ state from a PBS on 5 and 7, PCMs on (2,6), (3,7),
/// (5,9), (8,12) with the GHZ photon on the left input.
pub fn layout_all_photonic_2x2() -> ExperimentLayout {
    ExperimentLayout {
        name: "all_photonic_2x2".into(),
        sources: sources(true),
        elements: vec![ghz_pbs()],
        devices: vec![
            pcm(6, 2),
            pcm(7, 3),
            pcm(5, 9),
            pcm(8, 12),
            fin(1),
            fin(4),
            fin(10),
            fin(11),
        ],
        heralds: vec![Herald {
            name: "eightfold".into(),
            rules: vec![
                Rule::Node {
                    pcms: names(&["pcm_2_6", "pcm_3_7"]),
                    bells: 1,
                },
                Rule::Node {
                    pcms: names(&["pcm_5_9", "pcm_8_12"]),
                    bells: 1,
                },
                Rule::Party {
                    finals: names(&["f1", "f4"]),
                },
                Rule::Party {
                    finals: names(&["f10", "f11"]),
                },
            ],
        }],
        final_candidates: vec![[1, 11], [4, 11], [1, 10], [4, 10]],
        correction_targets: vec![10, 11],
    }
}

/// Plain entanglement swapping along one channel. Upper keeps the CPBS on
/// (2,6) and (8,12) and measures photons 7 and 5 in the X basis; lower keeps
/// (3,7) and (5,9) and measures 6 and 8. Photons of the other channel go to
/// analyzers that are not registered. `Both` removes the GHZ PBS and runs
/// the two chains 1-2-6-5-9-10 and 4-3-7-8-12-11 side by side.
pub fn layout_conventional_2x2(channel: Channel) -> ExperimentLayout {
    let mut devices = Vec::new();
    let (elements, heralds, candidates) = match channel {
        Channel::Upper | Channel::Lower => {
            let upper = channel == Channel::Upper;
            let (p1, p2) = if upper { ((6, 2), (8, 12)) } else { ((7, 3), (5, 9)) };
            let (x1, x2) = if upper { (7, 5) } else { (6, 8) };
            let (f1, f2) = if upper { (1, 11) } else { (4, 10) };
            let idle: [PhotonId; 4] = if upper { [3, 4, 9, 10] } else { [1, 2, 11, 12] };
            devices.push(pcm(p1.0, p1.1));
            devices.push(analyzer(x1));
            devices.push(pcm(p2.0, p2.1));
            devices.push(analyzer(x2));
            for p in idle {
                devices.push(analyzer(p));
            }
            devices.push(fin(f1));
            devices.push(fin(f2));
            let name = |d: &Device| d.name().to_string();
            let heralds = vec![Herald {
                name: channel.name().into(),
                rules: vec![
                    Rule::Node {
                        pcms: vec![name(&devices[0])],
                        bells: 1,
                    },
                    Rule::Click {
                        analyzer: name(&devices[1]),
                    },
                    Rule::Node {
                        pcms: vec![name(&devices[2])],
                        bells: 1,
                    },
                    Rule::Click {
                        analyzer: name(&devices[3]),
                    },
                    Rule::Party {
                        finals: vec![format!("f{f1}")],
                    },
                    Rule::Party {
                        finals: vec![format!("f{f2}")],
                    },
                ],
            }];
            (vec![ghz_pbs()], heralds, vec![[f1, f2]])
        }
        Channel::Both => {
            devices.extend([pcm(6, 2), pcm(7, 3), pcm(5, 9), pcm(8, 12)]);
            devices.extend([fin(1), fin(4), fin(10), fin(11)]);
            let chain = |name: &str, a: &str, b: &str, f1: &str, f2: &str| Herald {
                name: name.into(),
                rules: vec![
                    Rule::Node {
                        pcms: names(&[a]),
                        bells: 1,
                    },
                    Rule::Node {
                        pcms: names(&[b]),
                        bells: 1,
                    },
                    Rule::Party { finals: names(&[f1]) },
                    Rule::Party { finals: names(&[f2]) },
                ],
            };
            (
                Vec::new(),
                vec![
                    chain("chain_1_10", "pcm_2_6", "pcm_5_9", "f1", "f10"),
                    chain("chain_4_11", "pcm_3_7", "pcm_8_12", "f4", "f11"),
                ],
                vec![[1, 10], [4, 11]],
            )
        }
    };
    ExperimentLayout {
        name: format!("conventional_2x2_{}", channel.name()),
        sources: sources(true),
        elements,
        devices,
        heralds,
        final_candidates: candidates,
        correction_targets: vec![10, 11],
    }
}

impl ExperimentLayout {
    pub fn photons(&self) -> Vec<PhotonId> {
        self.sources.iter().flat_map(|s| s.photons).collect()
    }

    pub fn device(&self, name: &str) -> Option<(usize, &Device)> {
        self.devices.iter().enumerate().find(|(_, d)| d.name() == name)
    }

    /// `(name, left, right)` of every PCM.
    pub fn pcms(&self) -> Vec<(&str, PhotonId, PhotonId)> {
        self.devices
            .iter()
            .filter_map(|d| match d {
                Device::Pcm { name, left, right } => Some((name.as_str(), *left, *right)),
                _ => None,
            })
            .collect()
    }

    /// Source index and position (0 or 1) of a photon.
    pub fn source_of(&self, photon: PhotonId) -> Option<(usize, usize)> {
        self.sources
            .iter()
            .enumerate()
            .find_map(|(i, s)| s.photons.iter().position(|&p| p == photon).map(|k| (i, k)))
    }

    /// Names of the two-photon overlap points: PBS elements, then PCMs.
    pub fn overlap_points(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self
            .elements
            .iter()
            .filter_map(|e| match e {
                Element::Pbs { name, .. } => Some(name.as_str()),
                _ => None,
            })
            .collect();
        v.extend(self.pcms().iter().map(|p| p.0));
        v
    }

    /// Copy whose heralds require one click at each photon of `pair`
    /// instead of their own party rules. Unregistered analyzers on those
    /// photons become final analyzers, so pairs that the layout never
    /// entangles can be inspected.
    pub fn with_pair(&self, pair: [PhotonId; 2]) -> Result<ExperimentLayout> {
        let mut out = self.clone();
        let registered: BTreeSet<String> = self
            .heralds
            .iter()
            .flat_map(|h| h.rules.iter().filter(|r| !matches!(r, Rule::Party { .. })))
            .flat_map(|r| r.devices().into_iter().map(String::from))
            .collect();
        let mut finals = Vec::new();
        for p in pair {
            let slot = out
                .devices
                .iter()
                .position(|d| d.paths().contains(&p))
                .ok_or_else(|| Error::Layout(format!("photon {p} is not read by any device")))?;
            let name = match &out.devices[slot] {
                Device::Final { name, .. } => name.clone(),
                Device::Analyzer { name, .. } if !registered.contains(name) => {
                    let name = format!("f{p}");
                    out.devices[slot] = Device::Final {
                        name: name.clone(),
                        path: p,
                    };
                    name
                }
                d => {
                    return Err(Error::Layout(format!(
                        "photon {p} is measured by registered device {}",
                        d.name()
                    )))
                }
            };
            finals.push(name);
        }
        for h in &mut out.heralds {
            h.rules.retain(|r| !matches!(r, Rule::Party { .. }));
            for f in &finals {
                h.rules.push(Rule::Party {
                    finals: vec![f.clone()],
                });
            }
        }
        out.name = format!("{}_pair_{}_{}", self.name, pair[0], pair[1]);
        out.final_candidates = vec![pair];
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Layout(m));
        let photons = self.photons();
        let set: BTreeSet<PhotonId> = photons.iter().copied().collect();
        if set.len() != photons.len() {
            return err("photon ids must be unique".into());
        }
        if photons.len() > 16 {
            return err("at most 16 photons are supported".into());
        }
        if set.contains(&0) || photons.iter().any(|&p| p > 63) {
            return err("photon ids must lie in 1..=63".into());
        }
        let mut names = BTreeSet::new();
        for s in &self.sources {
            if !names.insert(s.name.as_str()) {
                return err(format!("duplicate source name {}", s.name));
            }
        }
        let mut names = BTreeSet::new();
        for e in &self.elements {
            match e {
                Element::Pbs { name, a, b } => {
                    if !set.contains(a) || !set.contains(b) || a == b {
                        return err(format!("PBS {name} needs two distinct existing paths"));
                    }
                    if !names.insert(name.as_str()) {
                        return err(format!("duplicate element name {name}"));
                    }
                }
                Element::WavePlate { path, .. } => {
                    if !set.contains(path) {
                        return err(format!("wave plate on unknown path {path}"));
                    }
                }
            }
        }
        let mut covered = BTreeSet::new();
        for d in &self.devices {
            if !names.insert(d.name()) {
                return err(format!("duplicate device name {}", d.name()));
            }
            for p in d.paths() {
                if !set.contains(&p) {
                    return err(format!("device {} reads unknown path {p}", d.name()));
                }
                if !covered.insert(p) {
                    return err(format!("path {p} ends in more than one device"));
                }
            }
        }
        if covered.len() != set.len() {
            return err("every path must end in a device".into());
        }
        let pbs_count = self.overlap_points().len() - self.pcms().len();
        if pbs_count > 5 {
            return err("at most 5 PBS elements are supported".into());
        }
        let pcm_inputs: BTreeSet<PhotonId> = self.pcms().iter().flat_map(|p| [p.1, p.2]).collect();
        let finals: BTreeSet<PhotonId> = self
            .devices
            .iter()
            .filter_map(|d| match d {
                Device::Final { path, .. } => Some(*path),
                _ => None,
            })
            .collect();
        for e in &self.elements {
            if let Element::Pbs { name, a, b } = e {
                if finals.contains(a) || finals.contains(b) {
                    return err(format!("PBS {name} acts on a final path"));
                }
            }
        }
        for pair in &self.final_candidates {
            for p in pair {
                if !finals.contains(p) || pcm_inputs.contains(p) {
                    return err(format!("final candidate photon {p} must be read by a final analyzer"));
                }
            }
        }
        for t in &self.correction_targets {
            if !set.contains(t) {
                return err(format!("correction target {t} is not a photon of the layout"));
            }
        }
        if self.heralds.is_empty() {
            return err("at least one herald is required".into());
        }
        for h in &self.heralds {
            if h.rules.iter().filter(|r| matches!(r, Rule::Party { .. })).count() != 2 {
                return err(format!("herald {} needs exactly two party rules", h.name));
            }
            let mut seen = BTreeSet::new();
            for r in &h.rules {
                for name in r.devices() {
                    if !seen.insert(name) {
                        return err(format!("herald {} mentions {name} twice", h.name));
                    }
                    let dev = match self.device(name) {
                        Some((_, d)) => d,
                        None => return err(format!("herald {} names unknown device {name}", h.name)),
                    };
                    let ok = match r {
                        Rule::Node { .. } => matches!(dev, Device::Pcm { .. }),
                        Rule::Click { .. } => matches!(dev, Device::Analyzer { .. }),
                        Rule::Party { .. } => dev.is_final(),
                    };
                    if !ok {
                        return err(format!("herald {} uses {name} in the wrong kind of rule", h.name));
                    }
                }
                if let Rule::Node { pcms, bells } = r {
                    if *bells > pcms.len() {
                        return err(format!("herald {} asks for more Bell results than PCMs", h.name));
                    }
                }
            }
        }
        Ok(())
    }
}
