//! Repeater layouts, event enumeration and sampling, final-pair states and
//! closed-form rate laws.

mod fock;
mod formula;
mod layout;
mod plan;
mod run;
mod table;

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

pub use fock::{Atom, Presence};
pub use formula::{rate_formula, twelve_fold_state, twelve_fold_zbasis, Scheme};
pub use layout::{
    layout_all_photonic_2x2, layout_conventional_2x2, Basis, Channel, Device, Element, ExperimentLayout, Herald,
    PhotonId, Rule, SourceSpec,
};
pub use run::{
    check_budget, run_enumerate, run_sample, sample_batches, source_options, Network, NetworkPlan, SourceOption, Tally,
    DEFAULT_BUDGET, SAMPLE_BATCH,
};
pub use table::{corrected_fidelity, corrected_state, final_pair_table, pair_states, FinalPairRow, PairState};

use crate::pcm::PcmTag;
use crate::quantum::DensityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Enumerate,
    Sample,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Enumerate => "enumerate",
            Method::Sample => "sample",
        }
    }
}

/// A probability per pulse. `trials_or_weight` is the trial count for
/// sampling and the enumerated weight for enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateEstimate {
    pub value: f64,
    pub std_error: f64,
    pub trials_or_weight: f64,
    pub method: Method,
}

/// Result reported by a registered device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DeviceOutcome {
    Pcm(PcmTag),
    /// Index of the analyzer detector that fired: 0 for `H` (or `D` in the X
    /// basis), 1 for `V` (or `A`).
    Click(u8),
}

impl fmt::Display for DeviceOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeviceOutcome::Pcm(t) => write!(f, "{t}"),
            DeviceOutcome::Click(d) => write!(f, "d{d}"),
        }
    }
}

/// Heralded pair for one outcome pattern, before correction.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalPairRecord {
    pub herald: String,
    pub outcomes: BTreeMap<String, DeviceOutcome>,
    /// First photon on qubit 0.
    pub pair: [PhotonId; 2],
    pub probability: RateEstimate,
    pub state: DensityMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub layout: String,
    pub method: Method,
    /// Probability per pulse that any herald fires.
    pub success: RateEstimate,
    pub heralds: alloc::vec::Vec<(String, RateEstimate)>,
    pub records: alloc::vec::Vec<FinalPairRecord>,
}

/// All-photonic rate over the summed conventional channel rates. The
/// standard error treats the three estimates as independent.
pub fn rate_ratio(all_photonic: &RateEstimate, upper: &RateEstimate, lower: &RateEstimate) -> RateEstimate {
    let den = upper.value + lower.value;
    let value = if den > 0.0 { all_photonic.value / den } else { f64::NAN };
    let rel = |x: f64, e: f64| if x > 0.0 { e / x } else { 0.0 };
    let a = rel(all_photonic.value, all_photonic.std_error);
    let b = rel(den, libm::hypot(upper.std_error, lower.std_error));
    RateEstimate {
        value,
        std_error: libm::fabs(value) * libm::hypot(a, b),
        trials_or_weight: all_photonic.trials_or_weight,
        method: all_photonic.method,
    }
}
