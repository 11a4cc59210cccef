//! Closed-form rate laws and the twelve-photon Z-basis check.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::quantum::{bitstring, PureState};
use crate::source::range;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    Conventional,
    AllPhotonic,
}

/// Entanglement generation rate of an `N`-node chain with `M` parallel
/// channels: `M η^(N+1)` conventionally, `M^(N+1) η^(N+1)` all-photonic.
/// `N = 0` (a direct link) is accepted and gives `M η` for both.
pub fn rate_formula(m: u32, n: u32, eta: f64, scheme: Scheme) -> Result<f64> {
    if m == 0 {
        return Err(Error::OutOfRange {
            name: "M",
            value: 0.0,
            min: 1.0,
            max: f64::INFINITY,
        });
    }
    if !(eta > 0.0) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            min: 0.0,
            max: 1.0,
        });
    }
    range("eta", eta, 0.0, 1.0)?;
    let loss = libm::pow(eta, (n + 1) as f64);
    let m = m as f64;
    Ok(match scheme {
        Scheme::Conventional => m * loss,
        Scheme::AllPhotonic => libm::pow(m, (n + 1) as f64) * loss,
    })
}

pub const TWELVE: usize = 12;

/// Twelve-photon state behind the Z-basis check, as an ensemble:
/// `v |GHZ12><GHZ12| + (1-v)/2 (|H..H><H..H| + |V..V><V..V|)`.
pub fn twelve_fold_state(v: f64) -> Result<Vec<(f64, PureState)>> {
    range("v", v, 0.0, 1.0)?;
    let mut out = Vec::new();
    if v > 0.0 {
        out.push((v, PureState::ghz(TWELVE, 1.0)?));
    }
    if v < 1.0 {
        let w = (1.0 - v) / 2.0;
        out.push((w, PureState::basis(TWELVE, 0)?));
        out.push((w, PureState::basis(TWELVE, (1 << TWELVE) - 1)?));
    }
    Ok(out)
}

/// Z-basis outcome distribution of [`twelve_fold_state`]: nonzero entries
/// only, keyed by bit strings with photon 1 first (`0` = H).
pub fn twelve_fold_zbasis(v: f64) -> Result<Vec<(String, f64)>> {
    let mut probs = vec![0.0; 1 << TWELVE];
    for (w, s) in twelve_fold_state(v)? {
        for (i, p) in s.probabilities().into_iter().enumerate() {
            probs[i] += w * p;
        }
    }
    Ok(probs
        .into_iter()
        .enumerate()
        .filter(|(_, p)| *p > 1e-15)
        .map(|(i, p)| (bitstring(i, TWELVE), p))
        .collect())
}
