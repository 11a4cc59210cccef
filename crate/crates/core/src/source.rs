//! Event-level SPDC sources: pair-number statistics, photon survival and the
//! first-order coincidence rate.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

/// How the per-pulse pair-number weights `w(k)` are built from `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EmissionSeries {
    /// `w(k) = (1-p) p^k` for `k < max_pairs`, the tail `p^max_pairs` lumped
    /// into the last bin.
    #[default]
    Thermal,
    /// `w(k) = p^k` for `k >= 1`, vacuum takes the rest.
    Truncated,
    /// `w(k) = p^k / k!` for `k >= 1`, vacuum takes the rest.
    Poissonian,
    /// `(1, p, 0, ...)`: the small-`p` expansion with undepleted vacuum.
    /// Weights do not sum to one.
    LeadingOrder,
}

impl EmissionSeries {
    pub const ALL: [EmissionSeries; 4] = [
        EmissionSeries::Thermal,
        EmissionSeries::Truncated,
        EmissionSeries::Poissonian,
        EmissionSeries::LeadingOrder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmissionSeries::Thermal => "thermal",
            EmissionSeries::Truncated => "truncated",
            EmissionSeries::Poissonian => "poissonian",
            EmissionSeries::LeadingOrder => "leading_order",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SourceModel {
    /// Down-conversion probability per pulse.
    pub p: f64,
    pub max_pairs: usize,
    /// Pump repetition rate in Hz.
    pub pulse_rate: f64,
    /// Overall per-photon detection efficiency.
    pub efficiency: f64,
    pub series: EmissionSeries,
}

impl Default for SourceModel {
    fn default() -> Self {
        SourceModel {
            p: 0.0344,
            max_pairs: 2,
            pulse_rate: 8.0e7,
            efficiency: 0.38,
            series: EmissionSeries::Thermal,
        }
    }
}

pub const MAX_P: f64 = 0.3;

impl SourceModel {
    pub fn with_p(p: f64) -> Self {
        SourceModel {
            p,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        range("p", self.p, 0.0, MAX_P)?;
        range("efficiency", self.efficiency, 0.0, 1.0)?;
        if !(self.pulse_rate >= 0.0 && self.pulse_rate.is_finite()) {
            return Err(Error::OutOfRange {
                name: "pulse_rate",
                value: self.pulse_rate,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if self.max_pairs == 0 || self.max_pairs > 4 {
            return Err(Error::OutOfRange {
                name: "max_pairs",
                value: self.max_pairs as f64,
                min: 1.0,
                max: 4.0,
            });
        }
        Ok(())
    }

    /// `w(0..=max_pairs)` for one source.
    pub fn pair_weights(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let p = self.p;
        let k_max = self.max_pairs;
        let mut w = vec![0.0; k_max + 1];
        match self.series {
            EmissionSeries::Thermal => {
                for (k, x) in w.iter_mut().enumerate() {
                    *x = if k < k_max {
                        (1.0 - p) * libm::pow(p, k as f64)
                    } else {
                        libm::pow(p, k as f64)
                    };
                }
            }
            EmissionSeries::Truncated | EmissionSeries::Poissonian => {
                let mut fact = 1.0;
                for k in 1..=k_max {
                    fact *= k as f64;
                    w[k] = libm::pow(p, k as f64);
                    if self.series == EmissionSeries::Poissonian {
                        w[k] /= fact;
                    }
                }
                w[0] = 1.0 - w[1..].iter().sum::<f64>();
            }
            EmissionSeries::LeadingOrder => {
                w[0] = 1.0;
                w[1] = p;
            }
        }
        Ok(w)
    }

    /// Draws a pair count from the weights (renormalized for the
    /// leading-order series).
    pub fn sample_pairs<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        for (k, &w) in weights.iter().enumerate() {
            if u < w {
                return k;
            }
            u -= w;
        }
        weights.len() - 1
    }
}

/// Pair count of every source for one pulse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmissionPattern {
    pub pairs_per_source: Vec<u8>,
}

impl EmissionPattern {
    pub fn num_photons(&self) -> usize {
        self.pairs_per_source.iter().map(|&k| 2 * k as usize).sum()
    }
}

/// Every pattern with its product weight. Source `0` varies fastest.
pub fn emission_distribution(model: &SourceModel, num_sources: usize) -> Result<Vec<(EmissionPattern, f64)>> {
    let w = model.pair_weights()?;
    let base = w.len();
    let count = base
        .checked_pow(num_sources as u32)
        .filter(|&c| c <= 1 << 24)
        .ok_or(Error::BudgetExceeded {
            needed: u64::MAX,
            budget: 1 << 24,
        })?;
    Ok((0..count)
        .map(|mut idx| {
            let mut pairs = Vec::with_capacity(num_sources);
            let mut weight = 1.0;
            for _ in 0..num_sources {
                let k = idx % base;
                idx /= base;
                pairs.push(k as u8);
                weight *= w[k];
            }
            (
                EmissionPattern {
                    pairs_per_source: pairs,
                },
                weight,
            )
        })
        .collect())
}

/// Independent survival of every emitted photon, listed source by source and
/// pair by pair as `(a, b)`.
pub fn survival_sample<R: Rng + ?Sized>(pattern: &EmissionPattern, eta: f64, rng: &mut R) -> Result<Vec<bool>> {
    range("eta", eta, 0.0, 1.0)?;
    Ok((0..pattern.num_photons()).map(|_| rng.random::<f64>() < eta).collect())
}

/// First-order two-photon coincidence rate of one source, in Hz.
pub fn twofold_rate(model: &SourceModel) -> f64 {
    model.pulse_rate * model.p * model.efficiency * model.efficiency
}

pub(crate) fn range(name: &'static str, value: f64, min: f64, max: f64) -> Result<()> {
    if value >= min && value <= max {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, min, max })
    }
}
