//! Rayon drivers around the core runners. Work is split into pieces whose
//! boundaries do not depend on the thread count, and partial tallies are
//! merged in piece order, so every result is bit-identical for any pool
//! size.

use aprsim_core::network::{
    check_budget, sample_batches, ExperimentLayout, Method, Network, NetworkPlan, RunResult, Tally,
};
use aprsim_core::noise::NoiseModel;
use aprsim_core::source::SourceModel;
use aprsim_core::Result;
use rayon::prelude::*;

/// Number of combination ranges an enumeration is cut into.
pub const ENUMERATION_PIECES: u64 = 64;

/// Builds the per-configuration atoms in parallel.
pub fn build(layout: &ExperimentLayout, source: &SourceModel, noise: &NoiseModel) -> Result<Network> {
    let plan = NetworkPlan::new(layout, source, noise)?;
    let atoms = (0..plan.configs().len())
        .into_par_iter()
        .map(|c| plan.atoms_for(c))
        .collect::<Result<Vec<_>>>()?;
    plan.with_atoms(atoms)
}

fn merge(parts: Vec<Tally>) -> Tally {
    let mut total = Tally::default();
    for t in &parts {
        total.merge(t);
    }
    total
}

pub fn enumerate(net: &Network, budget: u64) -> Result<RunResult> {
    check_budget(net, budget)?;
    let n = net.combinations();
    let pieces = ENUMERATION_PIECES.min(n).max(1);
    let parts: Vec<Tally> = (0..pieces)
        .into_par_iter()
        .map(|i| net.enumerate_range(i * n / pieces..(i + 1) * n / pieces))
        .collect();
    net.finish(&merge(parts), Method::Enumerate)
}

pub fn sample(net: &Network, trials: u64, seed: u64) -> Result<RunResult> {
    let batches: Vec<(u64, u64)> = sample_batches(trials).collect();
    let parts: Vec<Tally> = batches.par_iter().map(|&(b, n)| net.sample_batch(seed, b, n)).collect();
    net.finish(&merge(parts), Method::Sample)
}

pub fn run(net: &Network, method: Method, trials: u64, seed: u64, budget: u64) -> Result<RunResult> {
    match method {
        Method::Enumerate => enumerate(net, budget),
        Method::Sample => sample(net, trials, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use aprsim_core::network::{layout_conventional_2x2, run_sample, Channel};

    fn net() -> Network {
        let noise = NoiseModel {
            efficiency: 0.9,
            ..NoiseModel::default()
        };
        build(
            &layout_conventional_2x2(Channel::Upper),
            &SourceModel::default(),
            &noise,
        )
        .unwrap()
    }

    #[test]
    fn parallel_sampling_equals_serial() {
        let n = net();
        assert_eq!(sample(&n, 100_000, 5).unwrap(), run_sample(&n, 100_000, 5).unwrap());
    }

    #[test]
    fn pool_size_does_not_change_enumeration() {
        let n = net();
        let with = |k: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
            pool.install(|| enumerate(&n, u64::MAX).unwrap())
        };
        let a = with(1);
        assert_eq!(a, with(3));
        let serial = aprsim_core::network::run_enumerate(&n, u64::MAX).unwrap();
        assert!((a.success.value - serial.success.value).abs() < 1e-15);
    }
}
