//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use symquad_core::sampling::{make_dataset, make_target, Decay, DistributionName, DistributionSpec};
use symquad_core::{enumerate_basis, BasisSpec, Dataset};

/// Basis of degree `k` for three particles on `S^d` and `n` uniform samples
/// of a smooth invariant target.
pub fn fixture(d: usize, k: usize, n: usize) -> (BasisSpec, Dataset) {
    let basis = enumerate_basis(d, 3, k).expect("valid basis");
    let target = make_target(d, Decay::Exponential(2.0), k + 2, 1).expect("valid target");
    let spec = DistributionSpec::new(d, DistributionName::Uuu).expect("uniform is defined for every d");
    let data = make_dataset(&spec, &target, n, &mut ChaCha8Rng::seed_from_u64(2)).expect("valid dataset");
    (basis, data)
}
