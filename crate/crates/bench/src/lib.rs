//! Fixed inputs shared by the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wsq_core::harness::{self, Flavor, GeneratorSpec};
use wsq_core::{DiscreteStatistic, HermitianMatrix, StateFamily};

pub fn hermitian(dim: usize, seed: u64) -> HermitianMatrix {
    harness::random_hermitian(&mut ChaCha8Rng::seed_from_u64(seed), dim)
}

pub fn instance(
    flavor: Flavor,
    dim: usize,
    states: usize,
    seed: u64,
) -> (DiscreteStatistic, StateFamily) {
    harness::generate(&GeneratorSpec {
        dim,
        states,
        flavor,
        seed,
    })
    .expect("benchmark fixture parameters are valid")
}
