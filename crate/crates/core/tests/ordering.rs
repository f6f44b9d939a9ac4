//! Achievable rates never exceed the upper bounds, and each bound never
//! exceeds the capacity of its own minimizing channel.

mod common;

use common::{check_ordering, random_channel, random_integer_metric};
use mismatch_core::metric::AdditiveMetric;
use mismatch_core::prob::StochasticMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

#[test]
fn tight_example() {
    let w = StochasticMatrix::new(vec![vec![0.97, 0.03, 0.0], vec![0.1, 0.1, 0.8]]).unwrap();
    let q = AdditiveMetric::new(vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.36]]).unwrap();
    check_ordering(&w, &q, &q, false).unwrap();
}

#[test]
fn random_binary_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    for _ in 0..10 {
        let w = random_channel(&mut rng, 2, 2);
        let q = random_integer_metric(&mut rng, 2, 2);
        let rho = random_integer_metric(&mut rng, 2, 2);
        check_ordering(&w, &q, &rho, true).unwrap();
    }
}

#[test]
fn random_ternary_instances() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for _ in 0..2 {
        let w = random_channel(&mut rng, 3, 3);
        let q = random_integer_metric(&mut rng, 3, 3);
        let rho = random_integer_metric(&mut rng, 3, 3);
        check_ordering(&w, &q, &rho, false).unwrap();
    }
}
