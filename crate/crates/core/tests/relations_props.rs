mod common;

use common::{random_channel, random_coupling, random_integer_metric};
use mismatch_core::cc_bound::{gamma_cc_membership, gamma_star_membership};
use mismatch_core::metric::{gamma_membership, DEFAULT_TIE_TOL};
use mismatch_core::optim::SolverConfig;
use mismatch_core::prob::{channel_capacity, BroadcastChannel, ProbVector};
use mismatch_core::relations::{isomorphic, superior};
use mismatch_core::sd_bound::{sd_bound, BoundConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const TOL: f64 = DEFAULT_TIE_TOL;

#[test]
fn twenty_random_chains_compose() {
    common::composable_chains(11, 20).unwrap();
}

#[test]
fn superiority_bounds_capacity_through_sd() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let cfg = SolverConfig::default();
    let mut checked = 0;
    for _ in 0..200 {
        let q = random_integer_metric(&mut rng, 2, 2);
        let rho = random_integer_metric(&mut rng, 2, 2);
        let w1 = random_channel(&mut rng, 2, 2);
        let w2 = random_channel(&mut rng, 2, 2);
        let s = superior(&w1, &q, &w2, &rho, TOL, &cfg).unwrap();
        if !s.holds {
            continue;
        }
        let bound = sd_bound(&w1, &q, &rho, &BoundConfig::default()).unwrap();
        let cap = channel_capacity(&w2, 1e-10).unwrap().rate.nats();
        assert!(bound.rate.nats() <= cap + 1e-4, "{} > {}", bound.rate.nats(), cap);
        checked += 1;
    }
    assert!(checked >= 5, "only {checked} superior pairs");
}

#[test]
fn isomorphism_is_reflexive_on_random_pairs() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    for _ in 0..20 {
        let w = random_channel(&mut rng, 3, 3);
        let q = random_integer_metric(&mut rng, 3, 3);
        assert!(isomorphic(&w, &q, &w, &q, TOL, &SolverConfig::default()).unwrap().holds);
    }
}

fn arb_case() -> impl Strategy<Value = (u64, Vec<f64>)> {
    (any::<u64>(), prop::collection::vec(0.05f64..1.0, 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Rectangular membership implies composition-dependent membership,
    /// which implies membership in the star set.
    #[test]
    fn containment_chain((seed, p) in arb_case()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let q = random_integer_metric(&mut rng, 2, 2);
        let rho = random_integer_metric(&mut rng, 2, 2);
        let total: f64 = p.iter().sum();
        let p = ProbVector::new(p.iter().map(|v| v / total).collect()).unwrap();
        let cfg = SolverConfig::default();
        let ch = match random_coupling(&mut rng, None, &q, &rho) {
            Some(ch) => ch,
            None => {
                // Any channel will do for the implication cc => star.
                BroadcastChannel::splice(&random_channel(&mut rng, 2, 2))
            }
        };
        let rect = gamma_membership(&ch, &q, &rho, TOL).unwrap().member;
        let cc = gamma_cc_membership(&ch, &q, &rho, &p, &cfg).unwrap().member;
        let star = gamma_star_membership(&ch, &q, &p, &cfg).unwrap().member;
        prop_assert!(!rect || cc);
        prop_assert!(!cc || star);
    }

    /// Shrinking the support never turns a member into a non-member.
    #[test]
    fn cc_membership_is_support_monotone((seed, p) in arb_case(), drop in 0usize..8) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let q = random_integer_metric(&mut rng, 2, 2);
        let rho = random_integer_metric(&mut rng, 2, 2);
        let total: f64 = p.iter().sum();
        let p = ProbVector::new(p.iter().map(|v| v / total).collect()).unwrap();
        let cfg = SolverConfig::default();
        let w = random_channel(&mut rng, 2, 2);
        let full = BroadcastChannel::independent(&w, &random_channel(&mut rng, 2, 2)).unwrap();
        // Remove one cell, keeping the block's mass on the other output.
        let mut t = full.as_flat().to_vec();
        let (i, partner) = (drop, drop ^ 1);
        t[partner] += t[i];
        t[i] = 0.0;
        let smaller = BroadcastChannel::new(2, 2, 2, t).unwrap();
        let big = gamma_cc_membership(&full, &q, &rho, &p, &cfg).unwrap().member;
        let small = gamma_cc_membership(&smaller, &q, &rho, &p, &cfg).unwrap().member;
        prop_assert!(!big || small);
    }
}
