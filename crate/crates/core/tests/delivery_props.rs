mod common;

use cacheopt::bounds::{distinct_set_probability, rlb_popfirst};
use cacheopt::combinatorics::{all_demands, binomial, demand_classes};
use cacheopt::delivery::*;
use cacheopt::model::is_popularity_first;
use cacheopt::{Demand, DistinctSet, Placement};
use itertools::Itertools;
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..=4, 1usize..=4, any::<u64>())
}

fn fixture(n: usize, k: usize, seed: u64) -> (Vec<f64>, Placement) {
    let mut rng = common::rng(seed);
    let p = common::random_popularity(&mut rng, n);
    let a = common::random_q_placement(&mut rng, n, k);
    (p, a)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mccs_between_zero_and_ccs((n, k, seed) in dims()) {
        let (_, a) = fixture(n, k, seed);
        for d in all_demands(n, k) {
            let m = rate_mccs(&d, &a);
            prop_assert!(m >= 0.0);
            prop_assert!(m <= rate_ccs(&d, &a) + 1e-15);
        }
    }

    #[test]
    fn redundancy_counting_matches_subsets((n, k, seed) in dims()) {
        let (_, a) = fixture(n, k, seed);
        prop_assert!(is_popularity_first(&a));
        for d in all_demands(n, k) {
            let diff = (rate_mccs_lemma3(&d, &a).unwrap() - rate_mccs(&d, &a)).abs();
            prop_assert!(diff <= 1e-12, "{:?}: {}", d, diff);
        }
    }

    #[test]
    fn any_leader_group_gives_the_same_rate((n, k, seed) in (1usize..=3, 1usize..=5, any::<u64>())) {
        // also for placements outside Q
        let mut rng = common::rng(seed);
        let a = common::random_q_placement(&mut rng, n, k);
        let mut rows = a.to_matrix();
        rows.reverse();
        for a in [a, Placement::from_rows(rows)] {
            for class in demand_classes(n, k) {
                let d = &class.representative;
                let base = rate_mccs(d, &a);
                for u in all_leader_groups(d) {
                    prop_assert!((rate_mccs_with_leaders(d, &a, &u) - base).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn lower_bound_is_tight_in_special_regions((n, k, seed) in dims()) {
        let (_, a) = fixture(n, k, seed);
        for d in all_demands(n, k) {
            let set = DistinctSet::of(&d);
            let prof = redundancy_profile(&d);
            let last = prof.order.len() - 1;
            let only_last_redundant = prof.per_file[..last].iter().all(|&c| c == 0);
            if set.len() == k || set.len() == 1 || only_last_redundant {
                let lb = rlb_popfirst(&set, &a).unwrap();
                prop_assert!((rate_mccs(&d, &a) - lb).abs() <= 1e-12, "{:?}", d);
            }
        }
    }

    #[test]
    fn identical_rows_follow_the_symmetric_formula((n, k, seed) in dims()) {
        let (_, a) = fixture(1, k, seed);
        let rows = vec![a.row(0).entries().to_vec(); n];
        let a = Placement::from_rows(rows);
        let mut rng = common::rng(seed ^ 1);
        let inst = common::instance_for(k, common::random_popularity(&mut rng, n), &a);
        let kk = k as i64;
        let mut direct = 0.0;
        for size in 1..=n.min(k) {
            for files in (0..n).combinations(size) {
                let set = DistinctSet::new(files).unwrap();
                let per: f64 = (1..=size as i64)
                    .flat_map(|i| (0..kk).map(move |l| (i, l)))
                    .map(|(i, l)| binomial(kk - i, l) * a.a(0, l as usize))
                    .sum();
                direct += distinct_set_probability(&inst, &set) * per;
            }
        }
        let r = expected_rate(Scheme::Mccs, &inst, &a).unwrap();
        prop_assert!((r - direct).abs() <= 1e-12);
    }
}

#[test]
fn class_expectation_matches_raw_enumeration() {
    let mut rng = common::rng(11);
    let p = common::random_popularity(&mut rng, 3);
    let a = common::random_q_placement(&mut rng, 3, 4);
    let inst = common::instance_for(4, p.clone(), &a);
    let raw: f64 = all_demands(3, 4).map(|d| d.probability(&p) * rate_mccs(&d, &a)).sum();
    let classes = expected_rate(Scheme::Mccs, &inst, &a).unwrap();
    assert!((raw - classes).abs() < 1e-14);
}

#[test]
fn expected_rate_is_bit_reproducible() {
    let mut rng = common::rng(5);
    let p = common::random_popularity(&mut rng, 6);
    let a = common::random_q_placement(&mut rng, 6, 4);
    let inst = common::instance_for(4, p, &a);
    let first = expected_rate(Scheme::Mccs, &inst, &a).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| expected_rate(Scheme::Mccs, &inst, &a).unwrap());
    assert_eq!(first.to_bits(), single.to_bits());
}

#[test]
fn conditional_rate_over_permutations() {
    // K = N with uniform popularity: the only distinct set is the full library
    let inst = cacheopt::Instance::new(3, 1.0, vec![1.0 / 3.0; 3]).unwrap();
    let a = Placement::from_rows(vec![vec![0.4, 0.2, 0.0, 0.0], vec![0.7, 0.1, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]]);
    let avg: f64 = (0..3usize)
        .permutations(3)
        .map(|perm| rate_mccs(&Demand::new(perm, 3, 3).unwrap(), &a))
        .sum::<f64>()
        / 6.0;
    let r = conditional_expected_rate_distinct(&inst, &a).unwrap();
    assert!((r - avg).abs() < 1e-14);
}
