//! Delivery rates of the coded caching schemes.
//!
//! For a demand `d` and a user subset `S`, the coded message `C_S` XORs, for
//! every `k ∈ S`, the subfile of file `d_k` cached by the users `S \ {k}`.
//! Subfiles are zero-padded to the largest one, so `|C_S| = max_{k∈S}
//! a[d_k][|S|-1]`. The CCS sends every message; the MCCS picks a leader group
//! (one requester per distinct file) and skips the messages of subsets that
//! contain no leader.

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{binomial, demand_classes, raw_demand_count};
use crate::model::{is_popularity_first, Demand, DistinctSet, Instance, Placement};
use crate::{Error, Result};

/// Largest `N^K` for which expectations are computed by exact enumeration.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Most users a subset bitmask can address.
const MAX_USERS: usize = 30;

pub fn distinct_set(d: &Demand) -> DistinctSet {
    DistinctSet::of(d)
}

/// One user per distinct requested file, sorted by user index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LeaderGroup {
    users: Vec<usize>,
}

impl LeaderGroup {
    /// Validates that `users` covers every distinct file of `d` exactly once.
    pub fn new(d: &Demand, mut users: Vec<usize>) -> Result<Self> {
        users.sort_unstable();
        users.dedup();
        let distinct = DistinctSet::of(d);
        if users.iter().any(|&u| u >= d.n_users()) {
            return Err(Error::InvalidDemand("leader index out of range".into()));
        }
        let mut files: Vec<usize> = users.iter().map(|&u| d.requests()[u]).collect();
        files.sort_unstable();
        if files != distinct.files() {
            return Err(Error::InvalidDemand(
                "leaders must request each distinct file exactly once".into(),
            ));
        }
        Ok(LeaderGroup { users })
    }

    pub fn users(&self) -> &[usize] {
        &self.users
    }

    fn mask(&self) -> u64 {
        self.users.iter().fold(0, |m, &u| m | (1 << u))
    }
}

/// The lowest-indexed requester of each distinct file.
pub fn leader_group(d: &Demand) -> LeaderGroup {
    let mut seen = Vec::new();
    let mut users = Vec::new();
    for (k, &f) in d.requests().iter().enumerate() {
        if !seen.contains(&f) {
            seen.push(f);
            users.push(k);
        }
    }
    LeaderGroup { users }
}

/// Every valid leader group of `d`, for invariance checks.
pub fn all_leader_groups(d: &Demand) -> Vec<LeaderGroup> {
    let distinct = DistinctSet::of(d);
    distinct
        .files()
        .iter()
        .map(|&f| {
            d.requests()
                .iter()
                .enumerate()
                .filter(move |&(_, &g)| g == f)
                .map(|(k, _)| k)
        })
        .multi_cartesian_product()
        .map(|mut users| {
            users.sort_unstable();
            LeaderGroup { users }
        })
        .collect()
}

/// `|C_S|` for the subset encoded by `subset` (bit `k` set for user `k`).
pub fn coded_message_size(subset: u64, d: &Demand, a: &Placement) -> f64 {
    debug_assert!(subset != 0);
    let level = subset.count_ones() as usize - 1;
    let req = d.requests();
    let mut best = 0.0f64;
    let mut bits = subset;
    while bits != 0 {
        let k = bits.trailing_zeros() as usize;
        best = best.max(a.a(req[k], level));
        bits &= bits - 1;
    }
    best
}

fn check_dims(d: &Demand, a: &Placement) {
    assert_eq!(d.n_users(), a.n_users(), "demand and placement disagree on K");
    assert!(d.n_users() <= MAX_USERS, "at most {MAX_USERS} users supported");
}

fn sum_messages(d: &Demand, a: &Placement, leaders: Option<u64>) -> f64 {
    check_dims(d, a);
    let k = d.n_users();
    (1u64..(1 << k))
        .filter(|&s| leaders.is_none_or(|m| s & m != 0))
        .map(|s| coded_message_size(s, d, a))
        .sum()
}

/// Total size of the non-redundant messages.
pub fn rate_mccs(d: &Demand, a: &Placement) -> f64 {
    sum_messages(d, a, Some(leader_group(d).mask()))
}

/// MCCS rate with an explicitly chosen leader group.
pub fn rate_mccs_with_leaders(d: &Demand, a: &Placement, leaders: &LeaderGroup) -> f64 {
    sum_messages(d, a, Some(leaders.mask()))
}

/// Total size of all `2^K - 1` coded messages.
pub fn rate_ccs(d: &Demand, a: &Placement) -> f64 {
    sum_messages(d, a, None)
}

/// Redundant-request counts of a demand, with distinct files taken in
/// decreasing popularity (increasing index).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RedundancyProfile {
    /// Distinct files in popularity order.
    pub order: Vec<usize>,
    /// `per_file[i]`: requests for `order[i]` from users outside the leader group.
    pub per_file: Vec<usize>,
    /// `hat_n[i]`: redundant requests for the `i` most popular distinct files;
    /// `hat_n[0] = 0` and `hat_n.len() = order.len() + 1`.
    pub hat_n: Vec<usize>,
}

pub fn redundancy_profile(d: &Demand) -> RedundancyProfile {
    let order = DistinctSet::of(d).files().to_vec();
    let per_file: Vec<usize> = order
        .iter()
        .map(|&f| d.requests().iter().filter(|&&g| g == f).count() - 1)
        .collect();
    let mut hat_n = Vec::with_capacity(order.len() + 1);
    hat_n.push(0);
    for &c in &per_file {
        hat_n.push(hat_n.last().unwrap() + c);
    }
    RedundancyProfile { order, per_file, hat_n }
}

/// MCCS rate through redundancy counting instead of subset enumeration.
///
/// Valid only for popularity-first placements, where the largest subfile in a
/// message always belongs to the most popular file requested in it.
pub fn rate_mccs_lemma3(d: &Demand, a: &Placement) -> Result<f64> {
    if !is_popularity_first(a) {
        return Err(Error::NotPopularityFirst);
    }
    check_dims(d, a);
    let k = d.n_users() as i64;
    let prof = redundancy_profile(d);
    let distinct = prof.order.len() as i64;
    let mut rate = 0.0;
    for l in 0..k {
        for i in 1..=distinct {
            let before = prof.hat_n[(i - 1) as usize] as i64;
            let through = prof.hat_n[i as usize] as i64;
            let mut coef: f64 = (i..=distinct).map(|j| binomial(k - j - before, l)).sum();
            coef -= ((i + 1)..=distinct).map(|j| binomial(k - j - through, l)).sum::<f64>();
            rate += coef * a.a(prof.order[(i - 1) as usize], l as usize);
        }
    }
    Ok(rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Mccs,
    Ccs,
}

impl Scheme {
    pub fn rate(self, d: &Demand, a: &Placement) -> f64 {
        match self {
            Scheme::Mccs => rate_mccs(d, a),
            Scheme::Ccs => rate_ccs(d, a),
        }
    }
}

pub(crate) fn check_enumerable(inst: &Instance) -> Result<()> {
    let count = raw_demand_count(inst.n_files(), inst.n_users());
    if count > ENUMERATION_LIMIT || inst.n_users() > MAX_USERS {
        return Err(Error::TooLarge(format!(
            "{}^{} demand vectors exceed the enumeration limit {ENUMERATION_LIMIT}",
            inst.n_files(),
            inst.n_users()
        )));
    }
    Ok(())
}

/// `E_d[f(d)]` under i.i.d. requests, evaluated once per demand class.
///
/// Classes are evaluated in parallel and summed in a fixed order, so the
/// result does not depend on the thread count.
pub fn expectation<F>(inst: &Instance, f: F) -> Result<f64>
where
    F: Fn(&Demand) -> f64 + Sync,
{
    check_enumerable(inst)?;
    let p = inst.popularity();
    let classes: Vec<_> = demand_classes(inst.n_files(), inst.n_users()).collect();
    let terms: Vec<f64> = classes
        .par_iter()
        .map(|c| {
            let prob = c.probability(p);
            if prob == 0.0 {
                0.0
            } else {
                prob * f(&c.representative)
            }
        })
        .collect();
    Ok(terms.iter().sum())
}

/// Exact average rate of `scheme` under placement `a`.
pub fn expected_rate(scheme: Scheme, inst: &Instance, a: &Placement) -> Result<f64> {
    if a.n_files() != inst.n_files() || a.n_users() != inst.n_users() {
        return Err(Error::DimensionMismatch("placement does not match instance".into()));
    }
    expectation(inst, |d| scheme.rate(d, a))
}

/// `E[f(d) | all K requests distinct]`.
pub fn conditional_expectation_distinct<F>(inst: &Instance, f: F) -> Result<f64>
where
    F: Fn(&Demand) -> f64 + Sync,
{
    let (n, k) = (inst.n_files(), inst.n_users());
    if k > n {
        return Err(Error::MoreUsersThanFiles { users: k, files: n });
    }
    check_enumerable(inst)?;
    let p = inst.popularity();
    let sets: Vec<Vec<usize>> = (0..n).combinations(k).collect();
    let terms: Vec<(f64, f64)> = sets
        .into_par_iter()
        .map(|set| {
            // every ordering of the set is equally likely; K! cancels
            let w: f64 = set.iter().map(|&f| p[f]).product();
            let value = if w == 0.0 { 0.0 } else { f(&Demand::from_raw(set)) };
            (w, w * value)
        })
        .collect();
    let total: f64 = terms.iter().map(|t| t.0).sum();
    if total == 0.0 {
        return Err(Error::InvalidInstance(
            "all-distinct demands have zero probability".into(),
        ));
    }
    Ok(terms.iter().map(|t| t.1).sum::<f64>() / total)
}

/// Average MCCS rate conditioned on every user requesting a different file.
pub fn conditional_expected_rate_distinct(inst: &Instance, a: &Placement) -> Result<f64> {
    conditional_expectation_distinct(inst, |d| rate_mccs(d, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demand(v: &[usize], n: usize) -> Demand {
        Demand::new(v.to_vec(), n, v.len()).unwrap()
    }

    fn two_file_example() -> (Instance, Placement) {
        let inst = Instance::new(2, 0.6, vec![0.6, 0.4]).unwrap();
        let a = Placement::from_rows(vec![vec![0.2, 0.4, 0.0], vec![0.6, 0.2, 0.0]]);
        (inst, a)
    }

    #[test]
    fn leader_groups_take_lowest_user() {
        assert_eq!(leader_group(&demand(&[0, 0, 1], 2)).users(), &[0, 2]);
        assert_eq!(leader_group(&demand(&[1, 0], 2)).users(), &[0, 1]);
        assert_eq!(leader_group(&demand(&[4, 4, 4], 5)).users(), &[0]);
    }

    #[test]
    fn leader_group_validation() {
        let d = demand(&[0, 0, 1], 2);
        assert!(LeaderGroup::new(&d, vec![1, 2]).is_ok());
        assert!(LeaderGroup::new(&d, vec![0, 1]).is_err());
        assert!(LeaderGroup::new(&d, vec![2]).is_err());
        assert_eq!(all_leader_groups(&d).len(), 2);
    }

    #[test]
    fn message_sizes_are_padded_to_the_largest() {
        let (_, a) = two_file_example();
        assert_eq!(coded_message_size(0b11, &demand(&[0, 1], 2), &a), 0.4);
        let a3 = Placement::from_rows(vec![vec![0.2, 0.1, 0.1, 0.0], vec![0.6, 0.0, 0.0, 0.0]]);
        assert_eq!(coded_message_size(0b100, &demand(&[0, 0, 1], 2), &a3), 0.6);
        let zero = Placement::from_rows(vec![vec![0.0, 0.5, 0.0]]);
        assert_eq!(coded_message_size(0b1, &demand(&[0, 0], 1), &zero), 0.0);
    }

    #[test]
    fn mccs_hand_enumerated() {
        let (_, a) = two_file_example();
        let server = Placement::from_rows(vec![vec![1.0, 0.0, 0.0]; 2]);
        assert!((rate_mccs(&demand(&[0, 0], 2), &server) - 1.0).abs() < 1e-15);
        assert!((rate_mccs(&demand(&[0, 1], 2), &a) - 1.2).abs() < 1e-15);
        assert!((rate_mccs(&demand(&[1, 1], 2), &a) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ccs_hand_enumerated() {
        let (_, a) = two_file_example();
        let d = demand(&[0, 0], 2);
        assert!((rate_ccs(&d, &a) - 0.8).abs() < 1e-15);
        assert!((rate_mccs(&d, &a) - 0.6).abs() < 1e-15);
        let d = demand(&[1, 0], 2);
        assert_eq!(rate_ccs(&d, &a), rate_mccs(&d, &a));
        let server = Placement::from_rows(vec![vec![1.0, 0.0, 0.0, 0.0]; 2]);
        assert_eq!(rate_ccs(&demand(&[0, 0, 0], 2), &server), 3.0);
    }

    #[test]
    fn redundancy_profile_counts() {
        let p = redundancy_profile(&demand(&[2, 0, 2, 2, 0], 3));
        assert_eq!(p.order, vec![0, 2]);
        assert_eq!(p.per_file, vec![1, 2]);
        assert_eq!(p.hat_n, vec![0, 1, 3]);
    }

    #[test]
    fn counting_form_worked_example() {
        // K = 3, d = (1,1,2): a10 + a20 + 3 a11 + a12
        let a = Placement::from_rows(vec![
            vec![0.1, 0.15, 0.1, 0.05],
            vec![0.4, 0.1, 0.05, 0.0],
        ]);
        let d = demand(&[0, 0, 1], 2);
        let expected = 0.1 + 0.4 + 3.0 * 0.15 + 0.1;
        assert!((rate_mccs_lemma3(&d, &a).unwrap() - expected).abs() < 1e-15);
        assert!((rate_mccs(&d, &a) - expected).abs() < 1e-15);
    }

    #[test]
    fn counting_form_without_redundancy_and_single_file() {
        let a = Placement::from_rows(vec![
            vec![0.1, 0.15, 0.1, 0.05],
            vec![0.4, 0.1, 0.05, 0.0],
            vec![0.55, 0.1, 0.05, 0.0],
        ]);
        let d = demand(&[2, 0, 1], 3);
        let direct: f64 = (0..3)
            .flat_map(|l| (1..=3).map(move |i| (l, i)))
            .map(|(l, i)| binomial(3 - i, l) * a.a((i - 1) as usize, l as usize))
            .sum();
        assert!((rate_mccs_lemma3(&d, &a).unwrap() - direct).abs() < 1e-15);

        let d = demand(&[1, 1, 1], 3);
        let direct: f64 = (0..3).map(|l| binomial(2, l) * a.a(1, l as usize)).sum();
        assert!((rate_mccs_lemma3(&d, &a).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn counting_form_rejects_non_popularity_first() {
        let a = Placement::from_rows(vec![vec![0.8, 0.1, 0.0], vec![0.6, 0.2, 0.0]]);
        assert_eq!(
            rate_mccs_lemma3(&demand(&[0, 1], 2), &a),
            Err(Error::NotPopularityFirst)
        );
    }

    #[test]
    fn expected_rate_small_example() {
        let (inst, a) = two_file_example();
        let r = expected_rate(Scheme::Mccs, &inst, &a).unwrap();
        assert!((r - 0.92).abs() < 1e-14, "{r}");
    }

    #[test]
    fn expected_rate_extremes() {
        let inst = Instance::zipf(4, 3, 0.0, 0.9).unwrap();
        let r = expected_rate(Scheme::Mccs, &inst, &inst.server_only_placement()).unwrap();
        let mean_distinct = expectation(&inst, |d| DistinctSet::of(d).len() as f64).unwrap();
        assert!((r - mean_distinct).abs() < 1e-14);

        let full = inst.with_cache(4.0).unwrap();
        let a = Placement::from_rows(vec![vec![0.0, 0.0, 0.0, 1.0]; 4]);
        assert_eq!(expected_rate(Scheme::Mccs, &full, &a).unwrap(), 0.0);
    }

    #[test]
    fn expected_rate_guard() {
        let inst = Instance::zipf(40, 6, 1.0, 0.5).unwrap();
        let a = inst.server_only_placement();
        assert!(matches!(
            expected_rate(Scheme::Mccs, &inst, &a),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn conditional_distinct_rate() {
        // symmetric placement: every pair gives the same rate
        let inst = Instance::zipf(3, 2, 1.0, 0.7).unwrap();
        let a = Placement::from_rows(vec![vec![1.0 / 3.0, 1.0 / 3.0, 0.0]; 3]);
        let r = conditional_expected_rate_distinct(&inst, &a).unwrap();
        let single = rate_mccs(&demand(&[0, 2], 3), &a);
        assert!((r - single).abs() < 1e-15);

        let big = Instance::zipf(2, 3, 0.0, 0.7).unwrap();
        assert!(matches!(
            conditional_expected_rate_distinct(&big, &big.server_only_placement()),
            Err(Error::MoreUsersThanFiles { .. })
        ));
    }
}
