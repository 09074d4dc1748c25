//! Binomials, multinomials and demand-class enumeration.

use itertools::Itertools;

use crate::model::Demand;

/// `C(n, k)` as a float, zero whenever `k < 0`, `n < 0` or `k > n`.
pub fn binomial(n: i64, k: i64) -> f64 {
    if n < 0 || k < 0 || k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as f64
}

/// Convenience wrapper for unsigned arguments.
pub fn choose(n: usize, k: usize) -> f64 {
    binomial(n as i64, k as i64)
}

/// `K! / (c_1! ... c_N!)` for the given multiplicities.
pub fn multinomial(counts: &[usize]) -> f64 {
    let mut remaining: usize = counts.iter().sum();
    let mut acc = 1.0;
    for &c in counts {
        acc *= choose(remaining, c);
        remaining -= c;
    }
    acc
}

/// A multiset of requested files, i.e. an equivalence class of demand vectors
/// under permutation of users.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandClass {
    /// Nondecreasing demand vector representing the class.
    pub representative: Demand,
    /// `counts[n]` users request file `n`.
    pub counts: Vec<usize>,
    /// Number of demand vectors in the class.
    pub multiplicity: f64,
}

impl DemandClass {
    /// Total probability of the class under i.i.d. requests with `popularity`.
    pub fn probability(&self, popularity: &[f64]) -> f64 {
        let mut prob = self.multiplicity;
        for (n, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                prob *= popularity[n].powi(c as i32);
            }
        }
        prob
    }

    pub fn distinct_count(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// All demand classes for `n_users` users over `n_files` files, in
/// lexicographic order of their representatives.
pub fn demand_classes(n_files: usize, n_users: usize) -> impl Iterator<Item = DemandClass> {
    (0..n_files)
        .combinations_with_replacement(n_users)
        .map(move |requests| {
            let mut counts = vec![0usize; n_files];
            for &f in &requests {
                counts[f] += 1;
            }
            let multiplicity = multinomial(&counts);
            DemandClass {
                representative: Demand::from_raw(requests),
                counts,
                multiplicity,
            }
        })
}

/// `n_files^n_users`, saturating.
pub fn raw_demand_count(n_files: usize, n_users: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..n_users {
        acc = acc.saturating_mul(n_files as u128);
    }
    acc
}

/// Every demand vector in `[0, n_files)^n_users`, in lexicographic order.
pub fn all_demands(n_files: usize, n_users: usize) -> impl Iterator<Item = Demand> {
    (0..n_users)
        .map(|_| 0..n_files)
        .multi_cartesian_product()
        .map(Demand::from_raw)
}

/// Nonempty subsets of `0..n` encoded as bitmasks, in increasing order.
pub fn nonempty_subsets(n: usize) -> impl Iterator<Item = u64> {
    1..(1u64 << n)
}
