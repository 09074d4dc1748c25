#![allow(dead_code)]

use cacheopt::{Instance, Placement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nonincreasing popularity summing to one (exponential spacings).
pub fn random_popularity(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-3).collect();
    p.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    let drift: f64 = 1.0 - p.iter().sum::<f64>();
    p[0] += drift;
    p
}

/// Popularity-first placement: level entries shrink file by file and each
/// row keeps the remainder at the server.
pub fn random_q_placement(rng: &mut impl Rng, n: usize, k: usize) -> Placement {
    let binom = |a: usize, b: usize| -> f64 { cacheopt::combinatorics::choose(a, b) };
    let mut top: Vec<f64> = (1..=k).map(|_| rng.gen::<f64>().powi(2)).collect();
    let mass: f64 = top.iter().enumerate().map(|(i, v)| binom(k, i + 1) * v).sum();
    let budget = rng.gen::<f64>();
    top.iter_mut().for_each(|v| *v *= budget / mass);
    let mut rows = Vec::with_capacity(n);
    let mut current = top;
    for _ in 0..n {
        let cached: f64 = current.iter().enumerate().map(|(i, v)| binom(k, i + 1) * v).sum();
        let mut row = vec![(1.0 - cached).max(0.0)];
        row.extend(&current);
        rows.push(row);
        current = current
            .iter()
            .map(|v| if rng.gen_bool(0.3) { *v } else { v * rng.gen::<f64>() })
            .collect();
    }
    Placement::from_rows(rows)
}

/// Instance whose cache exactly fits `a`.
pub fn instance_for(k: usize, p: Vec<f64>, a: &Placement) -> Instance {
    Instance::new(k, a.cache_used(), p).expect("valid instance")
}

pub fn random_instance(rng: &mut impl Rng, n: usize, k: usize) -> Instance {
    let m = rng.gen_range(0.0..n as f64);
    Instance::new(k, m, random_popularity(rng, n)).expect("valid instance")
}
