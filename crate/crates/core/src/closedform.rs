//! Average MCCS rate of a popularity-first placement as a linear form
//! `Σ_n Σ_l g[n][l]·a[n][l]`.
//!
//! With `a ∈ Q` the padded size of any message is set by its most popular
//! requested file, so the CCS rate averages to
//! `Σ C(K,l+1)·(S_n^{l+1} − S_{n+1}^{l+1})·a[n][l]` with `S_n = Σ_{n'≥n} p_{n'}`.
//! The MCCS additionally drops every message whose users are all outside the
//! leader group. Ranking those `K−u` redundant users by decreasing popularity of
//! their request, the ones led by the user at rank `i` number `C(K−u−i, l)` per
//! level `l`, which gives the correction term through `P(i,u,n)`.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use rayon::prelude::*;
use serde::Serialize;

use crate::combinatorics::{binomial, demand_classes};
use crate::delivery::check_enumerable;
use crate::model::{is_popularity_first, Instance, Placement};
use crate::{Error, Result};

/// `P(i,u,n)`: probability that a demand has `u` distinct files and its
/// redundant user of rank `i` (1-based, most popular request first, ties by
/// file index) requests file `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RedundancyTable {
    n_files: usize,
    n_users: usize,
    data: Vec<f64>,
}

impl RedundancyTable {
    fn zeros(n_files: usize, n_users: usize) -> Self {
        RedundancyTable { n_files, n_users, data: vec![0.0; n_users * n_users * n_files] }
    }

    fn idx(&self, i: usize, u: usize, n: usize) -> usize {
        ((i - 1) * self.n_users + (u - 1)) * self.n_files + n
    }

    /// Zero outside `1 ≤ i ≤ K−u`, `1 ≤ u ≤ K`.
    pub fn get(&self, i: usize, u: usize, n: usize) -> f64 {
        if i == 0 || u == 0 || u > self.n_users || i > self.n_users - u || n >= self.n_files {
            return 0.0;
        }
        self.data[self.idx(i, u, n)]
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }
}

pub fn redundancy_probabilities(inst: &Instance) -> Result<RedundancyTable> {
    check_enumerable(inst)?;
    let (n, k) = (inst.n_files(), inst.n_users());
    let p = inst.popularity();
    let classes: Vec<_> = demand_classes(n, k).collect();
    let parts: Vec<Vec<(usize, f64)>> = classes
        .par_iter()
        .map(|c| {
            let prob = c.probability(p);
            if prob == 0.0 {
                return Vec::new();
            }
            let u = c.distinct_count();
            let mut table = RedundancyTable::zeros(n, k);
            let mut rank = 0;
            for (file, &count) in c.counts.iter().enumerate() {
                for _ in 1..count {
                    rank += 1;
                    let at = table.idx(rank, u, file);
                    table.data[at] += prob;
                }
            }
            table
                .data
                .into_iter()
                .enumerate()
                .filter(|e| e.1 != 0.0)
                .collect()
        })
        .collect();
    let mut table = RedundancyTable::zeros(n, k);
    for part in parts {
        for (at, v) in part {
            table.data[at] += v;
        }
    }
    Ok(table)
}

/// Coefficients of the average rate; independent of the placement and of `M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCoefficients {
    /// `g[n][l]` for the MCCS.
    pub g: Vec<Vec<f64>>,
    /// Coefficients of the CCS average rate (first term of `g`).
    pub ccs: Vec<Vec<f64>>,
    pub p_iun: RedundancyTable,
}

impl RateCoefficients {
    fn compute(inst: &Instance) -> Result<Self> {
        let (n, k) = (inst.n_files(), inst.n_users());
        let p_iun = redundancy_probabilities(inst)?;
        let p = inst.popularity();
        let mut tail = vec![0.0; n + 1];
        for i in (0..n).rev() {
            tail[i] = tail[i + 1] + p[i];
        }
        let kk = k as i64;
        let mut ccs = vec![vec![0.0; k + 1]; n];
        let mut g = vec![vec![0.0; k + 1]; n];
        for f in 0..n {
            for l in 0..=k {
                let e = l as i32 + 1;
                let first = binomial(kk, l as i64 + 1) * (tail[f].powi(e) - tail[f + 1].powi(e));
                let mut removed = 0.0;
                for u in 1..k {
                    for i in 1..=(k - u) {
                        let w = p_iun.get(i, u, f);
                        if w != 0.0 {
                            removed += binomial((k - u - i) as i64, l as i64) * w;
                        }
                    }
                }
                ccs[f][l] = first;
                g[f][l] = first - removed;
            }
        }
        Ok(RateCoefficients { g, ccs, p_iun })
    }

    pub fn n_files(&self) -> usize {
        self.g.len()
    }

    /// `Σ g·a` without the popularity-first check.
    pub fn mccs_rate_unchecked(&self, a: &Placement) -> f64 {
        dot(&self.g, a)
    }

    pub fn ccs_rate_unchecked(&self, a: &Placement) -> f64 {
        dot(&self.ccs, a)
    }
}

fn dot(coef: &[Vec<f64>], a: &Placement) -> f64 {
    coef.iter()
        .zip(a.rows())
        .map(|(c, row)| c.iter().zip(row.entries()).map(|(x, y)| x * y).sum::<f64>())
        .sum()
}

type CacheKey = (usize, Vec<u64>);

static CACHE: LazyLock<Mutex<HashMap<CacheKey, Arc<RateCoefficients>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Memoized per `(K, p)`.
pub fn g_coefficients(inst: &Instance) -> Result<Arc<RateCoefficients>> {
    let key = (inst.n_users(), inst.popularity().iter().map(|v| v.to_bits()).collect());
    if let Some(hit) = CACHE.lock().unwrap().get(&key) {
        return Ok(Arc::clone(hit));
    }
    let coeffs = Arc::new(RateCoefficients::compute(inst)?);
    CACHE.lock().unwrap().insert(key, Arc::clone(&coeffs));
    Ok(coeffs)
}

fn check_placement(inst: &Instance, a: &Placement) -> Result<()> {
    if a.n_files() != inst.n_files() || a.n_users() != inst.n_users() {
        return Err(Error::DimensionMismatch("placement does not match instance".into()));
    }
    if !is_popularity_first(a) {
        return Err(Error::NotPopularityFirst);
    }
    Ok(())
}

/// Average MCCS rate of a popularity-first placement.
pub fn avg_rate_closed(inst: &Instance, a: &Placement) -> Result<f64> {
    check_placement(inst, a)?;
    Ok(g_coefficients(inst)?.mccs_rate_unchecked(a))
}

/// Average CCS rate of a popularity-first placement.
pub fn avg_rate_ccs_closed(inst: &Instance, a: &Placement) -> Result<f64> {
    check_placement(inst, a)?;
    Ok(g_coefficients(inst)?.ccs_rate_unchecked(a))
}
