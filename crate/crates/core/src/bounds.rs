//! Lower bounds on the average rate of any scheme with uncoded placement.
//!
//! For a set `D` of distinct requested files, any delivery must send at least
//! `R_lb(D; a) = max_π Σ_{l<K} Σ_i C(K−i, l)·a[π(i)][l]` over orderings `π` of
//! `D`. Averaging over `D` and minimizing over feasible placements gives a
//! linear program once the max is written in epigraph form.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{binomial, choose};
use crate::lp::{DenseSimplex, LpProblem, LpSolver, LpStatus, FEAS_TOL};
use crate::model::{is_popularity_first, DistinctSet, Instance, Placement};
use crate::{Error, Result};

/// Largest `|D|` for which all orderings are enumerated.
pub const MAX_PERMUTED_SET: usize = 10;
/// Cap on epigraph rows of the P1/P5 programs.
pub const MAX_EPIGRAPH_ROWS: usize = 50_000;
/// Cap on distinct sets enumerated for a bound.
pub const MAX_DISTINCT_SETS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    /// General uncoded placement.
    P1,
    /// Popularity-first placement.
    P2,
    /// General uncoded placement, nonuniform file sizes.
    P5,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundResult {
    pub which: BoundKind,
    pub value: f64,
    pub placement: Placement,
}

fn ordered_sum(order: impl Iterator<Item = usize>, a: &Placement) -> f64 {
    let k = a.n_users() as i64;
    order
        .enumerate()
        .map(|(i, f)| {
            let i = i as i64 + 1;
            (0..k).map(|l| binomial(k - i, l) * a.a(f, l as usize)).sum::<f64>()
        })
        .sum()
}

/// `R_lb(D; a)` by enumerating all `|D|!` orderings.
pub fn rlb_general(d: &DistinctSet, a: &Placement) -> Result<f64> {
    if d.len() > MAX_PERMUTED_SET {
        return Err(Error::TooLarge(format!(
            "|D| = {} exceeds {MAX_PERMUTED_SET} for ordering enumeration",
            d.len()
        )));
    }
    check_files(d, a)?;
    Ok(d.files()
        .iter()
        .copied()
        .permutations(d.len())
        .map(|perm| ordered_sum(perm.into_iter(), a))
        .fold(0.0, f64::max))
}

/// `R_lb(D; a)` for `a ∈ Q`, where the popularity order attains the max.
pub fn rlb_popfirst(d: &DistinctSet, a: &Placement) -> Result<f64> {
    if !is_popularity_first(a) {
        return Err(Error::NotPopularityFirst);
    }
    check_files(d, a)?;
    Ok(ordered_sum(d.files().iter().copied(), a))
}

fn check_files(d: &DistinctSet, a: &Placement) -> Result<()> {
    if d.files().iter().any(|&f| f >= a.n_files()) {
        return Err(Error::DimensionMismatch("distinct set names a missing file".into()));
    }
    Ok(())
}

/// Probability that the set of requested files is exactly `D`.
pub fn distinct_set_probability(inst: &Instance, d: &DistinctSet) -> f64 {
    let k = inst.n_users() as i32;
    let size = d.len();
    if size > inst.n_users() || d.files().iter().any(|&f| f >= inst.n_files()) {
        return 0.0;
    }
    let p: Vec<f64> = d.files().iter().map(|&f| inst.popularity()[f]).collect();
    let mut total = 0.0;
    for mask in 1u64..(1 << size) {
        let mass: f64 = (0..size).filter(|b| mask >> b & 1 == 1).map(|b| p[b]).sum();
        let sign = if (size - mask.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
        total += sign * mass.powi(k);
    }
    total.max(0.0)
}

/// Every distinct set with positive probability, with that probability.
fn distinct_sets(inst: &Instance) -> Result<Vec<(DistinctSet, f64)>> {
    let (n, k) = (inst.n_files(), inst.n_users());
    let top = k.min(n);
    let count: f64 = (1..=top).map(|s| choose(n, s)).sum();
    if count > MAX_DISTINCT_SETS as f64 {
        return Err(Error::TooLarge(format!("{count} distinct sets exceed {MAX_DISTINCT_SETS}")));
    }
    let mut out = Vec::new();
    for s in 1..=top {
        for files in (0..n).combinations(s) {
            let d = DistinctSet::new(files).expect("nonempty");
            let prob = distinct_set_probability(inst, &d);
            if prob > 0.0 {
                out.push((d, prob));
            }
        }
    }
    Ok(out)
}

/// `E_D[R_lb(D; a)]`, the objective of P1/P5 at a fixed placement.
pub fn average_rlb(inst: &Instance, a: &Placement) -> Result<f64> {
    Ok(distinct_sets(inst)?
        .iter()
        .map(|(d, prob)| rlb_general(d, a).map(|r| prob * r))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum())
}

pub(crate) fn var(n: usize, l: usize, k: usize) -> usize {
    n * (k + 1) + l
}

/// Placement variables with partition rows `Σ C(K,l)·a = F_n` and the cache
/// row; the cache row is an equality when `cache_equal`.
pub(crate) fn placement_lp(inst: &Instance, cache_equal: bool) -> LpProblem {
    let (n, k) = (inst.n_files(), inst.n_users());
    let mut lp = LpProblem::new(n * (k + 1));
    for f in 0..n {
        for l in 0..=k {
            lp.set_name(var(f, l, k), format!("a{}_{}", f + 1, l));
        }
        lp.add_eq((0..=k).map(|l| (var(f, l, k), choose(k, l))), inst.file_sizes()[f]);
    }
    let cache = (0..n).flat_map(|f| (1..=k).map(move |l| (var(f, l, k), choose(k - 1, l - 1))));
    if cache_equal {
        lp.add_eq(cache, inst.cache_size());
    } else {
        lp.add_le(cache, inst.cache_size());
    }
    lp
}

pub(crate) fn add_popularity_chain(lp: &mut LpProblem, n: usize, k: usize) {
    for f in 0..n.saturating_sub(1) {
        for l in 1..=k {
            lp.add_le([(var(f + 1, l, k), 1.0), (var(f, l, k), -1.0)], 0.0);
        }
    }
}

/// Reads the placement block of an LP solution, clearing round-off negatives.
pub(crate) fn placement_from_solution(x: &[f64], n: usize, k: usize) -> Result<Placement> {
    let rows = (0..n)
        .map(|f| {
            (0..=k)
                .map(|l| {
                    let v = x[var(f, l, k)];
                    if (-FEAS_TOL..0.0).contains(&v) {
                        0.0
                    } else {
                        v
                    }
                })
                .collect()
        })
        .collect();
    Placement::try_from_rows(rows)
}

fn solve_checked(solver: &dyn LpSolver, lp: &LpProblem) -> Result<crate::lp::LpSolution> {
    let sol = solver.solve(lp);
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        s => Err(Error::Lp(s)),
    }
}

fn epigraph_bound(inst: &Instance, which: BoundKind, solver: &dyn LpSolver) -> Result<BoundResult> {
    let (n, k) = (inst.n_files(), inst.n_users());
    let sets = distinct_sets(inst)?;
    let rows: f64 = sets
        .iter()
        .filter(|s| s.0.len() > 1)
        .map(|s| (1..=s.0.len()).map(|v| v as f64).product::<f64>())
        .sum();
    if rows > MAX_EPIGRAPH_ROWS as f64 {
        return Err(Error::TooLarge(format!("{rows} epigraph rows exceed {MAX_EPIGRAPH_ROWS}")));
    }
    let kk = k as i64;
    let mut lp = placement_lp(inst, false);
    for (d, prob) in &sets {
        if d.len() == 1 {
            let f = d.files()[0];
            for l in 0..k {
                lp.objective[var(f, l, k)] += prob * binomial(kk - 1, l as i64);
            }
            continue;
        }
        let label = d.files().iter().map(|f| (f + 1).to_string()).join("_");
        let r = lp.add_variable(format!("r{label}"), *prob, Some(0.0));
        for perm in d.files().iter().copied().permutations(d.len()) {
            let mut coeffs = vec![(r, -1.0)];
            for (i, &f) in perm.iter().enumerate() {
                let i = i as i64 + 1;
                coeffs.extend((0..k).map(|l| (var(f, l, k), binomial(kk - i, l as i64))));
            }
            lp.add_le(coeffs, 0.0);
        }
    }
    let sol = solve_checked(solver, &lp)?;
    Ok(BoundResult { which, value: sol.value, placement: placement_from_solution(&sol.x, n, k)? })
}

pub fn lower_bound_p1(inst: &Instance) -> Result<BoundResult> {
    lower_bound_p1_with(inst, &DenseSimplex::default())
}

pub fn lower_bound_p1_with(inst: &Instance, solver: &dyn LpSolver) -> Result<BoundResult> {
    if !inst.has_uniform_sizes() {
        return Err(Error::NonuniformSizes);
    }
    epigraph_bound(inst, BoundKind::P1, solver)
}

/// P1 with the partition right-hand sides set to the file sizes.
pub fn lower_bound_p5(inst: &Instance) -> Result<BoundResult> {
    lower_bound_p5_with(inst, &DenseSimplex::default())
}

pub fn lower_bound_p5_with(inst: &Instance, solver: &dyn LpSolver) -> Result<BoundResult> {
    epigraph_bound(inst, BoundKind::P5, solver)
}

pub fn lower_bound_p2(inst: &Instance) -> Result<BoundResult> {
    lower_bound_p2_with(inst, &DenseSimplex::default())
}

pub fn lower_bound_p2_with(inst: &Instance, solver: &dyn LpSolver) -> Result<BoundResult> {
    if !inst.has_uniform_sizes() {
        return Err(Error::NonuniformSizes);
    }
    let (n, k) = (inst.n_files(), inst.n_users());
    let kk = k as i64;
    let mut lp = placement_lp(inst, false);
    for (d, prob) in distinct_sets(inst)? {
        for (i, &f) in d.files().iter().enumerate() {
            let i = i as i64 + 1;
            for l in 0..k {
                lp.objective[var(f, l, k)] += prob * binomial(kk - i, l as i64);
            }
        }
    }
    add_popularity_chain(&mut lp, n, k);
    let sol = solve_checked(solver, &lp)?;
    Ok(BoundResult {
        which: BoundKind::P2,
        value: sol.value,
        placement: placement_from_solution(&sol.x, n, k)?,
    })
}
