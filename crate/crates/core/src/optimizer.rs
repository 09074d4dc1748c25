//! Optimal MCCS placement.
//!
//! The optimal popularity-first placement has at most three distinct rows:
//! the `n_o` most popular files share one vector, files `n_o+1..=n_1` another,
//! and the rest stay at the server. Each structure has a closed form in the
//! breakpoints `(n_o, n_1)` and the cached levels `(l_o, l_1)`, so the optimum
//! is found by scoring every valid tuple with the closed-form rate. The LPs
//! here certify that search (P3) and handle nonuniform file sizes (P4).

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    add_popularity_chain, lower_bound_p1, lower_bound_p2, placement_from_solution, placement_lp, var,
};
use crate::closedform::{g_coefficients, RateCoefficients};
use crate::combinatorics::{choose, demand_classes};
use crate::delivery::{check_enumerable, leader_group};
use crate::lp::{DenseSimplex, LpSolver, LpStatus};
use crate::model::{is_popularity_first, validate_placement, Instance, Placement};
use crate::{Error, Result};

/// Relative rate difference below which candidates count as tied.
pub const RATE_TIE: f64 = 1e-12;
/// Tolerance of the exact-cache identity for emitted candidates.
pub const CACHE_IDENTITY_TOL: f64 = 1e-9;
/// Largest instance accepted by [`solve_p4_lp`].
pub const P4_MAX_USERS: usize = 4;
pub const P4_MAX_FILES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    /// Files `1..=n_o` share one vector, the rest stay at the server.
    OneGroup,
    /// Second group caches only at the first group's single level `l_o`.
    SplitLevel,
    /// First group caches at `l_o` and `l_1`, second group at `l_o` only.
    TwoLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupingCandidate {
    pub kind: CandidateKind,
    /// `(n_o, n_1)` as file counts; `n_1 = n_o` for [`CandidateKind::OneGroup`].
    pub breakpoints: (usize, usize),
    /// `(l_o, l_1)`; `l_1 = l_o` for [`CandidateKind::SplitLevel`], both
    /// `None` for [`CandidateKind::OneGroup`].
    pub positions: (Option<usize>, Option<usize>),
    pub placement: Placement,
    pub rate: f64,
}

impl GroupingCandidate {
    /// Number of distinct placement rows.
    pub fn groups(&self) -> usize {
        self.placement.distinct_rows(1e-12)
    }

    fn tie_key(&self) -> (usize, CandidateKind, usize, usize, usize, usize) {
        (
            self.groups(),
            self.kind,
            self.breakpoints.0,
            self.breakpoints.1,
            self.positions.0.unwrap_or(0),
            self.positions.1.unwrap_or(0),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeReport {
    pub best: GroupingCandidate,
    pub rate_mccs: f64,
    pub rate_ccs_opt: Option<f64>,
    pub lb_p1: f64,
    pub lb_p2: f64,
    /// `rate_mccs − lb_p1`.
    pub gap: f64,
}

/// Placement from an LP, with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpPlacement {
    pub placement: Placement,
    pub value: f64,
    pub iterations: usize,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidCandidate(msg.into())
}

fn require_uniform(inst: &Instance) -> Result<()> {
    if inst.has_uniform_sizes() {
        Ok(())
    } else {
        Err(Error::NonuniformSizes)
    }
}

fn level_row(k: usize, entries: &[(usize, f64)]) -> Vec<f64> {
    let mut row = vec![0.0; k + 1];
    for &(l, v) in entries {
        row[l] += v;
    }
    row
}

/// Rows for the first `n_o` files, the next `n_1 − n_o`, and the rest.
fn three_blocks(inst: &Instance, n_o: usize, n_1: usize, first: Vec<f64>, second: Vec<f64>) -> Placement {
    let k = inst.n_users();
    let server = level_row(k, &[(0, 1.0)]);
    let rows = (0..inst.n_files())
        .map(|f| match f {
            f if f < n_o => first.clone(),
            f if f < n_1 => second.clone(),
            _ => server.clone(),
        })
        .collect();
    Placement::from_rows(rows)
}

/// Rejects placements with negative entries, broken partitions, unused
/// cache, or rows outside `Q`.
fn certify(inst: &Instance, a: &Placement) -> Result<()> {
    if !validate_placement(inst, a)?.is_empty() {
        return Err(invalid("placement violates a constraint"));
    }
    if (a.cache_used() - inst.cache_size()).abs() > CACHE_IDENTITY_TOL {
        return Err(invalid("cache is not fully used"));
    }
    if !is_popularity_first(a) {
        return Err(invalid("placement is not popularity-first"));
    }
    Ok(())
}

fn finish(
    inst: &Instance,
    coeffs: &RateCoefficients,
    kind: CandidateKind,
    breakpoints: (usize, usize),
    positions: (Option<usize>, Option<usize>),
    placement: Placement,
) -> Result<GroupingCandidate> {
    certify(inst, &placement)?;
    let rate = coeffs.mccs_rate_unchecked(&placement);
    Ok(GroupingCandidate { kind, breakpoints, positions, placement, rate })
}

fn floor_tol(x: f64) -> f64 {
    (x + 1e-9).floor()
}

fn ceil_tol(x: f64) -> f64 {
    (x - 1e-9).ceil()
}

/// Uniform-popularity optimum over the first `n_o` files, `v = MK/n_o`.
pub fn one_group_placement(inst: &Instance, n_o: usize) -> Result<Placement> {
    let (n, k) = (inst.n_files(), inst.n_users());
    if n_o == 0 || n_o > n {
        return Err(invalid(format!("n_o = {n_o} outside 1..={n}")));
    }
    let v = inst.cache_size() * k as f64 / n_o as f64;
    if v > k as f64 + 1e-12 {
        return Err(invalid(format!("v = {v} exceeds K = {k}")));
    }
    let v = v.min(k as f64);
    let lo = floor_tol(v).min(k as f64);
    let frac = (v - lo).max(0.0);
    let lo = lo as usize;
    let mut entries = vec![(lo, (1.0 - frac) / choose(k, lo))];
    if frac > 0.0 {
        entries.push((lo + 1, frac / choose(k, lo + 1)));
    }
    let first = level_row(k, &entries);
    Ok(three_blocks(inst, n_o, n_o, first.clone(), first))
}

pub fn one_group_candidate(inst: &Instance, n_o: usize) -> Result<GroupingCandidate> {
    require_uniform(inst)?;
    let a = one_group_placement(inst, n_o)?;
    let coeffs = g_coefficients(inst)?;
    finish(inst, &coeffs, CandidateKind::OneGroup, (n_o, n_o), (None, None), a)
}

/// First `n_o` files fully cached at level `l_o`; files `n_o+1..=n_1` split
/// between the server and level `l_o`. `n_o = 0` leaves the first group
/// empty. No position-range check.
pub fn split_level_placement(inst: &Instance, n_o: usize, n_1: usize, l_o: usize) -> Result<Placement> {
    let k = inst.n_users();
    check_breakpoints(inst, n_o, n_1)?;
    if l_o == 0 || l_o > k {
        return Err(invalid(format!("l_o = {l_o} outside 1..={k}")));
    }
    let x = (k as f64 * inst.cache_size() / l_o as f64 - n_o as f64) / (n_1 - n_o) as f64;
    let c = choose(k, l_o);
    let first = level_row(k, &[(l_o, 1.0 / c)]);
    let second = level_row(k, &[(0, 1.0 - x), (l_o, x / c)]);
    Ok(three_blocks(inst, n_o, n_1, first, second))
}

/// First `n_o` files cached at `l_o` and `l_1`; files `n_o+1..=n_1` share
/// the first group's level-`l_o` entry and keep the remainder at the server.
/// No position-range check.
pub fn two_level_placement(
    inst: &Instance,
    n_o: usize,
    n_1: usize,
    l_o: usize,
    l_1: usize,
) -> Result<Placement> {
    let k = inst.n_users();
    check_breakpoints(inst, n_o, n_1)?;
    if n_o == 0 {
        return Err(invalid("two-level form needs a nonempty first group"));
    }
    if l_o == 0 || l_o > k || l_1 == 0 || l_1 > k || l_o == l_1 {
        return Err(invalid(format!("positions ({l_o}, {l_1}) must be distinct in 1..={k}")));
    }
    let (lo, l1) = (l_o as f64, l_1 as f64);
    let km = k as f64 * inst.cache_size();
    let denom = lo / l1 * n_1 as f64 - n_o as f64;
    if denom.abs() < 1e-12 {
        return Err(invalid("degenerate position pair"));
    }
    let alpha = (km / l1 - n_o as f64) / denom;
    let (co, c1) = (choose(k, l_o), choose(k, l_1));
    let first = level_row(k, &[(l_o, alpha / co), (l_1, (1.0 - alpha) / c1)]);
    let second = level_row(k, &[(0, 1.0 - alpha), (l_o, alpha / co)]);
    Ok(three_blocks(inst, n_o, n_1, first, second))
}

/// `0 <= n_o < n_1 <= N`; an empty first group is allowed only where noted.
/// `0 <= n_o < n_1 <= N`; callers that need a nonempty first group check it.
fn check_breakpoints(inst: &Instance, n_o: usize, n_1: usize) -> Result<()> {
    if n_o >= n_1 || n_1 > inst.n_files() {
        return Err(invalid(format!(
            "breakpoints ({n_o}, {n_1}) need n_o < n_1 <= {}",
            inst.n_files()
        )));
    }
    Ok(())
}

/// Two groups over the whole library with a shared single level `l_o`.
pub fn two_group_case2i(inst: &Instance, n_o: usize, l_o: usize) -> Result<GroupingCandidate> {
    three_group_candidates(inst, n_o, inst.n_files(), l_o, l_o)
}

/// Two groups over the whole library with levels `l_o ≠ l_1`.
pub fn two_group_case2ii(inst: &Instance, n_o: usize, l_o: usize, l_1: usize) -> Result<GroupingCandidate> {
    if l_o == l_1 {
        return Err(invalid("two-level form needs l_o != l_1"));
    }
    three_group_candidates(inst, n_o, inst.n_files(), l_o, l_1)
}

/// Candidate for `(n_o, n_1, l_o, l_1)`: the single-level form when
/// `l_1 = l_o`, the two-level form otherwise. Files past `n_1` stay at the
/// server; `n_1 = N` gives the two-group structures. With `n_o = 0` (single
/// level only) files `1..=n_1` share one partially cached vector, which the
/// other forms miss when `KM/n_1 < 1`.
pub fn three_group_candidates(
    inst: &Instance,
    n_o: usize,
    n_1: usize,
    l_o: usize,
    l_1: usize,
) -> Result<GroupingCandidate> {
    require_uniform(inst)?;
    let coeffs = g_coefficients(inst)?;
    grouped(inst, &coeffs, n_o, n_1, l_o, l_1)
}

fn grouped(
    inst: &Instance,
    coeffs: &RateCoefficients,
    n_o: usize,
    n_1: usize,
    l_o: usize,
    l_1: usize,
) -> Result<GroupingCandidate> {
    check_breakpoints(inst, n_o, n_1)?;
    let k = inst.n_users() as f64;
    let km = k * inst.cache_size();
    let (lo, l1) = (l_o as f64, l_1 as f64);
    // n_o = 0 gives an infinite upper limit
    let (outer, inner) = (km / n_1 as f64, km / n_o as f64);
    if l_o == l_1 {
        let upper = k.min(ceil_tol(inner) - 1.0);
        if lo < floor_tol(outer) + 1.0 || lo > upper {
            return Err(invalid(format!("l_o = {l_o} outside its position range")));
        }
        let a = split_level_placement(inst, n_o, n_1, l_o)?;
        finish(inst, coeffs, CandidateKind::SplitLevel, (n_o, n_1), (Some(l_o), Some(l_1)), a)
    } else {
        let ok = n_o > 0 && ((lo > outer && l1 < inner) || (lo < outer && l1 > inner));
        if !ok {
            return Err(invalid(format!("positions ({l_o}, {l_1}) violate the range conditions")));
        }
        let a = two_level_placement(inst, n_o, n_1, l_o, l_1)?;
        finish(inst, coeffs, CandidateKind::TwoLevel, (n_o, n_1), (Some(l_o), Some(l_1)), a)
    }
}

#[derive(Debug, Clone, Copy)]
enum Tuple {
    One(usize),
    Grouped(usize, usize, usize, usize),
}

/// Every valid candidate, in a fixed enumeration order.
pub fn all_candidates(inst: &Instance) -> Result<Vec<GroupingCandidate>> {
    require_uniform(inst)?;
    let coeffs = g_coefficients(inst)?;
    let (n, k) = (inst.n_files(), inst.n_users());
    let mut tuples: Vec<Tuple> = (1..=n).map(Tuple::One).collect();
    for n_1 in 1..=n {
        for l_o in 1..=k {
            tuples.push(Tuple::Grouped(0, n_1, l_o, l_o));
        }
        for n_o in 1..n_1 {
            for l_o in 1..=k {
                for l_1 in 1..=k {
                    tuples.push(Tuple::Grouped(n_o, n_1, l_o, l_1));
                }
            }
        }
    }
    Ok(tuples
        .par_iter()
        .filter_map(|t| {
            let cand = match *t {
                Tuple::One(n_o) => one_group_placement(inst, n_o).and_then(|a| {
                    finish(inst, &coeffs, CandidateKind::OneGroup, (n_o, n_o), (None, None), a)
                }),
                Tuple::Grouped(n_o, n_1, l_o, l_1) => grouped(inst, &coeffs, n_o, n_1, l_o, l_1),
            };
            cand.ok()
        })
        .collect())
}

fn better(c: &GroupingCandidate, best: &GroupingCandidate) -> bool {
    let tol = RATE_TIE * best.rate.abs().max(1.0);
    if c.rate < best.rate - tol {
        return true;
    }
    c.rate <= best.rate + tol && c.tie_key().cmp(&best.tie_key()) == Ordering::Less
}

/// Lowest-rate candidate; ties go to fewer groups, then the simpler
/// [`CandidateKind`], then smaller `(n_o, n_1, l_o, l_1)`.
pub fn best_grouping(inst: &Instance) -> Result<GroupingCandidate> {
    let mut best: Option<GroupingCandidate> = None;
    for c in all_candidates(inst)? {
        if best.as_ref().is_none_or(|b| better(&c, b)) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| invalid("no valid candidate"))
}

/// Grouping optimum together with the CCS optimum and both lower bounds.
pub fn optimize_mccs(inst: &Instance) -> Result<OptimizeReport> {
    let best = best_grouping(inst)?;
    let rate_ccs_opt = Some(optimal_ccs_rate(inst)?.value);
    let lb_p1 = lower_bound_p1(inst)?.value;
    let lb_p2 = lower_bound_p2(inst)?.value;
    Ok(OptimizeReport {
        rate_mccs: best.rate,
        gap: best.rate - lb_p1,
        best,
        rate_ccs_opt,
        lb_p1,
        lb_p2,
    })
}

/// `min Σ coef·a` over popularity-first placements that use the whole cache.
pub fn popularity_first_lp(
    inst: &Instance,
    coef: &[Vec<f64>],
    solver: &dyn LpSolver,
) -> Result<LpPlacement> {
    require_uniform(inst)?;
    let (n, k) = (inst.n_files(), inst.n_users());
    let mut lp = placement_lp(inst, true);
    for f in 0..n {
        for l in 0..=k {
            let j = var(f, l, k);
            lp.objective[j] = coef[f][l];
            // nonnegativity of the rest follows from the chain and partition rows
            let bounded = (f == 0 && l == 0) || f == n - 1;
            lp.lower_bounds[j] = bounded.then_some(0.0);
        }
    }
    add_popularity_chain(&mut lp, n, k);
    let sol = solver.solve(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    Ok(LpPlacement {
        placement: placement_from_solution(&sol.x, n, k)?,
        value: sol.value,
        iterations: sol.iterations,
    })
}

/// MCCS optimum over popularity-first placements as a direct LP.
pub fn solve_p3_lp(inst: &Instance) -> Result<LpPlacement> {
    solve_p3_lp_with(inst, &DenseSimplex::default())
}

pub fn solve_p3_lp_with(inst: &Instance, solver: &dyn LpSolver) -> Result<LpPlacement> {
    let coeffs = g_coefficients(inst)?;
    popularity_first_lp(inst, &coeffs.g, solver)
}

/// CCS optimum over popularity-first placements.
pub fn optimal_ccs_rate(inst: &Instance) -> Result<LpPlacement> {
    let coeffs = g_coefficients(inst)?;
    popularity_first_lp(inst, &coeffs.ccs, &DenseSimplex::default())
}

/// MCCS optimum over all uncoded placements, with file sizes, as an
/// epigraph LP over demand classes and message level sets.
pub fn solve_p4_lp(inst: &Instance) -> Result<LpPlacement> {
    solve_p4_lp_with(inst, &DenseSimplex::default())
}

pub fn solve_p4_lp_with(inst: &Instance, solver: &dyn LpSolver) -> Result<LpPlacement> {
    let (n, k) = (inst.n_files(), inst.n_users());
    if k > P4_MAX_USERS || n > P4_MAX_FILES {
        return Err(Error::TooLarge(format!(
            "P4 accepts K <= {P4_MAX_USERS} and N <= {P4_MAX_FILES}, got K = {k}, N = {n}"
        )));
    }
    check_enumerable(inst)?;
    let p = inst.popularity();
    // weight of max_{f ∈ files} a[f][level], keyed by (file bitmask, level)
    let mut weights: BTreeMap<(u64, usize), f64> = BTreeMap::new();
    for class in demand_classes(n, k) {
        let prob = class.probability(p);
        if prob == 0.0 {
            continue;
        }
        let d = &class.representative;
        let leaders = leader_group(d).users().iter().fold(0u64, |m, &u| m | 1 << u);
        for s in 1u64..(1 << k) {
            if s & leaders == 0 {
                continue;
            }
            let files = (0..k).filter(|u| s >> u & 1 == 1).fold(0u64, |m, u| m | 1 << d.requests()[u]);
            *weights.entry((files, s.count_ones() as usize - 1)).or_insert(0.0) += prob;
        }
    }
    let mut lp = placement_lp(inst, false);
    for ((files, level), w) in weights {
        let members: Vec<usize> = (0..n).filter(|f| files >> f & 1 == 1).collect();
        if let [f] = members[..] {
            lp.objective[var(f, level, k)] += w;
            continue;
        }
        let label: Vec<String> = members.iter().map(|f| (f + 1).to_string()).collect();
        let t = lp.add_variable(format!("t{}_{level}", label.join("_")), w, Some(0.0));
        for f in members {
            lp.add_le([(var(f, level, k), 1.0), (t, -1.0)], 0.0);
        }
    }
    let sol = solver.solve(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    Ok(LpPlacement {
        placement: placement_from_solution(&sol.x, n, k)?,
        value: sol.value,
        iterations: sol.iterations,
    })
}
