//! Deterministic dense two-phase simplex.
//!
//! Problems are stated as `min c·x` subject to `A x = b`, `G x ≤ h` and
//! per-variable lower bounds (a variable without one is free). The solver
//! works on a condensed tableau in which row `i` reads
//! `basic_i = rhs_i − Σ_j T[i][j]·nonbasic_j`.

use std::collections::HashSet;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

/// Smallest magnitude accepted as a pivot element.
pub const PIVOT_TOL: f64 = 1e-10;
/// Primal feasibility tolerance on constraint residuals.
pub const FEAS_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
pub const STALL_THRESHOLD: usize = 50;

const OPT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const RATIO_TIE: f64 = 1e-12;
/// Rows whose largest live entry is below this after phase 1 are redundant.
const REDUNDANT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Sparse linear row `Σ coeffs·x (=|≤) rhs`; indices sorted, merged, nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) -> Self {
        let mut v: Vec<(usize, f64)> = coeffs.into_iter().collect();
        v.sort_by_key(|c| c.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(v.len());
        for (j, c) in v {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|c| c.1 != 0.0);
        Row { coeffs: merged, rhs }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, c)| c * x[j]).sum()
    }

    fn negated(&self) -> Row {
        Row {
            coeffs: self.coeffs.iter().map(|&(j, c)| (j, -c)).collect(),
            rhs: -self.rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq: Vec<Row>,
    pub le: Vec<Row>,
    /// `None` marks a free variable.
    pub lower_bounds: Vec<Option<f64>>,
    pub names: Vec<String>,
}

impl LpProblem {
    /// `n_vars` nonnegative variables with zero cost.
    pub fn new(n_vars: usize) -> Self {
        LpProblem {
            objective: vec![0.0; n_vars],
            eq: Vec::new(),
            le: Vec::new(),
            lower_bounds: vec![Some(0.0); n_vars],
            names: (0..n_vars).map(|j| format!("x{j}")).collect(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, cost: f64, lower: Option<f64>) -> usize {
        self.objective.push(cost);
        self.lower_bounds.push(lower);
        self.names.push(name.into());
        self.objective.len() - 1
    }

    pub fn set_name(&mut self, j: usize, name: impl Into<String>) {
        self.names[j] = name.into();
    }

    pub fn add_eq(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        self.eq.push(Row::new(coeffs, rhs));
    }

    pub fn add_le(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        self.le.push(Row::new(coeffs, rhs));
    }

    pub fn add_ge(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        self.le.push(Row::new(coeffs, rhs).negated());
    }

    /// Checks dimensions and finiteness.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.n_vars();
        if self.lower_bounds.len() != n || self.names.len() != n {
            return Err("bounds or names do not match the variable count".into());
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err("non-finite objective coefficient".into());
        }
        if self.lower_bounds.iter().flatten().any(|l| !l.is_finite()) {
            return Err("non-finite lower bound".into());
        }
        for row in self.eq.iter().chain(&self.le) {
            if !row.rhs.is_finite() {
                return Err("non-finite right-hand side".into());
            }
            for &(j, c) in &row.coeffs {
                if j >= n {
                    return Err(format!("coefficient refers to variable {j} of {n}"));
                }
                if !c.is_finite() {
                    return Err("non-finite constraint coefficient".into());
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// `‖Ax − b‖∞`.
    pub fn eq_residual(&self, x: &[f64]) -> f64 {
        self.eq.iter().map(|r| (r.dot(x) - r.rhs).abs()).fold(0.0, f64::max)
    }

    /// `max(0, max_i (Gx − h)_i)`.
    pub fn le_violation(&self, x: &[f64]) -> f64 {
        self.le.iter().map(|r| r.dot(x) - r.rhs).fold(0.0, f64::max)
    }

    /// Largest shortfall below a lower bound.
    pub fn bound_violation(&self, x: &[f64]) -> f64 {
        self.lower_bounds
            .iter()
            .zip(x)
            .filter_map(|(lb, v)| lb.map(|l| l - v))
            .fold(0.0, f64::max)
    }

    /// Human-readable dump in the CPLEX LP text layout.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::from("Minimize\n obj:");
        write_terms(&mut s, self.objective.iter().copied().enumerate(), &self.names);
        s.push_str("\nSubject To\n");
        for (i, r) in self.eq.iter().enumerate() {
            let _ = write!(s, " e{i}:");
            write_terms(&mut s, r.coeffs.iter().copied(), &self.names);
            let _ = writeln!(s, " = {}", r.rhs);
        }
        for (i, r) in self.le.iter().enumerate() {
            let _ = write!(s, " g{i}:");
            write_terms(&mut s, r.coeffs.iter().copied(), &self.names);
            let _ = writeln!(s, " <= {}", r.rhs);
        }
        s.push_str("Bounds\n");
        for (name, lb) in self.names.iter().zip(&self.lower_bounds) {
            match lb {
                Some(l) => {
                    let _ = writeln!(s, " {name} >= {l}");
                }
                None => {
                    let _ = writeln!(s, " {name} free");
                }
            }
        }
        s.push_str("End\n");
        s
    }
}

fn write_terms(s: &mut String, terms: impl Iterator<Item = (usize, f64)>, names: &[String]) {
    let mut any = false;
    for (j, c) in terms.filter(|t| t.1 != 0.0) {
        let sign = if c < 0.0 { '-' } else { '+' };
        let _ = write!(s, " {sign} {} {}", c.abs(), names[j]);
        any = true;
    }
    if !any {
        s.push_str(" 0");
    }
}

impl fmt::Display for LpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_lp_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    /// Multipliers of the equality rows.
    pub eq_duals: Vec<f64>,
    /// Multipliers of the `≤` rows; nonpositive at a dual-feasible point.
    pub le_duals: Vec<f64>,
}

impl LpSolution {
    fn failed(status: LpStatus, p: &LpProblem, iterations: usize) -> Self {
        LpSolution {
            status,
            x: vec![0.0; p.n_vars()],
            value: f64::NAN,
            iterations,
            eq_duals: vec![0.0; p.eq.len()],
            le_duals: vec![0.0; p.le.len()],
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Lagrangian lower bound from the returned multipliers.
    ///
    /// Returns `None` when the multipliers are not dual feasible within `tol`,
    /// in which case they certify nothing.
    pub fn dual_bound(&self, p: &LpProblem, tol: f64) -> Option<f64> {
        if self.le_duals.iter().any(|&u| u > tol) {
            return None;
        }
        let mut reduced = p.objective.clone();
        let mut bound = 0.0;
        for (row, &y) in p.eq.iter().zip(&self.eq_duals) {
            bound += y * row.rhs;
            for &(j, c) in &row.coeffs {
                reduced[j] -= y * c;
            }
        }
        for (row, &u) in p.le.iter().zip(&self.le_duals) {
            let u = u.min(0.0);
            bound += u * row.rhs;
            for &(j, c) in &row.coeffs {
                reduced[j] -= u * c;
            }
        }
        for (r, lb) in reduced.iter().zip(&p.lower_bounds) {
            match lb {
                Some(l) if *r >= -tol => bound += l * r.max(0.0),
                None if r.abs() <= tol => {}
                _ => return None,
            }
        }
        Some(bound)
    }
}

/// Pluggable solver; the in-repo simplex is the default implementation.
pub trait LpSolver: Sync {
    fn solve(&self, p: &LpProblem) -> LpSolution;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseSimplex {
    /// Pivot cap; `None` scales with the problem size.
    pub max_iterations: Option<usize>,
    pub stall_threshold: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex { max_iterations: None, stall_threshold: STALL_THRESHOLD }
    }
}

impl LpSolver for DenseSimplex {
    fn solve(&self, p: &LpProblem) -> LpSolution {
        solve_with(self, p)
    }
}

/// Solves with the default [`DenseSimplex`].
pub fn solve(p: &LpProblem) -> LpSolution {
    DenseSimplex::default().solve(p)
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, lb: f64 },
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy)]
enum Origin {
    Eq(usize),
    Le(usize),
}

struct StdRow {
    coeffs: Vec<(usize, f64)>,
    rhs: f64,
    artificial: bool,
    flipped: bool,
    origin: Origin,
}

struct Standard {
    n_cols: usize,
    maps: Vec<VarMap>,
    cost: Vec<f64>,
    rows: Vec<StdRow>,
}

fn standardize(p: &LpProblem) -> Standard {
    let mut maps = Vec::with_capacity(p.n_vars());
    let mut n_cols = 0;
    for lb in &p.lower_bounds {
        match lb {
            Some(l) => {
                maps.push(VarMap::Shift { col: n_cols, lb: *l });
                n_cols += 1;
            }
            None => {
                maps.push(VarMap::Split { pos: n_cols, neg: n_cols + 1 });
                n_cols += 2;
            }
        }
    }
    let translate = |row: &Row| -> (Vec<(usize, f64)>, f64) {
        let mut rhs = row.rhs;
        let mut coeffs = Vec::with_capacity(row.coeffs.len());
        for &(j, c) in &row.coeffs {
            match maps[j] {
                VarMap::Shift { col, lb } => {
                    rhs -= c * lb;
                    coeffs.push((col, c));
                }
                VarMap::Split { pos, neg } => {
                    coeffs.push((pos, c));
                    coeffs.push((neg, -c));
                }
            }
        }
        (coeffs, rhs)
    };

    let mut seen: HashSet<(bool, Vec<(usize, u64)>, u64)> = HashSet::new();
    let mut rows = Vec::new();
    let mut surplus = Vec::new();
    let tagged = p
        .eq
        .iter()
        .enumerate()
        .map(|(i, r)| (Origin::Eq(i), r))
        .chain(p.le.iter().enumerate().map(|(i, r)| (Origin::Le(i), r)));
    for (origin, row) in tagged {
        let is_eq = matches!(origin, Origin::Eq(_));
        let key = (
            is_eq,
            row.coeffs.iter().map(|&(j, c)| (j, c.to_bits())).collect(),
            row.rhs.to_bits(),
        );
        if !seen.insert(key) {
            continue;
        }
        let (mut coeffs, mut rhs) = translate(row);
        let flipped = rhs < 0.0;
        if flipped {
            coeffs.iter_mut().for_each(|c| c.1 = -c.1);
            rhs = -rhs;
        }
        let artificial = is_eq || flipped;
        if !is_eq && flipped {
            surplus.push(rows.len());
        }
        rows.push(StdRow { coeffs, rhs, artificial, flipped, origin });
    }
    for &i in &surplus {
        rows[i].coeffs.push((n_cols, -1.0));
        n_cols += 1;
    }

    let mut cost = vec![0.0; n_cols];
    for (j, m) in maps.iter().enumerate() {
        match *m {
            VarMap::Shift { col, .. } => cost[col] = p.objective[j],
            VarMap::Split { pos, neg } => {
                cost[pos] = p.objective[j];
                cost[neg] = -p.objective[j];
            }
        }
    }
    Standard { n_cols, maps, cost, rows }
}

struct Tableau {
    m: usize,
    n: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    cols: Vec<usize>,
    dead: Vec<bool>,
    active: Vec<bool>,
    /// Reduced-cost rows for phase 1 and phase 2, `z = z0 − Σ o_j·nonbasic_j`.
    obj: [Vec<f64>; 2],
    is_artificial: Vec<bool>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Limit,
}

impl Tableau {
    fn new(s: &Standard) -> Self {
        let (m, n) = (s.rows.len(), s.n_cols);
        let mut t = vec![0.0; m * n];
        let mut rhs = vec![0.0; m];
        let mut obj1 = vec![0.0; n];
        let mut is_artificial = vec![false; n + m];
        for (i, row) in s.rows.iter().enumerate() {
            for &(j, c) in &row.coeffs {
                t[i * n + j] += c;
            }
            rhs[i] = row.rhs;
            if row.artificial {
                is_artificial[n + i] = true;
                for &(j, c) in &row.coeffs {
                    obj1[j] += c;
                }
            }
        }
        Tableau {
            m,
            n,
            t,
            rhs,
            basis: (n..n + m).collect(),
            cols: (0..n).collect(),
            dead: vec![false; n],
            active: vec![true; m],
            obj: [obj1, s.cost.iter().map(|c| -c).collect()],
            is_artificial,
        }
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.n + j]
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let n = self.n;
        let inv = 1.0 / self.t[r * n + q];
        {
            let row = &mut self.t[r * n..(r + 1) * n];
            row.iter_mut().for_each(|v| *v *= inv);
            row[q] = inv;
        }
        self.rhs[r] *= inv;
        let nz: Vec<(usize, f64)> = self.t[r * n..(r + 1) * n]
            .iter()
            .enumerate()
            .filter(|(j, v)| **v != 0.0 && *j != q)
            .map(|(j, v)| (j, *v))
            .collect();
        let rhs_r = self.rhs[r];
        for i in 0..self.m {
            if i == r || !self.active[i] {
                continue;
            }
            let f = self.t[i * n + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.t[i * n..(i + 1) * n];
            for &(j, v) in &nz {
                row[j] -= f * v;
            }
            row[q] = -f * inv;
            self.rhs[i] -= f * rhs_r;
        }
        for o in &mut self.obj {
            let f = o[q];
            if f == 0.0 {
                continue;
            }
            for &(j, v) in &nz {
                o[j] -= f * v;
            }
            o[q] = -f * inv;
        }
        std::mem::swap(&mut self.basis[r], &mut self.cols[q]);
        if self.is_artificial[self.cols[q]] {
            self.dead[q] = true;
        }
    }

    fn entering(&self, phase: usize, bland: bool) -> Option<usize> {
        let o = &self.obj[phase];
        let mut best: Option<usize> = None;
        for j in 0..self.n {
            if self.dead[j] || o[j] <= OPT_TOL {
                continue;
            }
            best = match best {
                None => Some(j),
                Some(b) if bland && self.cols[j] < self.cols[b] => Some(j),
                Some(b) if !bland && o[j] > o[b] => Some(j),
                keep => keep,
            };
        }
        best
    }

    fn leaving(&self, q: usize, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            if !self.active[i] {
                continue;
            }
            let a = self.entry(i, q);
            if a <= PIVOT_TOL {
                continue;
            }
            let ratio = self.rhs[i].max(0.0) / a;
            best = match best {
                None => Some((i, ratio)),
                Some((_, br)) if ratio < br - RATIO_TIE => Some((i, ratio)),
                Some((b, br)) if ratio <= br + RATIO_TIE => {
                    let better = if bland {
                        self.basis[i] < self.basis[b]
                    } else {
                        let (ai, ab) = (self.is_artificial[self.basis[i]], self.is_artificial[self.basis[b]]);
                        (ai && !ab) || (ai == ab && a > self.entry(b, q))
                    };
                    if better {
                        Some((i, ratio))
                    } else {
                        Some((b, br))
                    }
                }
                keep => keep,
            };
        }
        best.map(|b| b.0)
    }

    fn run(&mut self, phase: usize, iters: &mut usize, limit: usize, stall_threshold: usize) -> PhaseEnd {
        let mut stall = 0;
        let mut bland = false;
        loop {
            if *iters >= limit {
                return PhaseEnd::Limit;
            }
            let Some(q) = self.entering(phase, bland) else {
                return PhaseEnd::Optimal;
            };
            let Some(r) = self.leaving(q, bland) else {
                return PhaseEnd::Unbounded;
            };
            let step = self.rhs[r].max(0.0) / self.entry(r, q);
            self.pivot(r, q);
            *iters += 1;
            if step <= DEGENERATE_STEP {
                stall += 1;
                if stall >= stall_threshold {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }
        }
    }

    fn artificial_mass(&self) -> f64 {
        (0..self.m)
            .filter(|&i| self.active[i] && self.is_artificial[self.basis[i]])
            .map(|i| self.rhs[i].max(0.0))
            .sum()
    }

    /// Pivots zero-level artificials out of the basis, retiring rows that
    /// cannot be pivoted (linearly dependent constraints).
    fn drive_out_artificials(&mut self) {
        for i in 0..self.m {
            if !self.active[i] || !self.is_artificial[self.basis[i]] {
                continue;
            }
            self.rhs[i] = 0.0;
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.n {
                let a = self.entry(i, j).abs();
                if !self.dead[j] && a > REDUNDANT_TOL && best.is_none_or(|b| a > b.1) {
                    best = Some((j, a));
                }
            }
            match best {
                Some((q, _)) => self.pivot(i, q),
                None => self.active[i] = false,
            }
        }
    }
}

fn solve_with(cfg: &DenseSimplex, p: &LpProblem) -> LpSolution {
    if let Err(msg) = p.validate() {
        panic!("malformed LP: {msg}");
    }
    let s = standardize(p);
    let mut tab = Tableau::new(&s);
    let limit = cfg.max_iterations.unwrap_or(10_000 + 50 * (tab.m + tab.n));
    let mut iters = 0;

    let b_scale = 1.0 + s.rows.iter().map(|r| r.rhs).fold(0.0, f64::max);
    if s.rows.iter().any(|r| r.artificial) {
        match tab.run(0, &mut iters, limit, cfg.stall_threshold) {
            PhaseEnd::Limit => return LpSolution::failed(LpStatus::IterationLimit, p, iters),
            PhaseEnd::Optimal | PhaseEnd::Unbounded => {}
        }
        if tab.artificial_mass() > FEAS_TOL * b_scale {
            return LpSolution::failed(LpStatus::Infeasible, p, iters);
        }
        tab.drive_out_artificials();
    }
    match tab.run(1, &mut iters, limit, cfg.stall_threshold) {
        PhaseEnd::Limit => return LpSolution::failed(LpStatus::IterationLimit, p, iters),
        PhaseEnd::Unbounded => return LpSolution::failed(LpStatus::Unbounded, p, iters),
        PhaseEnd::Optimal => {}
    }

    let mut y = vec![0.0; s.n_cols];
    for i in 0..tab.m {
        if tab.active[i] && tab.basis[i] < s.n_cols {
            y[tab.basis[i]] = tab.rhs[i].max(0.0);
        }
    }
    let x: Vec<f64> = s
        .maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, lb } => lb + y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect();

    let mut column_of = vec![usize::MAX; s.n_cols + tab.m];
    for (j, &v) in tab.cols.iter().enumerate() {
        column_of[v] = j;
    }
    let mut eq_duals = vec![0.0; p.eq.len()];
    let mut le_duals = vec![0.0; p.le.len()];
    for (i, row) in s.rows.iter().enumerate() {
        let j = column_of[s.n_cols + i];
        if j == usize::MAX {
            continue;
        }
        let pi = if row.flipped { -tab.obj[1][j] } else { tab.obj[1][j] };
        match row.origin {
            Origin::Eq(k) => eq_duals[k] = pi,
            Origin::Le(k) => le_duals[k] = pi,
        }
    }

    LpSolution {
        status: LpStatus::Optimal,
        value: p.objective_value(&x),
        x,
        iterations: iters,
        eq_duals,
        le_duals,
    }
}
