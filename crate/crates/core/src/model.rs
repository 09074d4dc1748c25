//! Problem instances, placements and demands.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::combinatorics::choose;
use crate::{Error, Result};

/// Absolute tolerance for partition and cache-budget feasibility.
pub const FEAS_TOL: f64 = 1e-9;
/// Tolerance for comparing individual placement entries.
pub const ENTRY_TOL: f64 = 1e-12;
/// Popularity vectors must sum to one within this tolerance.
pub const POPULARITY_SUM_TOL: f64 = 1e-12;

/// A caching problem: `n_users` users with a cache of `cache_size` each, and a
/// library of files with popularity sorted nonincreasing.
///
/// With uniform sizes every file has size 1 and the cache is counted in
/// files. With nonuniform sizes both the cache and placement entries are in
/// bits (or whatever unit the sizes use).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    n_users: usize,
    cache_size: f64,
    popularity: Vec<f64>,
    file_sizes: Vec<f64>,
}

impl Instance {
    /// Uniform-size instance. `popularity` must already be sorted nonincreasing.
    pub fn new(n_users: usize, cache_size: f64, popularity: Vec<f64>) -> Result<Self> {
        let sizes = vec![1.0; popularity.len()];
        Self::with_sizes(n_users, cache_size, popularity, sizes)
    }

    pub fn with_sizes(
        n_users: usize,
        cache_size: f64,
        popularity: Vec<f64>,
        file_sizes: Vec<f64>,
    ) -> Result<Self> {
        let inst = Instance {
            n_users,
            cache_size,
            popularity,
            file_sizes,
        };
        inst.check()?;
        Ok(inst)
    }

    /// Zipf instance with uniform sizes.
    pub fn zipf(n_files: usize, n_users: usize, cache_size: f64, theta: f64) -> Result<Self> {
        if n_files == 0 {
            return Err(Error::InvalidInstance("need at least one file".into()));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::InvalidInstance(format!("Zipf exponent {theta} must be >= 0")));
        }
        Self::new(n_users, cache_size, zipf_popularity(n_files, theta))
    }

    /// Builds an instance from popularity in arbitrary file order.
    ///
    /// Files are reordered by decreasing popularity (stable, so equal
    /// popularities keep their relative order). The returned permutation maps
    /// each sorted position to the caller's original file index.
    pub fn from_unsorted(
        n_users: usize,
        cache_size: f64,
        popularity: Vec<f64>,
        file_sizes: Option<Vec<f64>>,
    ) -> Result<(Self, Vec<usize>)> {
        let sizes = file_sizes.unwrap_or_else(|| vec![1.0; popularity.len()]);
        if sizes.len() != popularity.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} popularities but {} sizes",
                popularity.len(),
                sizes.len()
            )));
        }
        if popularity.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInstance("popularity must be finite".into()));
        }
        let mut order: Vec<usize> = (0..popularity.len()).collect();
        order.sort_by(|&i, &j| popularity[j].total_cmp(&popularity[i]));
        let p = order.iter().map(|&i| popularity[i]).collect();
        let f = order.iter().map(|&i| sizes[i]).collect();
        let inst = Self::with_sizes(n_users, cache_size, p, f)?;
        Ok((inst, order))
    }

    fn check(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidInstance(msg));
        if self.n_users == 0 {
            return invalid("need at least one user".into());
        }
        if self.popularity.is_empty() {
            return invalid("need at least one file".into());
        }
        if self.file_sizes.len() != self.popularity.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} popularities but {} sizes",
                self.popularity.len(),
                self.file_sizes.len()
            )));
        }
        if self.popularity.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return invalid("popularities must be finite and nonnegative".into());
        }
        let sum: f64 = self.popularity.iter().sum();
        if (sum - 1.0).abs() > POPULARITY_SUM_TOL {
            return invalid(format!("popularity sums to {sum}, expected 1"));
        }
        if self.popularity.windows(2).any(|w| w[0] < w[1]) {
            return invalid("popularity must be sorted nonincreasing".into());
        }
        if self.file_sizes.iter().any(|&f| !(f.is_finite() && f > 0.0)) {
            return invalid("file sizes must be positive".into());
        }
        if !(self.cache_size.is_finite() && self.cache_size >= 0.0) {
            return invalid(format!("cache size {} must be >= 0", self.cache_size));
        }
        if self.cache_size > self.total_size() + FEAS_TOL {
            return invalid(format!(
                "cache size {} exceeds the library size {}",
                self.cache_size,
                self.total_size()
            ));
        }
        Ok(())
    }

    pub fn n_files(&self) -> usize {
        self.popularity.len()
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn cache_size(&self) -> f64 {
        self.cache_size
    }

    pub fn popularity(&self) -> &[f64] {
        &self.popularity
    }

    pub fn file_sizes(&self) -> &[f64] {
        &self.file_sizes
    }

    pub fn total_size(&self) -> f64 {
        self.file_sizes.iter().sum()
    }

    pub fn has_uniform_sizes(&self) -> bool {
        self.file_sizes.iter().all(|&f| f == 1.0)
    }

    /// Same library and users with a different cache size.
    pub fn with_cache(&self, cache_size: f64) -> Result<Self> {
        let mut next = self.clone();
        next.cache_size = cache_size;
        next.check()?;
        Ok(next)
    }

    /// Placement with every file kept entirely at the server.
    pub fn server_only_placement(&self) -> Placement {
        let k = self.n_users;
        Placement::from_rows(
            self.file_sizes
                .iter()
                .map(|&f| {
                    let mut row = vec![0.0; k + 1];
                    row[0] = f;
                    row
                })
                .collect(),
        )
    }
}

/// `p_n = n^{-θ} / Σ_i i^{-θ}` for `n = 1..=n_files`, already nonincreasing.
pub fn zipf_popularity(n_files: usize, theta: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=n_files).map(|n| (n as f64).powf(-theta)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Twelve-file step distribution: one hot file, six warm, five cold.
pub fn step_popularity() -> Vec<f64> {
    let mut p = vec![7.0 / 12.0];
    p.extend(std::iter::repeat_n(1.0 / 18.0, 6));
    p.extend(std::iter::repeat_n(1.0 / 60.0, 5));
    p
}

/// Subfile sizes of one file: entry `l` is the size of each of the `C(K, l)`
/// subfiles cached by exactly `l` users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlacementVector(Vec<f64>);

impl PlacementVector {
    pub fn new(mut entries: Vec<f64>) -> Self {
        for e in &mut entries {
            if *e < 0.0 && *e >= -ENTRY_TOL {
                *e = 0.0;
            }
        }
        PlacementVector(entries)
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    /// `Σ_l C(K,l) a_l`, the total size of the file.
    pub fn partition_sum(&self) -> f64 {
        let k = self.0.len() - 1;
        self.0.iter().enumerate().map(|(l, &a)| choose(k, l) * a).sum()
    }

    /// `Σ_{l≥1} C(K-1,l-1) a_l`, the amount of this file in each user's cache.
    pub fn cached_per_user(&self) -> f64 {
        let k = self.0.len() - 1;
        self.0
            .iter()
            .enumerate()
            .skip(1)
            .map(|(l, &a)| choose(k - 1, l - 1) * a)
            .sum()
    }
}

impl std::ops::Index<usize> for PlacementVector {
    type Output = f64;

    fn index(&self, l: usize) -> &f64 {
        &self.0[l]
    }
}

/// One placement vector per file, all of length `K + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Placement {
    rows: Vec<PlacementVector>,
}

impl Placement {
    /// Panics if the rows are empty or ragged; use [`Placement::try_from_rows`]
    /// for untrusted input.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        Self::try_from_rows(rows).expect("placement rows must be nonempty and rectangular")
    }

    pub fn try_from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || width < 2 {
            return Err(Error::DimensionMismatch(
                "placement needs at least one file and one user".into(),
            ));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} entries, expected {width}",
                rows[bad].len()
            )));
        }
        if rows.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::DimensionMismatch("placement entries must be finite".into()));
        }
        Ok(Placement {
            rows: rows.into_iter().map(PlacementVector::new).collect(),
        })
    }

    pub fn n_files(&self) -> usize {
        self.rows.len()
    }

    pub fn n_users(&self) -> usize {
        self.rows[0].0.len() - 1
    }

    #[inline]
    pub fn a(&self, file: usize, level: usize) -> f64 {
        self.rows[file].0[level]
    }

    pub fn row(&self, file: usize) -> &PlacementVector {
        &self.rows[file]
    }

    pub fn rows(&self) -> &[PlacementVector] {
        &self.rows
    }

    pub fn to_matrix(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.0.clone()).collect()
    }

    /// Total cache used by each user.
    pub fn cache_used(&self) -> f64 {
        self.rows.iter().map(PlacementVector::cached_per_user).sum()
    }

    /// Number of distinct rows, comparing entries at `tol`.
    pub fn distinct_rows(&self, tol: f64) -> usize {
        let mut reps: Vec<&PlacementVector> = Vec::new();
        for row in &self.rows {
            let seen = reps.iter().any(|r| {
                r.0.iter()
                    .zip(&row.0)
                    .all(|(x, y)| (x - y).abs() <= tol)
            });
            if !seen {
                reps.push(row);
            }
        }
        reps.len()
    }
}

impl fmt::Display for Placement {
    /// Table layout: one line per level `l`, one column per file.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:>3}", "l")?;
        for n in 0..self.n_files() {
            write!(f, " {:>8}", format!("a_{}", n + 1))?;
        }
        writeln!(f)?;
        for l in 0..=self.n_users() {
            write!(f, "{l:>3}")?;
            for n in 0..self.n_files() {
                let v = self.a(n, l);
                if v.abs() < 5e-5 {
                    write!(f, " {:>8}", 0)?;
                } else {
                    write!(f, " {v:>8.4}")?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// A constraint of the placement problem that a placement fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NegativeEntry { file: usize, level: usize, value: f64 },
    /// `Σ_l C(K,l) a_{n,l} - F_n`.
    Partition { file: usize, residual: f64 },
    /// Amount by which the per-user cache budget is exceeded.
    CacheBudget { excess: f64 },
}

/// Checks nonnegativity, the file partition and the cache budget.
pub fn validate_placement(inst: &Instance, a: &Placement) -> Result<Vec<Violation>> {
    if a.n_files() != inst.n_files() || a.n_users() != inst.n_users() {
        return Err(Error::DimensionMismatch(format!(
            "placement is {}x{}, instance needs {}x{}",
            a.n_files(),
            a.n_users() + 1,
            inst.n_files(),
            inst.n_users() + 1
        )));
    }
    let mut out = Vec::new();
    for (n, row) in a.rows().iter().enumerate() {
        for (l, &v) in row.entries().iter().enumerate() {
            if v < -ENTRY_TOL {
                out.push(Violation::NegativeEntry { file: n, level: l, value: v });
            }
        }
        let residual = row.partition_sum() - inst.file_sizes()[n];
        if residual.abs() > FEAS_TOL {
            out.push(Violation::Partition { file: n, residual });
        }
    }
    let excess = a.cache_used() - inst.cache_size();
    if excess > FEAS_TOL {
        out.push(Violation::CacheBudget { excess });
    }
    Ok(out)
}

/// True iff every cached level is nonincreasing in the file index.
pub fn is_popularity_first(a: &Placement) -> bool {
    (1..=a.n_users()).all(|l| (1..a.n_files()).all(|n| a.a(n - 1, l) >= a.a(n, l) - ENTRY_TOL))
}

/// One requested file per user, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Demand(Vec<usize>);

impl Demand {
    pub fn new(requests: Vec<usize>, n_files: usize, n_users: usize) -> Result<Self> {
        if requests.len() != n_users {
            return Err(Error::InvalidDemand(format!(
                "{} requests for {n_users} users",
                requests.len()
            )));
        }
        if let Some(&bad) = requests.iter().find(|&&f| f >= n_files) {
            return Err(Error::InvalidDemand(format!(
                "file index {} out of range 1..={n_files}",
                bad + 1
            )));
        }
        Ok(Demand(requests))
    }

    pub(crate) fn from_raw(requests: Vec<usize>) -> Self {
        Demand(requests)
    }

    /// Parses a comma-separated list of 1-based file indices.
    pub fn parse_one_based(s: &str, n_files: usize, n_users: usize) -> Result<Self> {
        let requests = s
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                match tok.parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(i - 1),
                    _ => Err(Error::InvalidDemand(format!("bad file index {tok:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(requests, n_files, n_users)
    }

    pub fn requests(&self) -> &[usize] {
        &self.0
    }

    pub fn n_users(&self) -> usize {
        self.0.len()
    }

    /// Product of the popularities of the requested files.
    pub fn probability(&self, popularity: &[f64]) -> f64 {
        self.0.iter().map(|&f| popularity[f]).product()
    }
}

/// The set of distinct requested files, sorted by index (and therefore by
/// decreasing popularity).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct DistinctSet(Vec<usize>);

impl DistinctSet {
    pub fn new(files: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = files.into_iter().collect();
        if set.is_empty() {
            return Err(Error::InvalidDemand("distinct set must be nonempty".into()));
        }
        Ok(DistinctSet(set.into_iter().collect()))
    }

    pub fn of(demand: &Demand) -> Self {
        let set: BTreeSet<usize> = demand.requests().iter().copied().collect();
        DistinctSet(set.into_iter().collect())
    }

    pub fn files(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}
