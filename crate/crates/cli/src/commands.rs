use std::path::Path;

use cacheopt::bounds::{lower_bound_p1, lower_bound_p2, lower_bound_p5, rlb_general, BoundResult};
use cacheopt::closedform::avg_rate_closed;
use cacheopt::delivery::{expected_rate, leader_group, rate_ccs, rate_mccs, Scheme};
use cacheopt::model::validate_placement;
use cacheopt::optimizer::{best_grouping, optimal_ccs_rate, solve_p3_lp, solve_p4_lp, CandidateKind};
use cacheopt::{Demand, DistinctSet, Instance, Placement, Violation};
use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instance::{InstanceArgs, Resolved};
use crate::output::{emit, fmt6, fmt6_opt, json, placement_table};
use crate::{Bound, CliError, Format, Method, Vary};

/// Grid points accepted by `sweep`.
const MAX_GRID_POINTS: usize = 10_000;

#[derive(Debug, Serialize)]
struct Candidate {
    kind: CandidateKind,
    breakpoints: (usize, usize),
    positions: (Option<usize>, Option<usize>),
}

#[derive(Debug, Serialize)]
struct OptimizeOutput {
    n_files: usize,
    n_users: usize,
    cache: f64,
    method: Method,
    rate_mccs: f64,
    rate_ccs_opt: Option<f64>,
    lb_p1: Option<f64>,
    lb_p2: Option<f64>,
    lb_p5: Option<f64>,
    /// Rate minus the tightest general-placement bound.
    gap: f64,
    groups: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidate: Option<Candidate>,
    /// 1-based input index of each output row, when the input was not sorted.
    #[serde(skip_serializing_if = "Option::is_none")]
    file_order: Option<Vec<usize>>,
    placement: Placement,
}

fn compute_optimize(r: &Resolved, method: Method) -> Result<OptimizeOutput, CliError> {
    let inst = &r.instance;
    let uniform = inst.has_uniform_sizes();
    let (placement, rate, candidate) = match (method, uniform) {
        (Method::Grouping, false) => {
            return Err(CliError::Input("grouping search requires uniform file sizes; use --method lp".into()))
        }
        (Method::Grouping, true) => {
            let best = best_grouping(inst)?;
            let c = Candidate { kind: best.kind, breakpoints: best.breakpoints, positions: best.positions };
            (best.placement, best.rate, Some(c))
        }
        (Method::Lp, true) => {
            let lp = solve_p3_lp(inst)?;
            (lp.placement, lp.value, None)
        }
        (Method::Lp, false) => {
            let lp = solve_p4_lp(inst)?;
            (lp.placement, lp.value, None)
        }
    };
    let (rate_ccs_opt, lb_p1, lb_p2, lb_p5) = if uniform {
        let ccs = optimal_ccs_rate(inst)?.value;
        (Some(ccs), Some(lower_bound_p1(inst)?.value), Some(lower_bound_p2(inst)?.value), None)
    } else {
        (None, None, None, Some(lower_bound_p5(inst)?.value))
    };
    let general = lb_p1.or(lb_p5).unwrap_or(f64::NAN);
    Ok(OptimizeOutput {
        n_files: inst.n_files(),
        n_users: inst.n_users(),
        cache: inst.cache_size(),
        method,
        rate_mccs: rate,
        rate_ccs_opt,
        lb_p1,
        lb_p2,
        lb_p5,
        gap: rate - general,
        groups: placement.distinct_rows(1e-6),
        candidate,
        file_order: r.file_order(),
        placement,
    })
}

pub fn optimize(args: &InstanceArgs, method: Method, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let r = args.resolve()?;
    let o = compute_optimize(&r, method)?;
    let text = match format {
        Format::Json => json(&o)?,
        Format::Csv => format!(
            "n_files,n_users,cache,rate_mccs,ccs_opt,lb_p1,lb_p2,lb_p5,gap,groups\n{},{},{},{},{},{},{},{},{},{}\n",
            o.n_files,
            o.n_users,
            fmt6(o.cache),
            fmt6(o.rate_mccs),
            fmt6_opt(o.rate_ccs_opt),
            fmt6_opt(o.lb_p1),
            fmt6_opt(o.lb_p2),
            fmt6_opt(o.lb_p5),
            fmt6(o.gap),
            o.groups
        ),
        Format::Table => {
            let mut s = format!("N={} K={} M={} method={}\n", o.n_files, o.n_users, fmt6(o.cache), method.to_possible_value().expect("no skipped variants").get_name());
            s += &placement_table(&o.placement);
            s += &format!("rate_mccs {}\n", fmt6(o.rate_mccs));
            for (name, v) in [("ccs_opt", o.rate_ccs_opt), ("lb_p1", o.lb_p1), ("lb_p2", o.lb_p2), ("lb_p5", o.lb_p5)] {
                if let Some(v) = v {
                    s += &format!("{name} {}\n", fmt6(v));
                }
            }
            s += &format!("groups {}\n", o.groups);
            if let Some(order) = &o.file_order {
                let list: Vec<String> = order.iter().map(usize::to_string).collect();
                s += &format!("file_order {}\n", list.join(","));
            }
            s
        }
    };
    emit(out, &text)
}

pub fn bound(args: &InstanceArgs, which: Option<Bound>, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let r = args.resolve()?;
    let inst = &r.instance;
    let which = which.unwrap_or(if inst.has_uniform_sizes() { Bound::P1 } else { Bound::P5 });
    let b: BoundResult = match which {
        Bound::P1 => lower_bound_p1(inst)?,
        Bound::P2 => lower_bound_p2(inst)?,
        Bound::P5 => lower_bound_p5(inst)?,
    };
    let text = match format {
        Format::Json => json(&b)?,
        Format::Csv => format!("which,value\n{:?},{}\n", b.which, fmt6(b.value)).to_lowercase(),
        Format::Table => format!("{:?} {}\n{}", b.which, fmt6(b.value), placement_table(&b.placement)),
    };
    emit(out, &text)
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub vary: Vary,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub extra: bool,
}

impl SweepSpec {
    fn grid(&self) -> Result<Vec<f64>, CliError> {
        let ok = [self.start, self.stop, self.step].iter().all(|v| v.is_finite());
        if !ok || self.step <= 0.0 || self.stop < self.start {
            return Err(CliError::Input("sweep grid needs finite start <= stop and step > 0".into()));
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        if count > MAX_GRID_POINTS {
            return Err(CliError::Input(format!("sweep grid has {count} points, limit {MAX_GRID_POINTS}")));
        }
        Ok((0..count).map(|i| self.start + i as f64 * self.step).collect())
    }
}

#[derive(Debug, Serialize)]
struct SweepRow {
    x: f64,
    mccs_opt: Option<f64>,
    ccs_opt: Option<f64>,
    lb_p1: Option<f64>,
    lb_p2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lb_p5: Option<f64>,
}

impl SweepRow {
    fn values(&self, extra: bool) -> Vec<Option<f64>> {
        let mut v = vec![self.mccs_opt, self.ccs_opt, self.lb_p1, self.lb_p2];
        if extra {
            v.extend([self.p4, self.lb_p5]);
        }
        v
    }
}

fn sweep_point(inst: &Instance, x: f64, extra: bool) -> Result<SweepRow, CliError> {
    let mut row = SweepRow { x, mccs_opt: None, ccs_opt: None, lb_p1: None, lb_p2: None, p4: None, lb_p5: None };
    if inst.has_uniform_sizes() {
        row.mccs_opt = Some(best_grouping(inst)?.rate);
        row.ccs_opt = Some(optimal_ccs_rate(inst)?.value);
        row.lb_p1 = Some(lower_bound_p1(inst)?.value);
        row.lb_p2 = Some(lower_bound_p2(inst)?.value);
    }
    if extra {
        row.p4 = Some(solve_p4_lp(inst)?.value);
        row.lb_p5 = Some(lower_bound_p5(inst)?.value);
    }
    Ok(row)
}

pub fn sweep(args: &InstanceArgs, spec: &SweepSpec, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let grid = spec.grid()?;
    let instances = grid
        .iter()
        .map(|&x| match spec.vary {
            Vary::Cache => args.resolve_at(Some(x), None),
            Vary::Theta => args.resolve_at(None, Some(x)),
        })
        .collect::<Result<Vec<_>, _>>()?;
    // nonuniform sizes only have the sized columns
    let extra = spec.extra || instances.iter().any(|r| !r.instance.has_uniform_sizes());
    let rows = grid
        .par_iter()
        .zip(&instances)
        .map(|(&x, r)| sweep_point(&r.instance, x, extra))
        .collect::<Result<Vec<_>, _>>()?;
    let mut columns = vec!["x", "mccs_opt", "ccs_opt", "lb_p1", "lb_p2"];
    if extra {
        columns.extend(["p4", "lb_p5"]);
    }
    let text = match format {
        Format::Json => json(&rows)?,
        Format::Csv => {
            let mut s = columns.join(",") + "\n";
            for row in &rows {
                let vals: Vec<String> = row.values(extra).into_iter().map(fmt6_opt).collect();
                s += &format!("{},{}\n", fmt6(row.x), vals.join(","));
            }
            s
        }
        Format::Table => {
            let mut s = format!("# {}\n", columns.join(" "));
            for row in &rows {
                let vals: Vec<String> =
                    row.values(extra).into_iter().map(|v| v.map(fmt6).unwrap_or_else(|| "NaN".into())).collect();
                s += &format!("{} {}\n", fmt6(row.x), vals.join(" "));
            }
            s
        }
    };
    emit(out, &text)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PlacementFile {
    Matrix(Vec<Vec<f64>>),
    Report { placement: Vec<Vec<f64>> },
}

/// Partition residual accepted for a placement read from disk.
const RATE_INPUT_TOL: f64 = 1e-6;

fn read_placement(path: &Path, sizes: Option<&str>) -> Result<(Instance, Placement), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let rows = match serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))? {
        PlacementFile::Matrix(m) | PlacementFile::Report { placement: m } => m,
    };
    let a = Placement::try_from_rows(rows)?;
    let n = a.n_files();
    let sizes = match sizes {
        Some(s) => serde_json::from_str(s).map_err(|e| CliError::Input(format!("--sizes: {e}")))?,
        None => vec![1.0; n],
    };
    let inst = Instance::with_sizes(a.n_users(), a.cache_used(), vec![1.0 / n as f64; n], sizes)?;
    let bad: Vec<String> = validate_placement(&inst, &a)?
        .into_iter()
        .filter_map(|v| match v {
            Violation::NegativeEntry { file, level, value } if value < -RATE_INPUT_TOL => {
                Some(format!("a[{}][{level}] = {value} is negative", file + 1))
            }
            Violation::Partition { file, residual } if residual.abs() > RATE_INPUT_TOL => {
                Some(format!("file {} partition residual {residual:.3e}", file + 1))
            }
            _ => None,
        })
        .collect();
    if !bad.is_empty() {
        return Err(CliError::Input(format!("invalid placement: {}", bad.join("; "))));
    }
    Ok((inst, a))
}

#[derive(Debug, Serialize)]
struct RateOutput {
    demand: Vec<usize>,
    distinct_files: Vec<usize>,
    leader_group: Vec<usize>,
    rate_mccs: f64,
    rate_ccs: f64,
    rlb: f64,
}

pub fn rate(
    placement: &Path,
    demand: &str,
    sizes: Option<&str>,
    format: Format,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let (inst, a) = read_placement(placement, sizes)?;
    let d = Demand::parse_one_based(demand, inst.n_files(), inst.n_users())?;
    let distinct = DistinctSet::of(&d);
    let one_based = |v: &[usize]| v.iter().map(|i| i + 1).collect::<Vec<_>>();
    let o = RateOutput {
        demand: one_based(d.requests()),
        distinct_files: one_based(distinct.files()),
        leader_group: one_based(leader_group(&d).users()),
        rate_mccs: rate_mccs(&d, &a),
        rate_ccs: rate_ccs(&d, &a),
        rlb: rlb_general(&distinct, &a)?,
    };
    let text = match format {
        Format::Json => json(&o)?,
        Format::Csv => format!("rate_mccs,rate_ccs,rlb\n{},{},{}\n", fmt6(o.rate_mccs), fmt6(o.rate_ccs), fmt6(o.rlb)),
        Format::Table => format!(
            "rate_mccs {}\nrate_ccs {}\nrlb {}\n",
            fmt6(o.rate_mccs),
            fmt6(o.rate_ccs),
            fmt6(o.rlb)
        ),
    };
    emit(out, &text)
}

type SelfCheck = fn() -> Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn check_small_cache_table() -> Result<String, String> {
    let inst = Instance::zipf(7, 4, 1.0, 0.56).map_err(err)?;
    let best = best_grouping(&inst).map_err(err)?;
    let ok = best
        .placement
        .rows()
        .iter()
        .all(|r| (r[0] - 0.4286).abs() <= 5e-5 && (r[1] - 0.1429).abs() <= 5e-5);
    if ok {
        Ok(format!("rate {}", fmt6(best.rate)))
    } else {
        Err(format!("unexpected placement\n{}", best.placement))
    }
}

fn check_closed_form() -> Result<String, String> {
    let inst = Instance::zipf(4, 3, 1.5, 0.8).map_err(err)?;
    let a = best_grouping(&inst).map_err(err)?.placement;
    let closed = avg_rate_closed(&inst, &a).map_err(err)?;
    let exact = expected_rate(Scheme::Mccs, &inst, &a).map_err(err)?;
    let diff = (closed - exact).abs();
    if diff <= 1e-9 {
        Ok(format!("difference {diff:.1e}"))
    } else {
        Err(format!("closed {closed} vs enumeration {exact}"))
    }
}

fn check_search_against_lp() -> Result<String, String> {
    let inst = Instance::zipf(9, 4, 4.0, 1.2).map_err(err)?;
    let search = best_grouping(&inst).map_err(err)?.rate;
    let lp = solve_p3_lp(&inst).map_err(err)?.value;
    if (search - lp).abs() <= 1e-6 {
        Ok(format!("rate {}", fmt6(search)))
    } else {
        Err(format!("search {search} vs LP {lp}"))
    }
}

fn check_two_user_bounds() -> Result<String, String> {
    let inst = Instance::new(2, 1.2, vec![0.5, 0.3, 0.2]).map_err(err)?;
    let p1 = lower_bound_p1(&inst).map_err(err)?.value;
    let p2 = lower_bound_p2(&inst).map_err(err)?.value;
    let best = best_grouping(&inst).map_err(err)?.rate;
    if (p1 - p2).abs() <= 1e-6 && (best - p1).abs() <= 1e-6 {
        Ok(format!("rate {}", fmt6(best)))
    } else {
        Err(format!("P1 {p1}, P2 {p2}, search {best}"))
    }
}

fn check_redundancy_gap() -> Result<String, String> {
    let a = Placement::from_rows(vec![vec![0.15, 0.2, 0.05, 0.1], vec![0.55, 0.1, 0.05, 0.0]]);
    let d = Demand::parse_one_based("1,1,2", 2, 3).map_err(err)?;
    let lb = rlb_general(&DistinctSet::of(&d), &a).map_err(err)?;
    let gap = rate_mccs(&d, &a) - lb;
    if (gap - (a.a(0, 1) - a.a(1, 1))).abs() <= 1e-12 {
        Ok(format!("gap {}", fmt6(gap)))
    } else {
        Err(format!("mccs - rlb = {gap}"))
    }
}

pub fn selftest() -> Result<(), CliError> {
    let checks: [(&str, SelfCheck); 5] = [
        ("small-cache placement", check_small_cache_table),
        ("closed form vs enumeration", check_closed_form),
        ("grouping search vs LP", check_search_against_lp),
        ("two-user bounds", check_two_user_bounds),
        ("redundant-request gap", check_redundancy_gap),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {}", why.replace('\n', " "));
            }
        }
    }
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{failed} self-checks failed")))
    }
}
