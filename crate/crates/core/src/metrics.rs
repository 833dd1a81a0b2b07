//! Burden measures over a group of factuals.
//!
//! Every measure works on the coverable factuals only: those with at least
//! one reachable candidate. Coverage fractions are relative to that count.

use std::io;

use serde::Serialize;

use crate::cost::{l2, CostKind};
use crate::error::{Error, Result};
use crate::graph::WccIndex;
use crate::schema::EncodedMatrix;
use crate::solver::{
    allocate_full_coverage, coverage_target, dp_allocate_partial, exact_kcenter_count,
    exact_max_coverage, greedy_kcenter_count, greedy_max_coverage, Combine, Method,
    SelectionProblem, Solution, SolverOptions,
};

/// How a solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// One exact search over the whole group.
    ExactGlobal,
    /// Exact searches per component, recombined by budget.
    ExactPerComponent,
    Greedy,
}

/// The same problem restricted to factuals that can reach some candidate.
pub fn coverable_only(problem: &SelectionProblem) -> SelectionProblem {
    let keep = problem.coverable_factuals();
    problem.restrict(|f| keep.binary_search(&f).is_ok(), |_| true)
}

/// Largest cost the metric grids should span. For L2 this is the largest
/// distance between any two rows; for graph costs, the largest finite
/// factual -> candidate cost.
pub fn max_possible_cost(
    matrix: &EncodedMatrix,
    kind: CostKind,
    problem: &SelectionProblem,
) -> f64 {
    match kind {
        CostKind::L2 => {
            let n = matrix.n_rows();
            let mut best = 0.0_f64;
            for i in 0..n {
                for j in i + 1..n {
                    best = best.max(l2(matrix.row(i), matrix.row(j)));
                }
            }
            best
        }
        _ => problem.max_finite_cost().unwrap_or(0.0),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentResources {
    pub component: usize,
    pub factuals: usize,
    pub candidates: usize,
    pub k0: usize,
    pub d0: f64,
    pub route: Route,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinResources {
    pub k0: usize,
    pub d0: f64,
    /// Components holding coverable factuals.
    pub m: usize,
    pub per_wcc: Vec<ComponentResources>,
    /// Factuals with no reachable candidate.
    pub excluded: Vec<usize>,
}

/// Fewest counterfactuals covering every coverable factual, and the lowest
/// worst-case cost at that count, per component and in total.
pub fn min_resources(
    problem: &SelectionProblem,
    wcc: &WccIndex,
    opts: &SolverOptions,
) -> Result<MinResources> {
    let excluded = problem.uncoverable_factuals();
    let problem = coverable_only(problem);
    let mut per_wcc = Vec::new();
    for (component, sub) in problem.by_component(wcc) {
        let n = sub.n_factuals();
        if n == 0 {
            continue;
        }
        let exact = opts.method == Method::Exact
            && sub.relevant_candidates(f64::INFINITY) <= opts.exact_cap;
        let (k0, d0, route) = if exact {
            let mut k0 = 1;
            while exact_max_coverage(&sub, k0, f64::INFINITY, opts.exact_cap)?.coverage < n {
                k0 += 1;
            }
            let d0 = exact_kcenter_count(&sub, k0, n, opts.exact_cap)?.max_cost;
            (k0, d0, Route::ExactPerComponent)
        } else {
            let k0 = greedy_max_coverage(&sub, n, f64::INFINITY)?.selected.len();
            let d0 = greedy_kcenter_count(&sub, k0, n, opts.first_center)?.max_cost;
            (k0, d0, Route::Greedy)
        };
        per_wcc.push(ComponentResources {
            component,
            factuals: n,
            candidates: sub.n_candidates(),
            k0,
            d0,
            route,
        });
    }
    Ok(MinResources {
        k0: per_wcc.iter().map(|c| c.k0).sum(),
        d0: per_wcc.iter().map(|c| c.d0).fold(0.0, f64::max),
        m: per_wcc.len(),
        per_wcc,
        excluded,
    })
}

/// Coverage-maximal selection of at most `k` candidates within cost `d`.
///
/// Exact over the whole group when its relevant candidates fit the cap,
/// otherwise exact per component with the budget split by dynamic
/// programming, otherwise greedy.
pub fn best_coverage_set(
    problem: &SelectionProblem,
    wcc: &WccIndex,
    k: usize,
    d: f64,
    opts: &SolverOptions,
) -> Result<(Solution, Route)> {
    if opts.method == Method::Greedy {
        return Ok((greedy_max_coverage(problem, k, d)?, Route::Greedy));
    }
    match exact_max_coverage(problem, k, d, opts.exact_cap) {
        Ok(sol) => return Ok((sol, Route::ExactGlobal)),
        Err(Error::Capacity { .. }) => {}
        Err(e) => return Err(e),
    }
    let parts = problem.by_component(wcc);
    if parts
        .iter()
        .any(|(_, p)| p.relevant_candidates(d) > opts.exact_cap)
    {
        return Ok((greedy_max_coverage(problem, k, d)?, Route::Greedy));
    }
    // best[b] = (coverage, budget used, picks per component) with budget <= b
    let mut best: Vec<(usize, usize, Vec<usize>)> = vec![(0, 0, Vec::new()); k + 1];
    let mut tables = Vec::with_capacity(parts.len());
    for (_, p) in &parts {
        let top = k.min(p.relevant_candidates(d));
        let mut sols = vec![Solution::empty(Method::Exact, true)];
        for kk in 1..=top {
            sols.push(exact_max_coverage(p, kk, d, opts.exact_cap)?);
        }
        let mut next = best.clone();
        for b in 0..=k {
            next[b].2.push(0);
            for (kk, sol) in sols
                .iter()
                .enumerate()
                .skip(1)
                .take_while(|(kk, _)| *kk <= b)
            {
                let (cov, used, picks) = &best[b - kk];
                let cand = (cov + sol.coverage, used + kk);
                if cand.0 > next[b].0 || (cand.0 == next[b].0 && cand.1 < next[b].1) {
                    let mut picks = picks.clone();
                    picks.push(kk);
                    next[b] = (cand.0, cand.1, picks);
                }
            }
        }
        best = next;
        tables.push(sols);
    }
    let picks = &best[k].2;
    let merged = Solution::merge(
        tables.iter().zip(picks).map(|(sols, &kk)| &sols[kk]),
        Method::Exact,
    );
    Ok((merged, Route::ExactPerComponent))
}

/// Min-max cost of covering `target` factuals with `k` counterfactuals, or
/// `None` when out of reach.
fn min_max_cost(
    problem: &SelectionProblem,
    wcc: &WccIndex,
    k: usize,
    target: usize,
    opts: &SolverOptions,
) -> Result<(Option<f64>, Route)> {
    let feasible = |r: Result<Solution>| -> Result<Option<f64>> {
        match r {
            Ok(sol) => Ok(Some(sol.max_cost)),
            Err(Error::Infeasible { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    if opts.method == Method::Greedy {
        return Ok((
            feasible(greedy_kcenter_count(problem, k, target, opts.first_center))?,
            Route::Greedy,
        ));
    }
    match exact_kcenter_count(problem, k, target, opts.exact_cap) {
        Err(Error::Capacity { .. }) => {}
        other => return Ok((feasible(other)?, Route::ExactGlobal)),
    }
    let parts = problem.by_component(wcc);
    if parts
        .iter()
        .all(|(_, p)| p.relevant_candidates(f64::INFINITY) <= opts.exact_cap)
    {
        let res = if target == problem.n_factuals() {
            allocate_full_coverage(&parts, k, opts)
        } else {
            dp_allocate_partial(&parts, k, target, Combine::Max, opts)
        };
        return Ok((
            feasible(res.map(|t| t.solution()))?,
            Route::ExactPerComponent,
        ));
    }
    Ok((
        feasible(greedy_kcenter_count(problem, k, target, opts.first_center))?,
        Route::Greedy,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Cost,
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum YSemantics {
    CoverageFraction,
    MinMaxCost,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub axis: Axis,
    pub y: YSemantics,
    pub points: Vec<(f64, f64)>,
}

impl Curve {
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y"])?;
        for (x, y) in &self.points {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("curve", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucResult {
    /// Normalized area in `[0, 1]`.
    pub value: f64,
    pub raw_area: f64,
    pub optimal_area: f64,
    pub saturation_point: f64,
    /// Curve value from the saturation point on.
    pub extremum: f64,
    pub curve: Curve,
    /// Grid points left out because no solution exists there.
    pub skipped: Vec<f64>,
    pub routes: Vec<Route>,
}

pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// First grid x from which the curve stays at its final value.
fn plateau_onset(points: &[(f64, f64)]) -> (f64, f64) {
    let last = points.last().expect("nonempty curve");
    let mut onset = last.0;
    for p in points.iter().rev() {
        if p.1 != last.1 {
            break;
        }
        onset = p.0;
    }
    (onset, last.1)
}

/// Area relative to a constant curve of height `height` over the same span.
/// A single point compares heights directly.
fn normalized(points: &[(f64, f64)], height: f64) -> (f64, f64, f64) {
    let raw = trapezoid(points);
    let span = points.last().unwrap().0 - points[0].0;
    let optimal = height * span;
    let value = if height <= 0.0 {
        0.0
    } else if span == 0.0 {
        points[0].1 / height
    } else {
        raw / optimal
    };
    (value.clamp(0.0, 1.0), raw, optimal)
}

fn coverage_fraction(sol: &Solution, n: usize) -> f64 {
    sol.coverage as f64 / n as f64
}

fn require_factuals(problem: &SelectionProblem) -> Result<usize> {
    match problem.n_factuals() {
        0 => Err(Error::usage("no coverable factuals to measure")),
        n => Ok(n),
    }
}

/// Coverage with `k` counterfactuals across cost bounds in `[d_min, d_max]`.
/// `sp` is the smallest grid cost from which coverage stops growing.
pub fn k_auc(
    problem: &SelectionProblem,
    wcc: &WccIndex,
    k: usize,
    d_range: (f64, f64),
    steps: usize,
    opts: &SolverOptions,
) -> Result<AucResult> {
    let problem = coverable_only(problem);
    let n = require_factuals(&problem)?;
    let grid = nice_grid(d_range.0, d_range.1, steps, false)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut routes = Vec::with_capacity(grid.len());
    for &d in &grid {
        let (sol, route) = best_coverage_set(&problem, wcc, k, d, opts)?;
        points.push((d, coverage_fraction(&sol, n)));
        routes.push(route);
    }
    Ok(coverage_auc(points, Axis::Cost, routes))
}

/// Coverage within cost `d` across budgets in `[k_min, k_max]`.
pub fn d_auc(
    problem: &SelectionProblem,
    wcc: &WccIndex,
    d: f64,
    k_range: (usize, usize),
    steps: usize,
    opts: &SolverOptions,
) -> Result<AucResult> {
    let problem = coverable_only(problem);
    let n = require_factuals(&problem)?;
    let grid = k_grid(k_range, steps)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut routes = Vec::with_capacity(grid.len());
    for &k in &grid {
        let (sol, route) = best_coverage_set(&problem, wcc, k as usize, d, opts)?;
        points.push((k, coverage_fraction(&sol, n)));
        routes.push(route);
    }
    Ok(coverage_auc(points, Axis::K, routes))
}

fn coverage_auc(points: Vec<(f64, f64)>, axis: Axis, routes: Vec<Route>) -> AucResult {
    let (value, raw_area, optimal_area) = normalized(&points, 1.0);
    let (mut sp, plateau) = plateau_onset(&points);
    if plateau == 0.0 {
        sp = points.last().unwrap().0;
    }
    AucResult {
        value,
        raw_area,
        optimal_area,
        saturation_point: sp,
        extremum: plateau,
        curve: Curve {
            axis,
            y: YSemantics::CoverageFraction,
            points,
        },
        skipped: Vec::new(),
        routes,
    }
}

/// Worst-case cost of reaching coverage `c` across budgets in
/// `[k_min, k_max]`. Budgets too small to reach `c` are skipped. The value
/// is normalized by the constant curve at the highest cost seen, so lower
/// is better; `sp` is the budget from which the cost stops falling.
pub fn c_auc(
    problem: &SelectionProblem,
    wcc: &WccIndex,
    c: f64,
    k_range: (usize, usize),
    steps: usize,
    opts: &SolverOptions,
) -> Result<AucResult> {
    let problem = coverable_only(problem);
    let n = require_factuals(&problem)?;
    let target = coverage_target(c, n)?;
    let grid = k_grid(k_range, steps)?;
    let mut points = Vec::with_capacity(grid.len());
    let mut routes = Vec::with_capacity(grid.len());
    let mut skipped = Vec::new();
    for &k in &grid {
        let (cost, route) = min_max_cost(&problem, wcc, k as usize, target, opts)?;
        match cost {
            Some(y) => {
                points.push((k, y));
                routes.push(route);
            }
            None => skipped.push(k),
        }
    }
    if points.last().map(|p| p.0) != grid.last().copied() {
        return Err(Error::Infeasible {
            message: format!(
                "coverage {c} is out of reach with {} counterfactuals",
                k_range.1
            ),
            uncovered: Vec::new(),
        });
    }
    let top = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let (value, raw_area, optimal_area) = normalized(&points, top);
    let value = if points.len() == 1 && top > 0.0 {
        1.0
    } else {
        value
    };
    let (sp, plateau) = plateau_onset(&points);
    Ok(AucResult {
        value,
        raw_area,
        optimal_area,
        saturation_point: sp,
        extremum: plateau,
        curve: Curve {
            axis: Axis::K,
            y: YSemantics::MinMaxCost,
            points,
        },
        skipped,
        routes,
    })
}

fn k_grid(k_range: (usize, usize), steps: usize) -> Result<Vec<f64>> {
    let (lo, hi) = k_range;
    if lo == 0 || hi < lo {
        return Err(Error::usage(format!("invalid budget range [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(vec![lo as f64]);
    }
    nice_grid(lo as f64, hi as f64, steps, true)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfReport {
    pub attribute: String,
    pub frequency: f64,
    pub changed: usize,
    pub covered: usize,
    /// Factuals without an assigned counterfactual, left out of the count.
    pub uncovered: Vec<usize>,
}

/// Share of covered factuals whose assigned counterfactual differs from
/// them on `attribute` (all of its encoded columns).
pub fn acf(
    matrix: &EncodedMatrix,
    factuals: &[usize],
    solution: &Solution,
    attribute: &str,
) -> Result<AcfReport> {
    let attr = matrix
        .attribute(attribute)
        .ok_or_else(|| Error::usage(format!("unknown attribute `{attribute}`")))?;
    let span = attr.span();
    let mut changed = 0;
    let mut covered = 0;
    let mut uncovered = Vec::new();
    for &f in factuals {
        match solution.assignment.get(&f) {
            Some(a) => {
                covered += 1;
                if matrix.row(f)[span.clone()] != matrix.row(a.candidate)[span.clone()] {
                    changed += 1;
                }
            }
            None => uncovered.push(f),
        }
    }
    Ok(AcfReport {
        attribute: attribute.to_string(),
        frequency: if covered == 0 {
            0.0
        } else {
            changed as f64 / covered as f64
        },
        changed,
        covered,
        uncovered,
    })
}

const INTEGER_STEPS: [f64; 7] = [1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0];

/// Nearest value in `set`, ties to the larger.
fn nearest(set: &[f64], x: f64) -> f64 {
    let mut best = set[0];
    for &s in set {
        if (s - x).abs() <= (best - x).abs() {
            best = s;
        }
    }
    best
}

/// Evenly spaced grid from `min` to `max` with a "nice" spacing near
/// `(max - min) / (n - 1)`. Decimal spacings use mantissas 1..=10;
/// `integer` spacings use {1, 2, 3, 4, 5, 7, 10} times a power of ten and
/// are at least 1. The last point is always `max`.
pub fn nice_grid(min: f64, max: f64, n: usize, integer: bool) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && min < max) || n < 2 {
        return Err(Error::usage(format!(
            "invalid grid [{min}, {max}] with {n} points"
        )));
    }
    let raw = (max - min) / (n - 1) as f64;
    let scale = 10f64.powf(raw.log10().floor());
    let mantissa = raw / scale;
    let spacing = if integer {
        if raw < 1.0 {
            1.0
        } else {
            nearest(&INTEGER_STEPS, mantissa) * scale
        }
    } else {
        (mantissa + 0.5).floor().clamp(1.0, 10.0) * scale
    };
    let round = |x: f64| (x * 1e10).round() / 1e10;
    let mut grid = Vec::new();
    let mut i = 0;
    loop {
        let x = round(min + i as f64 * spacing);
        if x >= max - 1e-10 {
            break;
        }
        grid.push(x);
        i += 1;
    }
    grid.push(max);
    Ok(grid)
}
