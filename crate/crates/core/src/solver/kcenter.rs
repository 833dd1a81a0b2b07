//! Coverage-constrained min-max selection by binary search over radii.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use fixedbitset::FixedBitSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{
    check_budget, exact_max_coverage, greedy_max_coverage, Method, SelectionProblem, Solution,
};
use crate::error::{Error, Result};

/// How the greedy pass picks its first center.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "seed")]
pub enum FirstCenter {
    /// One search per candidate as first center; the cheapest result wins,
    /// ties to the lowest start.
    #[default]
    Every,
    /// Lowest-id candidate that covers anything at the probed radius.
    LowestId,
    /// First such candidate in a seeded permutation of the candidates.
    Seeded(u64),
}

/// Number of factuals a fraction `c` of `n` requires.
pub fn coverage_target(c: f64, n: usize) -> Result<usize> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::usage(format!(
            "coverage fraction must lie in (0, 1], got {c}"
        )));
    }
    Ok(((c * n as f64) - 1e-9).ceil().max(0.0) as usize)
}

/// Keep the `target` cheapest assignments (ties included) of a selection.
fn trim_to_target(
    problem: &SelectionProblem,
    selected: &[usize],
    target: usize,
    method: Method,
    optimal: bool,
) -> Option<Solution> {
    let full = Solution::from_selection(problem, selected, f64::INFINITY, method, optimal);
    if full.coverage < target {
        return None;
    }
    let mut costs: Vec<f64> = full.assignment.values().map(|a| a.cost).collect();
    costs.sort_by(f64::total_cmp);
    let bound = costs[target - 1];
    Some(Solution::from_selection(
        problem, selected, bound, method, optimal,
    ))
}

struct Pass<'a> {
    problem: &'a SelectionProblem,
    cover: Vec<FixedBitSet>,
    /// Per factual, candidate positions within the radius.
    near: Vec<Vec<usize>>,
}

impl<'a> Pass<'a> {
    fn new(problem: &'a SelectionProblem, r: f64) -> Self {
        let cover = problem.cover_sets(r);
        let mut near = vec![Vec::new(); problem.n_factuals()];
        for (j, set) in cover.iter().enumerate() {
            for i in set.ones() {
                near[i].push(j);
            }
        }
        Pass {
            problem,
            cover,
            near,
        }
    }

    fn distance_to(&self, i: usize, selected: &[usize]) -> f64 {
        selected
            .iter()
            .map(|&j| self.problem.cost(i, j))
            .fold(f64::INFINITY, f64::min)
    }

    /// Farthest-first pass. Returns the selected candidate positions and
    /// the number of factuals marked as served.
    fn run(&self, k: usize, target: usize, order: &[usize]) -> (Vec<usize>, usize) {
        let n = self.problem.n_factuals();
        let mut marked = FixedBitSet::with_capacity(n);
        let mut selected = Vec::new();
        let Some(&first) = order.iter().find(|&&j| !self.cover[j].is_clear()) else {
            return (selected, 0);
        };
        selected.push(first);
        marked.union_with(&self.cover[first]);
        while selected.len() < k && marked.count_ones(..) < target {
            let far = (0..n)
                .filter(|&i| !marked.contains(i) && !self.near[i].is_empty())
                .map(|i| (i, self.distance_to(i, &selected)))
                .min_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let Some((f, _)) = far else {
                break;
            };
            let pick = self.near[f]
                .iter()
                .copied()
                .filter(|j| !selected.contains(j))
                .map(|j| (j, self.cover[j].difference_count(&marked)))
                .min_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            let Some((j, _)) = pick else {
                // every candidate near f is already selected, so f is served
                marked.insert(f);
                continue;
            };
            selected.push(j);
            marked.union_with(&self.cover[j]);
            // factuals sharing a candidate with f within the radius
            for &c in &self.near[f] {
                marked.union_with(&self.cover[c]);
            }
        }
        (selected, marked.count_ones(..))
    }
}

fn candidate_order(problem: &SelectionProblem, first: FirstCenter) -> Vec<usize> {
    let mut order: Vec<usize> = (0..problem.n_candidates()).collect();
    if let FirstCenter::Seeded(seed) = first {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order
}

fn infeasible(problem: &SelectionProblem, best: Option<&Solution>, target: usize) -> Error {
    let uncovered = match best {
        Some(sol) => sol.uncovered(problem),
        None => problem.factuals().to_vec(),
    };
    Error::Infeasible {
        message: format!(
            "cannot cover {target} of {} factuals with the given budget",
            problem.n_factuals()
        ),
        uncovered,
    }
}

fn check_target(problem: &SelectionProblem, target: usize) -> Result<()> {
    if target > problem.coverable_factuals().len() {
        return Err(Error::Infeasible {
            message: format!(
                "{target} factuals required but only {} can reach any candidate",
                problem.coverable_factuals().len()
            ),
            uncovered: problem.uncoverable_factuals(),
        });
    }
    Ok(())
}

/// Greedy min-max selection of at most `k` candidates covering a fraction
/// `c` of the factuals.
pub fn greedy_kcenter(
    problem: &SelectionProblem,
    k: usize,
    c: f64,
    first: FirstCenter,
) -> Result<Solution> {
    greedy_kcenter_count(problem, k, coverage_target(c, problem.n_factuals())?, first)
}

/// [`greedy_kcenter`] with an absolute coverage target.
///
/// Each radius probe runs a farthest-first pass: after the first center, the
/// unserved factual farthest from the selection picks the candidate within
/// the radius that covers the most new factuals. A binary search looks for
/// the smallest radius whose pass serves `target` factuals; `max_cost` is the
/// realized cost of the `target` cheapest assignments, the lowest seen over
/// the probes (and over the starts, for [`FirstCenter::Every`]).
pub fn greedy_kcenter_count(
    problem: &SelectionProblem,
    k: usize,
    target: usize,
    first: FirstCenter,
) -> Result<Solution> {
    check_budget(k)?;
    if target == 0 {
        return Ok(Solution::empty(Method::Greedy, false));
    }
    check_target(problem, target)?;
    let radii = problem.radii();
    // radius index -> pass state, shared by the starts
    let passes: Mutex<HashMap<usize, Arc<Pass>>> = Mutex::default();
    let search = |order: &[usize]| -> Option<Solution> {
        let mut best: Option<Solution> = None;
        let (mut lo, mut hi) = (0, radii.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            let cached = passes.lock().expect("pass cache").get(&mid).cloned();
            let pass = cached.unwrap_or_else(|| {
                let pass = Arc::new(Pass::new(problem, radii[mid]));
                passes
                    .lock()
                    .expect("pass cache")
                    .insert(mid, Arc::clone(&pass));
                pass
            });
            let (selected, served) = pass.run(k, target, order);
            let sol = (served >= target)
                .then(|| trim_to_target(problem, &selected, target, Method::Greedy, false))
                .flatten();
            match sol {
                Some(sol) => {
                    if best.as_ref().is_none_or(|b| sol.max_cost < b.max_cost) {
                        best = Some(sol);
                    }
                    hi = mid;
                }
                None => lo = mid + 1,
            }
        }
        best
    };
    let found = match first {
        FirstCenter::Every => (0..problem.n_candidates())
            .into_par_iter()
            .filter_map(|s| {
                let mut order: Vec<usize> = (0..problem.n_candidates()).collect();
                order.rotate_left(s);
                search(&order).map(|sol| (s, sol))
            })
            .min_by(|a, b| a.1.max_cost.total_cmp(&b.1.max_cost).then(a.0.cmp(&b.0)))
            .map(|(_, sol)| sol),
        _ => search(&candidate_order(problem, first)),
    };
    if let Some(sol) = found {
        return Ok(sol);
    }
    // The pass can strand factuals on non-metric costs; fall back to
    // coverage-greedy selection before giving up.
    let fallback = greedy_max_coverage(problem, k, f64::INFINITY)?;
    let idx: Vec<usize> = fallback
        .selected
        .iter()
        .map(|id| problem.candidates().binary_search(id).expect("selected id"))
        .collect();
    trim_to_target(problem, &idx, target, Method::Greedy, false)
        .ok_or_else(|| infeasible(problem, Some(&fallback), target))
}

/// Optimal min-max selection of at most `k` candidates covering a fraction
/// `c` of the factuals. Exact maximum coverage decides each radius probe.
pub fn exact_kcenter(problem: &SelectionProblem, k: usize, c: f64, cap: usize) -> Result<Solution> {
    exact_kcenter_count(problem, k, coverage_target(c, problem.n_factuals())?, cap)
}

/// [`exact_kcenter`] with an absolute coverage target.
pub fn exact_kcenter_count(
    problem: &SelectionProblem,
    k: usize,
    target: usize,
    cap: usize,
) -> Result<Solution> {
    check_budget(k)?;
    if target == 0 {
        return Ok(Solution::empty(Method::Exact, true));
    }
    check_target(problem, target)?;
    let radii = problem.radii();
    let top = *radii
        .last()
        .expect("a coverable factual implies a finite cost");
    let widest = exact_max_coverage(problem, k, top, cap)?;
    if widest.coverage < target {
        return Err(infeasible(problem, Some(&widest), target));
    }
    let (mut lo, mut hi) = (0, radii.len() - 1);
    let mut best = widest;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let sol = exact_max_coverage(problem, k, radii[mid], cap)?;
        if sol.coverage >= target {
            best = sol;
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let idx: Vec<usize> = best
        .selected
        .iter()
        .map(|id| problem.candidates().binary_search(id).expect("selected id"))
        .collect();
    Ok(trim_to_target(problem, &idx, target, Method::Exact, true)
        .expect("probe reached the target"))
}
