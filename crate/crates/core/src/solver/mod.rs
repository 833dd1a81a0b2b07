//! Counterfactual set selection.
//!
//! Two problems are solved over a factual x candidate cost table:
//!
//! * cost-constrained: at most `k` candidates, maximize the number of factuals
//!   with some selected candidate within cost `d` ([`greedy_max_coverage`],
//!   [`exact_max_coverage`]);
//! * coverage-constrained: at most `k` candidates covering at least a fraction
//!   `c` of the factuals, minimize the largest assignment cost
//!   ([`greedy_kcenter`], [`exact_kcenter`]).
//!
//! Both decompose over weakly connected components; [`allocation`] recombines
//! per-component answers into global ones.

pub mod allocation;
mod exact;
mod greedy;
mod kcenter;

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::cost::CostKind;
use crate::error::{Error, Result};
use crate::graph::{feasibility_set, FeasibilityGraph, FeasibilitySet, WccIndex};

pub use allocation::{allocate_full_coverage, dp_allocate_partial, AllocationTable, Combine};
pub use exact::exact_max_coverage;
pub use greedy::{greedy_max_coverage, greedy_max_coverage_interleaved};
pub use kcenter::{
    coverage_target, exact_kcenter, exact_kcenter_count, greedy_kcenter, greedy_kcenter_count,
    FirstCenter,
};

/// Default limit on the number of relevant candidates for exact search.
pub const DEFAULT_EXACT_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Greedy,
    Exact,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(Method::Greedy),
            "exact" => Ok(Method::Exact),
            other => Err(Error::usage(format!(
                "unknown method `{other}` (greedy|exact)"
            ))),
        }
    }
}

/// Factuals, candidates and the cost of every factual -> candidate pair.
/// Ids are graph node ids; infeasible pairs cost infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionProblem {
    factuals: Vec<usize>,
    candidates: Vec<usize>,
    costs: Vec<f64>,
}

impl SelectionProblem {
    /// `costs[i][j]` is the cost from `factuals[i]` to `candidates[j]`.
    /// Both id lists must be strictly ascending and disjoint.
    pub fn new(factuals: Vec<usize>, candidates: Vec<usize>, costs: Vec<Vec<f64>>) -> Result<Self> {
        for (name, ids) in [("factual", &factuals), ("candidate", &candidates)] {
            if ids.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::usage(format!(
                    "{name} ids must be strictly ascending"
                )));
            }
        }
        if factuals.iter().any(|f| candidates.binary_search(f).is_ok()) {
            return Err(Error::usage("factual and candidate sets overlap"));
        }
        if costs.len() != factuals.len() || costs.iter().any(|r| r.len() != candidates.len()) {
            return Err(Error::usage("cost table shape does not match the id lists"));
        }
        let flat: Vec<f64> = costs.into_iter().flatten().collect();
        if flat.iter().any(|c| c.is_nan() || *c < 0.0) {
            return Err(Error::usage("costs must be nonnegative (infinity allowed)"));
        }
        Ok(SelectionProblem {
            factuals,
            candidates,
            costs: flat,
        })
    }

    /// Candidates are every graph node with the opposite label; costs follow
    /// each factual's feasibility set.
    pub fn from_graph(
        graph: &FeasibilityGraph,
        factuals: &[usize],
        kind: CostKind,
    ) -> Result<Self> {
        let sets = factuals
            .iter()
            .map(|&x| feasibility_set(graph, x, kind))
            .collect::<Result<Vec<_>>>()?;
        Self::from_feasibility_sets(graph, &sets)
    }

    pub fn from_feasibility_sets(
        graph: &FeasibilityGraph,
        sets: &[FeasibilitySet],
    ) -> Result<Self> {
        let mut factuals: Vec<usize> = sets.iter().map(|s| s.factual).collect();
        factuals.sort_unstable();
        factuals.dedup();
        if factuals.len() != sets.len() {
            return Err(Error::usage("duplicate factual"));
        }
        let label = match factuals.first() {
            Some(&f) => graph.label(f),
            None => 0,
        };
        if factuals.iter().any(|&f| graph.label(f) != label) {
            return Err(Error::usage("factuals must share one predicted label"));
        }
        let candidates: Vec<usize> = (0..graph.node_count())
            .filter(|&v| graph.label(v) != label)
            .collect();
        let mut by_factual: BTreeMap<usize, &FeasibilitySet> = BTreeMap::new();
        for s in sets {
            by_factual.insert(s.factual, s);
        }
        let costs = factuals
            .iter()
            .map(|f| {
                let reach = &by_factual[f].reachable;
                candidates
                    .iter()
                    .map(|c| reach.get(c).copied().unwrap_or(f64::INFINITY))
                    .collect()
            })
            .collect();
        Self::new(factuals, candidates, costs)
    }

    pub fn factuals(&self) -> &[usize] {
        &self.factuals
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn n_factuals(&self) -> usize {
        self.factuals.len()
    }

    pub fn n_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Cost by position in the factual and candidate lists.
    pub fn cost(&self, factual_idx: usize, candidate_idx: usize) -> f64 {
        self.costs[factual_idx * self.candidates.len() + candidate_idx]
    }

    pub fn cost_between(&self, factual: usize, candidate: usize) -> Option<f64> {
        let i = self.factuals.binary_search(&factual).ok()?;
        let j = self.candidates.binary_search(&candidate).ok()?;
        Some(self.cost(i, j))
    }

    fn row(&self, factual_idx: usize) -> &[f64] {
        let n = self.candidates.len();
        &self.costs[factual_idx * n..(factual_idx + 1) * n]
    }

    /// Keep only the listed factuals and candidates.
    pub fn restrict(
        &self,
        keep_factual: impl Fn(usize) -> bool,
        keep_candidate: impl Fn(usize) -> bool,
    ) -> SelectionProblem {
        let fi: Vec<usize> = (0..self.factuals.len())
            .filter(|&i| keep_factual(self.factuals[i]))
            .collect();
        let cj: Vec<usize> = (0..self.candidates.len())
            .filter(|&j| keep_candidate(self.candidates[j]))
            .collect();
        SelectionProblem {
            factuals: fi.iter().map(|&i| self.factuals[i]).collect(),
            candidates: cj.iter().map(|&j| self.candidates[j]).collect(),
            costs: fi
                .iter()
                .flat_map(|&i| cj.iter().map(move |&j| self.cost(i, j)))
                .collect(),
        }
    }

    /// Sub-problems per component touched by a factual or a candidate, in
    /// component id order.
    pub fn by_component(&self, wcc: &WccIndex) -> Vec<(usize, SelectionProblem)> {
        let mut ids: Vec<usize> = self
            .factuals
            .iter()
            .chain(&self.candidates)
            .map(|&v| wcc.component_of[v])
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter()
            .map(|c| {
                let sub = self.restrict(|f| wcc.component_of[f] == c, |x| wcc.component_of[x] == c);
                (c, sub)
            })
            .collect()
    }

    /// Factuals with at least one finite-cost candidate.
    pub fn coverable_factuals(&self) -> Vec<usize> {
        (0..self.factuals.len())
            .filter(|&i| self.row(i).iter().any(|c| c.is_finite()))
            .map(|i| self.factuals[i])
            .collect()
    }

    pub fn uncoverable_factuals(&self) -> Vec<usize> {
        (0..self.factuals.len())
            .filter(|&i| self.row(i).iter().all(|c| c.is_infinite()))
            .map(|i| self.factuals[i])
            .collect()
    }

    /// Distinct finite costs, ascending.
    pub fn radii(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self
            .costs
            .iter()
            .copied()
            .filter(|c| c.is_finite())
            .collect();
        r.sort_by(f64::total_cmp);
        r.dedup();
        r
    }

    /// Largest finite cost, if any pair is feasible.
    pub fn max_finite_cost(&self) -> Option<f64> {
        self.radii().last().copied()
    }

    /// Per candidate, the factual positions it reaches within `bound`.
    /// Infinite costs never count, even for an unbounded `bound`.
    pub(crate) fn cover_sets(&self, bound: f64) -> Vec<FixedBitSet> {
        let n = self.factuals.len();
        (0..self.candidates.len())
            .map(|j| {
                let mut set = FixedBitSet::with_capacity(n);
                for i in 0..n {
                    let c = self.cost(i, j);
                    if c.is_finite() && c <= bound {
                        set.insert(i);
                    }
                }
                set
            })
            .collect()
    }

    /// Number of candidates that reach at least one factual within `bound`.
    pub fn relevant_candidates(&self, bound: f64) -> usize {
        self.cover_sets(bound)
            .iter()
            .filter(|s| !s.is_clear())
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Assignment {
    pub candidate: usize,
    pub cost: f64,
}

/// A selected counterfactual set and the resulting factual assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    /// Candidate node ids in selection order.
    pub selected: Vec<usize>,
    /// Covered factual -> cheapest selected candidate.
    pub assignment: BTreeMap<usize, Assignment>,
    pub coverage: usize,
    /// Largest assignment cost; 0 when nothing is assigned.
    pub max_cost: f64,
    pub method: Method,
    pub optimal: bool,
    /// Marginal coverage of each greedy pick; empty for exact solutions.
    pub gains: Vec<usize>,
}

impl Solution {
    pub fn empty(method: Method, optimal: bool) -> Self {
        Solution {
            selected: Vec::new(),
            assignment: BTreeMap::new(),
            coverage: 0,
            max_cost: 0.0,
            method,
            optimal,
            gains: Vec::new(),
        }
    }

    /// Assign every factual to its cheapest selected candidate and keep those
    /// within `bound`. `selected` holds candidate positions.
    pub(crate) fn from_selection(
        problem: &SelectionProblem,
        selected: &[usize],
        bound: f64,
        method: Method,
        optimal: bool,
    ) -> Self {
        let mut assignment = BTreeMap::new();
        for i in 0..problem.n_factuals() {
            let best = selected
                .iter()
                .map(|&j| (problem.cost(i, j), problem.candidates[j]))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((cost, candidate)) = best {
                if cost.is_finite() && cost <= bound {
                    assignment.insert(problem.factuals[i], Assignment { candidate, cost });
                }
            }
        }
        let max_cost = assignment.values().map(|a| a.cost).fold(0.0, f64::max);
        Solution {
            selected: selected.iter().map(|&j| problem.candidates[j]).collect(),
            coverage: assignment.len(),
            assignment,
            max_cost,
            method,
            optimal,
            gains: Vec::new(),
        }
    }

    /// Union of solutions over disjoint sub-problems.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a Solution>, method: Method) -> Solution {
        let mut out = Solution::empty(method, true);
        for part in parts {
            out.selected.extend(&part.selected);
            out.assignment
                .extend(part.assignment.iter().map(|(k, v)| (*k, *v)));
            out.optimal &= part.optimal;
        }
        out.coverage = out.assignment.len();
        out.max_cost = out.assignment.values().map(|a| a.cost).fold(0.0, f64::max);
        out
    }

    /// Factual ids left without an assignment.
    pub fn uncovered(&self, problem: &SelectionProblem) -> Vec<usize> {
        problem
            .factuals()
            .iter()
            .copied()
            .filter(|f| !self.assignment.contains_key(f))
            .collect()
    }
}

fn check_budget(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::usage("budget k must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_bound(d: f64) -> Result<()> {
    if d.is_nan() || d <= 0.0 {
        Err(Error::usage(format!(
            "cost bound must be positive, got {d}"
        )))
    } else {
        Ok(())
    }
}

/// Which problem to solve on every component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    CostConstrained { d: f64 },
    CoverageConstrained { c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ComponentOutcome {
    Solved {
        solution: Solution,
    },
    /// The component holds factuals but no reachable candidate.
    Uncoverable {
        factuals: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: Method,
    pub exact_cap: usize,
    pub first_center: FirstCenter,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Exact,
            exact_cap: DEFAULT_EXACT_CAP,
            first_center: FirstCenter::Every,
        }
    }
}

/// Solve each component independently with budget `k` per component.
pub fn solve_per_wcc(
    problem: &SelectionProblem,
    wcc: &WccIndex,
    k: usize,
    objective: Objective,
    opts: &SolverOptions,
) -> Result<BTreeMap<usize, ComponentOutcome>> {
    check_budget(k)?;
    let mut out = BTreeMap::new();
    for (id, sub) in problem.by_component(wcc) {
        let outcome = if sub.n_factuals() == 0 {
            ComponentOutcome::Solved {
                solution: Solution::empty(opts.method, true),
            }
        } else if sub.coverable_factuals().is_empty() {
            ComponentOutcome::Uncoverable {
                factuals: sub.factuals().to_vec(),
            }
        } else {
            let solution = match (objective, opts.method) {
                (Objective::CostConstrained { d }, Method::Greedy) => {
                    greedy_max_coverage(&sub, k, d)?
                }
                (Objective::CostConstrained { d }, Method::Exact) => {
                    exact_max_coverage(&sub, k, d, opts.exact_cap)?
                }
                (Objective::CoverageConstrained { c }, Method::Greedy) => {
                    greedy_kcenter(&sub, k, c, opts.first_center)?
                }
                (Objective::CoverageConstrained { c }, Method::Exact) => {
                    exact_kcenter(&sub, k, c, opts.exact_cap)?
                }
            };
            ComponentOutcome::Solved { solution }
        };
        out.insert(id, outcome);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// F1: factuals x1=0.0, x2=0.3, x3=0.9 (ids 0..3), candidates p=0.1,
    /// q=0.8 (ids 3, 4); costs are L2 where reachable at epsilon 0.35.
    pub(crate) fn f1() -> SelectionProblem {
        let inf = f64::INFINITY;
        SelectionProblem::new(
            vec![0, 1, 2],
            vec![3, 4],
            vec![vec![0.1, inf], vec![0.3 - 0.1, inf], vec![inf, 0.9 - 0.8]],
        )
        .unwrap()
    }

    pub(crate) fn f1_wcc() -> WccIndex {
        WccIndex {
            component_of: vec![0, 0, 1, 0, 1],
            components: vec![vec![0, 1, 3], vec![2, 4]],
        }
    }

    #[test]
    fn rejects_overlap_and_shape() {
        assert!(SelectionProblem::new(vec![0, 1], vec![1], vec![vec![0.0], vec![0.0]]).is_err());
        assert!(SelectionProblem::new(vec![0], vec![1], vec![vec![0.0, 1.0]]).is_err());
        assert!(SelectionProblem::new(vec![0], vec![1], vec![vec![-1.0]]).is_err());
    }

    #[test]
    fn split_by_component() {
        let parts = f1().by_component(&f1_wcc());
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].1.factuals(), &[0, 1]);
        assert_eq!(parts[0].1.candidates(), &[3]);
        assert_eq!(parts[1].1.factuals(), &[2]);
        assert_eq!(parts[1].1.candidates(), &[4]);
    }

    #[test]
    fn per_wcc_greedy_on_f1() {
        let opts = SolverOptions {
            method: Method::Greedy,
            ..Default::default()
        };
        let out = solve_per_wcc(
            &f1(),
            &f1_wcc(),
            1,
            Objective::CostConstrained { d: 0.3 },
            &opts,
        )
        .unwrap();
        let sol = |c| match &out[&c] {
            ComponentOutcome::Solved { solution } => solution.clone(),
            other => panic!("{other:?}"),
        };
        assert_eq!(sol(0).selected, vec![3]);
        assert_eq!(sol(0).coverage, 2);
        assert_eq!(sol(1).selected, vec![4]);
        assert_eq!(sol(1).coverage, 1);
    }

    #[test]
    fn per_wcc_flags_empty_and_uncoverable() {
        let inf = f64::INFINITY;
        // component 0: factual 0 with no reachable candidate; component 1: candidate only
        let p = SelectionProblem::new(vec![0], vec![1], vec![vec![inf]]).unwrap();
        let wcc = WccIndex {
            component_of: vec![0, 1],
            components: vec![vec![0], vec![1]],
        };
        let out = solve_per_wcc(
            &p,
            &wcc,
            1,
            Objective::CostConstrained { d: 1.0 },
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(
            matches!(&out[&0], ComponentOutcome::Uncoverable { factuals } if factuals == &vec![0])
        );
        assert!(
            matches!(&out[&1], ComponentOutcome::Solved { solution } if solution.coverage == 0)
        );
    }
}
