//! Splitting a global budget across weakly connected components.
//!
//! Components share no feasible pairs, so a global min-max selection is a
//! union of per-component selections and only the budget split matters.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    exact_kcenter_count, greedy_kcenter_count, Method, SelectionProblem, Solution, SolverOptions,
};
use crate::error::{Error, Result};

/// How per-component costs combine in the partial-coverage recurrence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    #[default]
    Max,
    Sum,
}

impl Combine {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Combine::Max => a.max(b),
            Combine::Sum => a + b,
        }
    }
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combine::Max => "max",
            Combine::Sum => "sum",
        })
    }
}

impl std::str::FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Combine::Max),
            "sum" => Ok(Combine::Sum),
            other => Err(Error::usage(format!(
                "unknown combine mode `{other}` (max|sum)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentAllocation {
    pub component: usize,
    pub budget: usize,
    /// Factuals this component must cover.
    pub covered: usize,
    pub cost: f64,
    pub solution: Solution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationTable {
    pub allocations: Vec<ComponentAllocation>,
    /// Overall objective: largest component cost (or their sum in sum mode).
    pub cost: f64,
    pub total_budget: usize,
    pub required: usize,
    pub combine: Combine,
    /// Per component, `table[k'][n']` = best cost covering `n'` with `k'`.
    pub component_tables: BTreeMap<usize, Vec<Vec<f64>>>,
    /// Combined `table[k'][n']` over all components.
    pub combined: Vec<Vec<f64>>,
}

impl AllocationTable {
    /// Union of the per-component selections.
    pub fn solution(&self) -> Solution {
        let method = self
            .allocations
            .first()
            .map_or(Method::Exact, |a| a.solution.method);
        Solution::merge(self.allocations.iter().map(|a| &a.solution), method)
    }
}

/// Components with something to cover, restricted to coverable factuals.
fn coverable_parts(parts: &[(usize, SelectionProblem)]) -> Vec<(usize, SelectionProblem)> {
    parts
        .iter()
        .filter_map(|(id, p)| {
            let keep = p.coverable_factuals();
            if keep.is_empty() {
                return None;
            }
            Some((
                *id,
                p.restrict(|f| keep.binary_search(&f).is_ok(), |_| true),
            ))
        })
        .collect()
}

fn solve_count(
    p: &SelectionProblem,
    k: usize,
    target: usize,
    opts: &SolverOptions,
) -> Result<Option<Solution>> {
    let res = match opts.method {
        Method::Exact => exact_kcenter_count(p, k, target, opts.exact_cap),
        Method::Greedy => greedy_kcenter_count(p, k, target, opts.first_center),
    };
    match res {
        Ok(sol) => Ok(Some(sol)),
        Err(Error::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Full-coverage costs of one component, solved lazily by budget.
struct FullCover<'a> {
    problem: &'a SelectionProblem,
    solved: BTreeMap<usize, Solution>,
    /// Budget beyond which more candidates cannot help.
    saturation: usize,
}

impl<'a> FullCover<'a> {
    fn new(problem: &'a SelectionProblem) -> Self {
        FullCover {
            problem,
            solved: BTreeMap::new(),
            saturation: problem
                .relevant_candidates(f64::INFINITY)
                .min(problem.n_factuals()),
        }
    }

    fn at(&mut self, k: usize, opts: &SolverOptions) -> Result<Option<Solution>> {
        let k_eff = k.min(self.saturation.max(1));
        if let Some(sol) = self.solved.get(&k_eff) {
            return Ok(Some(sol.clone()));
        }
        let sol = solve_count(self.problem, k_eff, self.problem.n_factuals(), opts)?;
        if let Some(s) = &sol {
            self.solved.insert(k_eff, s.clone());
        }
        Ok(sol)
    }

    /// Smallest budget covering every factual.
    fn minimum(&mut self, opts: &SolverOptions) -> Result<(usize, Solution)> {
        for k in 1..=self.saturation.max(1) {
            if let Some(sol) = self.at(k, opts)? {
                return Ok((k, sol));
            }
        }
        Err(Error::Infeasible {
            message: "component cannot be fully covered".into(),
            uncovered: self.problem.factuals().to_vec(),
        })
    }
}

/// Full coverage under a total budget `k`: every component first receives
/// its minimum full-cover budget, then each remaining unit goes to the
/// component with the highest current cost (lowest id on ties).
pub fn allocate_full_coverage(
    parts: &[(usize, SelectionProblem)],
    k: usize,
    opts: &SolverOptions,
) -> Result<AllocationTable> {
    let parts = coverable_parts(parts);
    let m = parts.len();
    if k < m {
        return Err(Error::Infeasible {
            message: format!(
                "at least one counterfactual is required per component: {m} components, budget {k}"
            ),
            uncovered: Vec::new(),
        });
    }
    let mut states: Vec<FullCover> = parts.iter().map(|(_, p)| FullCover::new(p)).collect();
    let mut budgets = Vec::with_capacity(m);
    let mut solutions = Vec::with_capacity(m);
    for st in states.iter_mut() {
        let (l, sol) = st.minimum(opts)?;
        budgets.push(l);
        solutions.push(sol);
    }
    let needed: usize = budgets.iter().sum();
    if needed > k {
        return Err(Error::Infeasible {
            message: format!(
                "full coverage needs {needed} counterfactuals, budget is {k} (short by {})",
                needed - k
            ),
            uncovered: Vec::new(),
        });
    }
    let mut spare = k - needed;
    while spare > 0 && m > 0 {
        let i = (0..m)
            .max_by(|&a, &b| {
                solutions[a]
                    .max_cost
                    .total_cmp(&solutions[b].max_cost)
                    .then(b.cmp(&a))
            })
            .expect("nonempty");
        budgets[i] += 1;
        solutions[i] = states[i]
            .at(budgets[i], opts)?
            .expect("more budget stays feasible");
        spare -= 1;
    }

    let allocations: Vec<ComponentAllocation> = parts
        .iter()
        .zip(budgets.iter().zip(solutions))
        .map(|((id, p), (&budget, solution))| ComponentAllocation {
            component: *id,
            budget,
            covered: p.n_factuals(),
            cost: solution.max_cost,
            solution,
        })
        .collect();
    let cost = allocations.iter().map(|a| a.cost).fold(0.0, f64::max);
    Ok(AllocationTable {
        cost,
        total_budget: k,
        required: allocations.iter().map(|a| a.covered).sum(),
        combine: Combine::Max,
        allocations,
        component_tables: BTreeMap::new(),
        combined: Vec::new(),
    })
}

/// Cheapest way to cover `n` factuals in total with at most `k`
/// counterfactuals, by dynamic programming over components:
/// `F(1..i, k, n) = min over k', n' of F(1..i-1, k-k', n-n') (+) F(i, k', n')`
/// where `(+)` is `combine`.
pub fn dp_allocate_partial(
    parts: &[(usize, SelectionProblem)],
    k: usize,
    n: usize,
    combine: Combine,
    opts: &SolverOptions,
) -> Result<AllocationTable> {
    let parts = coverable_parts(parts);
    let coverable: usize = parts.iter().map(|(_, p)| p.n_factuals()).sum();
    if n > coverable {
        return Err(Error::Infeasible {
            message: format!("{n} factuals required but only {coverable} are coverable"),
            uncovered: Vec::new(),
        });
    }
    if n == 0 {
        return Ok(AllocationTable {
            allocations: Vec::new(),
            cost: 0.0,
            total_budget: k,
            required: 0,
            combine,
            component_tables: BTreeMap::new(),
            combined: vec![vec![0.0]; k + 1],
        });
    }

    // Per-component tables with the solutions behind each finite entry.
    let mut tables = Vec::with_capacity(parts.len());
    let mut sols: Vec<BTreeMap<(usize, usize), Solution>> = Vec::with_capacity(parts.len());
    for (_, p) in &parts {
        let cap_n = n.min(p.n_factuals());
        let useful = p.relevant_candidates(f64::INFINITY).max(1);
        let mut t = vec![vec![f64::INFINITY; cap_n + 1]; k + 1];
        let mut s = BTreeMap::new();
        for row in t.iter_mut() {
            row[0] = 0.0;
        }
        for kk in 1..=k {
            #[allow(clippy::needless_range_loop)]
            for nn in 1..=cap_n {
                if kk > useful {
                    t[kk][nn] = t[useful][nn];
                    if let Some(sol) = s.get(&(useful, nn)).cloned() {
                        s.insert((kk, nn), sol);
                    }
                    continue;
                }
                if let Some(sol) = solve_count(p, kk, nn, opts)? {
                    t[kk][nn] = sol.max_cost;
                    s.insert((kk, nn), sol);
                }
            }
        }
        tables.push(t);
        sols.push(s);
    }

    // combined[i][k'][n'] over the first i components, with argmin choices.
    let mut combined = vec![vec![f64::INFINITY; n + 1]; k + 1];
    for row in combined.iter_mut() {
        row[0] = 0.0;
    }
    let mut choices: Vec<Vec<Vec<(usize, usize)>>> = Vec::with_capacity(parts.len());
    for t in &tables {
        let cap_n = t[0].len() - 1;
        let mut next = vec![vec![f64::INFINITY; n + 1]; k + 1];
        let mut choice = vec![vec![(0, 0); n + 1]; k + 1];
        for kk in 0..=k {
            for nn in 0..=n {
                for k1 in 0..=kk {
                    for n1 in 0..=nn.min(cap_n) {
                        let prev = combined[kk - k1][nn - n1];
                        let here = t[k1][n1];
                        if prev.is_infinite() || here.is_infinite() {
                            continue;
                        }
                        let v = combine.apply(prev, here);
                        if v < next[kk][nn] {
                            next[kk][nn] = v;
                            choice[kk][nn] = (k1, n1);
                        }
                    }
                }
            }
        }
        combined = next;
        choices.push(choice);
    }

    let cost = combined[k][n];
    if cost.is_infinite() {
        return Err(Error::Infeasible {
            message: format!("cannot cover {n} factuals with {k} counterfactuals"),
            uncovered: Vec::new(),
        });
    }
    let (mut kk, mut nn) = (k, n);
    let mut picks = vec![(0, 0); parts.len()];
    for i in (0..parts.len()).rev() {
        let (k1, n1) = choices[i][kk][nn];
        picks[i] = (k1, n1);
        kk -= k1;
        nn -= n1;
    }
    let allocations = parts
        .iter()
        .enumerate()
        .filter(|(i, _)| picks[*i].1 > 0)
        .map(|(i, (id, _))| {
            let (budget, covered) = picks[i];
            let solution = sols[i][&(budget, covered)].clone();
            ComponentAllocation {
                component: *id,
                budget,
                covered,
                cost: tables[i][budget][covered],
                solution,
            }
        })
        .collect();
    Ok(AllocationTable {
        allocations,
        cost,
        total_budget: k,
        required: n,
        combine,
        component_tables: parts.iter().map(|(id, _)| *id).zip(tables).collect(),
        combined,
    })
}
