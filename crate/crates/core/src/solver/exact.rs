//! Exact maximum coverage by branch and bound over candidate subsets.
//!
//! Upper bound at a node: current coverage plus the largest marginal gains
//! still available for the remaining slots (valid by submodularity).

use fixedbitset::FixedBitSet;

use super::{check_bound, check_budget, greedy_max_coverage, Method, SelectionProblem, Solution};
use crate::error::{Error, Result};

struct Search<'a> {
    sets: Vec<&'a FixedBitSet>,
    n: usize,
}

impl Search<'_> {
    fn bound(&self, from: usize, slots: usize, covered: &FixedBitSet) -> usize {
        let mut gains: Vec<usize> = self.sets[from..]
            .iter()
            .map(|s| s.difference_count(covered))
            .collect();
        gains.sort_unstable_by(|a, b| b.cmp(a));
        covered.count_ones(..) + gains.iter().take(slots).sum::<usize>()
    }

    /// Largest coverage reachable with at most `slots` more sets from `pos` on.
    fn best_value(&self, pos: usize, slots: usize, covered: &FixedBitSet, best: &mut usize) {
        let count = covered.count_ones(..);
        *best = (*best).max(count);
        if slots == 0 || pos == self.sets.len() || *best == self.n {
            return;
        }
        if self.bound(pos, slots, covered) <= *best {
            return;
        }
        let mut with = covered.clone();
        with.union_with(self.sets[pos]);
        self.best_value(pos + 1, slots - 1, &with, best);
        self.best_value(pos + 1, slots, covered, best);
    }

    /// First subset in lexicographic order with exactly `need` more sets
    /// reaching `target`.
    fn first_reaching(
        &self,
        pos: usize,
        need: usize,
        covered: &FixedBitSet,
        target: usize,
        chosen: &mut Vec<usize>,
    ) -> bool {
        if need == 0 {
            return covered.count_ones(..) >= target;
        }
        if self.sets.len() - pos < need || self.bound(pos, need, covered) < target {
            return false;
        }
        let mut with = covered.clone();
        with.union_with(self.sets[pos]);
        chosen.push(pos);
        if self.first_reaching(pos + 1, need - 1, &with, target, chosen) {
            return true;
        }
        chosen.pop();
        self.first_reaching(pos + 1, need, covered, target, chosen)
    }
}

/// Coverage-optimal selection of at most `k` candidates under cost bound `d`.
///
/// Among optimal selections the smallest is returned, then the
/// lexicographically smallest by candidate id. Fails with
/// [`Error::Capacity`] when more than `cap` candidates reach any factual
/// within `d`.
pub fn exact_max_coverage(
    problem: &SelectionProblem,
    k: usize,
    d: f64,
    cap: usize,
) -> Result<Solution> {
    check_budget(k)?;
    check_bound(d)?;
    let cover = problem.cover_sets(d);
    let relevant: Vec<usize> = (0..cover.len()).filter(|&j| !cover[j].is_clear()).collect();
    if relevant.len() > cap {
        return Err(Error::Capacity {
            relevant: relevant.len(),
            cap,
        });
    }
    let n = problem.n_factuals();
    let slots = k.min(relevant.len());

    // Optimum value; larger sets first prunes sooner.
    let mut by_size = relevant.clone();
    by_size.sort_by_key(|&j| std::cmp::Reverse(cover[j].count_ones(..)));
    let value_search = Search {
        sets: by_size.iter().map(|&j| &cover[j]).collect(),
        n,
    };
    let mut best = greedy_max_coverage(problem, k, d)?.coverage;
    value_search.best_value(0, slots, &FixedBitSet::with_capacity(n), &mut best);

    // Smallest, then lexicographically first, subset achieving it.
    let lex_search = Search {
        sets: relevant.iter().map(|&j| &cover[j]).collect(),
        n,
    };
    let empty = FixedBitSet::with_capacity(n);
    let mut chosen = Vec::new();
    for size in 0..=slots {
        if lex_search.first_reaching(0, size, &empty, best, &mut chosen) {
            break;
        }
        chosen.clear();
    }
    let selected: Vec<usize> = chosen.iter().map(|&p| relevant[p]).collect();
    Ok(Solution::from_selection(
        problem,
        &selected,
        d,
        Method::Exact,
        true,
    ))
}
