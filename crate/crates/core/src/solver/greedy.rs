use fixedbitset::FixedBitSet;

use super::{check_bound, check_budget, Method, SelectionProblem, Solution};
use crate::error::Result;
use crate::graph::WccIndex;

/// Best unselected candidate: largest marginal coverage, lowest id on ties.
fn best_pick(
    cover: &[FixedBitSet],
    taken: &[bool],
    covered: &FixedBitSet,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (j, set) in cover.iter().enumerate() {
        if taken[j] {
            continue;
        }
        let gain = set.difference_count(covered);
        if gain > 0 && best.is_none_or(|(_, g)| gain > g) {
            best = Some((j, gain));
        }
    }
    best
}

/// Greedy maximum coverage under cost bound `d`.
///
/// Adds the candidate with the largest marginal coverage until `k` picks,
/// full coverage, or no candidate adds anything. Covers at least
/// `(1 - 1/e)` of the optimum.
pub fn greedy_max_coverage(problem: &SelectionProblem, k: usize, d: f64) -> Result<Solution> {
    check_budget(k)?;
    check_bound(d)?;
    let cover = problem.cover_sets(d);
    let n = problem.n_factuals();
    let mut taken = vec![false; cover.len()];
    let mut covered = FixedBitSet::with_capacity(n);
    let mut selected = Vec::new();
    let mut gains = Vec::new();
    while selected.len() < k && covered.count_ones(..) < n {
        let Some((j, gain)) = best_pick(&cover, &taken, &covered) else {
            break;
        };
        taken[j] = true;
        covered.union_with(&cover[j]);
        selected.push(j);
        gains.push(gain);
    }
    let mut sol = Solution::from_selection(problem, &selected, d, Method::Greedy, false);
    sol.gains = gains;
    Ok(sol)
}

struct ComponentState {
    problem: SelectionProblem,
    cover: Vec<FixedBitSet>,
    taken: Vec<bool>,
    covered: FixedBitSet,
    picks: Vec<usize>,
    proposal: Option<(usize, usize)>,
}

impl ComponentState {
    fn propose(&mut self) {
        self.proposal = best_pick(&self.cover, &self.taken, &self.covered);
    }
}

/// Greedy maximum coverage run component by component: every component
/// proposes its next greedy pick, the best proposal overall is taken, and
/// only that component proposes again. Ties go to the lowest candidate id,
/// so the picks match [`greedy_max_coverage`] on the whole problem.
pub fn greedy_max_coverage_interleaved(
    problem: &SelectionProblem,
    wcc: &WccIndex,
    k: usize,
    d: f64,
) -> Result<Solution> {
    check_budget(k)?;
    check_bound(d)?;
    let mut states: Vec<ComponentState> = problem
        .by_component(wcc)
        .into_iter()
        .map(|(_, sub)| {
            let cover = sub.cover_sets(d);
            let n = sub.n_factuals();
            let mut state = ComponentState {
                taken: vec![false; cover.len()],
                cover,
                covered: FixedBitSet::with_capacity(n),
                problem: sub,
                picks: Vec::new(),
                proposal: None,
            };
            state.propose();
            state
        })
        .collect();

    let total = problem.n_factuals();
    let mut covered = 0;
    let mut order = Vec::new();
    let mut gains = Vec::new();
    while order.len() < k && covered < total {
        let best = states
            .iter()
            .enumerate()
            .filter_map(|(s, st)| {
                st.proposal
                    .map(|(j, g)| (s, st.problem.candidates()[j], j, g))
            })
            .min_by(|a, b| b.3.cmp(&a.3).then(a.1.cmp(&b.1)));
        let Some((s, id, j, gain)) = best else {
            break;
        };
        let st = &mut states[s];
        st.taken[j] = true;
        st.covered.union_with(&st.cover[j]);
        st.picks.push(j);
        st.propose();
        covered += gain;
        order.push(id);
        gains.push(gain);
    }

    let parts: Vec<Solution> = states
        .iter()
        .map(|st| Solution::from_selection(&st.problem, &st.picks, d, Method::Greedy, false))
        .collect();
    let mut sol = Solution::merge(&parts, Method::Greedy);
    sol.optimal = false;
    sol.selected = order;
    sol.gains = gains;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::tests::{f1, f1_wcc};
    use crate::Error;

    #[test]
    fn f1_single_pick() {
        let sol = greedy_max_coverage(&f1(), 1, 0.3).unwrap();
        assert_eq!(sol.selected, vec![3]);
        assert_eq!(sol.coverage, 2);
        assert_eq!(sol.gains, vec![2]);
    }

    #[test]
    fn f1_two_picks_assign_cheapest() {
        let sol = greedy_max_coverage(&f1(), 2, 0.3).unwrap();
        assert_eq!(sol.selected, vec![3, 4]);
        assert_eq!(sol.coverage, 3);
        let got: Vec<(usize, usize)> = sol
            .assignment
            .iter()
            .map(|(f, a)| (*f, a.candidate))
            .collect();
        assert_eq!(got, vec![(0, 3), (1, 3), (2, 4)]);
        assert!((sol.assignment[&0].cost - 0.1).abs() < 1e-12);
        assert!((sol.assignment[&1].cost - 0.2).abs() < 1e-12);
        assert!((sol.assignment[&2].cost - 0.1).abs() < 1e-12);
    }

    #[test]
    fn bound_below_every_cost() {
        let sol = greedy_max_coverage(&f1(), 2, 0.05).unwrap();
        assert!(sol.selected.is_empty());
        assert_eq!(sol.coverage, 0);
    }

    #[test]
    fn no_candidates_is_empty_solution() {
        let p = SelectionProblem::new(vec![0, 1], vec![], vec![vec![], vec![]]).unwrap();
        let sol = greedy_max_coverage(&p, 3, 1.0).unwrap();
        assert_eq!(sol.coverage, 0);
    }

    #[test]
    fn invalid_arguments() {
        assert!(matches!(
            greedy_max_coverage(&f1(), 0, 0.3),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            greedy_max_coverage(&f1(), 1, 0.0),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn ties_prefer_lowest_id() {
        let p = SelectionProblem::new(vec![0], vec![1, 2], vec![vec![0.5, 0.5]]).unwrap();
        assert_eq!(greedy_max_coverage(&p, 1, 1.0).unwrap().selected, vec![1]);
    }

    #[test]
    fn interleaved_matches_global_on_f1() {
        for k in 1..=3 {
            let g = greedy_max_coverage(&f1(), k, 0.3).unwrap();
            let l = greedy_max_coverage_interleaved(&f1(), &f1_wcc(), k, 0.3).unwrap();
            assert_eq!(g.selected, l.selected);
            assert_eq!(g.gains, l.gains);
            assert_eq!(g.assignment, l.assignment);
        }
    }
}
