mod common;

use std::collections::BTreeSet;

use common::*;
use groupcf::density::{scott_bandwidth, KdeModel};
use groupcf::graph::{build_graph, weakly_connected_components};
use groupcf::metrics::nice_grid;
use groupcf::schema::Constraint;
use groupcf::solver::{
    coverage_target, exact_kcenter, exact_max_coverage, greedy_kcenter, greedy_max_coverage,
    FirstCenter, SelectionProblem, Solution,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, nf: usize, nc: usize, eps: f64) -> Instance {
    random_instance(&mut ChaCha8Rng::seed_from_u64(seed), nf, nc, eps)
}

fn check_solution(
    p: &SelectionProblem,
    sol: &Solution,
    k: usize,
    d: f64,
) -> Result<(), TestCaseError> {
    let selected: BTreeSet<usize> = sol.selected.iter().copied().collect();
    prop_assert_eq!(selected.len(), sol.selected.len());
    prop_assert!(sol.selected.len() <= k);
    prop_assert_eq!(sol.coverage, sol.assignment.len());
    for (&f, a) in &sol.assignment {
        prop_assert!(selected.contains(&a.candidate));
        prop_assert!(a.cost.is_finite() && a.cost <= d);
        prop_assert_eq!(Some(a.cost), p.cost_between(f, a.candidate));
        for &s in &selected {
            if let Some(c) = p.cost_between(f, s) {
                prop_assert!(a.cost <= c);
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn greedy_gains_never_grow(seed in any::<u64>(), nf in 1usize..20, nc in 1usize..12, k in 1usize..6, d in 0.05f64..1.0) {
        let inst = instance(seed, nf, nc, 0.6);
        let sol = greedy_max_coverage(&inst.problem, k, d).unwrap();
        prop_assert!(sol.gains.windows(2).all(|w| w[0] >= w[1]));
        prop_assert_eq!(sol.gains.iter().sum::<usize>(), sol.coverage);
        check_solution(&inst.problem, &sol, k, d)?;
    }

    #[test]
    fn exact_covers_at_least_greedy(seed in any::<u64>(), nf in 1usize..14, nc in 1usize..9, k in 1usize..5, d in 0.05f64..1.0) {
        let inst = instance(seed, nf, nc, 0.6);
        let g = greedy_max_coverage(&inst.problem, k, d).unwrap();
        let e = exact_max_coverage(&inst.problem, k, d, 20).unwrap();
        prop_assert!(e.coverage >= g.coverage);
        check_solution(&inst.problem, &e, k, d)?;
    }

    #[test]
    fn kcenter_meets_target(seed in any::<u64>(), nf in 1usize..12, nc in 1usize..8, k in 1usize..4, c in 0.05f64..=1.0) {
        let inst = instance(seed, nf, nc, 0.9);
        let p = &inst.problem;
        let target = coverage_target(c, p.n_factuals()).unwrap();
        match (exact_kcenter(p, k, c, 20), greedy_kcenter(p, k, c, FirstCenter::Every)) {
            (Ok(e), Ok(g)) => {
                prop_assert!(e.coverage >= target && g.coverage >= target);
                prop_assert!(e.max_cost <= g.max_cost);
                check_solution(p, &e, k, e.max_cost)?;
                check_solution(p, &g, k, g.max_cost)?;
            }
            (Err(_), _) => {}
            (Ok(e), Err(err)) => prop_assert!(false, "exact radius {} but greedy failed: {}", e.max_cost, err),
        }
    }

    #[test]
    fn coverage_target_is_tight(c in 0.001f64..=1.0, n in 1usize..500) {
        let t = coverage_target(c, n).unwrap();
        prop_assert!(t as f64 >= c * n as f64 - 1e-6);
        prop_assert!(t == 0 || ((t - 1) as f64) < c * n as f64);
        prop_assert!(t <= n);
    }

    #[test]
    fn wcc_partitions_nodes(seed in any::<u64>(), nf in 1usize..15, nc in 1usize..10, eps in 0.05f64..0.5) {
        let inst = instance(seed, nf, nc, eps);
        let mut seen = vec![0; nf + nc];
        for (id, comp) in inst.wcc.components.iter().enumerate() {
            for &v in comp {
                seen[v] += 1;
                prop_assert_eq!(inst.wcc.component_of[v], id);
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        let oracle = components(&inst.graph);
        for (s, e) in inst.graph.edges() {
            prop_assert_eq!(inst.wcc.component_of[s], inst.wcc.component_of[e.target]);
            prop_assert_eq!(oracle[s], oracle[e.target]);
        }
        prop_assert_eq!(inst.wcc.count(), oracle.iter().collect::<BTreeSet<_>>().len());
    }

    #[test]
    fn edges_grow_with_epsilon(seed in any::<u64>(), n in 2usize..20, e1 in 0.05f64..0.5, extra in 0.0f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = {
            use rand::Rng;
            let pts = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
            let labels = (0..n).map(|_| rng.gen_range(0..2)).collect();
            instance_from_points(pts, labels, plane_schema([Constraint::IncreaseOnly, Constraint::Free]), e1)
        };
        let kde = KdeModel::from_matrix(&inst.matrix, Some(0.3)).unwrap();
        let wide = build_graph(&inst.matrix, e1 + extra, &kde).unwrap();
        let a: BTreeSet<_> = inst.graph.edges().map(|(s, e)| (s, e.target)).collect();
        let b: BTreeSet<_> = wide.edges().map(|(s, e)| (s, e.target)).collect();
        prop_assert!(a.is_subset(&b));
        prop_assert!(weakly_connected_components(&wide).count() <= inst.wcc.count());
        for (_, e) in inst.graph.edges() {
            prop_assert!(e.weight >= 0.0 && e.cost <= e1);
        }
    }

    #[test]
    fn kde_is_symmetric_about_a_single_point(p in 0.0f64..1.0, x in -2.0f64..3.0, h in 0.01f64..2.0) {
        let kde = KdeModel::new(vec![p], 1, h).unwrap();
        let a = kde.density_at(&[x]).unwrap();
        let b = kde.density_at(&[2.0 * p - x]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        prop_assert!(a >= 0.0);
    }

    #[test]
    fn scott_ignores_row_order(mut pts in prop::collection::vec(0.0f64..1.0, 4..40), rot in 0usize..40) {
        if pts.len() % 2 == 1 {
            pts.pop();
        }
        let h = scott_bandwidth(&pts, 2).unwrap();
        let rows = pts.len() / 2;
        let mut rotated = pts.clone();
        rotated.rotate_left(2 * (rot % rows));
        prop_assert!((scott_bandwidth(&rotated, 2).unwrap() - h).abs() <= 1e-12);
        prop_assert!(h > 0.0);
    }

    #[test]
    fn grid_spans_the_range(min in -5.0f64..5.0, width in 0.01f64..50.0, n in 2usize..30, integer in any::<bool>()) {
        let (min, max) = if integer { (min.round(), min.round() + width.ceil()) } else { (min, min + width) };
        let g = nice_grid(min, max, n, integer).unwrap();
        prop_assert!((g[0] - min).abs() <= 1e-9);
        prop_assert_eq!(*g.last().unwrap(), max);
        prop_assert!(g.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(g.len() <= 2 * n + 1);
        if integer {
            prop_assert!(g.iter().all(|x| x.fract() == 0.0));
        }
    }
}
