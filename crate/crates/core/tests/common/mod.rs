//! Instance generators and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use groupcf::cost::CostKind;
use groupcf::density::KdeModel;
use groupcf::graph::{build_graph, weakly_connected_components, FeasibilityGraph, WccIndex};
use groupcf::schema::{AttributeKind, AttributeSchema, Constraint, EncodedMatrix};
use groupcf::solver::SelectionProblem;
use rand::Rng;

pub struct Instance {
    pub matrix: EncodedMatrix,
    pub graph: FeasibilityGraph,
    pub wcc: WccIndex,
    pub problem: SelectionProblem,
}

pub fn plane_schema(constraints: [Constraint; 2]) -> Vec<AttributeSchema> {
    vec![
        AttributeSchema::new("a", AttributeKind::Continuous, constraints[0]),
        AttributeSchema::new("b", AttributeKind::Continuous, constraints[1]),
    ]
}

pub fn instance_from_points(
    points: Vec<[f64; 2]>,
    labels: Vec<u8>,
    schema: Vec<AttributeSchema>,
    eps: f64,
) -> Instance {
    let n = points.len();
    let matrix = EncodedMatrix::from_rows(
        schema,
        points.iter().map(|p| p.to_vec()).collect(),
        labels.clone(),
        vec!["g".into(); n],
    )
    .unwrap();
    let kde = KdeModel::from_matrix(&matrix, Some(0.3)).unwrap();
    let graph = build_graph(&matrix, eps, &kde).unwrap();
    let wcc = weakly_connected_components(&graph);
    let factuals: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
    let problem = SelectionProblem::from_graph(&graph, &factuals, CostKind::L2).unwrap();
    Instance {
        matrix,
        graph,
        wcc,
        problem,
    }
}

/// Uniform points in the unit square: `nf` factuals then `nc` candidates.
pub fn random_instance<R: Rng>(rng: &mut R, nf: usize, nc: usize, eps: f64) -> Instance {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..nf + nc {
        points.push([rng.gen::<f64>(), rng.gen::<f64>()]);
        labels.push(u8::from(i >= nf));
    }
    instance_from_points(points, labels, plane_schema([Constraint::Free; 2]), eps)
}

/// `clusters` well separated blobs along the first axis, each with some
/// factuals and candidates. At epsilon 0.15 no edge crosses blobs.
pub fn clustered_instance<R: Rng>(
    rng: &mut R,
    clusters: usize,
    max_f: usize,
    max_c: usize,
) -> Instance {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for c in 0..clusters {
        let cx = 0.08 + c as f64 * (0.84 / (clusters.max(2) - 1) as f64);
        let cy = rng.gen_range(0.2..0.8);
        let nf = rng.gen_range(1..=max_f);
        let nc = rng.gen_range(1..=max_c);
        for i in 0..nf + nc {
            points.push([
                (cx + rng.gen_range(-0.08..0.08f64)).clamp(0.0, 1.0),
                (cy + rng.gen_range(-0.08..0.08f64)).clamp(0.0, 1.0),
            ]);
            labels.push(u8::from(i >= nf));
        }
    }
    instance_from_points(points, labels, plane_schema([Constraint::Free; 2]), 0.15)
}

fn subsets(n: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..(1u32 << n))
        .filter(move |m| m.count_ones() as usize <= k)
        .map(move |m| (0..n).filter(|&j| m & (1 << j) != 0).collect())
}

fn cost_row(p: &SelectionProblem, i: usize) -> Vec<f64> {
    (0..p.n_candidates()).map(|j| p.cost(i, j)).collect()
}

/// Best coverage with at most `k` candidates within `d`, and the smallest
/// subset size achieving it, by enumerating every subset.
pub fn brute_max_coverage(p: &SelectionProblem, k: usize, d: f64) -> (usize, usize) {
    let rows: Vec<Vec<f64>> = (0..p.n_factuals()).map(|i| cost_row(p, i)).collect();
    let mut best = (0, 0);
    for s in subsets(p.n_candidates(), k) {
        let cov = rows
            .iter()
            .filter(|r| s.iter().any(|&j| r[j].is_finite() && r[j] <= d))
            .count();
        if cov > best.0 || (cov == best.0 && s.len() < best.1) {
            best = (cov, s.len());
        }
    }
    best
}

/// Smallest achievable `target`-th best assignment cost over subsets of at
/// most `k` candidates; `None` when no subset reaches `target` factuals.
pub fn brute_kcenter(p: &SelectionProblem, k: usize, target: usize) -> Option<f64> {
    let rows: Vec<Vec<f64>> = (0..p.n_factuals()).map(|i| cost_row(p, i)).collect();
    let mut best: Option<f64> = None;
    for s in subsets(p.n_candidates(), k) {
        if s.is_empty() {
            continue;
        }
        let mut costs: Vec<f64> = rows
            .iter()
            .map(|r| s.iter().map(|&j| r[j]).fold(f64::INFINITY, f64::min))
            .filter(|c| c.is_finite())
            .collect();
        if costs.len() < target {
            continue;
        }
        costs.sort_by(f64::total_cmp);
        let v = costs[target - 1];
        if best.is_none_or(|b| v < b) {
            best = Some(v);
        }
    }
    best
}

/// Directed reachability by depth-first search over the edge list.
pub fn reachable(graph: &FeasibilityGraph, src: usize) -> Vec<bool> {
    let mut seen = vec![false; graph.node_count()];
    let mut stack = vec![src];
    seen[src] = true;
    while let Some(v) = stack.pop() {
        for e in graph.out_edges(v) {
            if !seen[e.target] {
                seen[e.target] = true;
                stack.push(e.target);
            }
        }
    }
    seen
}

/// Undirected components by repeated flooding; ids follow the smallest member.
pub fn components(graph: &FeasibilityGraph) -> Vec<usize> {
    let n = graph.node_count();
    let mut adj = vec![Vec::new(); n];
    for (s, e) in graph.edges() {
        adj[s].push(e.target);
        adj[e.target].push(s);
    }
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = next;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = next;
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    comp
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}
