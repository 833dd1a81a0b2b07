//! Density-weighted feasibility graph over encoded rows.
//!
//! An edge `i -> j` exists when moving from row `i` to row `j` respects every
//! attribute constraint and their L2 distance is at most `epsilon`. Its weight
//! is the kernel density at the midpoint times that distance.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{l2, CostKind};
use crate::density::KdeModel;
use crate::error::{Error, Result};
use crate::schema::{transition_feasible, EncodedMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub target: usize,
    /// L2 distance between the endpoints.
    pub cost: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityGraph {
    adjacency: Vec<Vec<Edge>>,
    points: Vec<f64>,
    dim: usize,
    labels: Vec<u8>,
    groups: Vec<String>,
    row_ids: Vec<usize>,
    epsilon: f64,
    bandwidth: f64,
}

impl FeasibilityGraph {
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn label(&self, node: usize) -> u8 {
        self.labels[node]
    }

    pub fn group(&self, node: usize) -> &str {
        &self.groups[node]
    }

    pub fn point(&self, node: usize) -> &[f64] {
        &self.points[node * self.dim..(node + 1) * self.dim]
    }

    /// Outgoing edges sorted by target.
    pub fn out_edges(&self, node: usize) -> &[Edge] {
        &self.adjacency[node]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, &Edge)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(s, es)| es.iter().map(move |e| (s, e)))
    }

    pub fn contains(&self, node: usize) -> bool {
        node < self.node_count()
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if self.contains(node) {
            Ok(())
        } else {
            Err(Error::usage(format!("node {node} is not in the graph")))
        }
    }

    /// BFS depth from `source` to every node; `None` when unreachable.
    pub fn hop_distances(&self, source: usize) -> Result<Vec<Option<usize>>> {
        self.check_node(source)?;
        let mut depth = vec![None; self.node_count()];
        depth[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let next = depth[u].unwrap() + 1;
            for e in &self.adjacency[u] {
                if depth[e.target].is_none() {
                    depth[e.target] = Some(next);
                    queue.push_back(e.target);
                }
            }
        }
        Ok(depth)
    }

    /// Dijkstra over edge weights; `f64::INFINITY` when unreachable.
    pub fn path_distances(&self, source: usize) -> Result<Vec<f64>> {
        self.check_node(source)?;
        let mut dist = vec![f64::INFINITY; self.node_count()];
        dist[source] = 0.0;
        let mut heap = BinaryHeap::from([State {
            cost: 0.0,
            node: source,
        }]);
        while let Some(State { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for e in &self.adjacency[node] {
                let next = cost + e.weight;
                if next < dist[e.target] {
                    dist[e.target] = next;
                    heap.push(State {
                        cost: next,
                        node: e.target,
                    });
                }
            }
        }
        Ok(dist)
    }

    /// Edge list as CSV `src,dst,cost,weight`, ordered by `(src, dst)`.
    pub fn write_edges_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["src", "dst", "cost", "weight"])?;
        for (s, e) in self.edges() {
            w.write_record([
                s.to_string(),
                e.target.to_string(),
                e.cost.to_string(),
                e.weight.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<edge csv>", e))?;
        Ok(())
    }

    pub fn header(&self) -> GraphHeader {
        GraphHeader {
            epsilon: self.epsilon,
            edge_cost: "l2".into(),
            kde_bandwidth: self.bandwidth,
            node_count: self.node_count(),
            edge_count: self.edge_count(),
            nodes: (0..self.node_count())
                .map(|i| NodeMeta {
                    id: i,
                    row_id: self.row_ids[i],
                    label: self.labels[i],
                    group: self.groups[i].clone(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMeta {
    pub id: usize,
    pub row_id: usize,
    pub label: u8,
    pub group: String,
}

/// Metadata document stored next to the edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphHeader {
    pub epsilon: f64,
    /// Base cost used for the epsilon test and the `cost` column.
    pub edge_cost: String,
    pub kde_bandwidth: f64,
    pub node_count: usize,
    pub edge_count: usize,
    pub nodes: Vec<NodeMeta>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on cost, ties on node id
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn build_graph(
    matrix: &EncodedMatrix,
    epsilon: f64,
    kde: &KdeModel,
) -> Result<FeasibilityGraph> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::usage(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = matrix.n_rows();
    if n > 0 && kde.dim() != matrix.dim() {
        return Err(Error::usage(format!(
            "KDE has dimension {}, matrix has {}",
            kde.dim(),
            matrix.dim()
        )));
    }
    let adjacency = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = matrix.row(i);
            let mut out = Vec::new();
            for j in 0..n {
                if i == j {
                    continue;
                }
                let b = matrix.row(j);
                let cost = l2(a, b);
                if cost <= epsilon && transition_feasible(a, b, &matrix.schema) {
                    let weight = kde.edge_weight(a, b, cost)?;
                    out.push(Edge {
                        target: j,
                        cost,
                        weight,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeasibilityGraph {
        adjacency,
        points: matrix.rows().flatten().copied().collect(),
        dim: matrix.dim(),
        labels: matrix.labels.clone(),
        groups: matrix.groups.clone(),
        row_ids: matrix.row_ids.clone(),
        epsilon,
        bandwidth: kde.bandwidth(),
    })
}

/// Partition of the nodes into weakly connected components.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WccIndex {
    pub component_of: Vec<usize>,
    /// Node sets in ascending order; component ids follow their minimum node.
    pub components: Vec<Vec<usize>>,
}

impl WccIndex {
    pub fn count(&self) -> usize {
        self.components.len()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

pub fn weakly_connected_components(graph: &FeasibilityGraph) -> WccIndex {
    let n = graph.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    for (s, e) in graph.edges() {
        let (a, b) = (find(&mut parent, s), find(&mut parent, e.target));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut id_of_root = BTreeMap::new();
    let mut component_of = vec![0; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for (v, slot) in component_of.iter_mut().enumerate() {
        let root = find(&mut parent, v);
        let id = *id_of_root.entry(root).or_insert_with(|| {
            components.push(Vec::new());
            components.len() - 1
        });
        *slot = id;
        components[id].push(v);
    }
    WccIndex {
        component_of,
        components,
    }
}

/// Opposite-class nodes reachable from a factual, with their costs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilitySet {
    pub factual: usize,
    pub reachable: BTreeMap<usize, f64>,
}

impl FeasibilitySet {
    pub fn is_empty(&self) -> bool {
        self.reachable.is_empty()
    }
}

pub fn feasibility_set(
    graph: &FeasibilityGraph,
    x: usize,
    kind: CostKind,
) -> Result<FeasibilitySet> {
    let hops = graph.hop_distances(x)?;
    let path = match kind {
        CostKind::ShortestPathWeight => Some(graph.path_distances(x)?),
        _ => None,
    };
    let label = graph.label(x);
    let reachable = hops
        .iter()
        .enumerate()
        .filter(|&(v, h)| h.is_some() && v != x && graph.label(v) != label)
        .map(|(v, h)| {
            let cost = match kind {
                CostKind::L2 => l2(graph.point(x), graph.point(v)),
                CostKind::HopCount => h.unwrap() as f64,
                CostKind::ShortestPathWeight => path.as_ref().unwrap()[v],
            };
            (v, cost)
        })
        .collect();
    Ok(FeasibilitySet {
        factual: x,
        reachable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub edges: usize,
    pub components: usize,
    pub singletons: usize,
    pub largest_fraction: f64,
}

/// Connectivity statistics of a fresh graph per threshold.
pub fn epsilon_sweep(
    matrix: &EncodedMatrix,
    epsilons: &[f64],
    kde: &KdeModel,
) -> Result<Vec<SweepRecord>> {
    if epsilons.is_empty() {
        return Err(Error::usage("epsilon list is empty"));
    }
    if epsilons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("epsilon list must be strictly ascending"));
    }
    epsilons
        .iter()
        .map(|&eps| {
            let graph = build_graph(matrix, eps, kde)?;
            let wcc = weakly_connected_components(&graph);
            let n = graph.node_count();
            let largest = wcc.components.iter().map(Vec::len).max().unwrap_or(0);
            Ok(SweepRecord {
                epsilon: eps,
                edges: graph.edge_count(),
                components: wcc.count(),
                singletons: wcc.components.iter().filter(|c| c.len() == 1).count(),
                largest_fraction: if n == 0 {
                    0.0
                } else {
                    largest as f64 / n as f64
                },
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: io::Write>(records: &[SweepRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "epsilon",
        "edges",
        "components",
        "singletons",
        "largest_fraction",
    ])?;
    for r in records {
        w.write_record([
            r.epsilon.to_string(),
            r.edges.to_string(),
            r.components.to_string(),
            r.singletons.to_string(),
            r.largest_fraction.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}
