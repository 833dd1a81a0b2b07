//! Transition costs between rows and their lifts to sets.
//!
//! Unreachable targets cost `f64::INFINITY`; no finite sentinel is used.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::FeasibilityGraph;
use crate::schema::EncodedMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CostKind {
    /// Euclidean distance between encoded rows.
    #[default]
    #[serde(rename = "l2")]
    L2,
    /// Minimum total edge weight along a directed path.
    #[serde(rename = "path", alias = "shortest_path_weight")]
    ShortestPathWeight,
    /// Minimum number of edges along a directed path.
    #[serde(rename = "hops", alias = "hop_count")]
    HopCount,
}

impl CostKind {
    pub fn needs_graph(self) -> bool {
        !matches!(self, CostKind::L2)
    }
}

impl fmt::Display for CostKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostKind::L2 => "l2",
            CostKind::ShortestPathWeight => "path",
            CostKind::HopCount => "hops",
        })
    }
}

impl FromStr for CostKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(CostKind::L2),
            "path" | "shortest_path_weight" => Ok(CostKind::ShortestPathWeight),
            "hops" | "hop_count" => Ok(CostKind::HopCount),
            other => Err(Error::usage(format!(
                "unknown cost kind `{other}` (l2|path|hops)"
            ))),
        }
    }
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Costs from `source` to every node. With a graph, nodes not reachable by a
/// directed path cost infinity for every kind.
fn costs_from(
    matrix: &EncodedMatrix,
    source: usize,
    kind: CostKind,
    graph: Option<&FeasibilityGraph>,
) -> Result<Vec<f64>> {
    if source >= matrix.n_rows() {
        return Err(Error::usage(format!("row {source} out of range")));
    }
    let direct = || -> Vec<f64> {
        (0..matrix.n_rows())
            .map(|v| l2(matrix.row(source), matrix.row(v)))
            .collect()
    };
    match (kind, graph) {
        (CostKind::L2, None) => Ok(direct()),
        (_, None) => Err(Error::usage(format!(
            "cost kind `{kind}` requires a feasibility graph"
        ))),
        (kind, Some(g)) => {
            if g.node_count() != matrix.n_rows() {
                return Err(Error::usage("graph and matrix disagree on node count"));
            }
            let hops = g.hop_distances(source)?;
            Ok(match kind {
                CostKind::L2 => direct()
                    .into_iter()
                    .zip(&hops)
                    .map(|(c, h)| if h.is_some() { c } else { f64::INFINITY })
                    .collect(),
                CostKind::HopCount => hops
                    .iter()
                    .map(|h| h.map_or(f64::INFINITY, |h| h as f64))
                    .collect(),
                CostKind::ShortestPathWeight => g.path_distances(source)?,
            })
        }
    }
}

pub fn pair_cost(
    matrix: &EncodedMatrix,
    a: usize,
    b: usize,
    kind: CostKind,
    graph: Option<&FeasibilityGraph>,
) -> Result<f64> {
    if b >= matrix.n_rows() {
        return Err(Error::usage(format!("row {b} out of range")));
    }
    Ok(costs_from(matrix, a, kind, graph)?[b])
}

/// `min` over `set` of the pair cost from `x`.
pub fn instance_to_set_cost(
    matrix: &EncodedMatrix,
    x: usize,
    set: &[usize],
    kind: CostKind,
    graph: Option<&FeasibilityGraph>,
) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::usage("counterfactual set is empty"));
    }
    let costs = costs_from(matrix, x, kind, graph)?;
    set.iter()
        .map(|&s| {
            costs
                .get(s)
                .copied()
                .ok_or_else(|| Error::usage(format!("row {s} out of range")))
        })
        .try_fold(f64::INFINITY, |acc, c| Ok(acc.min(c?)))
}

/// Worst instance-to-set cost over `xs`: the min-max objective value of `set`.
pub fn set_to_set_cost(
    matrix: &EncodedMatrix,
    xs: &[usize],
    set: &[usize],
    kind: CostKind,
    graph: Option<&FeasibilityGraph>,
) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::usage("factual set is empty"));
    }
    xs.iter().try_fold(0.0_f64, |acc, &x| {
        Ok(acc.max(instance_to_set_cost(matrix, x, set, kind, graph)?))
    })
}
