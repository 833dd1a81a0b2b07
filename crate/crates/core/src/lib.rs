//! Group counterfactual explanations for fairness auditing.
//!
//! The pipeline runs in four steps:
//!
//! 1. [`schema`] loads a tabular dataset carrying model predictions and a
//!    protected-group column, and encodes every attribute into `[0, 1]`.
//! 2. [`graph`] links rows whose transition is feasible (respects the
//!    per-attribute constraints) and cheap (L2 distance at most `epsilon`),
//!    weighting each edge by kernel density at its midpoint ([`density`]).
//! 3. [`solver`] picks small sets of counterfactuals for a group of factuals,
//!    either maximizing coverage under a cost bound or minimizing the
//!    worst-case cost under a coverage requirement.
//! 4. [`metrics`] turns those solutions into burden measures per group and
//!    per weakly connected component: minimum resources, AUC summaries,
//!    saturation points and attribute change frequencies.
//!
//! [`audit`] wires the steps together for the command-line tool.

pub mod audit;
pub mod cost;
pub mod density;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod schema;
pub mod solver;

pub use error::{Error, Result};
