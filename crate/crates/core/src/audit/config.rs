use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost::CostKind;
use crate::error::{Error, Result};
use crate::schema::{AttributeSchema, ColumnRoles};
use crate::solver::{Combine, FirstCenter, Method, SolverOptions, DEFAULT_EXACT_CAP};

/// Which rows of a group are audited as factuals.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subset {
    /// Predicted negative.
    #[default]
    Negatives,
    /// Predicted negative with a positive ground truth.
    FalseNegatives,
}

fn default_cap() -> usize {
    DEFAULT_EXACT_CAP
}

fn default_method() -> Method {
    Method::Exact
}

fn default_levels() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

fn default_d_min() -> f64 {
    0.1
}

fn default_samples() -> usize {
    4
}

fn default_12() -> usize {
    12
}

fn default_25() -> usize {
    25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Budgets for kAUC. Default: `samples` nice values over `[1, k0]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_values: Option<Vec<usize>>,
    /// Cost bounds for dAUC. Default: `samples` nice values over
    /// `[d_min, max_possible_cost]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_values: Option<Vec<f64>>,
    #[serde(default = "default_levels")]
    pub c_levels: Vec<f64>,
    /// Lower end of the kAUC cost axis.
    #[serde(default = "default_d_min")]
    pub d_min: f64,
    /// Upper end of the kAUC cost axis. Default: largest pairwise L2
    /// distance, or largest finite graph cost for path and hop costs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_possible_cost: Option<f64>,
    /// Upper end of the budget axis. Default: the group's k0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_12")]
    pub k_auc_steps: usize,
    #[serde(default = "default_12")]
    pub d_auc_steps: usize,
    #[serde(default = "default_25")]
    pub c_auc_steps: usize,
    /// Attributes for change frequencies. Default: all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acf_attributes: Option<Vec<String>>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            k_values: None,
            d_values: None,
            c_levels: default_levels(),
            d_min: default_d_min(),
            max_possible_cost: None,
            k_max: None,
            samples: default_samples(),
            k_auc_steps: 12,
            d_auc_steps: 12,
            c_auc_steps: 25,
            acf_attributes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// CSV file; relative paths resolve against the config file.
    pub dataset: PathBuf,
    pub attributes: Vec<AttributeSchema>,
    pub label_column: String,
    pub group_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_column: Option<String>,
    #[serde(default)]
    pub subset: Subset,
    pub epsilon: f64,
    #[serde(default)]
    pub cost: CostKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kde_bandwidth: Option<f64>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_cap")]
    pub exact_cap: usize,
    #[serde(default)]
    pub dp_combine: Combine,
    /// Permutes the greedy first center; absent means lowest id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

impl AuditConfig {
    /// Minimal config with defaults everywhere else.
    pub fn new(
        dataset: impl Into<PathBuf>,
        attributes: Vec<AttributeSchema>,
        label_column: impl Into<String>,
        group_column: impl Into<String>,
        epsilon: f64,
    ) -> Self {
        AuditConfig {
            dataset: dataset.into(),
            attributes,
            label_column: label_column.into(),
            group_column: group_column.into(),
            truth_column: None,
            subset: Subset::Negatives,
            epsilon,
            cost: CostKind::L2,
            kde_bandwidth: None,
            method: Method::Exact,
            exact_cap: DEFAULT_EXACT_CAP,
            dp_combine: Combine::Max,
            seed: None,
            out: None,
            metrics: MetricsConfig::default(),
        }
    }

    /// Read a JSON config; a relative `dataset` is taken relative to the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: AuditConfig = serde_json::from_str(&text)?;
        if cfg.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.dataset = dir.join(&cfg.dataset);
            }
        }
        Ok(cfg)
    }

    pub fn roles(&self) -> ColumnRoles {
        ColumnRoles {
            label: self.label_column.clone(),
            group: self.group_column.clone(),
            truth: self.truth_column.clone(),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            method: self.method,
            exact_cap: self.exact_cap,
            first_center: self.seed.map_or(FirstCenter::Every, FirstCenter::Seeded),
        }
    }

    /// Checks that need no I/O.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::usage(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let Some(h) = self.kde_bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::usage(format!(
                    "kde bandwidth must be positive, got {h}"
                )));
            }
        }
        if self.attributes.is_empty() {
            return Err(Error::usage("no attributes declared"));
        }
        if self.subset == Subset::FalseNegatives && self.truth_column.is_none() {
            return Err(Error::usage(
                "auditing false negatives needs a truth column",
            ));
        }
        let m = &self.metrics;
        if m.samples == 0 {
            return Err(Error::usage("metrics.samples must be positive"));
        }
        if m.k_auc_steps < 2 || m.d_auc_steps < 2 || m.c_auc_steps < 2 {
            return Err(Error::usage("metric step counts must be at least 2"));
        }
        if !(m.d_min.is_finite() && m.d_min > 0.0) {
            return Err(Error::usage("metrics.d_min must be positive"));
        }
        if let Some(top) = m.max_possible_cost {
            if top.is_nan() || top <= m.d_min {
                return Err(Error::usage("metrics.max_possible_cost must exceed d_min"));
            }
        }
        if m.c_levels.iter().any(|c| !(*c > 0.0 && *c <= 1.0)) {
            return Err(Error::usage("coverage levels must lie in (0, 1]"));
        }
        if m.k_values.as_ref().is_some_and(|ks| ks.contains(&0)) || m.k_max == Some(0) {
            return Err(Error::usage("budgets must be at least 1"));
        }
        if m.d_values
            .as_ref()
            .is_some_and(|ds| ds.iter().any(|d| d.is_nan() || *d <= 0.0))
        {
            return Err(Error::usage("cost bounds must be positive"));
        }
        Ok(())
    }
}
