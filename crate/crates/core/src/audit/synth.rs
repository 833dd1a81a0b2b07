//! Synthetic one-dimensional datasets with a known component structure.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::AuditConfig;
use crate::error::{Error, Result};
use crate::schema::{AttributeKind, AttributeSchema, Constraint};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    /// Jittered chains, one per component.
    #[default]
    Chain,
    /// Three factuals and two candidates in two components.
    F1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub components: usize,
    /// Rows per component.
    pub sizes: Vec<usize>,
    /// Label-1 rows per component. Default: one per component.
    #[serde(default)]
    pub positives: Option<Vec<usize>>,
    /// Rows are assigned to groups `g0`, `g1`, ... round robin.
    #[serde(default = "one")]
    pub groups: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub template: Template,
    /// Reject components holding factuals but no candidate.
    #[serde(default = "yes")]
    pub require_coverable: bool,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl SynthSpec {
    pub fn new(sizes: Vec<usize>, seed: u64) -> Self {
        SynthSpec {
            components: sizes.len(),
            sizes,
            positives: None,
            groups: 1,
            seed,
            template: Template::Chain,
            require_coverable: true,
        }
    }

    pub fn f1() -> Self {
        SynthSpec {
            template: Template::F1,
            ..SynthSpec::new(vec![3, 2], 0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthRow {
    pub v: f64,
    pub label: u8,
    pub group: String,
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthFixture {
    pub rows: Vec<SynthRow>,
    /// Threshold at which the components come out exactly as requested.
    pub epsilon: f64,
}

impl SynthFixture {
    pub fn schema() -> Vec<AttributeSchema> {
        vec![
            AttributeSchema::new("v", AttributeKind::Continuous, Constraint::Free)
                .raw(Some([0.0, 1.0])),
        ]
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("v,label,group\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.v, r.label, r.group));
        }
        out
    }

    /// Config pointing at `data.csv` next to it.
    pub fn config(&self) -> AuditConfig {
        AuditConfig::new("data.csv", Self::schema(), "label", "group", self.epsilon)
    }

    /// Write `data.csv` and `config.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let data = dir.join("data.csv");
        std::fs::write(&data, self.csv()).map_err(|e| Error::io(&data, e))?;
        let cfg = dir.join("config.json");
        let text = serde_json::to_string_pretty(&self.config())?;
        std::fs::write(&cfg, text + "\n").map_err(|e| Error::io(&cfg, e))?;
        Ok(())
    }
}

pub fn synth_fixture(spec: &SynthSpec) -> Result<SynthFixture> {
    if spec.components == 0 || spec.sizes.len() != spec.components {
        return Err(Error::usage(format!(
            "{} component sizes given for {} components",
            spec.sizes.len(),
            spec.components
        )));
    }
    if spec.sizes.contains(&0) {
        return Err(Error::usage("component sizes must be at least 1"));
    }
    if spec.groups == 0 {
        return Err(Error::usage("at least one group is required"));
    }
    let positives = spec
        .positives
        .clone()
        .unwrap_or_else(|| vec![1; spec.components]);
    if positives.len() != spec.components {
        return Err(Error::usage("one positive count per component is required"));
    }
    for (i, (&p, &s)) in positives.iter().zip(&spec.sizes).enumerate() {
        if p > s {
            return Err(Error::usage(format!(
                "component {i}: {p} positives in {s} rows"
            )));
        }
        if spec.require_coverable && p == 0 && s > 0 {
            return Err(Error::usage(format!(
                "component {i} has factuals but no candidate"
            )));
        }
    }
    match spec.template {
        Template::F1 => f1(spec, &positives),
        Template::Chain => Ok(chain(spec, &positives)),
    }
}

fn f1(spec: &SynthSpec, positives: &[usize]) -> Result<SynthFixture> {
    if spec.sizes != [3, 2] || positives != [1, 1] || spec.groups != 1 {
        return Err(Error::usage(
            "the F1 template has two components of sizes 3 and 2",
        ));
    }
    let rows = [
        (0.0, 0, 0),
        (0.3, 0, 0),
        (0.9, 0, 1),
        (0.1, 1, 0),
        (0.8, 1, 1),
    ]
    .into_iter()
    .map(|(v, label, component)| SynthRow {
        v,
        label,
        group: "g0".into(),
        component,
    })
    .collect();
    Ok(SynthFixture {
        rows,
        epsilon: 0.35,
    })
}

/// Rows sit on a line: consecutive rows of a component are 0.4 to 0.6
/// epsilon apart, components are 2 epsilon apart, and everything fits in
/// `[0, 1]`.
fn chain(spec: &SynthSpec, positives: &[usize]) -> SynthFixture {
    let units: f64 = spec
        .sizes
        .iter()
        .map(|&s| (s - 1) as f64 * 0.6)
        .sum::<f64>()
        + 2.0 * (spec.components - 1) as f64;
    let epsilon = 1.0 / (units + 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::new();
    let mut x = 0.0;
    for (c, (&size, &pos)) in spec.sizes.iter().zip(positives).enumerate() {
        let mut labels: Vec<u8> = (0..size).map(|i| u8::from(i < pos)).collect();
        labels.shuffle(&mut rng);
        for (i, &label) in labels.iter().enumerate() {
            if i > 0 {
                x += epsilon * rng.gen_range(0.4..=0.6);
            }
            rows.push(SynthRow {
                v: (x * 1e12).round() / 1e12,
                label,
                group: String::new(),
                component: c,
            });
        }
        x += 2.0 * epsilon;
    }
    for (i, r) in rows.iter_mut().enumerate() {
        r.group = format!("g{}", i % spec.groups);
    }
    SynthFixture { rows, epsilon }
}
