use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{AuditConfig, Subset};
use crate::density::KdeModel;
use crate::error::{Error, Result};
use crate::graph::{
    build_graph, epsilon_sweep, weakly_connected_components, write_sweep_csv, FeasibilityGraph,
    SweepRecord, WccIndex,
};
use crate::metrics::{
    acf, c_auc, coverable_only, d_auc, k_auc, max_possible_cost, min_resources, nice_grid,
    AcfReport, AucResult, ComponentResources, Route,
};
use crate::schema::{encode, load_csv, AttributeSchema, EncodedMatrix};
use crate::solver::{Method, SelectionProblem, Solution};

/// Loaded, encoded and linked dataset.
pub struct Pipeline {
    pub matrix: EncodedMatrix,
    pub kde: KdeModel,
    pub graph: FeasibilityGraph,
    pub wcc: WccIndex,
}

/// Load and encode the configured dataset.
pub fn load_matrix(config: &AuditConfig) -> Result<EncodedMatrix> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let table = load_csv(&config.dataset, config.attributes.clone(), &config.roles())
        .map_err(|e| e.in_stage("load"))?;
    encode(&table).map_err(|e| e.in_stage("encode"))
}

pub fn prepare(config: &AuditConfig) -> Result<Pipeline> {
    let matrix = load_matrix(config)?;
    let kde =
        KdeModel::from_matrix(&matrix, config.kde_bandwidth).map_err(|e| e.in_stage("density"))?;
    let graph = build_graph(&matrix, config.epsilon, &kde).map_err(|e| e.in_stage("graph"))?;
    let wcc = weakly_connected_components(&graph);
    Ok(Pipeline {
        matrix,
        kde,
        graph,
        wcc,
    })
}

impl Pipeline {
    /// Audited rows: predicted negatives (optionally only false negatives),
    /// restricted to `group` when given.
    pub fn factuals(&self, group: Option<&str>, subset: Subset) -> Vec<usize> {
        (0..self.matrix.n_rows())
            .filter(|&i| self.matrix.labels[i] == 0)
            .filter(|&i| subset == Subset::Negatives || self.matrix.truths[i] == Some(1))
            .filter(|&i| group.is_none_or(|g| self.matrix.groups[i] == g))
            .collect()
    }

    pub fn problem(&self, factuals: &[usize], config: &AuditConfig) -> Result<SelectionProblem> {
        SelectionProblem::from_graph(&self.graph, factuals, config.cost)
            .map_err(|e| e.in_stage("solve"))
    }

    pub fn write_graph(&self, dir: &Path) -> Result<()> {
        let edges = dir.join("graph.csv");
        let file = std::fs::File::create(&edges).map_err(|e| Error::io(&edges, e))?;
        self.graph.write_edges_csv(file)?;
        write_json(&dir.join("graph.json"), &self.graph.header())
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AucSummary {
    pub value: f64,
    pub raw_area: f64,
    pub optimal_area: f64,
    pub saturation_point: f64,
    pub extremum: f64,
    pub skipped: Vec<f64>,
    pub routes: Vec<Route>,
    pub curve: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricEntry {
    /// The fixed parameter: `k` for kAUC, `d` for dAUC, `c` for cAUC.
    pub at: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<AucSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupReport {
    pub audited: usize,
    pub coverable: usize,
    /// Audited rows with no reachable candidate, by row id.
    pub excluded: Vec<usize>,
    pub m: usize,
    pub k0: usize,
    pub d0: f64,
    pub per_wcc: Vec<ComponentResources>,
    /// Row ids of the selection realizing `d0` with `k0` counterfactuals.
    pub full_cover_selection: Vec<usize>,
    pub k_auc: Vec<MetricEntry>,
    pub d_auc: Vec<MetricEntry>,
    pub c_auc: Vec<MetricEntry>,
    pub acf: Vec<AcfReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub values: BTreeMap<String, Option<f64>>,
    /// Group with the heaviest burden on this metric.
    pub most_burdened: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
    pub epsilon: f64,
    pub kde_bandwidth: f64,
    pub components: usize,
    pub singletons: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub kde_bandwidth: f64,
    pub max_possible_cost: f64,
    pub encoded_columns: Vec<String>,
    pub encoded_schema: Vec<AttributeSchema>,
    pub tie_break: &'static str,
    pub coverage_basis: &'static str,
    pub normalization: &'static str,
    pub density_space: &'static str,
    /// Reported costs are raw; divide by `max_possible_cost` to normalize.
    pub cost_scale: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: AuditConfig,
    pub derived: Derived,
    pub graph: GraphSummary,
    pub groups: BTreeMap<String, GroupReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Vec<ComparisonRow>>,
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn summarize(result: &AucResult, curve: String) -> AucSummary {
    let mut routes = result.routes.clone();
    routes.dedup();
    AucSummary {
        value: result.value,
        raw_area: result.raw_area,
        optimal_area: result.optimal_area,
        saturation_point: result.saturation_point,
        extremum: result.extremum,
        skipped: result.skipped.clone(),
        routes,
        curve,
    }
}

/// Four (or `samples`) nice integer values over `[1, top]`.
fn budget_samples(top: usize, samples: usize) -> Result<Vec<usize>> {
    if top <= 1 || samples < 2 {
        return Ok(vec![top.max(1)]);
    }
    Ok(nice_grid(1.0, top as f64, samples, true)?
        .into_iter()
        .map(|k| k as usize)
        .collect())
}

struct GroupRun<'a> {
    config: &'a AuditConfig,
    pipeline: &'a Pipeline,
    curves: PathBuf,
    max_cost: f64,
}

impl GroupRun<'_> {
    fn entry(&self, name: String, at: f64, res: Result<AucResult>) -> Result<MetricEntry> {
        match res {
            Ok(r) => {
                let file = format!("{name}.csv");
                let path = self.curves.join(&file);
                let out = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
                r.curve.write_csv(out)?;
                Ok(MetricEntry {
                    at,
                    result: Some(summarize(&r, format!("curves/{file}"))),
                    error: None,
                })
            }
            Err(e @ (Error::Infeasible { .. } | Error::Capacity { .. })) => Ok(MetricEntry {
                at,
                result: None,
                error: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        }
    }

    fn run(&self, group: &str) -> Result<GroupReport> {
        let cfg = self.config;
        let p = self.pipeline;
        let opts = cfg.solver_options();
        let mc = &cfg.metrics;
        let factuals = p.factuals(Some(group), cfg.subset);
        let problem = p.problem(&factuals, cfg)?;
        let res = min_resources(&problem, &p.wcc, &opts).map_err(|e| e.in_stage("metrics"))?;
        let row_id = |v: usize| p.matrix.row_ids[v];
        let coverable = coverable_only(&problem);

        let full_cover = full_cover_solution(&coverable, &p.wcc, &res.per_wcc, &opts)?;
        let mut report = GroupReport {
            audited: factuals.len(),
            coverable: coverable.n_factuals(),
            excluded: res.excluded.iter().map(|&v| row_id(v)).collect(),
            m: res.m,
            k0: res.k0,
            d0: res.d0,
            per_wcc: res.per_wcc.clone(),
            full_cover_selection: full_cover.selected.iter().map(|&v| row_id(v)).collect(),
            k_auc: Vec::new(),
            d_auc: Vec::new(),
            c_auc: Vec::new(),
            acf: Vec::new(),
        };
        if coverable.n_factuals() == 0 {
            return Ok(report);
        }

        let k_top = mc.k_max.unwrap_or(res.k0).max(1);
        let tag = file_safe(group);
        let k_values = match &mc.k_values {
            Some(ks) => ks.clone(),
            None => budget_samples(res.k0, mc.samples)?,
        };
        for &k in &k_values {
            let r = k_auc(
                &coverable,
                &p.wcc,
                k,
                (mc.d_min, self.max_cost),
                mc.k_auc_steps,
                &opts,
            );
            report
                .k_auc
                .push(self.entry(format!("{tag}__kauc_k{k}"), k as f64, r)?);
        }
        let d_values = match &mc.d_values {
            Some(ds) => ds.clone(),
            None => nice_grid(mc.d_min, self.max_cost, mc.samples.max(2), false)?,
        };
        for &d in &d_values {
            let r = d_auc(&coverable, &p.wcc, d, (1, k_top), mc.d_auc_steps, &opts);
            report
                .d_auc
                .push(self.entry(format!("{tag}__dauc_d{d}"), d, r)?);
        }
        for &c in &mc.c_levels {
            let r = c_auc(&coverable, &p.wcc, c, (1, k_top), mc.c_auc_steps, &opts);
            report
                .c_auc
                .push(self.entry(format!("{tag}__cauc_c{c}"), c, r)?);
        }

        let names: Vec<String> = match &mc.acf_attributes {
            Some(names) => names.clone(),
            None => cfg.attributes.iter().map(|a| a.name.clone()).collect(),
        };
        for name in names {
            let mut a = acf(&p.matrix, coverable.factuals(), &full_cover, &name)
                .map_err(|e| e.in_stage("metrics"))?;
            a.uncovered = a.uncovered.iter().map(|&v| row_id(v)).collect();
            report.acf.push(a);
        }
        Ok(report)
    }
}

/// Per-component selections at `k0_i` achieving `d0_i`, merged.
fn full_cover_solution(
    coverable: &SelectionProblem,
    wcc: &WccIndex,
    per_wcc: &[ComponentResources],
    opts: &crate::solver::SolverOptions,
) -> Result<Solution> {
    let parts = coverable.by_component(wcc);
    let mut sols = Vec::new();
    for c in per_wcc {
        let (_, sub) = parts
            .iter()
            .find(|(id, _)| *id == c.component)
            .expect("component listed by min_resources");
        let sol = match c.route {
            Route::Greedy => {
                crate::solver::greedy_kcenter_count(sub, c.k0, sub.n_factuals(), opts.first_center)?
            }
            _ => crate::solver::exact_kcenter_count(sub, c.k0, sub.n_factuals(), opts.exact_cap)?,
        };
        sols.push(sol);
    }
    let method = if per_wcc.iter().any(|c| c.route == Route::Greedy) {
        Method::Greedy
    } else {
        Method::Exact
    };
    Ok(Solution::merge(&sols, method))
}

type GroupValues = BTreeMap<String, Option<f64>>;

fn comparison(groups: &BTreeMap<String, GroupReport>) -> Vec<ComparisonRow> {
    // (metric name, value per group, larger is worse)
    let mut rows: Vec<(String, GroupValues, bool)> = vec![
        ("k0".into(), BTreeMap::new(), true),
        ("d0".into(), BTreeMap::new(), true),
    ];
    let mut keyed: BTreeMap<(u8, String), (GroupValues, bool)> = BTreeMap::new();
    for (g, r) in groups {
        rows[0].1.insert(g.clone(), Some(r.k0 as f64));
        rows[1].1.insert(g.clone(), Some(r.d0));
        for (order, label, entries, worse_high) in [
            (0, "kAUC", &r.k_auc, false),
            (1, "dAUC", &r.d_auc, false),
            (2, "cAUC", &r.c_auc, true),
        ] {
            for e in entries {
                let key = (order, format!("{label}@{}", e.at));
                keyed
                    .entry(key)
                    .or_insert_with(|| (BTreeMap::new(), worse_high))
                    .0
                    .insert(g.clone(), e.result.as_ref().map(|s| s.value));
            }
        }
    }
    rows.extend(keyed.into_iter().map(|((_, name), (v, w))| (name, v, w)));
    rows.into_iter()
        .map(|(metric, values, worse_high)| {
            let most_burdened = values
                .iter()
                .filter_map(|(g, v)| v.map(|v| (g, v)))
                .fold(None::<(&String, f64)>, |best, (g, v)| match best {
                    Some((_, b)) if (worse_high && v <= b) || (!worse_high && v >= b) => best,
                    _ => Some((g, v)),
                })
                .map(|(g, _)| g.clone());
            ComparisonRow {
                metric,
                values,
                most_burdened,
            }
        })
        .collect()
}

/// Full audit: every group of the configured group column is measured and
/// `report.json`, `curves/*.csv`, `tables/*.csv`, `graph.csv` and
/// `graph.json` are written to `out`.
pub fn run_audit(config: &AuditConfig, out: &Path) -> Result<AuditReport> {
    let pipeline = prepare(config)?;
    let write = |e: Error| e.in_stage("write");
    create_dir(&out.join("curves")).map_err(write)?;
    create_dir(&out.join("tables")).map_err(write)?;

    let all_negatives = pipeline.factuals(None, config.subset);
    let all_problem = pipeline.problem(&all_negatives, config)?;
    let max_cost = match config.metrics.max_possible_cost {
        Some(c) => c,
        None => max_possible_cost(&pipeline.matrix, config.cost, &all_problem),
    };

    let run = GroupRun {
        config,
        pipeline: &pipeline,
        curves: out.join("curves"),
        max_cost,
    };
    let mut groups = BTreeMap::new();
    let names: std::collections::BTreeSet<&String> = pipeline.matrix.groups.iter().collect();
    for g in names {
        if max_cost <= config.metrics.d_min {
            return Err(Error::usage(format!(
                "max possible cost {max_cost} does not exceed d_min {}",
                config.metrics.d_min
            ))
            .in_stage("metrics"));
        }
        let report = run.run(g).map_err(|e| match e {
            e @ Error::Stage { .. } => e,
            e => e.in_stage("metrics"),
        })?;
        groups.insert(g.clone(), report);
    }

    write_tables(out, &groups).map_err(write)?;
    pipeline.write_graph(out).map_err(write)?;
    let wcc = &pipeline.wcc;
    let report = AuditReport {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        derived: Derived {
            kde_bandwidth: pipeline.kde.bandwidth(),
            max_possible_cost: max_cost,
            encoded_columns: pipeline.matrix.column_names.clone(),
            encoded_schema: pipeline.matrix.schema.clone(),
            tie_break: "lowest candidate id; exact solutions prefer fewer candidates, then lexicographic ids",
            coverage_basis: "fractions relative to audited rows with at least one reachable candidate",
            normalization: "min-max and binning statistics taken over the whole ingested table",
            density_space: "encoded rows of the whole table, both labels and all groups",
            cost_scale: "raw",
        },
        graph: GraphSummary {
            nodes: pipeline.graph.node_count(),
            edges: pipeline.graph.edge_count(),
            epsilon: pipeline.graph.epsilon(),
            kde_bandwidth: pipeline.graph.bandwidth(),
            components: wcc.count(),
            singletons: wcc.components.iter().filter(|c| c.len() == 1).count(),
        },
        comparison: (groups.len() >= 2).then(|| comparison(&groups)),
        groups,
    };
    write_json(&out.join("report.json"), &report).map_err(write)?;
    Ok(report)
}

fn write_tables(out: &Path, groups: &BTreeMap<String, GroupReport>) -> Result<()> {
    let path = out.join("tables").join("groups.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["group", "audited", "coverable", "excluded", "m", "k0", "d0"])?;
    for (g, r) in groups {
        w.write_record([
            g.clone(),
            r.audited.to_string(),
            r.coverable.to_string(),
            r.excluded.len().to_string(),
            r.m.to_string(),
            r.k0.to_string(),
            r.d0.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = out.join("tables").join("wcc.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "group",
        "component",
        "factuals",
        "candidates",
        "k0",
        "d0",
        "route",
    ])?;
    for (g, r) in groups {
        for c in &r.per_wcc {
            w.write_record([
                g.clone(),
                c.component.to_string(),
                c.factuals.to_string(),
                c.candidates.to_string(),
                c.k0.to_string(),
                c.d0.to_string(),
                serde_json::to_value(c.route)?
                    .as_str()
                    .unwrap_or_default()
                    .to_owned(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Connectivity per threshold, written to `out/sweep.csv`.
pub fn sweep_command(
    config: &AuditConfig,
    epsilons: &[f64],
    out: &Path,
) -> Result<Vec<SweepRecord>> {
    if epsilons.is_empty() {
        return Err(Error::usage("epsilon list is empty").in_stage("config"));
    }
    let matrix = load_matrix(config)?;
    let kde =
        KdeModel::from_matrix(&matrix, config.kde_bandwidth).map_err(|e| e.in_stage("density"))?;
    let records = epsilon_sweep(&matrix, epsilons, &kde).map_err(|e| e.in_stage("graph"))?;
    create_dir(out).map_err(|e| e.in_stage("write"))?;
    let path = out.join("sweep.csv");
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e).in_stage("write"))?;
    write_sweep_csv(&records, file).map_err(|e| e.in_stage("write"))?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audit::synth::{synth_fixture, SynthSpec};

    fn f1_dir() -> (tempfile::TempDir, AuditConfig) {
        let dir = tempfile::tempdir().unwrap();
        synth_fixture(&SynthSpec::f1())
            .unwrap()
            .write(dir.path())
            .unwrap();
        let cfg = AuditConfig::load(&dir.path().join("config.json")).unwrap();
        (dir, cfg)
    }

    #[test]
    fn f1_audit() {
        let (dir, cfg) = f1_dir();
        let out = dir.path().join("out");
        let report = run_audit(&cfg, &out).unwrap();
        let g = &report.groups["g0"];
        assert_eq!((g.m, g.k0), (2, 2));
        assert!((g.d0 - 0.2).abs() < 1e-12);
        assert!(report.comparison.is_none());
        assert_eq!(report.graph.components, 2);
        for f in [
            "report.json",
            "graph.csv",
            "graph.json",
            "tables/groups.csv",
            "tables/wcc.csv",
        ] {
            assert!(out.join(f).exists(), "{f}");
        }
        let acf_v = g.acf.iter().find(|a| a.attribute == "v").unwrap();
        assert_eq!(acf_v.frequency, 1.0);
    }

    #[test]
    fn epsilon_checked_before_io() {
        let mut cfg = AuditConfig::new(
            "/nonexistent/data.csv",
            crate::audit::synth::SynthFixture::schema(),
            "label",
            "group",
            0.0,
        );
        cfg.epsilon = -1.0;
        let err = run_audit(&cfg, Path::new("/nonexistent/out")).unwrap_err();
        assert!(
            matches!(
                err,
                Error::Stage {
                    stage: "config",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn sweep_on_f1() {
        let (dir, cfg) = f1_dir();
        let recs = sweep_command(&cfg, &[0.05, 0.35], dir.path()).unwrap();
        assert_eq!(
            (recs[0].edges, recs[0].components, recs[0].singletons),
            (0, 5, 5)
        );
        assert_eq!((recs[1].components, recs[1].singletons), (2, 0));
        assert!(sweep_command(&cfg, &[], dir.path()).is_err());
        assert!(sweep_command(&cfg, &[0.35, 0.05], dir.path()).is_err());
    }

    #[test]
    fn comparison_needs_two_groups() {
        let mut spec = SynthSpec::new(vec![4, 3], 3);
        spec.groups = 2;
        spec.positives = Some(vec![2, 1]);
        let dir = tempfile::tempdir().unwrap();
        synth_fixture(&spec).unwrap().write(dir.path()).unwrap();
        let cfg = AuditConfig::load(&dir.path().join("config.json")).unwrap();
        let report = run_audit(&cfg, &dir.path().join("out")).unwrap();
        let rows = report.comparison.expect("two groups");
        assert_eq!(rows[0].metric, "k0");
        assert_eq!(rows[0].values.len(), 2);
    }
}
