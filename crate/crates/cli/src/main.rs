use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use groupcf::audit::{
    load_matrix, prepare, run_audit, sweep_command, synth_fixture, AuditConfig, SynthSpec, Template,
};
use groupcf::cost::CostKind;
use groupcf::metrics::{acf, coverable_only, min_resources};
use groupcf::solver::{
    coverage_target, dp_allocate_partial, exact_kcenter, exact_max_coverage, greedy_kcenter,
    greedy_max_coverage, Combine, Method,
};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "groupcf",
    version,
    about = "Group counterfactual burden audits over feasibility graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode the dataset into the unit hypercube and write encoded.csv.
    Encode(Common),
    /// Feasibility graph construction and threshold sweeps.
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Select counterfactuals for one group's factuals.
    #[command(subcommand)]
    Solve(SolveCommand),
    /// Run the full audit and write report.json, curves and tables.
    Audit(Common),
    /// Attribute change frequencies of the full-coverage selection.
    Acf(AcfArgs),
    /// Write a synthetic dataset and a matching config.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Write graph.csv and graph.json.
    Build(Common),
    /// Connectivity per epsilon (repeat --epsilon, ascending) into sweep.csv.
    Sweep(Common),
}

#[derive(Subcommand)]
enum SolveCommand {
    /// At most k counterfactuals, maximize coverage within cost d.
    MaxCoverage(SolveArgs),
    /// At most k counterfactuals covering a fraction c, minimize the worst cost.
    KCenter(SolveArgs),
}

/// Flags shared by every config-driven command. Flags override the config.
#[derive(Args, Clone)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    epsilon: Vec<f64>,
    #[arg(long)]
    cost: Option<CostKind>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    exact_cap: Option<usize>,
    #[arg(long)]
    dp_combine: Option<Combine>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kde_bandwidth: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<AuditConfig> {
        let mut cfg = AuditConfig::load(&self.config)
            .with_context(|| format!("reading {}", self.config.display()))?;
        if let [eps] = self.epsilon[..] {
            cfg.epsilon = eps;
        }
        if let Some(c) = self.cost {
            cfg.cost = c;
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(cap) = self.exact_cap {
            cfg.exact_cap = cap;
        }
        if let Some(c) = self.dp_combine {
            cfg.dp_combine = c;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.kde_bandwidth.is_some() {
            cfg.kde_bandwidth = self.kde_bandwidth;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn single_epsilon(&self) -> Result<()> {
        if self.epsilon.len() > 1 {
            bail!(
                "--epsilon given {} times; only `graph sweep` takes a list",
                self.epsilon.len()
            );
        }
        Ok(())
    }
}

fn out_dir(cfg: &AuditConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
    /// Audited group; all groups when absent.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    k: usize,
    /// Cost bound (max-coverage).
    #[arg(long)]
    d: Option<f64>,
    /// Coverage fraction (k-center).
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Args)]
struct AcfArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    group: Option<String>,
    /// Attribute to report; repeat for several. Default: all.
    #[arg(long)]
    attribute: Vec<String>,
}

#[derive(Args)]
struct SynthArgs {
    /// Rows per component, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[arg(long)]
    components: Option<usize>,
    /// Label-1 rows per component, comma separated.
    #[arg(long, value_delimiter = ',')]
    positives: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1)]
    groups: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "chain")]
    template: String,
    #[arg(long)]
    out: PathBuf,
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn emit(value: serde_json::Value, out: Option<&Path>, file: &str) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join(file), &value)?;
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn encode_cmd(common: &Common) -> Result<()> {
    common.single_epsilon()?;
    let cfg = common.resolve()?;
    let matrix = load_matrix(&cfg)?;
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    matrix.write_csv(File::create(dir.join("encoded.csv"))?)?;
    println!(
        "encoded {} rows into {} columns",
        matrix.n_rows(),
        matrix.dim()
    );
    Ok(())
}

fn graph_build(common: &Common) -> Result<()> {
    common.single_epsilon()?;
    let cfg = common.resolve()?;
    let p = prepare(&cfg)?;
    let dir = out_dir(&cfg);
    std::fs::create_dir_all(&dir)?;
    p.write_graph(&dir)?;
    println!(
        "{} nodes, {} edges, {} components",
        p.graph.node_count(),
        p.graph.edge_count(),
        p.wcc.count()
    );
    Ok(())
}

fn graph_sweep(common: &Common) -> Result<()> {
    let mut single = common.clone();
    single.epsilon.clear();
    let cfg = single.resolve()?;
    let records = sweep_command(&cfg, &common.epsilon, &out_dir(&cfg))?;
    for r in records {
        println!(
            "epsilon {}: {} edges, {} components, {} singletons",
            r.epsilon, r.edges, r.components, r.singletons
        );
    }
    Ok(())
}

fn solve(args: &SolveArgs, coverage: bool) -> Result<()> {
    args.common.single_epsilon()?;
    let cfg = args.common.resolve()?;
    let opts = cfg.solver_options();
    let p = prepare(&cfg)?;
    let factuals = p.factuals(args.group.as_deref(), cfg.subset);
    if factuals.is_empty() {
        bail!("no audited factuals");
    }
    let problem = p.problem(&factuals, &cfg)?;
    let mut doc = json!({
        "group": args.group,
        "factuals": factuals,
        "k": args.k,
        "method": cfg.method,
        "cost": cfg.cost,
        "excluded": problem.uncoverable_factuals(),
    });
    if !coverage {
        let Some(d) = args.d else {
            bail!("--d is required")
        };
        let sol = match cfg.method {
            Method::Greedy => greedy_max_coverage(&problem, args.k, d)?,
            Method::Exact => exact_max_coverage(&problem, args.k, d, cfg.exact_cap)?,
        };
        doc["d"] = json!(d);
        doc["uncovered"] = json!(sol.uncovered(&problem));
        doc["solution"] = serde_json::to_value(&sol)?;
    } else {
        let c = args.c.unwrap_or(1.0);
        let sol = match cfg.method {
            Method::Greedy => greedy_kcenter(&problem, args.k, c, opts.first_center)?,
            Method::Exact => exact_kcenter(&problem, args.k, c, cfg.exact_cap)?,
        };
        doc["c"] = json!(c);
        doc["solution"] = serde_json::to_value(&sol)?;
        if args.common.dp_combine.is_some() {
            let coverable = coverable_only(&problem);
            let target = coverage_target(c, problem.n_factuals())?;
            let parts = coverable.by_component(&p.wcc);
            let table = dp_allocate_partial(&parts, args.k, target, cfg.dp_combine, &opts)?;
            doc["allocation"] = serde_json::to_value(&table)?;
        }
    }
    emit(doc, args.common.out.as_deref(), "solution.json")
}

fn audit_cmd(common: &Common) -> Result<()> {
    common.single_epsilon()?;
    let cfg = common.resolve()?;
    let dir = out_dir(&cfg);
    let report = run_audit(&cfg, &dir)?;
    for (g, r) in &report.groups {
        println!(
            "group {g}: {} audited, {} excluded, m={}, k0={}, d0={}",
            r.audited,
            r.excluded.len(),
            r.m,
            r.k0,
            r.d0
        );
    }
    println!("report written to {}", dir.join("report.json").display());
    Ok(())
}

fn acf_cmd(args: &AcfArgs) -> Result<()> {
    args.common.single_epsilon()?;
    let cfg = args.common.resolve()?;
    let opts = cfg.solver_options();
    let p = prepare(&cfg)?;
    let factuals = p.factuals(args.group.as_deref(), cfg.subset);
    let problem = p.problem(&factuals, &cfg)?;
    let res = min_resources(&problem, &p.wcc, &opts)?;
    let coverable = coverable_only(&problem);
    let sol = match cfg.method {
        Method::Greedy => greedy_kcenter(&coverable, res.k0.max(1), 1.0, opts.first_center)?,
        Method::Exact => {
            // per component keeps the search inside the cap
            let parts = coverable.by_component(&p.wcc);
            groupcf::solver::allocate_full_coverage(&parts, res.k0.max(1), &opts)?.solution()
        }
    };
    let names: Vec<String> = if args.attribute.is_empty() {
        cfg.attributes.iter().map(|a| a.name.clone()).collect()
    } else {
        args.attribute.clone()
    };
    let reports = names
        .iter()
        .map(|n| acf(&p.matrix, coverable.factuals(), &sol, n))
        .collect::<groupcf::Result<Vec<_>>>()?;
    let doc = json!({
        "group": args.group,
        "k0": res.k0,
        "selected": sol.selected,
        "acf": reports,
    });
    emit(doc, args.common.out.as_deref(), "acf.json")
}

fn synth_cmd(args: &SynthArgs) -> Result<()> {
    let template = match args.template.as_str() {
        "chain" => Template::Chain,
        "f1" => Template::F1,
        other => bail!("unknown template `{other}` (chain|f1)"),
    };
    let spec = SynthSpec {
        components: args.components.unwrap_or(args.sizes.len()),
        sizes: args.sizes.clone(),
        positives: args.positives.clone(),
        groups: args.groups,
        seed: args.seed,
        template,
        require_coverable: true,
    };
    let fixture = synth_fixture(&spec)?;
    fixture.write(&args.out)?;
    println!(
        "{} rows at epsilon {} written to {}",
        fixture.rows.len(),
        fixture.epsilon,
        args.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode(c) => encode_cmd(&c),
        Command::Graph(GraphCommand::Build(c)) => graph_build(&c),
        Command::Graph(GraphCommand::Sweep(c)) => graph_sweep(&c),
        Command::Solve(SolveCommand::MaxCoverage(a)) => solve(&a, false),
        Command::Solve(SolveCommand::KCenter(a)) => solve(&a, true),
        Command::Audit(c) => audit_cmd(&c),
        Command::Acf(a) => acf_cmd(&a),
        Command::Synth(a) => synth_cmd(&a),
    }
}

/// Context chain down to the first library error, whose message already
/// carries its own causes.
fn describe(e: &anyhow::Error) -> String {
    let mut parts = Vec::new();
    for cause in e.chain() {
        parts.push(cause.to_string());
        if cause.is::<groupcf::Error>() {
            break;
        }
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("groupcf: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
