//! Subcommand bodies. Each returns `Err(CliError)` carrying its exit code.

use std::fs;
use std::io::Write;
use std::net::IpAddr;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use vnfmap_core::agents::{AgentError, AgentVariant, TrainedModel};
use vnfmap_core::experiment::train as train_run;
use vnfmap_core::infra::{pm_wastage, pm_workload, slice_workload, vm_workload, WastageWeights};
use vnfmap_core::mdp::{Hyperparameters, MdpError};
use vnfmap_core::metrics::{compare as compare_runs, read_episode_csv, write_episode_csv, Comparison, MetricsError, RunRecord, RunSummary};
use vnfmap_core::model::CU_SIZE;
use vnfmap_core::oracle::{solve_exact_matching, ObjectiveMode, OracleError, PairWastage};
use vnfmap_core::scenario::{generate, GenerationParams, IntRange, Scenario, ScenarioError};
use vnfmap_service::{MappedPair, ServiceContext, ServiceDescriptor};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Infeasible(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Infeasible(_) | CliError::Divergence(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Infeasible(_) => "infeasible",
            CliError::Divergence(_) => "divergence",
            CliError::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({"error": self.kind(), "message": self.to_string()}).to_string()
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io { .. } => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MdpError> for CliError {
    fn from(e: MdpError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<AgentError> for CliError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Divergence { .. } => CliError::Divergence(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Io(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

pub fn generate_scenario(seed: u64, vms: usize, req: IntRange, cap: IntRange, out: &Path) -> Result<(), CliError> {
    let params = GenerationParams { requirement_range: req, capacity_range: cap, vm_count: vms };
    let scenario = generate(seed, &params)?;
    scenario.save(out)?;
    println!("wrote {} (seed {seed}, {} VMs)", out.display(), scenario.vms.len());
    Ok(())
}

/// Run metadata stored next to the episode CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunFile {
    variant: AgentVariant,
    seed: u64,
    hyper: Hyperparameters,
    summary: RunSummary,
}

const EPISODES_CSV: &str = "episodes.csv";
const SUMMARY_JSON: &str = "summary.json";
const MODEL_JSON: &str = "model.json";

fn write_run(dir: &Path, record: &RunRecord, model: &TrainedModel) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(EPISODES_CSV);
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    write_episode_csv(std::io::BufWriter::new(file), &record.logs)?;
    let meta = RunFile { variant: record.variant, seed: record.seed, hyper: record.hyper, summary: record.summary.clone() };
    write_json(&dir.join(SUMMARY_JSON), &meta)?;
    write_json(&dir.join(MODEL_JSON), model)
}

fn read_run(dir: &Path) -> Result<RunRecord, CliError> {
    let meta: RunFile = read_json(&dir.join(SUMMARY_JSON))?;
    let csv_path = dir.join(EPISODES_CSV);
    let logs = read_episode_csv(fs::File::open(&csv_path).map_err(io_err(&csv_path))?)?;
    Ok(RunRecord::new(meta.variant, meta.seed, meta.hyper, logs))
}

fn load_training_env(scenario: &Path, hyper: &Hyperparameters) -> Result<vnfmap_core::mdp::Environment, CliError> {
    hyper.validate()?;
    Ok(Scenario::load(scenario)?.environment()?)
}

fn summary_line(r: &RunRecord) -> String {
    let s = &r.summary;
    let conv = s.convergence_episode.map_or_else(|| "-".to_string(), |c| c.to_string());
    format!(
        "{} seed {}: average reward {:.4}, std {:.4}, auc {}, convergence episode {conv}, success rate {:.3}",
        r.variant,
        r.seed,
        s.average_reward,
        s.std_dev,
        s.auc.map_or_else(|| "-".to_string(), |a| format!("{a:.2}")),
        s.success_rate
    )
}

pub fn train(scenario: &Path, variant: AgentVariant, hyper: &Hyperparameters, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let env = load_training_env(scenario, hyper)?;
    let outcome = train_run(&env, variant, hyper, seed)?;
    write_run(out_dir, &outcome.record, &outcome.learner.to_model())?;
    println!("{}", summary_line(&outcome.record));
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn run_dir(out_dir: &Path, variant: AgentVariant, seed: u64) -> PathBuf {
    out_dir.join(variant.tag()).join(format!("seed-{seed}"))
}

#[derive(Debug, Serialize)]
struct ComparisonFile<'a> {
    comparison: &'a Comparison,
    reward_ordering_holds: Option<bool>,
    auc_ordering_holds: Option<bool>,
    std_ordering_holds: Option<bool>,
}

fn report_comparison(c: &Comparison, out: &Path) -> Result<(), CliError> {
    let file = ComparisonFile {
        comparison: c,
        reward_ordering_holds: c.reward_ordering_holds(),
        auc_ordering_holds: c.auc_ordering_holds(),
        std_ordering_holds: c.std_ordering_holds(),
    };
    write_json(out, &file)?;
    print!("{}", c.render_table());
    let show = |b: Option<bool>| b.map_or("n/a (needs all four variants)", |b| if b { "holds" } else { "does not hold" });
    println!("reward ordering off-tab >= on-tab > off-lin >= on-lin: {}", show(file.reward_ordering_holds));
    println!("off-tab has the largest AUC: {}", show(file.auc_ordering_holds));
    println!("linear std below tabular std: {}", show(file.std_ordering_holds));
    println!("wrote {}", out.display());
    Ok(())
}

pub fn sweep(
    scenario: &Path,
    variants: &[AgentVariant],
    hyper: &Hyperparameters,
    seeds: Range<u64>,
    out_dir: &Path,
) -> Result<(), CliError> {
    if seeds.is_empty() {
        return Err(CliError::Validation("--seeds must be at least 1".into()));
    }
    let env = load_training_env(scenario, hyper)?;
    let jobs: Vec<(AgentVariant, u64)> = variants.iter().flat_map(|&v| seeds.clone().map(move |s| (v, s))).collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(v, s)| train_run(&env, v, hyper, s))
        .collect::<Result<Vec<_>, _>>()?;
    for o in &outcomes {
        write_run(&run_dir(out_dir, o.record.variant, o.record.seed), &o.record, &o.learner.to_model())?;
        println!("{}", summary_line(&o.record));
    }
    let records: Vec<RunRecord> = outcomes.into_iter().map(|o| o.record).collect();
    report_comparison(&compare_runs(&records), &out_dir.join("cross_seed.json"))
}

fn find_runs(dir: &Path, found: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if dir.join(SUMMARY_JSON).is_file() {
        found.push(dir.to_path_buf());
        return Ok(());
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for sub in subdirs {
        find_runs(&sub, found)?;
    }
    Ok(())
}

pub fn compare(dirs: &[PathBuf], out: &Path) -> Result<(), CliError> {
    let mut found = Vec::new();
    for d in dirs {
        find_runs(d, &mut found)?;
    }
    if found.is_empty() {
        return Err(CliError::Validation("no run directories (with summary.json) found".into()));
    }
    let mut records = found.iter().map(|d| read_run(d)).collect::<Result<Vec<_>, _>>()?;
    records.sort_by_key(|r| (r.variant, r.seed));
    report_comparison(&compare_runs(&records), out)
}

#[derive(Debug, Serialize)]
struct OracleReport {
    objective: ObjectiveMode,
    objective_value: f64,
    pairs: Vec<MappedPair>,
}

pub fn oracle(scenario: &Path, objective: ObjectiveMode, format: Format) -> Result<(), CliError> {
    let s = Scenario::load(scenario)?;
    let problem = s.assignment_problem(objective);
    let a = solve_exact_matching(&problem).map_err(|e| match e {
        OracleError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
        OracleError::TooLarge { .. } => CliError::Validation(e.to_string()),
    })?;
    let pairs: Vec<MappedPair> = a
        .pairs
        .iter()
        .zip(s.slice.components())
        .map(|(p, c)| MappedPair { component: p.component, vm: p.vm, wastage: PairWastage::of(c, s.vm(p.vm).expect("assigned vm exists")) })
        .collect();
    let report = OracleReport { objective, objective_value: a.objective_value, pairs };
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&report).expect("serializable report")),
        Format::Text => {
            println!("objective: {}", serde_json::to_value(objective).expect("serializable").as_str().unwrap_or_default());
            println!("objective_value: {}", report.objective_value);
            println!("{:<9} {:>5} {:>15} {:>15} {:>12} {:>12}", "component", "vm", "compute_surplus", "storage_surplus", "compute_idle", "storage_idle");
            for p in &report.pairs {
                let w = p.wastage;
                println!(
                    "{:<9} {:>5} {:>15.4} {:>15.4} {:>12.4} {:>12.4}",
                    format!("f{}", p.component),
                    p.vm,
                    w.compute_surplus,
                    w.storage_surplus,
                    w.compute_idle,
                    w.storage_idle
                );
            }
        }
    }
    Ok(())
}

pub fn check_infra(scenario: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(scenario).map_err(io_err(scenario))?;
    let (s, violations) = Scenario::from_json_with_violations(&text)?;
    println!("scenario: {} components, {} VMs", s.slice.components().len(), s.vms.len());

    match (&s.pms, &s.placement) {
        (Some(pms), Some(placement)) => {
            println!("physical machines: {}", pms.len());
            for (k, pm) in pms.iter().enumerate() {
                let hosted: Vec<_> = s.vms.iter().enumerate().filter(|(j, _)| placement.x[*j][k]).map(|(_, v)| v).collect();
                let used = (hosted.iter().map(|v| v.compute_cap).sum::<f64>(), hosted.iter().map(|v| v.storage_cap).sum::<f64>());
                let wastage = pm_wastage((pm.compute_cap - used.0, pm.storage_cap - used.1), (pm.compute_cap, pm.storage_cap), WastageWeights::default())
                    .map_or_else(|e| format!("n/a ({e})"), |w| format!("{w:.4}"));
                let loads: Vec<(f64, f64)> =
                    hosted.iter().map(|v| (v.compute_cap / pm.compute_cap, v.storage_cap / pm.storage_cap)).collect();
                let workload = pm_workload((0.0, 0.0), &loads).map_or_else(|e| format!("n/a ({e})"), |w| format!("{w:.4}"));
                println!(
                    "  pm {}: {} VMs (limit {}), compute {}/{}, storage {}/{}, wastage {wastage}, workload {workload}",
                    pm.id,
                    hosted.len(),
                    pm.max_vm_count,
                    used.0,
                    pm.compute_cap,
                    used.1,
                    pm.storage_cap
                );
            }
        }
        (Some(pms), None) => println!("physical machines: {} (no placement given)", pms.len()),
        _ => println!("physical machines: none given"),
    }

    match solve_exact_matching(&s.assignment_problem(ObjectiveMode::AbsoluteSurplus)) {
        Ok(a) => {
            let workloads: Result<Vec<f64>, _> = a
                .pairs
                .iter()
                .zip(s.slice.components())
                .map(|(p, c)| {
                    let vm = s.vm(p.vm).expect("assigned vm exists");
                    vm_workload(c.compute_req / vm.compute_cap, c.storage_req / vm.storage_cap)
                })
                .collect();
            match workloads {
                Ok(w) => {
                    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
                    let (cu, du) = w.split_at(CU_SIZE);
                    let total = slice_workload(mean(cu), mean(du)).map_or_else(|e| format!("n/a ({e})"), |t| format!("{t:.4}"));
                    println!("slice workload under the exact assignment: {total}");
                }
                Err(e) => println!("slice workload under the exact assignment: unbounded ({e})"),
            }
        }
        Err(e) => println!("slice workload: no feasible assignment ({e})"),
    }

    if violations.is_empty() {
        println!("placement violations: none");
        Ok(())
    } else {
        for v in &violations {
            println!("  violation {:?}: {}", v.rule, v.detail);
        }
        Err(CliError::Infeasible(format!("{} placement violation(s)", violations.len())))
    }
}

pub fn serve(
    host: IpAddr,
    port: u16,
    scenario_dir: Option<&Path>,
    model: Option<&Path>,
    descriptor: Option<&Path>,
) -> Result<(), CliError> {
    let desc = match descriptor {
        Some(p) => ServiceDescriptor::from_json(&fs::read_to_string(p).map_err(io_err(p))?).map_err(CliError::Validation)?,
        None => ServiceDescriptor::default(),
    };
    desc.validate().map_err(CliError::Validation)?;

    let mut ctx = ServiceContext::default();
    if let Some(dir) = scenario_dir {
        let skipped = ctx.load_scenarios(dir).map_err(io_err(dir))?;
        for s in skipped {
            eprintln!("skipping {s}: not a scenario file");
        }
    }
    if let Some(path) = model {
        let m: TrainedModel = read_json(path)?;
        m.value_function()?;
        ctx.model = Some(m);
    }

    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port)).await.map_err(|e| CliError::Io(format!("bind {host}:{port}: {e}")))?;
        let addr = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
        println!("{} listening on http://{addr} ({} scenarios, model {})", desc.name, ctx.scenarios.len(), if ctx.model.is_some() { "loaded" } else { "none" });
        std::io::stdout().flush().ok();
        vnfmap_service::serve(listener, Arc::new(ctx)).await.map_err(|e| CliError::Io(e.to_string()))
    })
}
