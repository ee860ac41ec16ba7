//! Command-line front end. `robustggm <command> --help` lists the flags.
//!
//! Every command writes its results plus a `<output>.manifest.json` holding
//! the fully resolved configuration; `robustggm replay <manifest>` reruns it
//! and reproduces the result files byte for byte.
//!
//! Penalties given on the command line are on the covariance scale (the
//! per-entry soft threshold of the glasso). The t-based methods receive
//! `n · rho` as their likelihood penalty.

mod io;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::alt_t::{alt_tlasso_fit, McmcConfig};
use crate::error::Error;
use crate::glasso::{glasso_fit, GlassoOptions, PenaltySpec};
use crate::linalg::SpdMatrix;
use crate::sim::{
    edges_from_theta, top_k_edges, GraphSpec, Method, MethodSettings, RhoGrid, RocExperiment, ScenarioKind,
    ScenarioSpec,
};
use crate::tlasso::{tlasso_fit, TlassoConfig};

pub use io::read_dataset;

pub const SCHEMA_VERSION: u32 = 1;
pub const THREADS_ENV: &str = "ROBUSTGGM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    NotConverged(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Io(_) => 1,
            CliError::Model(e) => match e {
                Error::NonConvergence { .. } => 3,
                Error::InvalidArgument(_)
                | Error::InvalidScenario(_)
                | Error::Infeasible(_)
                | Error::DimensionMismatch { .. }
                | Error::IndexOutOfRange { .. }
                | Error::GridMismatch => 2,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "robustggm", version, about = "Robust sparse graphical models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Fit one model to a CSV dataset.
    Fit(FitArgs),
    /// Averaged ROC curves over simulated replicates.
    Roc(RocArgs),
    /// Tune the penalty so the fitted graph has exactly k edges.
    Topk(TopkArgs),
    /// Write one simulated dataset and its true graph.
    Simulate(SimulateArgs),
    /// Rerun a command from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Glasso,
    Tlasso,
    AltTlasso,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Glasso => Method::Glasso,
            MethodArg::Tlasso => Method::Tlasso,
            MethodArg::AltTlasso => Method::AltTlasso,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    /// Degrees of freedom of the t-based methods.
    #[arg(long, default_value_t = 3.0)]
    pub nu: f64,
    /// Absolute tolerance on the penalized log-likelihood between EM iterations.
    #[arg(long, default_value_t = 1e-5)]
    pub em_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_em_iter: usize,
    /// Glasso sweep tolerance relative to the mean absolute off-diagonal of S.
    #[arg(long, default_value_t = 1e-5)]
    pub glasso_tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_sweeps: usize,
    /// Retained Gibbs cycles per observation (alt-tlasso).
    #[arg(long, default_value_t = 50)]
    pub k_samples: usize,
    #[arg(long, default_value_t = 20)]
    pub burn_in: usize,
    /// Stochastic EM stops once the largest change of Θ is below this (alt-tlasso).
    #[arg(long, default_value_t = 1e-3)]
    pub theta_tol: f64,
}

impl ModelArgs {
    fn settings(&self, seed: u64) -> MethodSettings {
        MethodSettings {
            glasso: GlassoOptions {
                tol: self.glasso_tol,
                max_sweeps: self.max_sweeps,
                ..GlassoOptions::default()
            },
            tlasso: TlassoConfig {
                rho: 0.0,
                nu: self.nu,
                em_tol: self.em_tol,
                max_em_iter: self.max_em_iter,
                glasso_tol: self.glasso_tol,
            },
            mcmc: McmcConfig {
                k_samples: self.k_samples,
                burn_in: self.burn_in,
                seed,
                theta_tol: self.theta_tol,
            },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// CSV with one observation per row; an all-text first row is a header.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "tlasso")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    #[arg(long)]
    pub output: PathBuf,
    /// Seed of the alt-tlasso sampler.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Export the full p×p second-moment matrix per observation (alt-tlasso).
    #[arg(long)]
    pub full_tau: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Gaussian,
    StudentT,
    ContaminatedFixed,
    ContaminatedBlocks,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScenarioArgs {
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0.05)]
    pub edge_prob: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub kind: KindArg,
    /// Degrees of freedom of student-t data.
    #[arg(long = "data-nu", default_value_t = 3.0)]
    pub data_nu: f64,
    /// Contaminated nodes (contaminated-fixed).
    #[arg(long, default_value_t = 3)]
    pub contaminated_nodes: usize,
    /// Contaminated observations (contaminated-fixed).
    #[arg(long, default_value_t = 10)]
    pub contaminated_rows: usize,
    /// Contamination mean as a multiple of the largest variance.
    #[arg(long, default_value_t = 25.0)]
    pub mean_multiplier: f64,
    #[arg(long, default_value_t = 5)]
    pub blocks: usize,
    #[arg(long, default_value_t = 20)]
    pub block_size: usize,
    #[arg(long, default_value_t = 3)]
    pub nodes_per_block: usize,
    /// Explicit node sets, e.g. "0,1,2;3,4,5" (one set per block, or one set
    /// for contaminated-fixed).
    #[arg(long)]
    pub node_sets: Option<String>,
}

impl ScenarioArgs {
    fn graph(&self) -> GraphSpec {
        GraphSpec::new(self.p, self.edge_prob, 0)
    }

    fn scenario(&self) -> Result<ScenarioSpec, CliError> {
        let sets = match &self.node_sets {
            None => None,
            Some(text) => Some(parse_node_sets(text)?),
        };
        let kind = match self.kind {
            KindArg::Gaussian => ScenarioKind::Gaussian,
            KindArg::StudentT => ScenarioKind::StudentT { nu: self.data_nu },
            KindArg::ContaminatedFixed => {
                let node_set = match sets {
                    Some(mut s) if s.len() == 1 => s.pop(),
                    Some(_) => return Err(CliError::Input("contaminated-fixed takes exactly one node set".into())),
                    None => None,
                };
                ScenarioKind::ContaminatedFixed {
                    nodes: node_set.as_ref().map_or(self.contaminated_nodes, Vec::len),
                    rows: self.contaminated_rows,
                    mean_multiplier: self.mean_multiplier,
                    node_set,
                }
            }
            KindArg::ContaminatedBlocks => ScenarioKind::ContaminatedBlocks {
                blocks: sets.as_ref().map_or(self.blocks, Vec::len),
                block_size: self.block_size,
                nodes_per_block: sets
                    .as_ref()
                    .and_then(|s| s.first().map(Vec::len))
                    .unwrap_or(self.nodes_per_block),
                mean_multiplier: self.mean_multiplier,
                node_sets: sets,
            },
        };
        let spec = ScenarioSpec { n: self.n, kind };
        spec.validate(self.p)?;
        if !(0.0..=1.0).contains(&self.edge_prob) || self.p == 0 {
            return Err(CliError::Input("need p >= 1 and 0 <= edge-prob <= 1".into()));
        }
        Ok(spec)
    }
}

fn parse_node_sets(text: &str) -> Result<Vec<Vec<usize>>, CliError> {
    text.split(';')
        .map(|set| {
            set.split(',')
                .map(|k| {
                    k.trim()
                        .parse::<usize>()
                        .map_err(|_| CliError::Input(format!("bad node index '{k}' in --node-sets")))
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct RocArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Methods to compare, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["glasso", "tlasso"])]
    pub methods: Vec<MethodArg>,
    /// Number of log-spaced penalties between grid-min·ρ_max and ρ_max.
    #[arg(long, default_value_t = 30)]
    pub grid_size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub grid_min: f64,
    /// Explicit penalties (fractions of ρ_max unless --absolute-grid).
    #[arg(long, value_delimiter = ',')]
    pub rho_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub absolute_grid: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// ROC points; the AUC summary goes to `<stem>.auc.csv`.
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TopkArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "tlasso")]
    pub method: MethodArg,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset CSV; the true graph goes to `<stem>.truth.json`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Write outputs into this directory instead of the recorded paths.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub version: String,
    pub seed: u64,
    pub config: Command,
    pub duration_secs: f64,
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Replay(r) => replay(&r),
        other => run_recorded(&other, &other),
    }
}

/// Runs `command`, recording `recorded` as the configuration (they differ
/// only in output paths when replaying into another directory).
fn run_recorded(command: &Command, recorded: &Command) -> Result<(), CliError> {
    let start = Instant::now();
    let outcome = execute(command, recorded);
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: seed_of(recorded),
        config: recorded.clone(),
        duration_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(out) = output_of(command) {
        if !matches!(outcome, Err(CliError::Input(_)) | Err(CliError::Model(_))) {
            io::write_json(&io::sidecar(out, "manifest.json"), &manifest)?;
        }
    }
    outcome
}

fn seed_of(c: &Command) -> u64 {
    match c {
        Command::Fit(a) => a.seed,
        Command::Roc(a) => a.seed,
        Command::Topk(a) => a.seed,
        Command::Simulate(a) => a.seed,
        Command::Replay(_) => 0,
    }
}

fn output_of(c: &Command) -> Option<&Path> {
    match c {
        Command::Fit(a) => Some(&a.output),
        Command::Roc(a) => Some(&a.output),
        Command::Topk(a) => Some(&a.output),
        Command::Simulate(a) => Some(&a.output),
        Command::Replay(_) => None,
    }
}

fn output_mut(c: &mut Command) -> Option<&mut PathBuf> {
    match c {
        Command::Fit(a) => Some(&mut a.output),
        Command::Roc(a) => Some(&mut a.output),
        Command::Topk(a) => Some(&mut a.output),
        Command::Simulate(a) => Some(&mut a.output),
        Command::Replay(_) => None,
    }
}

fn replay(args: &ReplayArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.manifest)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.manifest.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: not a run manifest: {e}", args.manifest.display())))?;
    let recorded = manifest.config;
    if matches!(recorded, Command::Replay(_)) {
        return Err(CliError::Input("a manifest cannot replay another replay".into()));
    }
    let mut command = recorded.clone();
    if let (Some(dir), Some(out)) = (&args.output_dir, output_mut(&mut command)) {
        let name = out
            .file_name()
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("output"));
        *out = dir.join(name);
    }
    run_recorded(&command, &recorded)
}

fn execute(command: &Command, recorded: &Command) -> Result<(), CliError> {
    match command {
        Command::Fit(a) => cmd_fit(a, recorded),
        Command::Roc(a) => cmd_roc(a),
        Command::Topk(a) => cmd_topk(a, recorded),
        Command::Simulate(a) => cmd_simulate(a, recorded),
        Command::Replay(_) => Err(CliError::Input("nested replay".into())),
    }
}

/// Rows of `m` with negative zeros written as zeros.
fn rows(m: &SpdMatrix) -> Vec<Vec<f64>> {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|v| v + 0.0).collect())
        .collect()
}

/// Run description embedded in JSON outputs (the manifest minus timing).
#[derive(Debug, Serialize)]
struct RunInfo<'a> {
    version: &'a str,
    seed: u64,
    config: &'a Command,
}

fn run_info(command: &Command) -> RunInfo<'_> {
    RunInfo {
        version: env!("CARGO_PKG_VERSION"),
        seed: seed_of(command),
        config: command,
    }
}

#[derive(Debug, Serialize)]
struct EdgeOut {
    i: usize,
    j: usize,
    value: f64,
}

fn edge_list(theta: &SpdMatrix) -> Vec<EdgeOut> {
    edges_from_theta(theta)
        .edges
        .into_iter()
        .map(|(i, j)| EdgeOut {
            i,
            j,
            value: theta.get(i, j),
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct FitOutput<'a> {
    schema_version: u32,
    method: MethodArg,
    n: usize,
    p: usize,
    variables: Vec<String>,
    rho: f64,
    converged: bool,
    iterations: usize,
    mu_hat: Vec<f64>,
    theta_hat: Vec<Vec<f64>>,
    psi_hat: Vec<Vec<f64>>,
    edges: Vec<EdgeOut>,
    /// `E[τ_i | Y_i]` per observation (tlasso).
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<Vec<f64>>,
    /// Per-cell `E[τ_ij | Y_i]`, one row per observation (alt-tlasso).
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_diagonal: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_full: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    acceptance: Option<Vec<f64>>,
    objective_trace: Vec<f64>,
    run: RunInfo<'a>,
}

fn cmd_fit(a: &FitArgs, command: &Command) -> Result<(), CliError> {
    check_rho(a.rho)?;
    let (data, header) = io::read_dataset(&a.input)?;
    let (n, p) = (data.n(), data.p());
    let settings = a.model.settings(a.seed);
    let variables = header.unwrap_or_else(|| (1..=p).map(|k| format!("V{k}")).collect());
    let mut out = FitOutput {
        schema_version: SCHEMA_VERSION,
        method: a.method,
        n,
        p,
        variables,
        rho: a.rho,
        converged: false,
        iterations: 0,
        mu_hat: vec![],
        theta_hat: vec![],
        psi_hat: vec![],
        edges: vec![],
        tau: None,
        tau_diagonal: None,
        tau_full: None,
        acceptance: None,
        objective_trace: vec![],
        run: run_info(command),
    };
    let likelihood_rho = TlassoConfig {
        rho: n as f64 * a.rho,
        ..settings.tlasso
    };
    let theta = match a.method {
        MethodArg::Glasso => {
            let fit = glasso_fit(&data.covariance(), &PenaltySpec::new(a.rho), &settings.glasso, None)?;
            out.converged = fit.converged;
            out.iterations = fit.iterations;
            out.mu_hat = data.mean();
            out.psi_hat = rows(&fit.sigma_hat);
            out.objective_trace = fit.objective_trace;
            fit.theta_hat
        }
        MethodArg::Tlasso => {
            let fit = tlasso_fit(&data, &likelihood_rho, None)?;
            out.converged = fit.converged;
            out.iterations = fit.em_iterations;
            out.mu_hat = fit.mu_hat;
            out.psi_hat = rows(&fit.psi_hat);
            out.tau = Some(fit.weights.tau);
            out.objective_trace = fit.penalized_loglik_trace;
            fit.theta_hat
        }
        MethodArg::AltTlasso => {
            let fit = alt_tlasso_fit(&data, &likelihood_rho, &settings.mcmc)?;
            out.converged = fit.converged;
            out.iterations = fit.em_iterations;
            out.mu_hat = fit.mu_hat;
            out.psi_hat = rows(&fit.psi_hat);
            out.tau_diagonal = Some(fit.tau_stats.diagonals());
            if a.full_tau {
                out.tau_full = Some(fit.tau_stats.second_moments.iter().map(rows).collect());
            }
            out.acceptance = Some(fit.tau_stats.acceptance.clone());
            out.objective_trace = fit.theta_change_trace;
            fit.theta_hat
        }
    };
    out.edges = edge_list(&theta);
    out.theta_hat = rows(&theta);
    io::write_json(&a.output, &out)?;
    if out.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "no convergence after {} iterations; partial result written to {}",
            out.iterations,
            a.output.display()
        )))
    }
}

fn check_rho(rho: f64) -> Result<(), CliError> {
    if rho.is_finite() && rho >= 0.0 {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "--rho must be a nonnegative number, got {rho}"
        )))
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| CliError::Input(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn cmd_roc(a: &RocArgs) -> Result<(), CliError> {
    let scenario = a.scenario.scenario()?;
    if a.reps == 0 || a.methods.is_empty() {
        return Err(CliError::Input("need --reps >= 1 and at least one method".into()));
    }
    let grid = match &a.rho_grid {
        Some(v) if v.is_empty() || v.iter().any(|r| !(r.is_finite() && *r >= 0.0)) => {
            return Err(CliError::Input("--rho-grid needs nonnegative numbers".into()))
        }
        Some(v) if a.absolute_grid => RhoGrid::Absolute(v.clone()),
        Some(v) => RhoGrid::Relative(v.clone()),
        None if a.grid_size == 0 || !(a.grid_min > 0.0 && a.grid_min <= 1.0) => {
            return Err(CliError::Input("need --grid-size >= 1 and 0 < --grid-min <= 1".into()))
        }
        None => RhoGrid::log_relative(a.grid_size, a.grid_min),
    };
    let exp = RocExperiment {
        graph: a.scenario.graph(),
        scenario,
        reps: a.reps,
        grid,
        methods: a.methods.iter().map(|&m| m.into()).collect(),
        settings: a.model.settings(0),
        seed: a.seed,
    };
    let summary = thread_pool()?.install(|| exp.run())?;

    let mut w = csv::Writer::from_writer(io::create(&a.output)?);
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", a.output.display()));
    w.write_record(["method", "rho", "fpr", "tpr", "failed"])
        .map_err(csv_err)?;
    for m in &summary {
        for pt in &m.averaged.points {
            w.write_record([
                m.method.name().to_string(),
                io::num(pt.rho),
                io::num(pt.fpr),
                io::num(pt.tpr),
                pt.failed.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;

    let auc_path = io::sidecar(&a.output, "auc.csv");
    let mut w = csv::Writer::from_writer(io::create(&auc_path)?);
    w.write_record(["method", "mean_auc", "auc_of_mean_curve", "replicates"])
        .map_err(csv_err)?;
    for m in &summary {
        w.write_record([
            m.method.name().to_string(),
            io::num(m.mean_auc),
            io::num(m.averaged.auc),
            m.replicate_auc.len().to_string(),
        ])
        .map_err(csv_err)?;
        println!("{:<10} mean AUC {:.4}", m.method.name(), m.mean_auc);
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Serialize)]
struct TopkOutput<'a> {
    schema_version: u32,
    method: MethodArg,
    k: usize,
    rho: f64,
    tie_broken: bool,
    edges: Vec<EdgeOut>,
    run: RunInfo<'a>,
}

fn cmd_topk(a: &TopkArgs, command: &Command) -> Result<(), CliError> {
    let (data, _) = io::read_dataset(&a.input)?;
    let top = top_k_edges(a.method.into(), &data, a.k, &a.model.settings(a.seed))?;
    let out = TopkOutput {
        schema_version: SCHEMA_VERSION,
        method: a.method,
        k: a.k,
        rho: top.rho,
        tie_broken: top.tie_broken,
        edges: top
            .magnitudes
            .iter()
            .map(|&(i, j, value)| EdgeOut { i, j, value })
            .collect(),
        run: run_info(command),
    };
    io::write_json(&a.output, &out)
}

#[derive(Debug, Serialize)]
struct TruthOutput<'a> {
    schema_version: u32,
    p: usize,
    n: usize,
    /// Magnitude scheme of the nonzero concentrations.
    offdiag_range: [f64; 2],
    edges: Vec<[usize; 2]>,
    theta: Vec<Vec<f64>>,
    contaminated_cells: Vec<[usize; 2]>,
    node_groups: Vec<Vec<usize>>,
    run: RunInfo<'a>,
}

/// Writes replicate 0 of the matching `roc` experiment.
fn cmd_simulate(a: &SimulateArgs, command: &Command) -> Result<(), CliError> {
    let exp = RocExperiment {
        graph: a.scenario.graph(),
        scenario: a.scenario.scenario()?,
        reps: 1,
        grid: RhoGrid::Relative(vec![1.0]),
        methods: vec![],
        settings: MethodSettings::default(),
        seed: a.seed,
    };
    let (graph, generated) = exp.replicate_data(0)?;
    let header: Vec<String> = (1..=a.scenario.p).map(|k| format!("V{k}")).collect();
    io::write_dataset(&a.output, &generated.data, &header)?;
    let truth = TruthOutput {
        schema_version: SCHEMA_VERSION,
        p: a.scenario.p,
        n: a.scenario.n,
        offdiag_range: [exp.graph.offdiag_low, exp.graph.offdiag_high],
        edges: graph.truth.edges.iter().map(|&(i, j)| [i, j]).collect(),
        theta: rows(&graph.theta),
        contaminated_cells: generated.contaminated_cells.iter().map(|&(i, j)| [i, j]).collect(),
        node_groups: generated.node_groups,
        run: run_info(command),
    };
    io::write_json(&io::sidecar(&a.output, "truth.json"), &truth)
}
