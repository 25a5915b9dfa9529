//! `platebead` — desk-scale beading-pattern design toolkit: dataset
//! generation, surrogate / flow-model training, guided pattern optimization,
//! FEM validation and multi-run aggregation.

mod commands;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use manifest::{write_manifest, Outcome, RunManifest};

#[derive(Parser)]
#[command(name = "platebead", version, about = "Beading-pattern vibration design toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a training dataset (random patterns, loads and FEM responses)
    GenDataset(GenDatasetArgs),
    /// Train the velocity-field surrogate or the flow-matching generator
    Train(TrainArgs),
    /// Run one optimization method under an NFE budget and FEM-validate top-k
    Optimize(OptimizeArgs),
    /// FEM-sweep a pattern file and print its constraint compliance
    Validate(ValidateArgs),
    /// Aggregate comparison reports from several runs into a mean (σ) table
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FlavorArg {
    Surrogate,
    Flow,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Surrogate,
    Flow,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Flow,
    Random,
    Genetic,
    Rotation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveArg {
    MeanLevel,
    FirstEig,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfigArg {
    Free,
    Clamped,
}

#[derive(Args, Serialize)]
pub struct GenDatasetArgs {
    #[arg(long, value_enum)]
    pub flavor: FlavorArg,
    /// sample count; defaults to 512 (surrogate) or 4096 (flow)
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 15)]
    pub freqs: usize,
    #[arg(long, default_value_t = 1.0)]
    pub fmin: f64,
    #[arg(long, default_value_t = 300.0)]
    pub fmax: f64,
    /// reduced mesh / pattern resolution for fast experiments
    #[arg(long)]
    pub test_scale: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// dataset directory written by gen-dataset
    #[arg(long)]
    pub data: PathBuf,
    /// defaults to 40 (surrogate) or 60 (flow)
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 3e-3)]
    pub lr: f64,
    /// defaults to 4 (surrogate) or 8 (flow)
    #[arg(long)]
    pub batch: Option<usize>,
    /// UNet base channel width
    #[arg(long, default_value_t = 16)]
    pub base: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct OptimizeArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "mean-level")]
    pub objective: ObjectiveArg,
    /// target band lower edge, Hz
    #[arg(long, default_value_t = 1.0)]
    pub f1: f64,
    /// target band upper edge, Hz
    #[arg(long, default_value_t = 300.0)]
    pub f2: f64,
    #[arg(long, value_enum, default_value = "free")]
    pub config: ConfigArg,
    /// surrogate evaluation budget (ignored by --method rotation)
    #[arg(long, default_value_t = 4000)]
    pub nfe: u64,
    /// flow sample pool size (upper bound; the budget may cut it short)
    #[arg(long, default_value_t = 16)]
    pub pool: usize,
    /// number of top candidates validated with FEM
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    pub step: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// surrogate checkpoint (required for flow / random / genetic)
    #[arg(long)]
    pub surrogate: Option<PathBuf>,
    /// flow-model checkpoint (required for --method flow)
    #[arg(long)]
    pub flow_model: Option<PathBuf>,
    #[arg(long, default_value_t = 46)]
    pub mesh_nx: usize,
    #[arg(long, default_value_t = 31)]
    pub mesh_ny: usize,
    #[arg(long, default_value_t = 48)]
    pub pattern_h: usize,
    #[arg(long, default_value_t = 72)]
    pub pattern_w: usize,
    /// number of equidistant evaluation frequencies in [f1, f2]
    #[arg(long, default_value_t = 15)]
    pub val_freqs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct ValidateArgs {
    /// pattern file (.bpat raw block or .pgm image)
    #[arg(long)]
    pub pattern: PathBuf,
    #[arg(long, value_enum, default_value = "free")]
    pub config: ConfigArg,
    #[arg(long, default_value_t = 1.0)]
    pub fmin: f64,
    #[arg(long, default_value_t = 300.0)]
    pub fmax: f64,
    #[arg(long, default_value_t = 1.0)]
    pub df: f64,
    #[arg(long, default_value_t = 46)]
    pub mesh_nx: usize,
    #[arg(long, default_value_t = 31)]
    pub mesh_ny: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct ReportArgs {
    /// run directories containing comparison.csv
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() {
    if let Ok(v) = std::env::var("PLATEBEAD_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    let (name, config, seed, out_dir, result) = match cli.command {
        Command::GenDataset(a) => run("gen-dataset", a.seed, a.out.clone(), &a, commands::gen_dataset),
        Command::Train(a) => run("train", a.seed, a.out.clone(), &a, commands::train),
        Command::Optimize(a) => run("optimize", a.seed, a.out.clone(), &a, commands::optimize),
        Command::Validate(a) => run("validate", 0, a.out.clone(), &a, commands::validate),
        Command::Report(a) => run("report", 0, a.out.clone(), &a, commands::report),
    };
    let (status, outcome) = match &result {
        Ok(outcome) => ("ok".to_string(), outcome),
        Err((e, partial)) => (format!("error: {e:#}"), partial),
    };
    let manifest = RunManifest {
        command: name.to_string(),
        config,
        seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        status: status.clone(),
        artifacts: outcome.artifacts.clone(),
        timings_seconds: outcome.timings_seconds.clone(),
        nfe_total: outcome.nfe_total,
    };
    if let Err(e) = write_manifest(&out_dir, &manifest) {
        eprintln!("failed to write run manifest: {e:#}");
    }
    if let Err((e, _)) = result {
        eprintln!("{name}: {e:#}");
        std::process::exit(1);
    }
}

type CommandResult = Result<Outcome, (anyhow::Error, Outcome)>;

fn run<A: Serialize>(
    name: &'static str,
    seed: u64,
    out: PathBuf,
    args: &A,
    body: impl FnOnce(&A, &mut Outcome) -> anyhow::Result<()>,
) -> (&'static str, serde_json::Value, u64, PathBuf, CommandResult) {
    let config = serde_json::to_value(args).unwrap_or(serde_json::Value::Null);
    let mut outcome = Outcome::default();
    let result = match body(args, &mut outcome) {
        Ok(()) => Ok(outcome),
        Err(e) => Err((e, outcome)),
    };
    (name, config, seed, out, result)
}
