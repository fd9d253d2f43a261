use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod bench;
mod commands;
mod manifest;

/// Bad flags, manifests or combinations; exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl UsageError {
    pub fn new(msg: &str) -> anyhow::Error {
        UsageError(msg.to_string()).into()
    }
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Some benchmark cells failed; the report covers the rest. Exit code 3.
#[derive(Debug)]
pub struct PartialFailure(pub usize);

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} benchmark cell(s) failed; see runs.csv", self.0)
    }
}

impl std::error::Error for PartialFailure {}

#[derive(Parser)]
#[command(name = "mlaco", version, about = "ML-guided ant colony optimization for the orienteering problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write random instances as JSON.
    Generate(GenerateArgs),
    /// Solve instances exactly and write labels plus labeled features.
    Label(LabelArgs),
    /// Extract per-edge features of one instance.
    Features(FeaturesArgs),
    /// Fit a linear classifier on labeled feature CSVs.
    Train(TrainArgs),
    /// Predict per-edge probabilities for one instance.
    Predict(PredictArgs),
    /// Run ACO (or the exact solver) on one instance.
    Solve(SolveArgs),
    /// Run every (config, instance, seed) cell of a manifest.
    Benchmark(BenchmarkArgs),
    /// Summarize an existing runs.csv against a baseline.
    Compare(CompareArgs),
    /// Wilcoxon signed-rank test on two paired samples.
    Stats(StatsArgs),
    /// Label, assemble and train from a training manifest.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Budget range `lo:hi`.
    #[arg(long, default_value = "100:400")]
    pub budget: String,
    #[arg(long, default_value = "instances")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct LabelArgs {
    /// Instance files or glob patterns.
    #[arg(required = true)]
    pub inputs: Vec<String>,
    #[arg(long)]
    pub format: Option<String>,
    /// Seconds per instance.
    #[arg(long, default_value_t = 60.0)]
    pub time_limit: f64,
    /// Route samples per vertex.
    #[arg(long, default_value_t = 100)]
    pub sample_factor: usize,
    /// Keep only the first this many proved instances.
    #[arg(long)]
    pub max_instances: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "labels")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FeaturesArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    /// Number of sampled routes; defaults to 100n.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Label JSON whose route marks the positive edges.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Labeled feature CSVs.
    #[arg(required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long, default_value = "svm")]
    pub kind: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct PredictArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    /// `as` or `mmas`.
    #[arg(long, default_value = "mmas")]
    pub variant: String,
    #[arg(long)]
    pub preset: Option<String>,
    /// `none`, `eta`, `eta_hat` or `tau_seed`; needs --model unless `none`.
    #[arg(long)]
    pub integration: Option<String>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Constructions per vertex.
    #[arg(long, default_value_t = manifest::DESK_BUDGET_FACTOR)]
    pub budget_factor: usize,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Convergence trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Solve exactly with this time limit in seconds instead.
    #[arg(long)]
    pub exact: Option<f64>,
}

#[derive(Args)]
pub struct BenchmarkArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Base every config on a preset (`sota`).
    #[arg(long)]
    pub preset: Option<String>,
    /// 10000n constructions and 25 runs.
    #[arg(long)]
    pub paper_scale: bool,
    /// Use seeds `seed..seed+runs`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct CompareArgs {
    pub runs: PathBuf,
    #[arg(long)]
    pub baseline: String,
}

#[derive(Args)]
pub struct StatsArgs {
    /// Files with one number per line.
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, default_value = "two-sided")]
    pub alternative: String,
    /// `auto`, `exact` or `normal`.
    #[arg(long, default_value = "auto")]
    pub method: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args)]
pub struct PipelineArgs {
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MLACO_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| UsageError(format!("MLACO_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        1
    } else if err.downcast_ref::<PartialFailure>().is_some() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Label(a) => commands::label(&a),
        Command::Features(a) => commands::features(&a),
        Command::Train(a) => commands::train(&a),
        Command::Predict(a) => commands::predict(&a),
        Command::Solve(a) => commands::solve(&a),
        Command::Benchmark(a) => bench::benchmark(
            &a.manifest,
            &bench::BenchOptions {
                out: a.out,
                preset: a.preset,
                paper_scale: a.paper_scale,
                seed: a.seed,
            },
        ),
        Command::Compare(a) => commands::compare(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Pipeline(a) => commands::pipeline(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
