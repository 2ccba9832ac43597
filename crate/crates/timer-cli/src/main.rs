//! `timer` — pipeline CLI: synthesize or ingest longitudinal event records,
//! chunk them, generate temporally grounded instruction pairs, control the
//! temporal distribution of sampled sets, and evaluate responses with text
//! metrics, bootstrap statistics, and judge protocols.
//!
//! Exit codes: 0 success, 1 partial failures (per-row/per-chunk errors were
//! recorded), 2 invalid configuration or usage.

mod commands;
mod config;
mod ioutil;
mod manifest;
mod provider;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use timer_core::genpipe::Mode;
use timer_core::sampler::Strategy;

/// Command outcome: clean or with recorded (non-fatal) issues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmdStatus {
    Clean,
    Partial { issues: usize },
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or usage: exit 2.
    Config(String),
    /// Fatal runtime failure: exit 1.
    Runtime(String),
}

impl CliError {
    pub fn runtime(message: impl Into<String>) -> Self {
        CliError::Runtime(message.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "timer",
    version,
    about = "Temporally grounded instruction dataset generation and evaluation for longitudinal records"
)]
struct Cli {
    /// TOML configuration file; flags override file values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and the run manifest
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed for every seeded stage (never defaults to the wall clock)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Generation provider name (`mock` or a configured HTTPS provider)
    #[arg(long, global = true)]
    provider: Option<String>,
    /// Model identifier passed to the provider
    #[arg(long, global = true)]
    model: Option<String>,
    /// Bounded parallelism for provider calls
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// Token budget for chunking
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Sampling strategy: recency, edge, or uniform
    #[arg(long, global = true)]
    strategy: Option<String>,
    /// Sampling target size
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Histogram / stratification bin count
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Force the deterministic offline mock provider
    #[arg(long, global = true)]
    mock: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort and emit its event stream
    Synth {
        /// Number of patients (overrides [synth] n_patients)
        #[arg(long)]
        patients: Option<usize>,
        /// Event format to emit: csv or jsonl
        #[arg(long)]
        format: Option<String>,
    },
    /// Parse an event stream and build per-patient timelines
    Ingest {
        /// Event file (CSV or JSONL)
        #[arg(long)]
        input: Option<PathBuf>,
        /// Input format: csv or jsonl (inferred from the extension if unset)
        #[arg(long)]
        format: Option<String>,
    },
    /// Split timelines into token-budgeted context chunks
    Chunk {
        #[arg(long)]
        timelines: Option<PathBuf>,
    },
    /// Generate instruction pairs from chunks via the configured provider
    Generate {
        #[arg(long)]
        chunks: Option<PathBuf>,
        /// Generation mode: tuning or benchmark
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        pairs_per_chunk: Option<usize>,
        /// Distinct-evidence filter threshold (defaults by mode)
        #[arg(long)]
        min_evidence: Option<usize>,
    },
    /// Histogram, region fractions, and distribution classification
    Analyze {
        /// Pair JSONL or positions JSONL
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Draw a distribution-controlled set from a pair pool
    Sample {
        #[arg(long)]
        pairs: Option<PathBuf>,
        /// Produce the edge + uniform benchmark variants in one run
        #[arg(long)]
        benchmark_variants: bool,
        /// Tuning pool that must stay patient-disjoint from the input pool
        #[arg(long)]
        check_disjoint: Option<PathBuf>,
        #[arg(long)]
        edge_n: Option<usize>,
        #[arg(long)]
        uniform_n: Option<usize>,
    },
    /// Convert a sampled set to instruction-tuning JSONL
    Export {
        /// Sampled pair JSONL (its .meta.json sidecar must exist)
        #[arg(long)]
        input: PathBuf,
        /// Output artifact name
        #[arg(long, default_value = "tuning.jsonl")]
        output: String,
    },
    /// Score responses against references with the automatic metrics
    Evaluate {
        #[arg(long)]
        pairs: PathBuf,
        /// Response JSONL: {"pair_id","response"} per line
        #[arg(long)]
        responses: PathBuf,
    },
    /// Judge responses for correctness and completeness
    Judge {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        /// Mock judge rule override (echo-match, always-yes, pick-first, always-tie)
        #[arg(long)]
        mock_rule: Option<String>,
    },
    /// Pairwise comparison of two response sets with order de-biasing
    Head2head {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        responses_a: PathBuf,
        #[arg(long)]
        responses_b: PathBuf,
        #[arg(long)]
        mock_rule: Option<String>,
    },
    /// Merge analysis, evaluation, judge, and comparison outputs into one report
    Report {},
}

/// Everything a command needs: the merged configuration and the output dir.
pub struct Ctx {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub force_mock: bool,
}

fn parse_strategy(s: &str) -> Result<Strategy, CliError> {
    match s {
        "recency" => Ok(Strategy::Recency),
        "edge" => Ok(Strategy::Edge),
        "uniform" => Ok(Strategy::Uniform),
        other => Err(CliError::Config(format!(
            "unknown strategy `{other}` (expected recency, edge, or uniform)"
        ))),
    }
}

fn parse_mode(s: &str) -> Result<Mode, CliError> {
    match s {
        "tuning" => Ok(Mode::Tuning),
        "benchmark" => Ok(Mode::Benchmark),
        other => {
            Err(CliError::Config(format!("unknown mode `{other}` (expected tuning or benchmark)")))
        }
    }
}

fn build_ctx(cli: &Cli) -> Result<Ctx, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = Some(seed);
    }
    if let Some(provider) = &cli.provider {
        config.generation.provider = provider.clone();
    }
    if let Some(model) = &cli.model {
        config.generation.model = model.clone();
    }
    if let Some(parallelism) = cli.parallelism {
        config.generation.parallelism = parallelism.max(1);
        config.judge.parallelism = parallelism.max(1);
    }
    if let Some(budget) = cli.budget {
        config.chunking.token_budget = budget;
    }
    if let Some(strategy) = &cli.strategy {
        config.sampling.strategy = parse_strategy(strategy)?;
    }
    if let Some(n) = cli.n {
        config.sampling.n = n;
    }
    if let Some(bins) = cli.bins {
        config.sampling.bins = bins;
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| config.output.dir.clone());
    Ok(Ctx { config, out_dir, force_mock: cli.mock })
}

fn run(cli: &Cli) -> Result<CmdStatus, CliError> {
    let ctx = build_ctx(cli)?;
    match &cli.command {
        Command::Synth { patients, format } => {
            commands::synth::run(&ctx, *patients, format.as_deref())
        }
        Command::Ingest { input, format } => commands::ingest::run(&ctx, input.clone(), format.clone()),
        Command::Chunk { timelines } => commands::chunk::run(&ctx, timelines.clone()),
        Command::Generate { chunks, mode, pairs_per_chunk, min_evidence } => {
            let mode = mode.as_deref().map(parse_mode).transpose()?;
            commands::generate::run(&ctx, chunks.clone(), mode, *pairs_per_chunk, *min_evidence)
        }
        Command::Analyze { pairs } => commands::analyze::run(&ctx, pairs.clone()),
        Command::Sample { pairs, benchmark_variants, check_disjoint, edge_n, uniform_n } => {
            commands::sample::run(
                &ctx,
                pairs.clone(),
                *benchmark_variants,
                check_disjoint.clone(),
                *edge_n,
                *uniform_n,
            )
        }
        Command::Export { input, output } => commands::export::run(&ctx, input, output),
        Command::Evaluate { pairs, responses } => commands::evaluate::run(&ctx, pairs, responses),
        Command::Judge { pairs, responses, mock_rule } => {
            commands::judge::run(&ctx, pairs, responses, mock_rule.as_deref())
        }
        Command::Head2head { pairs, responses_a, responses_b, mock_rule } => {
            commands::head2head::run(&ctx, pairs, responses_a, responses_b, mock_rule.as_deref())
        }
        Command::Report {} => commands::report::run(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(CmdStatus::Clean) => ExitCode::SUCCESS,
        Ok(CmdStatus::Partial { issues }) => {
            eprintln!("completed with {issues} recorded issue(s); see the error artifacts");
            ExitCode::from(1)
        }
        Err(err @ CliError::Config(_)) => {
            eprintln!("{err}");
            ExitCode::from(2)
        }
        Err(err @ CliError::Runtime(_)) => {
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}
