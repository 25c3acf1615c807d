mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use chrono::NaiveDate;
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use phyloclust::evaluation::{DISTANCE_GRID, SUPPORT_GRID};

use manifest::{manifest_path, write_manifest, RunContext, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "phyloclust", version, about = "Transmission-cluster estimation from sequences and trees")]
struct Cli {
    /// Worker threads for parallel kernels; defaults to all cores
    #[arg(long, global = true, env = "PHYLOCLUST_THREADS")]
    threads: Option<usize>,
    /// JSON file of per-subcommand flag defaults; command-line flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Raise log verbosity (repeatable)
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pairwise distance matrix of an alignment
    Dist(DistArgs),
    /// Partition sequences by tree thresholds or largest gaps
    Cluster(ClusterArgs),
    /// Annotate a tree with clade frequencies from a tree sample
    Support(SupportArgs),
    /// Majority-rule consensus of a tree sample
    Consensus(ConsensusArgs),
    /// Score a threshold method over a support x distance grid
    Sweep(SweepArgs),
    /// Adjusted Rand index of a partition against a planted or gold partition
    Ari(AriArgs),
    /// Cross-method co-clustering matrix and partition summaries
    Compare(CompareArgs),
    /// Sample partitions by MCMC and estimate clusters from co-clustering
    Linkage(LinkageArgs),
    /// Recent-infection growth table and figure for the largest clusters
    Growth(GrowthArgs),
    /// Simulate a tree, alignment, metadata and planted clusters
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Measure {
    P,
    K80,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum MatrixFormat {
    Phylip,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Method {
    /// Maximum pairwise p-distance within a clade
    #[value(name = "maxp", alias = "max-pairwise-p")]
    MaxP,
    /// Median patristic distance within a clade
    #[value(name = "medianpatristic", alias = "median-patristic")]
    MedianPatristic,
    /// Maximum patristic distance within a clade
    #[value(name = "maxpatristic", alias = "max-patristic")]
    MaxPatristic,
    /// Per-sequence largest gap on a distance matrix
    Gap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum PresetArg {
    Small,
    Acceptance,
    PaperScale,
}

#[derive(Debug, Args, Serialize)]
struct DistArgs {
    /// Aligned FASTA
    #[arg(long)]
    align: PathBuf,
    #[arg(long, value_enum, default_value = "p")]
    distance_kind: Measure,
    /// Replace undefined distances with this value
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long, value_enum, default_value = "phylip")]
    format: MatrixFormat,
    /// Output matrix; binary output also writes ids next to it with extension .ids
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ClusterArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Newick tree with supports (threshold methods)
    #[arg(long)]
    tree: Option<PathBuf>,
    /// Aligned FASTA
    #[arg(long)]
    align: Option<PathBuf>,
    /// PHYLIP or binary distance matrix; replaces --align
    #[arg(long, conflicts_with = "align")]
    matrix: Option<PathBuf>,
    #[arg(long)]
    support_min: Option<f64>,
    #[arg(long)]
    distance_max: Option<f64>,
    /// Use this percentile of all patristic distances as the distance cutoff
    #[arg(long, conflicts_with = "distance_max")]
    percentile: Option<f64>,
    /// Distance for gap clustering from an alignment [default: k80]
    #[arg(long, value_enum)]
    distance_kind: Option<Measure>,
    /// Cap for undefined distances in gap clustering from an alignment [default: 1.0]
    #[arg(long)]
    cap: Option<f64>,
    #[arg(long, default_value_t = 0.90)]
    gap_quantile: f64,
    /// Reroot on these tips and drop them before clustering
    #[arg(long, value_delimiter = ',')]
    outgroup: Vec<String>,
    /// Output partition CSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SupportArgs {
    /// Reference tree
    #[arg(long)]
    tree: PathBuf,
    /// Newick file holding the sample, one tree per `;`
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ConsensusArgs {
    /// Newick file holding the sample, one tree per `;`
    #[arg(long)]
    sample: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    align: Option<PathBuf>,
    #[arg(long, conflicts_with = "align")]
    matrix: Option<PathBuf>,
    /// Gold partition CSV, possibly covering only part of the sequences
    #[arg(long)]
    reference: PathBuf,
    /// Ids of all sequences, one per line [default: tree tips]
    #[arg(long)]
    universe: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_values_t = SUPPORT_GRID)]
    support_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = DISTANCE_GRID)]
    distance_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    outgroup: Vec<String>,
    /// Output grid TSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct AriArgs {
    /// Candidate partition CSV
    candidate: PathBuf,
    /// Planted or gold partition CSV
    #[arg(long)]
    planted: PathBuf,
    /// Treat the planted partition as covering only part of the candidate's ids
    #[arg(long)]
    partial: bool,
    /// Output TSV
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct CompareArgs {
    /// Partitions as NAME=PATH
    #[arg(long = "partition", required = true, num_args = 1..)]
    partitions: Vec<String>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct LinkageArgs {
    #[arg(long)]
    tree: PathBuf,
    #[arg(long)]
    align: PathBuf,
    /// Independent chains, seeded seed, seed+1, ...
    #[arg(long, default_value_t = 1)]
    chains: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    init_support_min: Option<f64>,
    #[arg(long)]
    init_distance_max: Option<f64>,
    #[arg(long)]
    cluster_count_rate: Option<f64>,
    /// Keep the regime means at their initial values
    #[arg(long)]
    fixed_means: bool,
    /// Keep the concentration at its initial value
    #[arg(long)]
    fixed_concentration: bool,
    #[arg(long, default_value_t = 4)]
    walk_length: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct GrowthArgs {
    #[arg(long)]
    partition: PathBuf,
    #[arg(long)]
    metadata: PathBuf,
    #[arg(long, default_value = "2012-01-01")]
    window_start: NaiveDate,
    #[arg(long, default_value = "2012-07-01")]
    phi_start: NaiveDate,
    #[arg(long, default_value = "2016-02-01")]
    window_end: NaiveDate,
    #[arg(long, default_value_t = 30)]
    top_k: usize,
    /// Output TSV
    #[arg(long)]
    out: PathBuf,
    /// Output SVG [default: --out with extension .svg]
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    preset: PresetArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of residues replaced by N
    #[arg(long)]
    mask_fraction: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Dist(_) => "dist",
            Command::Cluster(_) => "cluster",
            Command::Support(_) => "support",
            Command::Consensus(_) => "consensus",
            Command::Sweep(_) => "sweep",
            Command::Ari(_) => "ari",
            Command::Compare(_) => "compare",
            Command::Linkage(_) => "linkage",
            Command::Growth(_) => "growth",
            Command::Simulate(_) => "simulate",
        }
    }

    fn flags(&self) -> serde_json::Value {
        let v = match self {
            Command::Dist(a) => serde_json::to_value(a),
            Command::Cluster(a) => serde_json::to_value(a),
            Command::Support(a) => serde_json::to_value(a),
            Command::Consensus(a) => serde_json::to_value(a),
            Command::Sweep(a) => serde_json::to_value(a),
            Command::Ari(a) => serde_json::to_value(a),
            Command::Compare(a) => serde_json::to_value(a),
            Command::Linkage(a) => serde_json::to_value(a),
            Command::Growth(a) => serde_json::to_value(a),
            Command::Simulate(a) => serde_json::to_value(a),
        };
        v.expect("flags serialize")
    }

    fn manifest_path(&self) -> PathBuf {
        match self {
            Command::Dist(a) => manifest_path(&a.out, false),
            Command::Cluster(a) => manifest_path(&a.out, false),
            Command::Support(a) => manifest_path(&a.out, false),
            Command::Consensus(a) => manifest_path(&a.out, false),
            Command::Sweep(a) => manifest_path(&a.out, false),
            Command::Ari(a) => manifest_path(&a.out, false),
            Command::Compare(a) => manifest_path(&a.out_dir, true),
            Command::Linkage(a) => manifest_path(&a.out_dir, true),
            Command::Growth(a) => manifest_path(&a.out, false),
            Command::Simulate(a) => manifest_path(&a.out_dir, true),
        }
    }
}

/// Prints the message with the usage synopsis and exits with status 2.
fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command()
        .error(clap::error::ErrorKind::ArgumentConflict, msg)
        .exit()
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => usage_error(e),
    };
    let cli = Cli::parse_from(argv);
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    commands::validate(&cli.command);

    let threads = cli.threads.unwrap_or(0);
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    let started = Instant::now();
    let mut ctx = RunContext::default();
    if let Err(e) = commands::run(&cli.command, &mut ctx) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    let manifest = RunManifest {
        subcommand: cli.command.name().to_string(),
        flags: cli.command.flags(),
        inputs: ctx.inputs,
        outputs: ctx.outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: ctx.seeds,
        threads: rayon::current_num_threads(),
        duration_seconds: started.elapsed().as_secs_f64(),
    };
    if let Err(e) = write_manifest(&cli.command.manifest_path(), &manifest) {
        eprintln!("error: {e:#}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
