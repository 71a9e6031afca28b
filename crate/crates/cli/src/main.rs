use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use ses_core::coverage::{generate_gmm, run_coverage_check_with, CoverageConfig, CoverageMethod, GmmSpec, RPolicy};
use ses_core::dataset::{
    read_difficulty, read_embeddings, read_labels, write_columns_csv, write_embeddings_binary, write_embeddings_csv,
    write_json, write_scalar_csv, write_selection, EmbeddingFormat, EmbeddingMatrix,
};
use ses_core::entropy::LogBase;
use ses_core::graph::{build_knn_graph_with, default_k};
use ses_core::pipeline::{run_selection, score_dataset, ClassSource, PipelineConfig};
use ses_core::replay::{run_replay_sim, ReplayMemory, ReplayMode, ReplaySimConfig};
use ses_core::sampler::{Budget, SamplingStrategy, SelectionConfig};
use ses_core::scoring::{DifficultyMode, ScoringConfig};
use ses_core::tree::{build_tree, TreeBuildConfig, TreeMode};
use ses_core::{Error, Execution};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Parser)]
#[command(name = "ses", version, about = "Structural-entropy coreset selection")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a budgeted subset and write its indices.
    Select(SelectArgs),
    /// Write per-sample entropy, Shapley value, difficulty and importance.
    Score(ScoreArgs),
    /// Compare true ball coverage with the entropy bound on a Gaussian mixture.
    BenchCoverage(CoverageArgs),
    /// Stream synthetic tasks or batches through a replay memory.
    ReplaySim(ReplayArgs),
    /// Dump the kNN graph and encoding tree.
    Inspect(InspectArgs),
    /// Write a synthetic Gaussian-mixture dataset.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum TreeModeArg {
    Binary,
    Compressed,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    BlueNoise,
    TopScore,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Chi2,
    MonteCarlo,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReplayModeArg {
    PerTask,
    MergeReduce,
}

#[derive(Args)]
struct GraphArgs {
    /// Embedding matrix (`.csv`, otherwise binary).
    #[arg(long)]
    embeddings: PathBuf,
    /// Neighbors per sample; defaults to round(log2 n).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "compressed")]
    tree_mode: TreeModeArg,
    #[arg(long, default_value_t = 3)]
    max_height: usize,
}

impl GraphArgs {
    fn tree(&self) -> TreeBuildConfig {
        match self.tree_mode {
            TreeModeArg::Binary => TreeBuildConfig {
                mode: TreeMode::Binary,
                max_height: self.max_height,
            },
            TreeModeArg::Compressed => TreeBuildConfig::compressed(self.max_height),
        }
    }
}

#[derive(Args)]
struct ScoringArgs {
    /// Per-sample training difficulty CSV (`index,value`).
    #[arg(long, conflicts_with = "identity_difficulty")]
    difficulty: Option<PathBuf>,
    /// Treat difficulty as constant.
    #[arg(long)]
    identity_difficulty: bool,
    /// Share of hardest (positive) or easiest (negative) samples to exclude.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value = "2")]
    log_base: LogBase,
}

impl ScoringArgs {
    fn check(&self) -> Result<(), Error> {
        if self.difficulty.is_none() && !self.identity_difficulty {
            return Err(Error::InvalidConfig(
                "pass --difficulty FILE or --identity-difficulty".into(),
            ));
        }
        ScoringConfig {
            beta: self.beta,
            difficulty_mode: DifficultyMode::File,
        }
        .validate()
    }

    fn pipeline(&self, graph: &GraphArgs, with_phi: bool) -> PipelineConfig {
        PipelineConfig {
            k: graph.k,
            tree: graph.tree(),
            base: self.log_base,
            scoring: ScoringConfig {
                beta: self.beta,
                difficulty_mode: if self.identity_difficulty {
                    DifficultyMode::Identity
                } else {
                    DifficultyMode::File
                },
            },
            with_phi,
        }
    }

    fn difficulty(&self, n: usize) -> Result<Option<Vec<f64>>, Error> {
        match &self.difficulty {
            Some(path) if !self.identity_difficulty => Ok(Some(read_difficulty(path, n)?.raw)),
            _ => Ok(None),
        }
    }
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Class labels CSV (`index,value`) for per-class caps.
    #[arg(long, conflicts_with = "kmeans")]
    labels: Option<PathBuf>,
    /// Cluster embeddings into C groups and cap per cluster.
    #[arg(long, value_name = "C")]
    kmeans: Option<usize>,
    /// Fraction of samples to keep.
    #[arg(long, conflicts_with = "budget", required_unless_present = "budget")]
    rate: Option<f64>,
    /// Exact number of samples to keep.
    #[arg(long)]
    budget: Option<usize>,
    /// Class imbalance factor (>= 1); needs --labels or --kmeans.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "blue-noise")]
    strategy: StrategyArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Selected indices, one per line.
    #[arg(long)]
    out: PathBuf,
    /// JSON report; defaults to the output path with a `.report.json` extension.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Score CSV with columns `index,s_e,phi,s_t,s`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 500)]
    per_class: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    k: Option<usize>,
    /// Fixed ball radius; otherwise a percentile of kNN edge lengths.
    #[arg(long, conflicts_with = "r_percentile")]
    radius: Option<f64>,
    #[arg(long, default_value_t = 95.0)]
    r_percentile: f64,
    #[arg(long, value_enum, default_value = "chi2")]
    method: MethodArg,
    /// Draws per sample for the Monte Carlo method.
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[arg(long, value_enum, default_value = "compressed")]
    tree_mode: TreeModeArg,
    #[arg(long, default_value_t = 3)]
    max_height: usize,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Per-sample CSV; defaults to the output path with a `.ratios.csv` extension.
    #[arg(long)]
    ratios: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long, value_enum, default_value = "per-task")]
    mode: ReplayModeArg,
    #[arg(long, default_value_t = 100)]
    capacity: usize,
    /// Number of tasks or batches.
    #[arg(long, default_value_t = 5)]
    steps: usize,
    #[arg(long, default_value_t = 200)]
    batch_size: usize,
    #[arg(long, default_value_t = ReplayMemory::DEFAULT_SLOTS)]
    slots: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report with per-step counts and the final memory snapshot.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Edge list CSV (`u,v,w`).
    #[arg(long)]
    graph_out: Option<PathBuf>,
    /// Encoding tree JSON.
    #[arg(long)]
    tree_out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 500)]
    per_class: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embedding output (`.csv`, otherwise binary).
    #[arg(long)]
    out: PathBuf,
    /// Optional labels CSV (`index,value`).
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidK { .. } | Error::InvalidBeta(_) => EXIT_USAGE,
        Error::InfeasibleBudget { .. } | Error::CapacityTooSmall { .. } | Error::NoMergeablePair => EXIT_INFEASIBLE,
        _ => EXIT_DATA,
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn load(path: &Path) -> Result<EmbeddingMatrix, Error> {
    read_embeddings(path, EmbeddingFormat::from_path(path))
}

fn cmd_select(args: &SelectArgs) -> Result<(), Error> {
    args.scoring.check()?;
    if args.gamma.is_some() && args.labels.is_none() && args.kmeans.is_none() {
        return Err(Error::InvalidConfig("--gamma needs --labels or --kmeans".into()));
    }
    let selection = SelectionConfig {
        budget: match (args.rate, args.budget) {
            (Some(rate), _) => Budget::Rate(rate),
            (None, Some(m)) => Budget::Count(m),
            (None, None) => unreachable!("clap requires one of --rate/--budget"),
        },
        gamma: args.gamma,
        seed: args.seed,
        strategy: match args.strategy {
            StrategyArg::BlueNoise => SamplingStrategy::BlueNoise,
            StrategyArg::TopScore => SamplingStrategy::TopScore,
        },
        ..Default::default()
    };
    selection.validate()?;
    args.graph.tree().validate()?;

    let emb = load(&args.graph.embeddings)?;
    let difficulty = args.scoring.difficulty(emb.n())?;
    let classes = match (&args.labels, args.kmeans) {
        (Some(path), _) => ClassSource::Labels(read_labels(path, emb.n())?),
        (None, Some(c)) => ClassSource::KMeans(c),
        (None, None) => ClassSource::None,
    };
    let pipeline = args.scoring.pipeline(&args.graph, false);
    let run = run_selection(
        &emb,
        difficulty.as_deref(),
        classes,
        &pipeline,
        &selection,
        Execution::Parallel,
    )?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out, "report.json"));
    write_selection(&run.result.indices, &run.report, &args.out, &report_path)?;
    for w in &run.report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "selected {} of {} samples (theta {:.6}, k {})",
        run.report.m, run.report.n, run.report.theta_final, run.report.k
    );
    Ok(())
}

fn cmd_score(args: &ScoreArgs) -> Result<(), Error> {
    args.scoring.check()?;
    args.graph.tree().validate()?;
    let emb = load(&args.graph.embeddings)?;
    let difficulty = args.scoring.difficulty(emb.n())?;
    let pipeline = args.scoring.pipeline(&args.graph, true);
    let scored = score_dataset(&emb, difficulty.as_deref(), &pipeline, Execution::Parallel)?;
    let phi = scored.scores.phi.as_deref().unwrap_or_default();
    write_columns_csv(
        &args.out,
        &[
            ("s_e", &scored.scores.s_e),
            ("phi", phi),
            ("s_t", &scored.scores.s_t),
            ("s", &scored.scores.s),
        ],
    )?;
    let sum_phi: f64 = phi.iter().sum();
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out, "report.json"));
    write_json(
        &report_path,
        &json!({
            "n": emb.n(),
            "k": scored.k,
            "log_base": pipeline.base,
            "graph_entropy": scored.graph_entropy,
            "sum_phi": sum_phi,
            "excluded": scored.mask.excluded(),
        }),
    )?;
    println!("sum_phi {sum_phi:.15e}");
    println!("graph_entropy {:.15e}", scored.graph_entropy);
    Ok(())
}

fn cmd_bench_coverage(args: &CoverageArgs) -> Result<(), Error> {
    let cfg = CoverageConfig {
        gmm: GmmSpec::new(args.classes, args.per_class, args.dim, args.seed),
        k: args.k,
        r_policy: match args.radius {
            Some(r) => RPolicy::Fixed(r),
            None => RPolicy::EdgePercentile(args.r_percentile),
        },
        method: match args.method {
            MethodArg::Chi2 => CoverageMethod::Chi2,
            MethodArg::MonteCarlo => CoverageMethod::MonteCarlo {
                draws: args.draws,
                seed: args.seed,
            },
        },
        tree: match args.tree_mode {
            TreeModeArg::Binary => TreeBuildConfig {
                mode: TreeMode::Binary,
                max_height: args.max_height,
            },
            TreeModeArg::Compressed => TreeBuildConfig::compressed(args.max_height),
        },
    };
    cfg.gmm.validate()?;
    cfg.tree.validate()?;
    if !(0.0..=100.0).contains(&args.r_percentile) {
        return Err(Error::InvalidConfig("--r-percentile must lie in [0, 100]".into()));
    }
    let report = run_coverage_check_with(&cfg, Execution::Parallel)?;
    write_json(&args.out, &report)?;
    let ratios = args
        .ratios
        .clone()
        .unwrap_or_else(|| with_suffix(&args.out, "ratios.csv"));
    write_columns_csv(
        &ratios,
        &[
            ("s_e", &report.s_e),
            ("bound", &report.bound),
            ("coverage", &report.coverage),
            ("ratio", &report.ratio),
        ],
    )?;
    let s = &report.summary;
    println!("n {} k {} r {:.6}", report.n, report.k, report.r);
    println!("ratio p50 {:.6} p90 {:.6} p99 {:.6}", s.p50, s.p90, s.p99);
    println!(
        "share >= 1: {:.4}  in [1.00, 1.45]: {:.4}  below 1.97: {:.4}",
        s.fraction_at_least_one, s.fraction_in_band, s.fraction_below_1_97
    );
    Ok(())
}

fn cmd_replay_sim(args: &ReplayArgs) -> Result<(), Error> {
    let cfg = ReplaySimConfig {
        mode: match args.mode {
            ReplayModeArg::PerTask => ReplayMode::PerTask,
            ReplayModeArg::MergeReduce => ReplayMode::MergeReduce,
        },
        capacity: args.capacity,
        steps: args.steps,
        batch_size: args.batch_size,
        slot_count: args.slots,
        d: args.dim,
        seed: args.seed,
        ..Default::default()
    };
    let report = run_replay_sim(&cfg, Execution::Parallel)?;
    write_json(&args.out, &report)?;
    if let Some(last) = report.steps.last() {
        println!("entries {} streamed {}", last.entries, last.streamed);
        if !last.task_counts.is_empty() {
            println!("per-task counts {:?}", last.task_counts);
        }
        if !last.represented_counts.is_empty() {
            println!("slot represented counts {:?}", last.represented_counts);
        }
    }
    for w in report.memory.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_inspect(args: &InspectArgs) -> Result<(), Error> {
    let cfg = args.graph.tree();
    cfg.validate()?;
    if args.graph_out.is_none() && args.tree_out.is_none() {
        return Err(Error::InvalidConfig("pass --graph-out and/or --tree-out".into()));
    }
    let emb = load(&args.graph.embeddings)?;
    let k = args.graph.k.unwrap_or_else(|| default_k(emb.n()));
    let graph = build_knn_graph_with(&emb, k, Execution::Parallel)?;
    if let Some(path) = &args.graph_out {
        graph.write_edges_csv(path)?;
    }
    if let Some(path) = &args.tree_out {
        build_tree(&graph, &cfg)?.write_json(path)?;
    }
    println!("n {} k {} edges {}", emb.n(), k, graph.edge_count());
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Error> {
    let spec = GmmSpec::new(args.classes, args.per_class, args.dim, args.seed);
    let (emb, labels) = generate_gmm(&spec)?;
    match EmbeddingFormat::from_path(&args.out) {
        EmbeddingFormat::Csv => write_embeddings_csv(&args.out, &emb)?,
        EmbeddingFormat::Binary => write_embeddings_binary(&args.out, &emb)?,
    }
    if let Some(path) = &args.labels_out {
        let values: Vec<f64> = labels.labels().iter().map(|&l| l as f64).collect();
        write_scalar_csv(path, &values)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Score(a) => cmd_score(a),
        Command::BenchCoverage(a) => cmd_bench_coverage(a),
        Command::ReplaySim(a) => cmd_replay_sim(a),
        Command::Inspect(a) => cmd_inspect(a),
        Command::Generate(a) => cmd_generate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidConfig("--threads must be at least 1".into())),
        Some(threads) => match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Error::InvalidConfig(format!("thread pool: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(exit_code(&e))
        }
    }
}
