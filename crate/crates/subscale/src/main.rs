//! Command-line front end: `gep` produces a partitioning plan, `run`
//! executes an application, `bench` emits a measured run report, and
//! `compare-packing` races heuristics over seeded synthetic fixtures.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use subscale::apps::{self, AppKind, MinLabelProgram};
use subscale::bitmap::BitmapKind;
use subscale::bsp::{run_iterative, Convergence};
use subscale::engine::{materialize_partitions, EngineConfig, ExecutionMode, SubgraphView};
use subscale::extraction::ExtractionQuery;
use subscale::graph::{load_adjacency_list, load_edge_list, AttributeTarget, PropertyGraph};
use subscale::metrics::{compare_packing, measure_run, Comparison, MeasureSpec, RunReport};
use subscale::packing::Heuristic;
use subscale::pipeline::{run_centralized, run_distributed};
use subscale::synth;
use subscale::{Error, PackingConfig, PackingSolution, VertexId};

#[derive(Parser)]
#[command(name = "subscale", version, about = "Subgraph-centric graph analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract subgraphs of interest and pack them into bins (graph
    /// extraction and packing); writes the plan as JSON.
    Gep(GepArgs),
    /// Run an application over the packed subgraphs.
    Run(RunArgs),
    /// Run an application and report computational effort, memory, and
    /// timing instead of results.
    Bench(BenchArgs),
    /// Race packing heuristics over seeded synthetic fixtures.
    ComparePacking(CompareArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Graph file: whitespace-separated edge list `src dst [w]` by
    /// default, or `v: n1 n2 ...` with --adjacency.
    #[arg(long)]
    graph: PathBuf,
    /// Parse the graph file as an adjacency list.
    #[arg(long)]
    adjacency: bool,
    /// Treat edges as directed.
    #[arg(long)]
    directed: bool,
    /// Vertex attribute file: TSV `id<TAB>key=value<TAB>...`.
    #[arg(long)]
    attrs: Option<PathBuf>,
}

impl GraphArgs {
    fn load(&self) -> subscale::error::Result<PropertyGraph> {
        let mut g = if self.adjacency {
            if self.directed {
                return Err(Error::Config("adjacency-list input is undirected".into()));
            }
            load_adjacency_list(&self.graph)?
        } else {
            load_edge_list(&self.graph, self.directed)?
        };
        if let Some(attrs) = &self.attrs {
            g.attach_attributes(attrs, AttributeTarget::Vertex, false)?;
        }
        Ok(g)
    }
}

#[derive(Args)]
struct QueryArgs {
    /// Extraction query as JSON; omit for an unfiltered k-hop query.
    #[arg(long)]
    query: Option<PathBuf>,
    /// Radius when no query file is given.
    #[arg(long, default_value_t = 1)]
    k: u32,
}

impl QueryArgs {
    fn load(&self) -> subscale::error::Result<ExtractionQuery> {
        match &self.query {
            Some(path) => {
                let text = fs::read_to_string(path)?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
            }
            None => Ok(ExtractionQuery::neighborhood(self.k)),
        }
    }
}

#[derive(Args)]
struct PackArgs {
    #[arg(long, value_enum, default_value_t = Heuristic::Shingle)]
    heuristic: Heuristic,
    /// Bin capacity in bytes; accepts K/M/G suffixes (e.g. 8G).
    #[arg(long, default_value = "1G", value_parser = parse_capacity)]
    bc: u64,
    /// Maximum subgraphs per bin.
    #[arg(long, default_value_t = 3000)]
    max: usize,
    /// Seed for shingle hashing and randomized heuristics.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PackArgs {
    fn config(&self) -> PackingConfig {
        let mut cfg = PackingConfig::new(self.bc, self.max).with_heuristic(self.heuristic);
        cfg.seed = self.seed;
        cfg
    }
}

fn parse_capacity(text: &str) -> Result<u64, String> {
    let text = text.trim();
    let (digits, scale) = match text.chars().last() {
        Some('K' | 'k') => (&text[..text.len() - 1], 1u64 << 10),
        Some('M' | 'm') => (&text[..text.len() - 1], 1u64 << 20),
        Some('G' | 'g') => (&text[..text.len() - 1], 1u64 << 30),
        _ => (text, 1),
    };
    let value: u64 = digits.parse().map_err(|_| format!("invalid capacity '{text}'"))?;
    value.checked_mul(scale).ok_or_else(|| format!("capacity '{text}' overflows"))
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineMode {
    Centralized,
    Distributed,
}

#[derive(Args)]
struct GepArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    #[command(flatten)]
    pack: PackArgs,
    #[arg(long, value_enum, default_value_t = PipelineMode::Centralized)]
    mode: PipelineMode,
    /// Shard count for the distributed pipeline.
    #[arg(long, default_value_t = 4)]
    shards: usize,
    /// Plan output path (JSON); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the vertex-to-partition TSV map here.
    #[arg(long)]
    map: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecModeFlag {
    Single,
    Vector,
    Batched,
}

#[derive(Args)]
struct EngineArgs {
    /// Scheduling mode over each partition.
    #[arg(long, value_enum, default_value_t = ExecModeFlag::Batched)]
    mode: ExecModeFlag,
    #[arg(long, default_value_t = subscale::engine::DEFAULT_BATCH_SIZE)]
    batch_size: usize,
    #[arg(long, value_enum, default_value_t = BitmapKind::Word)]
    bitmap: BitmapKind,
    /// Worker threads; 0 uses the runtime default.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        let mode = match self.mode {
            ExecModeFlag::Single => ExecutionMode::SingleBitSerial,
            ExecModeFlag::Vector => ExecutionMode::VectorParallel,
            ExecModeFlag::Batched => ExecutionMode::Batched { batch_size: self.batch_size },
        };
        EngineConfig { mode, bitmap: self.bitmap, workers: self.workers }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Tsv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    app: AppKind,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    #[command(flatten)]
    pack: PackArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Reuse a plan produced by `gep` instead of packing inline.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Random walks per query vertex (ppr).
    #[arg(long, default_value_t = 1000)]
    walks: usize,
    /// Restart probability (ppr).
    #[arg(long, default_value_t = 0.15)]
    alpha: f64,
    /// Steps per walk (ppr).
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Keep only the k highest-scoring vertices per query vertex (ppr).
    #[arg(long)]
    topk: Option<usize>,
    /// Run the iterative engine (required by --app cc).
    #[arg(long)]
    iterative: bool,
    #[arg(long, default_value_t = 10_000)]
    max_supersteps: usize,
    /// Spread the iterative run over this many partitions when no plan is
    /// given.
    #[arg(long, default_value_t = 1)]
    partitions: usize,
    /// Result output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
    /// Per-superstep timing rows (JSON) are written here (--app cc).
    #[arg(long)]
    superstep_log: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value_t = AppKind::Lcc)]
    app: AppKind,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    #[command(flatten)]
    pack: PackArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Use the distributed pipeline with this many shards.
    #[arg(long)]
    shards: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    walks: usize,
    #[arg(long, default_value_t = 0.15)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    /// Barabási–Albert preferential attachment (power-law degrees).
    Ba,
    /// Erdős–Rényi G(n, p).
    Er,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_enum, default_value_t = FixtureKind::Ba)]
    fixture: FixtureKind,
    /// Fixture vertex count.
    #[arg(long, default_value_t = 500)]
    n: u64,
    /// Edges per new vertex (ba).
    #[arg(long, default_value_t = 2)]
    m: usize,
    /// Edge probability (er).
    #[arg(long, default_value_t = 0.02)]
    p: f64,
    /// Number of seeded fixture instances.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Heuristics to race (at least two).
    #[arg(long, value_enum, num_args = 2.., value_delimiter = ',',
          default_values_t = [Heuristic::Firstfit, Heuristic::Ffd, Heuristic::Shingle])]
    heuristics: Vec<Heuristic>,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, default_value = "64K", value_parser = parse_capacity)]
    bc: u64,
    #[arg(long, default_value_t = 100)]
    max: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
}

fn emit(out: &Option<PathBuf>, content: &str) -> subscale::error::Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_gep(args: GepArgs) -> subscale::error::Result<()> {
    let graph = args.graph.load()?;
    let query = args.query.load()?;
    let cfg = args.pack.config();
    let solution = match args.mode {
        PipelineMode::Centralized => run_centralized(&graph, &query, &cfg, None)?,
        PipelineMode::Distributed => run_distributed(&graph, &query, &cfg, args.shards)?,
    };
    solution.validate(&cfg)?;
    let json = serde_json::to_string_pretty(&solution)
        .map_err(|e| Error::Config(format!("plan serialization failed: {e}")))?;
    emit(&args.out, &(json + "\n"))?;
    if let Some(map) = &args.map {
        fs::write(map, solution.partition_map_string())?;
    }
    eprintln!(
        "packed {} subgraphs into {} bins (replication factor {:.3})",
        solution.subgraphs.len(),
        solution.bin_count(),
        solution.replication_factor()
    );
    Ok(())
}

/// Scalar results serialized the same way for TSV and JSON so output files
/// are byte-comparable across engine configurations.
fn format_scalar_results<V: std::fmt::Display>(
    results: &BTreeMap<VertexId, V>,
    format: OutputFormat,
) -> String {
    match format {
        OutputFormat::Tsv => {
            let mut out = String::new();
            for (qv, value) in results {
                out.push_str(&format!("{qv}\t{value}\n"));
            }
            out
        }
        OutputFormat::Json => {
            let map: BTreeMap<String, String> =
                results.iter().map(|(qv, v)| (qv.to_string(), v.to_string())).collect();
            serde_json::to_string_pretty(&map).expect("string map serializes") + "\n"
        }
    }
}

fn cmd_run(args: RunArgs) -> subscale::error::Result<()> {
    let graph = args.graph.load()?;
    let query = args.query.load()?;
    let ecfg = args.engine.config();

    if args.app == AppKind::Cc {
        if !args.iterative {
            return Err(Error::Config("--app cc requires --iterative".into()));
        }
        return cmd_run_cc(&args, &graph, &query);
    }
    if args.iterative {
        return Err(Error::Config("--iterative only applies to --app cc".into()));
    }
    if args.app == AppKind::Ffl && !graph.is_directed() {
        return Err(Error::Config(
            "--app ffl needs a directed graph; pass --directed".into(),
        ));
    }

    let solution = load_or_pack(&args.plan, &graph, &query, &args.pack)?;
    let partitions = materialize_partitions(&graph, &solution, &query)?;
    let run_one_pass = |program: &(dyn Fn(&SubgraphView<'_>) -> subscale::error::Result<String>
          + Sync)|
     -> subscale::error::Result<BTreeMap<VertexId, String>> {
        let mut all = BTreeMap::new();
        for part in &partitions {
            let out = subscale::engine::execute(part, program, &ecfg)?;
            if let Some((qv, err)) = out.errors.into_iter().next() {
                return Err(Error::ContractViolation(format!(
                    "program failed on query vertex {qv}: {err}"
                )));
            }
            all.extend(out.results);
        }
        Ok(all)
    };

    let results = match args.app {
        AppKind::Lcc => run_one_pass(&|view| Ok(apps::lcc(view).to_string()))?,
        AppKind::Tc => run_one_pass(&|view| Ok(apps::triangle_count(view).to_string()))?,
        AppKind::Wt => run_one_pass(&|view| Ok(apps::weak_ties(view).to_string()))?,
        AppKind::Ffl => run_one_pass(&|view| apps::motif_ffl(view).map(|c| c.to_string()))?,
        AppKind::Ppr => {
            let (walks, alpha, steps, seed, topk) =
                (args.walks, args.alpha, args.steps, args.pack.seed, args.topk);
            run_one_pass(&move |view| {
                let scores = apps::ppr_monte_carlo(view, walks, alpha, steps, seed)?;
                let mut ranked: Vec<(VertexId, f64)> = scores.into_iter().collect();
                ranked.sort_by(|a, b| {
                    b.1.partial_cmp(&a.1).expect("finite scores").then(a.0.cmp(&b.0))
                });
                if let Some(k) = topk {
                    ranked.truncate(k);
                }
                Ok(ranked
                    .iter()
                    .map(|(v, s)| format!("{v}:{s}"))
                    .collect::<Vec<_>>()
                    .join(";"))
            })?
        }
        AppKind::Cc => unreachable!("handled above"),
    };
    emit(&args.out, &format_scalar_results(&results, args.format))
}

fn cmd_run_cc(
    args: &RunArgs,
    graph: &PropertyGraph,
    query: &ExtractionQuery,
) -> subscale::error::Result<()> {
    let solution = match &args.plan {
        Some(_) => load_or_pack(&args.plan, graph, query, &args.pack)?,
        None => {
            // iterative default: capacity-unbounded bins sized to spread
            // the 1-hop subgraphs over --partitions
            let q = graph.vertex_count().max(1);
            let mut cfg = PackingConfig::new(u64::MAX, q.div_ceil(args.partitions.max(1)));
            cfg.seed = args.pack.seed;
            run_centralized(graph, query, &cfg, None)?
        }
    };
    let partitions = materialize_partitions(graph, &solution, query)?;
    let out = run_iterative(
        &partitions,
        &MinLabelProgram,
        &solution.ownership,
        args.max_supersteps,
        Convergence::Fixpoint,
    )?;
    if let Some(log) = &args.superstep_log {
        let mut rows = String::new();
        for t in &out.timings {
            rows.push_str(&serde_json::to_string(t).expect("timing serializes"));
            rows.push('\n');
        }
        fs::write(log, rows)?;
    }
    if !out.converged {
        return Err(Error::Consistency(format!(
            "did not converge within {} supersteps",
            args.max_supersteps
        )));
    }
    eprintln!(
        "converged in {} supersteps, {} cross-partition messages",
        out.supersteps, out.total_messages
    );
    emit(&args.out, &format_scalar_results(&out.labels, args.format))
}

fn load_or_pack(
    plan: &Option<PathBuf>,
    graph: &PropertyGraph,
    query: &ExtractionQuery,
    pack: &PackArgs,
) -> subscale::error::Result<PackingSolution> {
    match plan {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        None => run_centralized(graph, query, &pack.config(), None),
    }
}

fn cmd_bench(args: BenchArgs) -> subscale::error::Result<()> {
    let load_start = Instant::now();
    let graph = args.graph.load()?;
    let load_secs = load_start.elapsed().as_secs_f64();
    let query = args.query.load()?;
    let cfg = args.pack.config();
    let ecfg = args.engine.config();
    let spec = MeasureSpec {
        graph: &graph,
        query: &query,
        packing: &cfg,
        engine: &ecfg,
        shards: args.shards,
        load_secs,
    };
    let (walks, alpha, steps, seed) = (args.walks, args.alpha, args.steps, args.pack.seed);
    let report: RunReport = match args.app {
        AppKind::Lcc => measure_run(&spec, |view| Ok(apps::lcc(view)))?.0,
        AppKind::Tc => measure_run(&spec, |view| Ok(apps::triangle_count(view)))?.0,
        AppKind::Wt => measure_run(&spec, |view| Ok(apps::weak_ties(view)))?.0,
        AppKind::Ffl => measure_run(&spec, |view| apps::motif_ffl(view))?.0,
        AppKind::Ppr => {
            measure_run(&spec, move |view| {
                apps::ppr_monte_carlo(view, walks, alpha, steps, seed)
            })?
            .0
        }
        AppKind::Cc => {
            return Err(Error::Config(
                "bench covers one-pass apps; use `run --app cc --superstep-log` for BSP timings"
                    .into(),
            ))
        }
    };
    let content = match args.format {
        OutputFormat::Json => report.to_json() + "\n",
        OutputFormat::Tsv => report.to_tsv(),
    };
    emit(&args.out, &content)
}

fn cmd_compare(args: CompareArgs) -> subscale::error::Result<()> {
    let query = args.query.load()?;
    let cfg = PackingConfig::new(args.bc, args.max);
    let seeds: Vec<u64> = (0..args.seeds).collect();
    let (n, m, p) = (args.n, args.m, args.p);
    let fixture = |seed: u64| match args.fixture {
        FixtureKind::Ba => synth::barabasi_albert(n, m, seed),
        FixtureKind::Er => synth::erdos_renyi(n, p, seed),
    };
    let comparison: Comparison =
        compare_packing(fixture, &query, &cfg, &args.heuristics, &seeds)?;
    let content = match args.format {
        OutputFormat::Json => comparison.to_json() + "\n",
        OutputFormat::Tsv => comparison.to_tsv(),
    };
    emit(&args.out, &content)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::Parse { .. }
        | Error::UnresolvedReference { .. }
        | Error::UnknownElement { .. }
        | Error::UnknownAttribute { .. }
        | Error::UnsupportedRadius { .. }
        | Error::InstanceTooLarge { .. } => 2,
        Error::SubgraphTooLarge { .. }
        | Error::BudgetExceeded { .. }
        | Error::PartitionOverflow { .. } => 3,
        Error::ContractViolation(_) => 4,
        Error::Integrity(_) | Error::Consistency(_) | Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gep(args) => cmd_gep(args),
        Command::Run(args) => cmd_run(args),
        Command::Bench(args) => cmd_bench(args),
        Command::ComparePacking(args) => cmd_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
