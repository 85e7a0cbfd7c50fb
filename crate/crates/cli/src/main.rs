use std::io::{self, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oasrank::eval::{
    bundled_lexicon, run_retrieval_benchmark, BenchmarkConfig, BenchmarkReport, DegradeRates, Lexicon,
    QueryMode, DEFAULT_KS,
};
use oasrank::ingest::{parse_tree, SpecFormat};
use oasrank::rank::{Feature, FusionConfig, TextFeaturization, TreeFeaturization, DEFAULT_TOP_K};
use oasrank::{build_index, load_index, save_index, BuildConfig, CorpusIndex};
use oasrank_server::api::{draft_from_value, execute_query, ConfigOverride, QueryResponse};
use oasrank_server::{router, AppState, DEFAULT_TOP_K_MAX};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Recommend OpenAPI 2.0 endpoints from a draft.
#[derive(Debug, Parser)]
#[command(name = "oasrank", version)]
struct Cli {
    /// Worker threads for indexing and evaluation [default: available parallelism]
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build an index directory from a corpus of Swagger 2.0 files.
    Index(IndexArgs),
    /// Rank the indexed endpoints against a draft file ('-' for stdin).
    Query(QueryArgs),
    /// Run the masked/mangled retrieval benchmark.
    Evaluate(EvaluateArgs),
    /// Serve the /v1 HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct IndexArgs {
    corpus: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Document-frequency floor for both vocabularies (overrides the two below)
    #[arg(long)]
    min_df: Option<u32>,
    #[arg(long, default_value_t = 10)]
    tree_min_df: u32,
    #[arg(long, default_value_t = 15)]
    keyword_min_df: u32,
    /// JSON-lines sidecar of {"endpoint_name", "vector"} rows
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FusionArgs {
    /// FusionConfig JSON file; the flags below override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of tree,text,fuzzy
    #[arg(long, value_delimiter = ',', value_parser = parse_feature)]
    features: Option<Vec<Feature>>,
    #[arg(long, value_enum)]
    tree_feat: Option<TreeFeat>,
    #[arg(long, value_enum)]
    text_feat: Option<TextFeat>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TreeFeat {
    Tfidf,
    Ppmi,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TextFeat {
    Tfidf,
    Ppmi,
    Dense,
    Enriched,
}

fn parse_feature(s: &str) -> std::result::Result<Feature, String> {
    Feature::parse(s).ok_or_else(|| format!("unknown feature {s:?} (tree, text, fuzzy)"))
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    index: PathBuf,
    draft: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOP_K)]
    top_k: usize,
    #[command(flatten)]
    fusion: FusionArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long, default_value = "masked")]
    mode: QueryMode,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Synonym lexicon for mangling, `word<TAB>synonym` per line [default: bundled]
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Per-query JSON-lines log [default: eval-<mode>-<seed>.jsonl]
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    fusion: FusionArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long, default_value_t = DEFAULT_TOP_K_MAX)]
    top_k_max: usize,
    #[command(flatten)]
    fusion: FusionArgs,
}

impl FusionArgs {
    fn resolve(&self) -> Result<FusionConfig> {
        let base = match &self.config {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
                serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
            }
            None => FusionConfig::default(),
        };
        let o = ConfigOverride {
            enabled_features: self.features.clone(),
            tree_featurization: self.tree_feat.map(|t| match t {
                TreeFeat::Tfidf => TreeFeaturization::Tfidf,
                TreeFeat::Ppmi => TreeFeaturization::Ppmi,
            }),
            text_featurization: self.text_feat.map(|t| match t {
                TextFeat::Tfidf => TextFeaturization::Tfidf,
                TextFeat::Ppmi => TextFeaturization::Ppmi,
                TextFeat::Dense => TextFeaturization::Dense,
                TextFeat::Enriched => TextFeaturization::Enriched,
            }),
            ..Default::default()
        };
        o.apply(&base).map_err(|e| CliError::Usage(e.to_string()))
    }
}

fn open_index(dir: &Path) -> Result<CorpusIndex> {
    load_index(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value).map_err(CliError::data)?;
    writeln!(out).map_err(CliError::data)
}

fn cmd_index(args: &IndexArgs, format: Format) -> Result<()> {
    let mut config = BuildConfig {
        tree_min_df: args.tree_min_df,
        keyword_min_df: args.keyword_min_df,
        embeddings: args.embeddings.clone(),
        ..BuildConfig::default()
    };
    if let Some(n) = args.min_df {
        config.tree_min_df = n;
        config.keyword_min_df = n;
    }
    if config.tree_min_df == 0 || config.keyword_min_df == 0 {
        return Err(CliError::Usage("min-df must be at least 1".into()));
    }
    let index = build_index(&args.corpus, &config).map_err(|e| CliError::Data(format!("{}: {e}", args.corpus.display())))?;
    save_index(&index, &args.out).map_err(CliError::data)?;
    let stats = index.stats();
    match format {
        Format::Json => print_json(&serde_json::json!({
            "index": args.out, "stats": stats, "report": index.report,
        })),
        Format::Text => {
            println!("indexed {} into {}", args.corpus.display(), args.out.display());
            println!("  files      {} seen, {} parsed, {} skipped", stats.files_seen, stats.files_parsed, stats.files_skipped);
            println!("  endpoints  {}", stats.endpoints);
            println!("  vocab      {} tree, {} keyword", stats.tree_vocab, stats.keyword_vocab);
            println!("  ppmi nnz   {} tree, {} keyword", stats.ppmi_tree_nnz, stats.ppmi_keyword_nnz);
            println!("  quality    mean {:.3}, min {:.3}", stats.mean_quality, stats.min_quality);
            if stats.enriched_endpoints > 0 {
                println!("  enriched   {}", stats.enriched_endpoints);
            }
            for s in &index.report.skipped {
                println!("  skipped    {}: {}", s.path, s.reason);
            }
            Ok(())
        }
    }
}

fn read_draft(path: &Path) -> Result<serde_json::Value> {
    let (bytes, format) = if path == Path::new("-") {
        let mut buf = Vec::new();
        io::stdin().read_to_end(&mut buf).map_err(CliError::data)?;
        (buf, SpecFormat::Yaml)
    } else {
        let bytes = std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        (bytes, SpecFormat::from_path(path).unwrap_or(SpecFormat::Yaml))
    };
    parse_tree(&bytes, format).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn print_ranking(res: &QueryResponse) {
    let features: Vec<&str> = res.config.features().map(Feature::as_str).collect();
    print!("{:>4}  {:>6}  {:>7}", "rank", "id", "prob");
    for f in &features {
        print!("  {f:>6}");
    }
    println!("  {:>7}  name", "quality");
    for (i, r) in res.results.iter().enumerate() {
        let r = &r.result;
        print!("{:>4}  {:>6}  {:>7.4}", i + 1, r.endpoint_id, r.normalized_probability);
        for f in &features {
            print!("  {:>6.3}", r.feature_scores.get(*f).copied().unwrap_or(0.0));
        }
        println!("  {:>7.3}  {}", r.quality, r.name);
    }
}

fn cmd_query(args: &QueryArgs, format: Format) -> Result<()> {
    if args.top_k == 0 {
        return Err(CliError::Usage("top-k must be at least 1".into()));
    }
    let config = args.fusion.resolve()?;
    let index = open_index(&args.index)?;
    let draft = draft_from_value(&read_draft(&args.draft)?).map_err(CliError::data)?;
    let res = execute_query(&index, &draft, &config, args.top_k).map_err(|e| CliError::Usage(e.to_string()))?;
    match format {
        Format::Json => print_json(&res),
        Format::Text => {
            print_ranking(&res);
            Ok(())
        }
    }
}

fn cmd_evaluate(args: &EvaluateArgs, format: Format) -> Result<()> {
    let fusion = args.fusion.resolve()?;
    let index = open_index(&args.index)?;
    let loaded;
    let lexicon: &Lexicon = match &args.lexicon {
        Some(path) => {
            loaded = Lexicon::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            &loaded
        }
        None => bundled_lexicon(),
    };
    let config = BenchmarkConfig {
        n_queries: args.n,
        mode: args.mode,
        seed: args.seed,
        rates: DegradeRates::PAPER,
        lexicon,
        ks: DEFAULT_KS.to_vec(),
    };
    let report: BenchmarkReport =
        run_retrieval_benchmark(&index, &fusion, &config).map_err(|e| CliError::Usage(e.to_string()))?;
    let mode = serde_json::to_value(args.mode).map_err(CliError::data)?;
    let log_path = args.log.clone().unwrap_or_else(|| {
        PathBuf::from(format!("eval-{}-{}.jsonl", mode.as_str().unwrap_or("run"), args.seed))
    });
    let file = std::fs::File::create(&log_path).map_err(|e| CliError::Data(format!("{}: {e}", log_path.display())))?;
    report.write_jsonl(io::BufWriter::new(file)).map_err(CliError::data)?;
    match format {
        Format::Json => print_json(&serde_json::json!({
            "mode": report.mode, "seed": report.seed, "config": fusion,
            "metrics": report.metrics, "log": log_path,
        })),
        Format::Text => {
            println!("{} queries ({mode}), seed {}", report.metrics.queries, report.seed);
            for (k, r) in &report.metrics.recall_at {
                println!("  R@{k:<3} {r:.3}");
            }
            println!("log written to {}", log_path.display());
            Ok(())
        }
    }
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let terminate = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending().await,
        }
    };
    #[cfg(not(unix))]
    let terminate = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = terminate => {},
    }
    log::info!("shutting down");
}

fn cmd_serve(args: &ServeArgs, format: Format) -> Result<()> {
    if args.top_k_max == 0 {
        return Err(CliError::Usage("top-k-max must be at least 1".into()));
    }
    let config = args.fusion.resolve()?;
    let index = open_index(&args.index)?;
    let state = AppState {
        index: Some(Arc::new(index)),
        top_k_max: args.top_k_max,
        config,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(CliError::data)?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(args.listen)
            .await
            .map_err(|e| CliError::Data(format!("{}: {e}", args.listen)))?;
        let addr = listener.local_addr().map_err(CliError::data)?;
        match format {
            Format::Json => println!("{}", serde_json::json!({ "listening": addr.to_string() })),
            Format::Text => println!("listening on http://{addr}"),
        }
        io::stdout().flush().ok();
        axum::serve(listener, router(state))
            .with_graceful_shutdown(shutdown_signal())
            .await
            .map_err(CliError::data)
    })
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(CliError::data)?;
    }
    match &cli.command {
        Command::Index(a) => cmd_index(a, cli.format),
        Command::Query(a) => cmd_query(a, cli.format),
        Command::Evaluate(a) => cmd_evaluate(a, cli.format),
        Command::Serve(a) => cmd_serve(a, cli.format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let format = cli.format;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match format {
                Format::Json => eprintln!("{}", serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() })),
                Format::Text => eprintln!("oasrank: {e}"),
            }
            ExitCode::from(e.exit_code())
        }
    }
}
