use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use provarc_core::graph::{normalize, parse_input, write_input};
use provarc_core::predictor::{ModelKind, PredictorConfig};
use provarc_core::query::{Direction, QueryError, QueryRequest, WarmState};
use provarc_core::synth::{generate, SynthConfig};
use provarc_core::{read_archive, store, StatsReport, StoreConfig, DEFAULT_LIMIT};
use serde_json::json;

const THREADS_VAR: &str = "PROVARC_THREADS";

#[derive(Parser)]
#[command(name = "provarc", version, about = "Compress, inspect and query provenance-graph archives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a JSONL graph file into an archive.
    Store(StoreArgs),
    /// Trace ancestors or descendants of one node.
    Query(QueryArgs),
    /// Print the size breakdown of an archive.
    Stats { archive: PathBuf },
    /// Write a synthetic JSONL graph with log-like attributes.
    Gen(GenArgs),
}

#[derive(Args)]
struct StoreArgs {
    input: PathBuf,
    output: PathBuf,
    /// Similarity window for attribute trees.
    #[arg(long, default_value_t = 4)]
    window: usize,
    /// Largest histogram distance stored as an edit script.
    #[arg(long, default_value_t = 60)]
    max_dist: u64,
    #[arg(long, value_enum, default_value_t = Model::Boosted)]
    model: Model,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 3)]
    estimators: usize,
    /// Preceding symbols the structure model sees.
    #[arg(long, default_value_t = 8)]
    predictor_window: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Constant,
    Tree,
    Boosted,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Constant => ModelKind::Constant,
            Model::Tree => ModelKind::DecisionTree,
            Model::Boosted => ModelKind::BoostedTrees,
        }
    }
}

#[derive(Args)]
struct QueryArgs {
    archive: PathBuf,
    /// External id of the start node.
    #[arg(long)]
    node: u64,
    #[arg(long, value_enum, default_value_t = Dir::Forward)]
    direction: Dir,
    /// Stop once this many nodes plus edges are collected.
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    limit: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Forward,
    Backward,
}

#[derive(Args)]
struct GenArgs {
    /// Output file, `-` for stdout.
    output: PathBuf,
    #[arg(long, default_value_t = 20)]
    templates: usize,
    /// Number of edge records.
    #[arg(long, default_value_t = 10_000)]
    records: usize,
    #[arg(long, default_value_t = 0.05)]
    mutation_rate: f64,
    /// Permute attributes across records to destroy locality.
    #[arg(long)]
    shuffle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// A query named something the archive does not contain.
#[derive(Debug)]
struct TargetError(String);

impl std::fmt::Display for TargetError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TargetError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<TargetError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("{THREADS_VAR} must be a positive integer, got {value:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Store(args) => cmd_store(&args),
        Command::Query(args) => cmd_query(&args),
        Command::Stats { archive } => cmd_stats(&archive),
        Command::Gen(args) => cmd_gen(&args),
    }
}

fn cmd_store(args: &StoreArgs) -> Result<()> {
    let t = Instant::now();
    let file = File::open(&args.input).with_context(|| format!("cannot open {}", args.input.display()))?;
    let input_bytes = file.metadata()?.len() as usize;
    let (nodes, edges) =
        parse_input(BufReader::new(file)).with_context(|| format!("cannot parse {}", args.input.display()))?;
    let graph = normalize(nodes, edges)?;
    let prep = t.elapsed();

    let config = StoreConfig {
        predictor: PredictorConfig {
            window: args.predictor_window,
            kind: args.model.into(),
            max_depth: args.depth,
            n_estimators: args.estimators,
            ..PredictorConfig::default()
        },
        similarity_window: args.window,
        max_dis: args.max_dist,
    };
    let out = store(&graph, &config)?;
    fs::write(&args.output, &out.bytes).with_context(|| format!("cannot write {}", args.output.display()))?;

    let mut report = out.report;
    report.times.prep = prep;
    report.input_bytes = Some(input_bytes);
    print_report(&report, &format!("{} nodes, {} edges", graph.node_count(), graph.edge_count()))
}

fn cmd_query(args: &QueryArgs) -> Result<()> {
    let bytes = fs::read(&args.archive).with_context(|| format!("cannot read {}", args.archive.display()))?;
    let archive = read_archive(&bytes).with_context(|| format!("cannot load {}", args.archive.display()))?;
    let state = WarmState::warm_up(archive).context("cannot reconstruct graph structure")?;
    let start = state
        .internal_node_id(args.node)
        .ok_or_else(|| TargetError(format!("node {} is not in the archive", args.node)))?;
    let direction = match args.direction {
        Dir::Forward => Direction::Forward,
        Dir::Backward => Direction::Backward,
    };
    let result = state.trace(&QueryRequest { start, direction, limit: args.limit }).map_err(|e| match e {
        QueryError::UnknownNode(_) | QueryError::InvalidLimit => anyhow::Error::new(TargetError(e.to_string())),
        other => anyhow::Error::new(other),
    })?;

    let mut out = BufWriter::new(io::stdout().lock());
    for n in &result.nodes {
        let line = json!({
            "type": "node",
            "id": state.external_node_id(n.id),
            "attr": String::from_utf8_lossy(&n.attr),
        });
        writeln!(out, "{line}")?;
    }
    for e in &result.edges {
        let line = json!({
            "type": "edge",
            "id": state.external_edge_id(e.id),
            "src": state.external_node_id(e.src),
            "dst": state.external_node_id(e.dst),
            "attr": String::from_utf8_lossy(&e.attr),
        });
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    eprintln!(
        "{} nodes, {} edges{}",
        result.nodes.len(),
        result.edges.len(),
        if result.truncated { ", truncated at limit" } else { "" }
    );
    Ok(())
}

fn cmd_stats(path: &Path) -> Result<()> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let report = StatsReport::from_archive_bytes(&bytes).with_context(|| format!("cannot load {}", path.display()))?;
    print_report(&report, &path.display().to_string())
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.mutation_rate) {
        bail!("--mutation-rate must be within [0, 1]");
    }
    let config = SynthConfig {
        templates: args.templates,
        records: args.records,
        mutation_rate: args.mutation_rate,
        shuffle: args.shuffle,
        seed: args.seed,
    };
    let (nodes, edges) = generate(&config);
    if args.output.as_os_str() == "-" {
        let out = BufWriter::new(io::stdout().lock());
        write_input(out, &nodes, &edges)?;
    } else {
        let file = File::create(&args.output).with_context(|| format!("cannot create {}", args.output.display()))?;
        let mut out = BufWriter::new(file);
        write_input(&mut out, &nodes, &edges)?;
        out.flush()?;
    }
    Ok(())
}

/// `key=value` lines on stdout, a readable table on stderr.
fn print_report(report: &StatsReport, title: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    for (k, v) in report.to_key_values() {
        writeln!(out, "{k}={v}")?;
    }
    out.flush()?;

    let total = report.total_bytes.max(1) as f64;
    let row = |name: &str, n: usize| format!("  {name:<18}{n:>12} B {:>7.2}%", n as f64 * 100.0 / total);
    let mut table = vec![
        title.to_string(),
        row("model", report.model_bytes),
        row("calibration", report.calibration_bytes),
        row("node tree", report.node_tree_bytes),
        row("edge tree", report.edge_tree_bytes),
        row("overhead", report.overhead_bytes),
        row("total", report.total_bytes),
    ];
    if let Some(ratio) = report.compression_ratio() {
        table.push(format!("  {:<18}{:>14.2}%", "of input", ratio * 100.0));
    }
    if let (Some(acc), Some(entries)) = (report.training_accuracy, report.calibration_entries) {
        table.push(format!("  accuracy {acc:.4}, {entries} corrections over {} symbols", report.stream_length));
    }
    if report.times.total() > std::time::Duration::ZERO {
        let t = &report.times;
        table.push(format!(
            "  time (ms): prep {:.1} | vectorize {:.1} | train {:.1} | calibrate {:.1} | similarity {:.1} | tree {:.1}",
            t.prep.as_secs_f64() * 1e3,
            t.vectorize.as_secs_f64() * 1e3,
            t.train.as_secs_f64() * 1e3,
            t.calibrate.as_secs_f64() * 1e3,
            t.similarity.as_secs_f64() * 1e3,
            t.tree.as_secs_f64() * 1e3,
        ));
    }
    eprintln!("{}", table.join("\n"));
    Ok(())
}
