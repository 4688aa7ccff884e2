//! Command-line front end: `collusion <subcommand>`.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::detect::{
    evaluate, read_report_file, run_detection, summarize, DetectConfig, DetectError, ReportFormat,
    Threshold,
};
use crate::features::{extract_pairs, write_features_csv, PairContext};
use crate::graph::{build_graph, export_graph, graph_features, ExportFormat, GraphConfig};
use crate::iforest::ForestParams;
use crate::ingest::{filter_active_players, load_dir, IngestError, LoadedDataset};
use crate::service::{self, ServiceConfig};
use crate::simulate::{generate, read_ground_truth, write_dataset, SimConfig, GROUND_TRUTH_FILE};

#[derive(Debug, Parser)]
#[command(
    name = "collusion",
    version,
    about = "Detect cross-team collusion in match telemetry"
)]
pub struct Cli {
    /// Print results and errors as JSON.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with planted colluding pairs.
    Simulate(SimulateArgs),
    /// Validate a dataset directory and report rejected matches.
    Ingest(DataArgs),
    /// Teammate/opponent pair statistics for a dataset.
    Stats(StatsArgs),
    /// Write pairwise features as CSV.
    Features(FeaturesArgs),
    /// Score opponent pairs and write the ranked report.
    Detect(DetectArgs),
    /// Export the social graph.
    Graph(GraphArgs),
    /// Compare a report with planted ground truth.
    Evaluate(EvaluateArgs),
    /// Run the review API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 2000)]
    players: usize,
    #[arg(long, default_value_t = 1000)]
    matches: usize,
    /// Planted colluding pairs.
    #[arg(long, default_value_t = 10)]
    colluders: usize,
    #[arg(long, default_value_t = 0.9)]
    strength: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    teams: usize,
    #[arg(long, default_value_t = 2)]
    team_size: usize,
    /// Opponent meetings per planted pair.
    #[arg(long, default_value_t = 6)]
    colluder_matches: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 3)]
    min_player_matches: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ContextArg {
    Opponent,
    Teammate,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 5)]
    min_shared: usize,
    #[arg(long, default_value_t = 3)]
    min_player_matches: usize,
    #[arg(long, value_enum, default_value_t = ContextArg::Opponent)]
    context: ContextArg,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    ScoreZero,
    TopK,
    Contamination,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    data: PathBuf,
    /// Minimum matches a pair shared as opponents.
    #[arg(long, default_value_t = 5)]
    min_shared: usize,
    #[arg(long, default_value_t = 3)]
    min_player_matches: usize,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 1000)]
    subsample: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Tree height limit (default: ceil(log2 subsample)).
    #[arg(long)]
    max_depth: Option<usize>,
    /// Fit on raw feature values instead of min-max scaled ones.
    #[arg(long)]
    no_scale: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::ScoreZero)]
    mode: ModeArg,
    /// Pairs flagged in top_k mode.
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Fraction flagged in contamination mode.
    #[arg(long, default_value_t = 0.01)]
    contamination: f64,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format (default: from the --out extension, else csv).
    #[arg(long, value_enum)]
    format: Option<ReportFormat>,
    /// Also save the fitted model.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GraphArgs {
    #[arg(long)]
    data: PathBuf,
    /// Minimum shared matches per edge.
    #[arg(long, default_value_t = 3)]
    min_matches: usize,
    /// Team count used to normalize rank closeness.
    #[arg(long, default_value_t = 20)]
    reference_teams: usize,
    #[arg(long, value_enum, default_value_t = ExportFormat::Json)]
    format: ExportFormat,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    report: PathBuf,
    /// Planted pairs CSV (default: ground_truth.csv next to the report).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    k: usize,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "COLL_REPORT")]
    report: Option<PathBuf>,
    #[arg(long, env = "COLL_DATA")]
    data: Option<PathBuf>,
    #[arg(long, env = "COLL_LISTEN", default_value = "127.0.0.1:8080")]
    listen: SocketAddr,
    #[arg(long, env = "COLL_VERDICTS", default_value = "verdicts.jsonl")]
    verdicts: PathBuf,
}

/// Parses `std::env::args`, runs the subcommand and maps errors to exit code 1.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(io::stderr)
        .init();
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                let msg = serde_json::json!({ "error": format!("{e:#}"), "kind": error_kind(&e) });
                eprintln!("{msg}");
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}

/// The reader of our stdout went away (`| head`); not worth reporting.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain()
        .filter_map(|c| c.downcast_ref::<io::Error>())
        .any(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    for cause in e.chain() {
        if let Some(IngestError::EmptyDataset { .. }) = cause.downcast_ref() {
            return "empty_dataset";
        }
        if let Some(DetectError::EmptyAfterFilter(_)) = cause.downcast_ref() {
            return "empty_after_filter";
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return "io";
        }
    }
    "error"
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    let json = cli.json;
    match cli.command {
        Command::Simulate(a) => simulate(a, json),
        Command::Ingest(a) => ingest(a, json),
        Command::Stats(a) => stats(a, json),
        Command::Features(a) => features(a),
        Command::Detect(a) => detect(a, json),
        Command::Graph(a) => graph(a),
        Command::Evaluate(a) => evaluate_cmd(a, json),
        Command::Serve(a) => serve(a),
    }
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(data: &Path) -> anyhow::Result<LoadedDataset> {
    let loaded = load_dir(data).with_context(|| format!("loading {}", data.display()))?;
    let r = &loaded.report;
    if r.matches_rejected > 0 || !r.malformed_lines.is_empty() {
        tracing::warn!(
            rejected = r.matches_rejected,
            malformed = r.malformed_lines.len(),
            "some matches were skipped"
        );
    }
    Ok(loaded)
}

/// Prints `value` as one JSON line, or `text` otherwise.
fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    if json {
        serde_json::to_writer(&mut out, value)?;
        writeln!(out)?;
    } else {
        write!(out, "{}", text())?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs, json: bool) -> anyhow::Result<()> {
    let cfg = SimConfig {
        num_players: a.players,
        num_matches: a.matches,
        colluder_pairs: a.colluders,
        colluder_strength: a.strength,
        seed: a.seed,
        teams_per_match: a.teams,
        team_size: a.team_size,
        colluder_matches: a.colluder_matches,
        ..SimConfig::default()
    };
    let (d, gt) = generate(&cfg)?;
    write_dataset(&d, &gt, &a.out)?;
    let summary = serde_json::json!({
        "out": a.out,
        "matches": d.matches().len(),
        "planted_pairs": gt.colluding_pairs.len(),
    });
    emit(json, &summary, || {
        format!(
            "wrote {} matches and {} planted pairs to {}\n",
            d.matches().len(),
            gt.colluding_pairs.len(),
            a.out.display()
        )
    })
}

fn ingest(a: DataArgs, json: bool) -> anyhow::Result<()> {
    let loaded = load(&a.data)?;
    let r = &loaded.report;
    emit(json, r, || {
        let mut s = format!(
            "accepted {} matches, rejected {}, malformed lines {}, players {}, friendships {} (rejected {})\n",
            r.matches_accepted,
            r.matches_rejected,
            r.malformed_lines.len(),
            r.players_seen,
            loaded.dataset.friendships().len(),
            loaded.friendships_rejected
        );
        for (id, v) in &r.violations {
            s += &format!("  {id}: {v:?}\n");
        }
        for (line, e) in &r.malformed_lines {
            s += &format!("  line {line}: {e}\n");
        }
        s
    })
}

fn stats(a: StatsArgs, json: bool) -> anyhow::Result<()> {
    let loaded = load(&a.data)?;
    let s = summarize(&loaded.dataset, a.min_player_matches);
    emit(json, &s, || {
        let rank = s
            .opponents
            .avg_rank_diff
            .map_or("n/a".to_owned(), |r| format!("{r:.2}"));
        format!(
            "matches {}  players {}  active {}\n\
             {:<36}{:>14}{:>14}\n\
             {:<36}{:>14}{:>14}\n\
             {:<36}{:>28}\n\
             {:<36}{:>14.1}{:>14.1}\n\
             {:<36}{:>14}{:>14}\n\
             {:<36}{:>14.2}{:>14.2}\n\
             {:<36}{:>14}{:>14}\n\
             {:<36}{:>14}{:>14}\n",
            s.matches,
            s.players,
            s.active_players,
            "",
            "teammates",
            "opponents",
            "pairs",
            s.teammates.pairs,
            s.opponents.pairs,
            "acquaintances",
            s.acquaintances,
            "avg matches together",
            s.teammates.avg_matches,
            s.opponents.avg_matches,
            "max matches together",
            s.teammates.max_matches,
            s.opponents.max_matches,
            "avg distance",
            s.teammates.avg_distance,
            s.opponents.avg_distance,
            "avg rank difference",
            "n/a",
            rank,
            "3+ consecutive matches",
            s.teammates.pairs_3plus_consecutive,
            s.opponents.pairs_3plus_consecutive,
        )
    })
}

fn features(a: FeaturesArgs) -> anyhow::Result<()> {
    let loaded = load(&a.data)?;
    let active = filter_active_players(&loaded.dataset, a.min_player_matches);
    let ctx = match a.context {
        ContextArg::Opponent => PairContext::Opponent,
        ContextArg::Teammate => PairContext::Teammate,
    };
    let rows = extract_pairs(&active, a.min_shared, ctx);
    write_features_csv(&rows, output(a.out.as_deref())?)?;
    Ok(())
}

fn detect(a: DetectArgs, json: bool) -> anyhow::Result<()> {
    let loaded = load(&a.data)?;
    let threshold = match a.mode {
        ModeArg::ScoreZero => Threshold::ScoreZero,
        ModeArg::TopK => Threshold::TopK(a.k),
        ModeArg::Contamination => Threshold::Contamination(a.contamination),
    };
    let cfg = DetectConfig {
        min_shared_matches: a.min_shared,
        min_player_matches: a.min_player_matches,
        forest: ForestParams {
            n_trees: a.trees,
            subsample: a.subsample,
            seed: a.seed,
            max_depth: a.max_depth,
            scale_features: !a.no_scale,
        },
        threshold,
        scale_features: !a.no_scale,
    };
    let det = run_detection(&loaded.dataset, &cfg)?;
    if let Some(path) = &a.model {
        std::fs::write(path, det.model.serialize())
            .with_context(|| format!("writing model {}", path.display()))?;
    }
    let format = a
        .format
        .or(a.out.as_deref().map(ReportFormat::from_path))
        .unwrap_or(ReportFormat::Csv);
    let mut out = output(a.out.as_deref())?;
    crate::detect::write_report(&det.report, format, &mut out)?;
    out.flush()?;
    if a.out.is_some() {
        let summary = serde_json::json!({ "scored": det.scored, "flagged": det.report.len() });
        emit(json, &summary, || {
            format!(
                "scored {} pairs, flagged {}\n",
                det.scored,
                det.report.len()
            )
        })?;
    }
    Ok(())
}

fn graph(a: GraphArgs) -> anyhow::Result<()> {
    let loaded = load(&a.data)?;
    let cfg = GraphConfig {
        min_matches: a.min_matches,
        reference_teams: a.reference_teams,
    };
    let active = filter_active_players(&loaded.dataset, 1);
    let g = build_graph(
        &loaded.dataset,
        &graph_features(&active, cfg.min_matches),
        &cfg,
    );
    let mut out = output(a.out.as_deref())?;
    out.write_all(&export_graph(&g, a.format))?;
    out.flush()?;
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs, json: bool) -> anyhow::Result<()> {
    let report = read_report_file(&a.report)
        .with_context(|| format!("reading report {}", a.report.display()))?;
    let truth_path = a.truth.unwrap_or_else(|| {
        a.report
            .parent()
            .unwrap_or(Path::new("."))
            .join(GROUND_TRUTH_FILE)
    });
    let gt = read_ground_truth(&truth_path)
        .with_context(|| format!("reading ground truth {}", truth_path.display()))?;
    let e = evaluate(&report, &gt, a.k);
    emit(json, &e, || {
        format!(
            "k={} planted_found={} recall={:.4} precision={:.4}\n",
            e.k, e.planted_found, e.recall_at_k, e.precision_at_k
        )
    })
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let cfg = ServiceConfig {
        listen: a.listen,
        report: a.report,
        data: a.data,
        verdicts: a.verdicts,
    };
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(service::serve(cfg))
}
