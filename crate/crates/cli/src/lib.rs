//! Command surface: `run`, `eval`, `compare`, `replay` and `queries`.
//!
//! Exit codes: 0 on success (abstention included), 1 when a run aborts, a
//! trace fails to load, replay diverges or credentials are missing, 2 on
//! usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use mechsynth::pipeline::live::live_suite;
use mechsynth::pipeline::{run_query, ClientMode, ClientSuite, FixtureCorpus, Query, RecordedClient, RunOutput};
use mechsynth::queries::{find_query, query_set};
use mechsynth::strategies::StrategyKind;
use mechsynth::trace::{
    compare_runs, load_released, metrics_table, read_trace, read_trace_file, replay, to_canonical_string,
    write_trace_file, AdaptedTrace, DropMode, RunStatus, TraceRecord,
};
use mechsynth::traversal::LensSpec;
use mechsynth::{Error, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mechsynth", version, about = "Graph-constrained mechanistic hypothesis synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the pipeline on one or more queries and write traces and reports.
    Run(RunArgs),
    /// Recompute per-query behavioral metrics from traces.
    Eval(EvalArgs),
    /// Aggregate traces into a per-strategy comparison table.
    Compare(CompareArgs),
    /// Re-execute a trace against its recorded exchanges and list divergences.
    Replay(ReplayArgs),
    /// List the bundled benchmark queries.
    Queries(QueriesArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Full,
    Shortest,
    Walk,
    Rag,
}

impl From<StrategyArg> for StrategyKind {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Full => StrategyKind::FullDiversity,
            StrategyArg::Shortest => StrategyKind::ShortestPath,
            StrategyArg::Walk => StrategyKind::RandomWalk,
            StrategyArg::Rag => StrategyKind::RagBaseline,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mock,
    Recorded,
    Live,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SetArg {
    Core,
    Extended,
    All,
}

impl SetArg {
    fn as_str(self) -> &'static str {
        match self {
            SetArg::Core => "core",
            SetArg::Extended => "extended",
            SetArg::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DropModeArg {
    PerRun,
    RatioOfMeans,
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Free-text research question.
    pub query: Option<String>,
    /// Bundled query id (repeatable), e.g. Q6 or BIO-2.
    #[arg(long = "query-id")]
    pub query_ids: Vec<String>,
    /// Every bundled query of a set.
    #[arg(long, value_enum)]
    pub set: Option<SetArg>,
    /// JSON run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Path strategy (repeatable; each query runs once per strategy).
    #[arg(long, value_enum)]
    pub strategy: Vec<StrategyArg>,
    /// Paths requested per endpoint pair.
    #[arg(long)]
    pub k: Option<usize>,
    /// Maximum node-set Jaccard between kept paths.
    #[arg(long)]
    pub overlap_threshold: Option<f64>,
    /// Documents retrieved per query.
    #[arg(long)]
    pub max_papers: Option<usize>,
    /// Conceptual lens label injected into the graph.
    #[arg(long)]
    pub lens: Option<String>,
    /// Client mode (mock by default).
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Seed for both the run and the path strategy.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Zero timestamps so traces are byte-comparable.
    #[arg(long)]
    pub deterministic: bool,
    /// Output directory for traces, reports, metrics.csv and summary.txt.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fixture corpus directory for mock mode (bundled corpus otherwise).
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// Trace whose exchanges answer every call in recorded mode.
    #[arg(long)]
    pub exchanges: Option<PathBuf>,
    /// Run independent queries on separate threads.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Trace files or directories of traces.
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct CompareArgs {
    /// Trace files or directories of traces.
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    /// Rows to emit, in order (every strategy by default).
    #[arg(long, value_enum)]
    pub strategy: Vec<StrategyArg>,
    #[arg(long, value_enum, default_value = "per-run")]
    pub drop_mode: DropModeArg,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct ReplayArgs {
    pub trace: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct QueriesArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub set: SetArg,
}

/// Parses `args` and executes the command, writing to the given streams.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Eval(a) => cmd_eval(a, out, err),
        Command::Compare(a) => cmd_compare(a, out, err),
        Command::Replay(a) => cmd_replay(a, out, err),
        Command::Queries(a) => cmd_queries(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::InvalidArgument(_) => EXIT_USAGE,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn build_config(a: &RunArgs) -> mechsynth::Result<RunConfig> {
    let mut c = match &a.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(k) = a.k {
        c.strategy.k = k;
    }
    if let Some(t) = a.overlap_threshold {
        c.strategy.overlap_threshold = t;
    }
    if let Some(n) = a.max_papers {
        c.max_papers = n;
    }
    if let Some(lens) = &a.lens {
        c.lens = Some(LensSpec::new(lens.clone()));
    }
    if let Some(mode) = a.mode {
        c.mode = match mode {
            ModeArg::Mock => ClientMode::Mock,
            ModeArg::Recorded => ClientMode::Recorded,
            ModeArg::Live => ClientMode::Live,
        };
    }
    if let Some(seed) = a.seed {
        c.seed = seed;
        c.strategy.seed = seed;
    }
    if a.deterministic {
        c.deterministic = true;
    }
    c.validate()?;
    Ok(c)
}

fn selected_queries(a: &RunArgs) -> mechsynth::Result<Vec<Query>> {
    let mut queries = Vec::new();
    if let Some(text) = &a.query {
        queries.push(Query::adhoc(text.clone()));
    }
    for id in &a.query_ids {
        let spec = find_query(id).ok_or_else(|| Error::InvalidArgument(format!("no bundled query `{id}`")))?;
        queries.push(spec.query());
    }
    if let Some(set) = a.set {
        queries.extend(query_set(set.as_str()).iter().map(|q| q.query()));
    }
    if queries.is_empty() {
        return Err(Error::InvalidArgument(
            "give a query, --query-id or --set (see `mechsynth queries`)".into(),
        ));
    }
    Ok(queries)
}

/// Client suite for the configured mode. Live credentials are checked here,
/// before any query runs.
fn build_suite(a: &RunArgs, mode: ClientMode) -> mechsynth::Result<ClientSuite> {
    match mode {
        ClientMode::Mock => {
            let corpus = match &a.fixture {
                Some(dir) => FixtureCorpus::from_dir(dir)?,
                None => FixtureCorpus::bundled(),
            };
            Ok(corpus.suite())
        }
        ClientMode::Recorded => {
            let path = a
                .exchanges
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("recorded mode needs --exchanges TRACE".into()))?;
            Ok(RecordedClient::suite(&read_trace_file(path)?.exchanges))
        }
        ClientMode::Live => live_suite(),
    }
}

fn artifact_stem(query_id: &str, kind: StrategyKind) -> String {
    format!("{query_id}.{}", kind.as_str())
}

fn summary_line(out: &RunOutput) -> String {
    let t = &out.trace;
    let head = format!("{} [{}]", t.query_id, t.config.strategy.kind.as_str());
    match (&t.status, &out.report) {
        (RunStatus::Aborted { stage, message, .. }, _) => format!("{head}: ABORTED at {stage}: {message}"),
        (_, Some(r)) => {
            let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}"));
            format!(
                "{head}: {} hypotheses, d_sym {:.2}, d_ground {:.2}, drop {}, failure {}, bridge {}{}",
                r.n_hypotheses,
                r.d_sym,
                r.d_ground,
                opt(r.drop_rate),
                opt(r.failure_rate),
                if r.bridge_attempted { "yes" } else { "no" },
                if r.abstention { ", ABSTAINED" } else { "" }
            )
        }
        (_, None) => format!("{head}: no report"),
    }
}

fn cmd_run(a: RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> mechsynth::Result<i32> {
    let base = build_config(&a)?;
    let queries = selected_queries(&a)?;
    let suite = build_suite(&a, base.mode)?;
    let kinds: Vec<StrategyKind> = if a.strategy.is_empty() {
        vec![base.strategy.kind]
    } else {
        a.strategy.iter().map(|&s| s.into()).collect()
    };
    let jobs: Vec<(Query, RunConfig)> = queries
        .iter()
        .flat_map(|q| {
            kinds.iter().map(|&kind| {
                let mut c = base.clone();
                c.strategy.kind = kind;
                (q.clone(), c)
            })
        })
        .collect();

    let results: Vec<mechsynth::Result<RunOutput>> = if a.parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(q, c)| {
                    let suite = &suite;
                    s.spawn(move || run_query(q, c, suite))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
        })
    } else {
        jobs.iter().map(|(q, c)| run_query(q, c, &suite)).collect()
    };

    let out_dir = a
        .out
        .clone()
        .or_else(|| base.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("mechsynth-runs"));
    std::fs::create_dir_all(&out_dir)?;
    let mut code = EXIT_OK;
    let mut summary = String::new();
    let mut records = Vec::new();
    for result in results {
        let output = result?;
        let stem = artifact_stem(&output.trace.query_id, output.trace.config.strategy.kind);
        write_trace_file(&output.trace, &out_dir.join(format!("{stem}.trace.json")))?;
        if let Some(report) = &output.report {
            let json = to_canonical_string(&serde_json::to_value(report)?);
            std::fs::write(out_dir.join(format!("{stem}.report.json")), json)?;
        }
        if output.trace.is_aborted() {
            code = EXIT_FAILURE;
        }
        let line = summary_line(&output);
        writeln!(out, "{line}")?;
        summary.push_str(&line);
        summary.push('\n');
        records.push(output.trace);
    }
    let completed: Vec<TraceRecord> = records.into_iter().filter(|r| !r.is_aborted()).collect();
    std::fs::write(out_dir.join("metrics.csv"), metrics_table(&completed).to_csv()?)?;
    std::fs::write(out_dir.join("summary.txt"), summary)?;
    writeln!(err, "artifacts written to {}", out_dir.display())?;
    Ok(code)
}

/// A trace read natively, or through the adapter when it carries another
/// implementation's schema.
pub struct LoadedTrace {
    pub path: PathBuf,
    pub record: TraceRecord,
    pub adapted: Option<AdaptedTrace>,
}

pub fn load_any(path: &Path) -> mechsynth::Result<LoadedTrace> {
    let text = std::fs::read_to_string(path)?;
    match read_trace(text.as_bytes()) {
        Ok(record) => Ok(LoadedTrace {
            path: path.to_path_buf(),
            record,
            adapted: None,
        }),
        Err(Error::SchemaVersion(v)) if v == "<missing>" => {
            let adapted = load_released(path)?;
            Ok(LoadedTrace {
                path: path.to_path_buf(),
                record: adapted.record.clone(),
                adapted: Some(adapted),
            })
        }
        Err(e) => Err(e),
    }
}

/// Files named directly, plus the `.json` files of named directories
/// (one level of subdirectories included), in sorted order.
pub fn expand_inputs(inputs: &[PathBuf]) -> mechsynth::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            files.extend(
                mechsynth::trace::released_trace_files(input)?
                    .into_iter()
                    .filter(|p| !p.to_string_lossy().ends_with(".report.json")),
            );
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

/// Loads every input, naming the ones that fail. Returns the loaded traces
/// and whether any failed.
fn load_all(inputs: &[PathBuf], err: &mut dyn Write) -> mechsynth::Result<(Vec<LoadedTrace>, bool)> {
    let mut loaded = Vec::new();
    let mut failed = false;
    for path in expand_inputs(inputs)? {
        match load_any(&path) {
            Ok(t) => loaded.push(t),
            Err(e) => {
                failed = true;
                writeln!(err, "skipping {}: {e}", path.display())?;
            }
        }
    }
    Ok((loaded, failed))
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> mechsynth::Result<i32> {
    let (loaded, failed) = load_all(&a.traces, err)?;
    for t in &loaded {
        if let Some(adapted) = &t.adapted {
            if !adapted.unmapped_fields.is_empty() {
                writeln!(err, "{}: unmapped fields: {}", t.path.display(), adapted.unmapped_fields.join(", "))?;
            }
        }
    }
    let records: Vec<TraceRecord> = loaded.into_iter().map(|t| t.record).collect();
    let table = metrics_table(&records);
    write!(out, "{}", table.to_text())?;
    if let Some(path) = &a.csv {
        std::fs::write(path, table.to_csv()?)?;
    }
    Ok(if failed || records.is_empty() { EXIT_FAILURE } else { EXIT_OK })
}

fn cmd_compare(a: CompareArgs, out: &mut dyn Write, err: &mut dyn Write) -> mechsynth::Result<i32> {
    let (loaded, failed) = load_all(&a.traces, err)?;
    let records: Vec<TraceRecord> = loaded.into_iter().map(|t| t.record).collect();
    let requested: Vec<StrategyKind> = if a.strategy.is_empty() {
        StrategyKind::ALL.to_vec()
    } else {
        a.strategy.iter().map(|&s| s.into()).collect()
    };
    let mode = match a.drop_mode {
        DropModeArg::PerRun => DropMode::PerRun,
        DropModeArg::RatioOfMeans => DropMode::RatioOfMeans,
    };
    let table = compare_runs(&records, &requested, mode);
    write!(out, "{}", table.to_text())?;
    if let Some(path) = &a.csv {
        std::fs::write(path, table.to_csv()?)?;
    }
    Ok(if failed || table.rows.is_empty() { EXIT_FAILURE } else { EXIT_OK })
}

fn cmd_replay(a: ReplayArgs, out: &mut dyn Write, err: &mut dyn Write) -> mechsynth::Result<i32> {
    let loaded = load_any(&a.trace)?;
    let report_json = |r: &Option<mechsynth::metrics::BehavioralReport>| -> mechsynth::Result<String> {
        Ok(to_canonical_string(&serde_json::to_value(r)?))
    };
    if let Some(adapted) = &loaded.adapted {
        writeln!(out, "foreign trace `{}` read through the compatibility adapter", loaded.record.query_id)?;
        if let Some((n, e)) = adapted.graph_stats() {
            writeln!(out, "graph: {n} nodes, {e} edges")?;
        }
        writeln!(out, "stored metrics: {:?}", adapted.stored)?;
        write!(out, "recomputed report:\n{}", report_json(&loaded.record.report)?)?;
        if adapted.unmapped_fields.is_empty() {
            writeln!(out, "unmapped fields: none")?;
        } else {
            writeln!(out, "unmapped fields:")?;
            for f in &adapted.unmapped_fields {
                writeln!(out, "  {f}")?;
            }
        }
        return Ok(EXIT_OK);
    }
    match replay(&loaded.record) {
        Ok(outcome) => {
            write!(out, "recomputed report:\n{}", report_json(&outcome.report)?)?;
            if outcome.divergences.is_empty() {
                writeln!(out, "replay matches the stored trace")?;
                Ok(EXIT_OK)
            } else {
                writeln!(out, "divergences:")?;
                for d in &outcome.divergences {
                    writeln!(out, "  {d}")?;
                }
                Ok(EXIT_FAILURE)
            }
        }
        Err(Error::MissingExchange(call)) => {
            writeln!(err, "replay needs exchange `{call}`, which the trace does not contain")?;
            Ok(EXIT_FAILURE)
        }
        Err(e) => Err(e),
    }
}

fn cmd_queries(a: QueriesArgs, out: &mut dyn Write) -> mechsynth::Result<i32> {
    for q in query_set(a.set.as_str()) {
        writeln!(out, "{:<7} {:<9} {}", q.id, q.set, q.text)?;
    }
    Ok(EXIT_OK)
}
