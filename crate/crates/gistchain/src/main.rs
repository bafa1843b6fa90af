use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gistchain::config::{EngineConfig, Overrides};
use gistchain::core::SourceFormat;
use gistchain::index_store::{load_index, persist_index};
use gistchain::pipeline::{self, TaskSpec};
use gistchain::runlog::RunLog;
use gistchain::scoring;
use gistchain::search::LocalSearch;
use gistchain::store::{read_corpus, CorpusStore, GistMode};

#[derive(Parser)]
#[command(name = "gistchain", version, about = "Agentic retrieval over a local corpus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a JSON-lines corpus, build gists and the hybrid index.
    Index(IndexArgs),
    /// Run discovery for one task, a task file, or a depth sweep.
    Run(RunArgs),
    /// Answer from the context recorded in an existing run log.
    Answer(AnswerArgs),
    /// Score run-log answers against a gold file.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Html,
    PdfText,
    Plain,
}

#[derive(Clone, Copy, ValueEnum)]
enum GistModeArg {
    Llm,
    Truncation,
}

#[derive(Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scripted mock providers (JSON); replaces HTTP providers.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Freeze the clock at this many ms.
    #[arg(long)]
    deterministic_clock: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct IndexArgs {
    /// JSON-lines corpus: {"id"?, "url", "title"?, "text", "fetched_at"?}.
    corpus: PathBuf,
    /// Output directory for the store and index.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "plain")]
    format: Format,
    #[arg(long, value_enum)]
    gist_mode: Option<GistModeArg>,
    #[arg(long)]
    gist_budget: Option<usize>,
    #[arg(long)]
    pool_size: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct RunArgs {
    /// Directory written by `index`.
    #[arg(long)]
    index: Option<PathBuf>,
    /// Task text.
    #[arg(long, conflicts_with = "tasks")]
    task: Option<String>,
    #[arg(long, requires = "task")]
    task_id: Option<String>,
    /// JSON-lines task file: {"task_id", "task", "relevant"?}.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Run log path (single task) or directory (task file).
    #[arg(long, short, default_value = "runlog.json")]
    out: PathBuf,
    /// Also write the rendered context here (single task).
    #[arg(long)]
    context_out: Option<PathBuf>,
    /// Ask the downstream model for a final answer.
    #[arg(long)]
    answer: bool,
    /// Comma-separated depths; runs every task at each and prints coverage.
    #[arg(long, value_delimiter = ',', requires = "tasks")]
    sweep: Vec<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_intents: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    max_queries: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    context_budget: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct AnswerArgs {
    /// Run log with a recorded context.
    log: PathBuf,
    /// Where to write the updated log; defaults to overwriting the input.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold JSON lines: {"task_id", "answer", "metric"?}.
    #[arg(long)]
    gold: PathBuf,
    /// Run logs to score.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

fn overrides(common: &Common) -> Overrides {
    Overrides {
        mock_script: common.mock_script.clone(),
        deterministic_clock: common.deterministic_clock,
        workers: common.workers,
        ..Overrides::default()
    }
}

fn cmd_index(args: IndexArgs) -> Result<()> {
    let o = Overrides {
        gist_mode: args.gist_mode.map(|m| match m {
            GistModeArg::Llm => GistMode::Llm,
            GistModeArg::Truncation => GistMode::Truncation,
        }),
        gist_budget: args.gist_budget,
        pool_size: args.pool_size,
        index_dir: Some(args.out.clone()),
        ..overrides(&args.common)
    };
    let config = EngineConfig::resolve(args.common.config.as_deref(), &o)?;
    let format = match args.format {
        Format::Html => SourceFormat::Html,
        Format::PdfText => SourceFormat::PdfText,
        Format::Plain => SourceFormat::Plain,
    };
    let docs = read_corpus(&args.corpus, format)?;
    let gateway = config.gateway()?;
    let (store, index) = pipeline::build_corpus(docs, &gateway, &config)?;
    store.persist(&args.out)?;
    persist_index(&index, &args.out)?;
    let totals = gateway.ledger().totals();
    println!(
        "indexed {} documents into {}: {} terms, dimension {}, avg length {:.1} tokens, {} processing tokens",
        store.len(),
        args.out.display(),
        index.sparse().postings().len(),
        index.dimension(),
        index.sparse().avg_doc_length(),
        totals.processing_tokens
    );
    Ok(())
}

fn read_tasks(path: &Path) -> Result<Vec<TaskSpec>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("task line {}", i + 1)))
        .collect()
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let o = Overrides {
        max_depth: args.max_depth,
        max_intents: args.max_intents,
        top_k: args.top_k,
        max_queries: args.max_queries,
        alpha: args.alpha,
        context_budget: args.context_budget,
        index_dir: args.index.clone(),
        ..overrides(&args.common)
    };
    let config = EngineConfig::resolve(args.common.config.as_deref(), &o)?;
    let Some(dir) = config.index.dir.clone() else {
        bail!("no index directory: pass --index or set index.dir");
    };
    let store = CorpusStore::load(&dir)?;
    let index = load_index(&dir)?;
    let gateway = config.gateway()?;
    let search = LocalSearch::new(&store, &index, &gateway);

    if !args.sweep.is_empty() {
        let tasks = read_tasks(args.tasks.as_deref().expect("clap requires --tasks"))?;
        let report = pipeline::depth_sweep(&tasks, &args.sweep, &search, &config, |c| c.gateway())?;
        println!("depth\tcoverage\tmean_intents");
        for d in &report {
            println!("{}\t{:.4}\t{:.2}", d.depth, d.coverage, d.mean_intents);
        }
        std::fs::write(&args.out, serde_json::to_string_pretty(&report)? + "\n")?;
        return Ok(true);
    }

    if let Some(path) = &args.tasks {
        let tasks = read_tasks(path)?;
        std::fs::create_dir_all(&args.out)?;
        let mut ok = true;
        for t in &tasks {
            let gw = config.gateway()?;
            let search = LocalSearch::new(&store, &index, &gw);
            let log = pipeline::run_task(Some(t.task_id.clone()), &t.task, &search, &gw, &config, args.answer);
            let path = args.out.join(format!("{}.json", t.task_id));
            log.write(&path)?;
            report_run(&log, &path);
            ok &= log.error.is_none();
        }
        return Ok(ok);
    }

    let Some(task) = &args.task else {
        bail!("pass --task or --tasks");
    };
    let log = pipeline::run_task(args.task_id.clone(), task, &search, &gateway, &config, args.answer);
    log.write(&args.out)?;
    if let (Some(path), Some(ctx)) = (&args.context_out, &log.context) {
        std::fs::write(path, &ctx.rendered)?;
    }
    report_run(&log, &args.out);
    Ok(log.error.is_none())
}

fn report_run(log: &RunLog, path: &Path) {
    println!(
        "{}: {} intent(s), {} central call(s), reasoning {} / processing {} tokens -> {}",
        log.task_id.as_deref().unwrap_or(&log.run_id),
        log.intents.len(),
        log.central_calls,
        log.ledger.reasoning_tokens,
        log.ledger.processing_tokens,
        path.display()
    );
    if let Some(a) = &log.answer {
        println!("answer: {}", a.text);
    }
    if let Some(e) = &log.error {
        eprintln!("error: {e}");
    }
}

fn cmd_answer(args: AnswerArgs) -> Result<()> {
    let mut log = RunLog::load(&args.log)?;
    let ctx = match log.task_context() {
        Some(c) => c,
        None => log.replay_context()?,
    };
    let config = EngineConfig::resolve(args.common.config.as_deref(), &overrides(&args.common))?;
    let gateway = config.gateway()?;
    let answer = pipeline::answer(&ctx, &gateway)?;
    println!("{}", answer.text);
    log.answer = Some(answer);
    log.write(args.out.as_deref().unwrap_or(&args.log))?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let gold_text = std::fs::read_to_string(&args.gold).with_context(|| format!("reading {}", args.gold.display()))?;
    let gold = scoring::parse_gold(&gold_text).map_err(anyhow::Error::msg)?;
    let logs = args
        .logs
        .iter()
        .map(|p| RunLog::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    let report = scoring::score(&scoring::answers_from_logs(&logs), &gold);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = match Cli::parse().command {
        Command::Index(a) => cmd_index(a).map(|_| true),
        Command::Run(a) => cmd_run(a),
        Command::Answer(a) => cmd_answer(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
