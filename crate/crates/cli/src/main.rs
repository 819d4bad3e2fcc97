use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ecp_core::autoformalize::{autoformalize, Funnel, InformalProblem, Retrieval};
use ecp_core::config::EcpConfig;
use ecp_core::conjecture::conjecture;
use ecp_core::enumerate::enumerate;
use ecp_core::eval::references::render_references;
use ecp_core::eval::{dedup, split_after_cutoff, DedupConfig, Method, ReportFormat, RunReport};
use ecp_core::kb::{default_allowlist, filter_namespaces, ingest, KbIndex};
use ecp_core::pipeline::{build_report, solve_all, Services, TaskRun};
use ecp_core::problem::{load_corpus, save_corpus, substitute_answer};
use ecp_core::prompts::PromptSet;
use ecp_core::prove::prove;
use ecp_core::runlog::{write_json, RunLog};
use ecp_core::services::{embedder, replay_services, resolve_config, FixtureLayout, LiveServices};
use ecp_core::{par, AnswerConstructionTask};

/// Enumerate-conjecture-prove pipeline for Lean answer-construction problems.
#[derive(Parser, Debug)]
#[command(name = "ecp", version)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fixture directory; all model, sandbox and Lean traffic is answered from it.
    #[arg(long, global = true, value_name = "DIR")]
    replay: Option<PathBuf>,
    /// Call the live services and record every exchange into the --replay directory.
    #[arg(long, global = true, requires = "replay")]
    record: bool,
    /// Worker threads for per-task parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Run identifier used for log and report paths.
    #[arg(long, global = true)]
    run_id: Option<String>,
    /// Directory holding prompt overrides (`<name>.md`).
    #[arg(long, global = true)]
    prompts: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Translate informal problems into formal answer-construction tasks.
    Formalize(FormalizeArgs),
    /// Run only the enumeration stage.
    Enumerate(TaskArgs),
    /// Run enumeration (unless --no-hints) and conjecturing.
    Conjecture {
        #[command(flatten)]
        tasks: TaskArgs,
        #[arg(long)]
        no_hints: bool,
    },
    /// Prove a task with a given answer substituted.
    Prove {
        #[command(flatten)]
        tasks: TaskArgs,
        #[arg(long)]
        candidate: String,
    },
    /// Solve every task with one method and emit a report.
    Solve {
        #[command(flatten)]
        tasks: TaskArgs,
        #[arg(long, value_enum, default_value_t = MethodArg::Ecp)]
        method: MethodArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Solve with both methods and emit a combined report with union accuracy.
    Evaluate {
        #[command(flatten)]
        tasks: TaskArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Dataset tooling.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Declaration index tooling.
    #[command(subcommand)]
    Kb(KbCommand),
    /// Re-emit saved reports, verifying their aggregates.
    Report {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Args, Debug)]
struct FormalizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Directory for per-problem traces.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Declaration index used for identifier suggestions.
    #[arg(long)]
    kb: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TaskArgs {
    /// Task corpus (JSONL); defaults to the fixture directory's corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Restrict to these task ids.
    #[arg(long = "task")]
    task_ids: Vec<String>,
}

#[derive(Args, Debug)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Markdown)]
    format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Append the published full-scale reference table.
    #[arg(long)]
    references: bool,
}

#[derive(Subcommand, Debug)]
enum DatasetCommand {
    /// Remove exact and near-duplicate problems.
    Dedup {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold: Option<f64>,
        /// Write removed groups as JSON.
        #[arg(long)]
        groups: Option<PathBuf>,
    },
    /// Keep records created strictly after the cutoff date.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// ISO date; defaults to the configured cutoff.
        #[arg(long)]
        cutoff: Option<chrono::NaiveDate>,
    },
}

#[derive(Subcommand, Debug)]
enum KbCommand {
    /// Build a vector index from a declaration dump.
    Build {
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Skip the namespace allowlist.
        #[arg(long)]
        all_namespaces: bool,
    },
    /// Nearest declarations by embedding or by name edit distance.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, conflicts_with = "symbol", required_unless_present = "symbol")]
        text: Option<String>,
        #[arg(long)]
        symbol: Option<String>,
        #[arg(short, default_value_t = 5)]
        k: usize,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Ecp,
    Cot,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Ecp => Method::Ecp,
            MethodArg::Cot => Method::Cot,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Markdown,
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Markdown => ReportFormat::Markdown,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

/// Exit 2: the run could not start or its inputs are unusable.
#[derive(Debug)]
struct SetupFailure(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for SetupFailure {
    fn from(e: E) -> Self {
        SetupFailure(e.into())
    }
}

enum Outcome {
    Clean,
    PipelineFailures(usize),
}

struct Ctx {
    cli_config: Option<PathBuf>,
    layout: Option<FixtureLayout>,
    record: bool,
    config: EcpConfig,
    jobs: usize,
    run_id: String,
    prompts: PromptSet,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self, SetupFailure> {
        let layout = cli.replay.as_ref().map(FixtureLayout::new);
        let config = resolve_config(cli.config.as_deref(), layout.as_ref())?;
        let jobs = cli.jobs.unwrap_or(config.jobs);
        if jobs == 0 {
            return Err(anyhow!("--jobs must be at least 1").into());
        }
        let run_id = match (&cli.run_id, &layout) {
            (Some(id), _) => id.clone(),
            // replay output must not depend on the clock
            (None, Some(_)) if !cli.record => "replay".to_string(),
            _ => chrono::Local::now().format("%Y%m%d-%H%M%S").to_string(),
        };
        let prompts = match &cli.prompts {
            Some(dir) => PromptSet::with_overrides(dir).context("loading prompt overrides")?,
            None => PromptSet::builtin(),
        };
        Ok(Self {
            cli_config: cli.config.clone(),
            layout,
            record: cli.record,
            config,
            jobs,
            run_id,
            prompts,
        })
    }

    fn replaying(&self) -> bool {
        self.layout.is_some() && !self.record
    }

    fn services(&self) -> Result<(Services, Option<LiveServices>), SetupFailure> {
        match &self.layout {
            Some(layout) if !self.record => Ok((replay_services(layout, self.prompts.clone())?, None)),
            layout => {
                let live = LiveServices::new(&self.config, layout.as_ref(), self.prompts.clone())?;
                Ok((live.services.clone(), Some(live)))
            }
        }
    }

    fn tasks(&self, args: &TaskArgs) -> Result<Vec<AnswerConstructionTask>, SetupFailure> {
        let path = match (&args.corpus, &self.layout) {
            (Some(p), _) => p.clone(),
            (None, Some(l)) => l.corpus(),
            (None, None) => return Err(anyhow!("no corpus: pass --corpus or --replay").into()),
        };
        let records = load_corpus(&path)?;
        let mut tasks: Vec<_> = records.into_iter().map(|r| r.task).collect();
        if !args.task_ids.is_empty() {
            if let Some(missing) = args.task_ids.iter().find(|id| !tasks.iter().any(|t| &&t.id == id)) {
                return Err(anyhow!("task {missing} is not in {}", path.display()).into());
            }
            tasks.retain(|t| args.task_ids.contains(&t.id));
        }
        Ok(tasks)
    }

    fn runlog(&self) -> RunLog {
        RunLog::new(&self.config.runs_dir, &self.run_id)
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), SetupFailure> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_report(report: &RunReport, output: &OutputArgs) -> Result<(), SetupFailure> {
    let mut text = report.emit(output.format.into())?;
    if output.references && matches!(output.format, FormatArg::Markdown) {
        text.push('\n');
        text.push_str(&render_references());
    }
    emit(&text, output.out.as_deref())
}

fn json_line<T: serde::Serialize>(value: &T) -> Result<(), SetupFailure> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(&s, None)
}

fn failures(runs: &[TaskRun]) -> Outcome {
    match runs.iter().filter(|r| r.stage_error.is_some()).count() {
        0 => Outcome::Clean,
        n => Outcome::PipelineFailures(n),
    }
}

fn finish(live: Option<LiveServices>) -> Result<(), SetupFailure> {
    if let Some(l) = live {
        l.finish()?;
    }
    Ok(())
}

fn solve_method(ctx: &Ctx, tasks: &[AnswerConstructionTask], method: Method) -> Result<(RunReport, Outcome), SetupFailure> {
    let (services, live) = ctx.services()?;
    let log = ctx.runlog();
    let runs = solve_all(tasks, method, &services, &ctx.config, Some(&log), ctx.jobs);
    finish(live)?;
    let report = build_report(&ctx.run_id, &ctx.config, tasks.len(), &runs)?;
    Ok((report, failures(&runs)))
}

fn run(cli: Cli) -> Result<Outcome, SetupFailure> {
    let ctx = Ctx::new(&cli)?;
    log::debug!(
        "config {:?}, run {}, replay {}",
        ctx.cli_config,
        ctx.run_id,
        ctx.replaying()
    );
    match &cli.command {
        Command::Solve { tasks, method, output } => {
            let tasks = ctx.tasks(tasks)?;
            let method = Method::from(*method);
            let (report, outcome) = solve_method(&ctx, &tasks, method)?;
            let name = format!("report-{}.json", method.label().to_lowercase());
            ctx.runlog().write_file(&name, &report.to_json())?;
            emit_report(&report, output)?;
            Ok(outcome)
        }
        Command::Evaluate { tasks, output } => {
            let tasks = ctx.tasks(tasks)?;
            let (cot, a) = solve_method(&ctx, &tasks, Method::Cot)?;
            let (ecp, b) = solve_method(&ctx, &tasks, Method::Ecp)?;
            let report = RunReport::merge(&ctx.run_id, &[cot, ecp])?;
            ctx.runlog().write_file("report.json", &report.to_json())?;
            emit_report(&report, output)?;
            Ok(match (a, b) {
                (Outcome::PipelineFailures(x), Outcome::PipelineFailures(y)) => Outcome::PipelineFailures(x + y),
                (Outcome::PipelineFailures(x), _) | (_, Outcome::PipelineFailures(x)) => Outcome::PipelineFailures(x),
                _ => Outcome::Clean,
            })
        }
        Command::Report { inputs, output } => {
            let reports = inputs
                .iter()
                .map(|p| {
                    let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    RunReport::from_json(&text).with_context(|| format!("loading {}", p.display()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let report = match reports.as_slice() {
                [one] => one.clone(),
                many => RunReport::merge(&ctx.run_id, many)?,
            };
            emit_report(&report, output)?;
            Ok(Outcome::Clean)
        }
        Command::Enumerate(args) => {
            let tasks = ctx.tasks(args)?;
            let (services, live) = ctx.services()?;
            let log = ctx.runlog();
            let results = par::with_pool(ctx.jobs, || {
                par::map(&tasks, |t| {
                    let r = enumerate(t, &*services.llm, &*services.sandbox, &services.prompts, &ctx.config.enumerate);
                    match &r {
                        Ok(out) => log.write_stage(&t.id, "enumerate", out),
                        Err(e) => log.write_stage(&t.id, "enumerate", &e.partial),
                    }
                    r.map_err(|e| format!("{}: enumerate: {}", t.id, e.cause))
                })
            });
            finish(live)?;
            let mut failed = 0;
            for r in results {
                match r {
                    Ok(out) => json_line(&serde_json::json!({
                        "status": out.status,
                        "attempts_used": out.attempts_used,
                        "answers": out.answers,
                    }))?,
                    Err(e) => {
                        failed += 1;
                        eprintln!("{e}");
                    }
                }
            }
            Ok(if failed == 0 { Outcome::Clean } else { Outcome::PipelineFailures(failed) })
        }
        Command::Conjecture { tasks, no_hints } => {
            let tasks = ctx.tasks(tasks)?;
            let (services, live) = ctx.services()?;
            let results = par::with_pool(ctx.jobs, || {
                par::map(&tasks, |t| -> Result<_, String> {
                    let hints = if *no_hints {
                        None
                    } else {
                        Some(
                            enumerate(t, &*services.llm, &*services.sandbox, &services.prompts, &ctx.config.enumerate)
                                .map_err(|e| format!("{}: enumerate: {}", t.id, e.cause))?,
                        )
                    };
                    conjecture(t, hints.as_ref(), &*services.llm, &*services.lean, &services.prompts, &ctx.config.conjecture)
                        .map(|out| (t.id.clone(), out))
                        .map_err(|e| format!("{}: conjecture: {}", t.id, e.cause))
                })
            });
            finish(live)?;
            let mut failed = 0;
            for r in results {
                match r {
                    Ok((id, out)) => json_line(&serde_json::json!({
                        "task_id": id,
                        "candidate": out.candidate.map(|c| c.expression),
                        "rounds_used": out.rounds_used,
                    }))?,
                    Err(e) => {
                        failed += 1;
                        eprintln!("{e}");
                    }
                }
            }
            Ok(if failed == 0 { Outcome::Clean } else { Outcome::PipelineFailures(failed) })
        }
        Command::Prove { tasks, candidate } => {
            let tasks = ctx.tasks(tasks)?;
            let (services, live) = ctx.services()?;
            let mut failed = 0;
            for t in &tasks {
                let theorem = substitute_answer(t, candidate)?;
                let outcome = prove(&theorem, &*services.llm, &*services.lean, &services.prompts, &ctx.config.prove);
                ctx.runlog().write_stage(&t.id, "prove", &outcome);
                if outcome.error.is_some() {
                    failed += 1;
                }
                json_line(&serde_json::json!({
                    "task_id": t.id,
                    "success": outcome.success,
                    "method": outcome.method,
                    "samples_tried": outcome.samples_tried,
                    "error": outcome.error,
                }))?;
            }
            finish(live)?;
            Ok(if failed == 0 { Outcome::Clean } else { Outcome::PipelineFailures(failed) })
        }
        Command::Formalize(args) => formalize(&ctx, args),
        Command::Dataset(DatasetCommand::Dedup {
            input,
            out,
            threshold,
            groups,
        }) => {
            let records = load_corpus(input)?;
            let emb = embedder(&ctx.config)?;
            let mut config = DedupConfig::for_embedder(emb.as_ref());
            config.similarity_threshold = threshold.unwrap_or(ctx.config.eval.similarity_threshold);
            if !(config.similarity_threshold > 0.0 && config.similarity_threshold <= 1.0) {
                return Err(anyhow!("--threshold must be in (0, 1]").into());
            }
            let (survivors, outcome) = par::with_pool(ctx.jobs, || dedup(&records, &config, emb.as_ref()))?;
            save_corpus(&survivors, out)?;
            if let Some(g) = groups {
                write_json(g, &outcome.groups)?;
            }
            eprintln!("{} records, {} kept, {} removed", records.len(), survivors.len(), records.len() - survivors.len());
            Ok(Outcome::Clean)
        }
        Command::Dataset(DatasetCommand::Split { input, out, cutoff }) => {
            let records = load_corpus(input)?;
            let cutoff = cutoff.unwrap_or(ctx.config.eval.cutoff);
            let subset = split_after_cutoff(&records, cutoff);
            save_corpus(&subset, out)?;
            eprintln!("{} of {} records created after {cutoff}", subset.len(), records.len());
            Ok(Outcome::Clean)
        }
        Command::Kb(KbCommand::Build { dump, out, all_namespaces }) => {
            let report = ingest(dump)?;
            for w in &report.warnings {
                log::warn!("{w}");
            }
            let entries = if *all_namespaces {
                report.entries
            } else {
                let allow = ctx.config.kb.allowlist.clone().unwrap_or_else(default_allowlist);
                filter_namespaces(&report.entries, &allow, ctx.config.kb.namespace_match)
            };
            let emb = embedder(&ctx.config)?;
            let index = KbIndex::build(entries, emb.as_ref())?;
            index.save(out)?;
            eprintln!("indexed {} declarations ({} lines skipped)", index.len(), report.warnings.len());
            Ok(Outcome::Clean)
        }
        Command::Kb(KbCommand::Query { index, text, symbol, k }) => {
            let index = KbIndex::load(index)?;
            let hits: Vec<serde_json::Value> = match (text, symbol) {
                (Some(text), _) => {
                    let emb = embedder(&ctx.config)?;
                    index
                        .query_semantic(emb.as_ref(), text, *k)?
                        .into_iter()
                        .map(|s| serde_json::json!({"name": s.entry.full_name, "signature": s.entry.signature, "score": s.score}))
                        .collect()
                }
                (None, Some(sym)) => index
                    .query_edit_distance(sym, *k)
                    .into_iter()
                    .map(|s| serde_json::json!({"name": s.entry.full_name, "signature": s.entry.signature, "distance": s.score}))
                    .collect(),
                (None, None) => unreachable!("clap requires one of --text/--symbol"),
            };
            json_line(&hits)?;
            Ok(Outcome::Clean)
        }
    }
}

fn formalize(ctx: &Ctx, args: &FormalizeArgs) -> Result<Outcome, SetupFailure> {
    let text = std::fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let problems = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str::<InformalProblem>(l).with_context(|| format!("line {}", i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    let index = args.kb.as_deref().map(KbIndex::load).transpose()?;
    let emb = embedder(&ctx.config)?;
    let retrieval = index.as_ref().map(|index| Retrieval {
        index,
        embedder: emb.as_ref(),
    });
    let (services, live) = ctx.services()?;
    let results = par::with_pool(ctx.jobs, || {
        par::map(&problems, |p| {
            autoformalize(p, &*services.llm, &*services.lean, retrieval.as_ref(), &services.prompts, &ctx.config.autoformalize)
        })
    });
    finish(live)?;
    let trace_dir = args.trace.clone().unwrap_or_else(|| ctx.runlog().dir().to_path_buf());
    for r in &results {
        write_json(&trace_dir.join(format!("{}.json", r.id)), r)?;
    }
    let accepted: Vec<_> = results.iter().filter_map(|r| r.accepted.as_ref().map(|a| a.record.clone())).collect();
    save_corpus(&accepted, &args.out)?;
    let funnel = Funnel::of(&results);
    eprintln!("input {}, compiled {}, accepted {}", funnel.input, funnel.compiled, funnel.accepted);
    let errors = results.iter().filter(|r| r.trace.iter().any(|m| m.error.is_some())).count();
    Ok(if errors == 0 { Outcome::Clean } else { Outcome::PipelineFailures(errors) })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::PipelineFailures(n)) => {
            eprintln!("{n} task(s) ended with a pipeline failure");
            ExitCode::from(1)
        }
        Err(SetupFailure(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
