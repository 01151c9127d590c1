//! Command-line entry point: run recipes over datasets, re-evaluate stored
//! answers, list the recipe registry.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::backend::{HttpBackend, LlmBackend, ScriptedBackend, ScriptedSpec};
use crate::dataset::{bind_record_top_n, load_dataset, parse_dataset, Dataset, FieldMap};
use crate::eval::{
    evaluate, export_training_data, parse_judge_spec, Entailment, EvalConfig, ItemEval,
    MetricKind, TrainingRecord,
};
use crate::model::parse_answer;
use crate::pipeline::{run_on_dataset, CorpusSource, DatasetOutcome, PipelineGraph};
use crate::recipe::{
    build_from_spec, build_recipe, load_recipe_file, spec_for, summary_for,
    RecipeOverrides, RECIPE_NAMES,
};
use crate::report::{parse_answers, render_answers, AnswerLine, ReportFile};

const EXIT_OK: i32 = 0;
const EXIT_CONFIG: i32 = 2;
const EXIT_TOTAL_FAILURE: i32 = 3;

#[derive(Parser)]
#[command(name = "citekit", version, about = "Citation-generation pipelines and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a recipe, run it over a dataset, score and write artifacts.
    Run(RunArgs),
    /// Recompute metrics for stored answers without re-running generation.
    Eval(EvalArgs),
    /// List the recipe registry.
    List(ListArgs),
}

/// Everything `citekit run` needs.
#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Registry recipe name or a recipe file path.
    #[arg(long)]
    recipe: String,
    /// Dataset file (JSON array of records).
    #[arg(long)]
    dataset: PathBuf,
    /// Backend spec: scripted:<file> | http:<base-url>,<model>.
    #[arg(long)]
    backend: String,
    /// Judge spec: lexical:<threshold> | substring | http:<url>.
    #[arg(long, default_value = "lexical:0.6")]
    judge: String,
    /// Comma-separated metric set (em,rec,prec,app,gran,rouge,len).
    #[arg(long, default_value = "em,rec,prec,app,gran,rouge,len")]
    metrics: String,
    /// Output directory for answers.jsonl and report.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dataset items processed concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write one trace line per item to this path.
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Write training-data records to this path.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Rename source fields, e.g. question=query,docs=passages.
    #[arg(long)]
    field_map: Option<String>,
    /// Record field holding the initial documents.
    #[arg(long, default_value = "docs")]
    init_docs: String,
    /// External retrieval corpus (same document format as dataset docs).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Override the recipe's bound-document count.
    #[arg(long)]
    doc_count: Option<usize>,
    /// Override the per-item step budget.
    #[arg(long)]
    max_steps: Option<u32>,
    /// Force temperature 0 for seed-free reproducibility on sampling
    /// backends (scripted backends are deterministic regardless).
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Answers file produced by `citekit run`.
    #[arg(long)]
    answers: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "lexical:0.6")]
    judge: String,
    #[arg(long, default_value = "em,rec,prec,app,gran,rouge,len")]
    metrics: String,
    /// Directory to write report.json into (stdout table is always printed).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    field_map: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct ListArgs {
    /// Include document view and count per recipe.
    #[arg(long)]
    verbose: bool,
}

/// Parse a backend spec: `scripted:<file>` | `http:<base-url>,<model>`.
pub fn parse_backend_spec(spec: &str) -> Result<Arc<dyn LlmBackend>, String> {
    if let Some(file) = spec.strip_prefix("scripted:") {
        let bytes =
            std::fs::read(file).map_err(|e| format!("cannot read script {file}: {e}"))?;
        let script: ScriptedSpec = serde_json::from_slice(&bytes)
            .map_err(|e| format!("malformed script {file}: {e}"))?;
        return Ok(Arc::new(ScriptedBackend::from_spec(&script)));
    }
    if let Some(rest) = spec.strip_prefix("http:") {
        let full = if rest.starts_with("//") { spec } else { rest };
        let (base, model) = full
            .rsplit_once(',')
            .ok_or_else(|| format!("backend spec `{spec}` is missing `,<model>`"))?;
        let base = if base.contains("://") {
            base.to_string()
        } else {
            format!("http://{base}")
        };
        return Ok(Arc::new(HttpBackend::new(base, model)));
    }
    Err(format!(
        "unknown backend spec `{spec}` (expected scripted:<file> | http:<base-url>,<model>)"
    ))
}

fn load_dataset_arg(path: &Path, field_map: &Option<String>) -> Result<Dataset, String> {
    let map = match field_map {
        Some(spec) => FieldMap::parse(spec)?,
        None => FieldMap::new(),
    };
    load_dataset(path, &map).map_err(|e| e.to_string())
}

fn eval_config_from(judge: Arc<dyn Entailment>, metrics: &str) -> Result<EvalConfig, String> {
    let metrics = MetricKind::parse_set(metrics)?;
    Ok(EvalConfig::new(judge).with_metrics(metrics))
}

/// Print to stdout, tolerating a closed pipe (e.g. `citekit list | head`).
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| format!("cannot create {}: {e}", parent.display()))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn build_graph(
    args: &RunArgs,
    backend: Arc<dyn LlmBackend>,
    judge: Arc<dyn Entailment>,
) -> Result<PipelineGraph, String> {
    let mut overrides = RecipeOverrides {
        doc_count: args.doc_count,
        params: None,
        max_total_steps: args.max_steps,
        corpus: None,
        deterministic: args.deterministic,
    };
    if let Some(corpus_path) = &args.corpus {
        let bytes = std::fs::read(corpus_path)
            .map_err(|e| format!("cannot read corpus {}: {e}", corpus_path.display()))?;
        let docs: Vec<crate::dataset::RawDoc> = serde_json::from_slice(&bytes)
            .map_err(|e| format!("malformed corpus {}: {e}", corpus_path.display()))?;
        overrides.corpus = Some(CorpusSource::External(Arc::new(docs)));
    }
    if spec_for(&args.recipe).is_some() {
        return build_recipe(&args.recipe, &overrides, backend, judge).map_err(|e| e.to_string());
    }
    let path = Path::new(&args.recipe);
    if path.exists() {
        let mut spec = load_recipe_file(path).map_err(|e| e.to_string())?;
        if let Some(doc_count) = args.doc_count {
            spec.doc_count = doc_count;
        }
        return build_from_spec(&spec, &overrides, backend, judge).map_err(|e| e.to_string());
    }
    Err(format!(
        "unknown recipe `{}` (not a registry name or readable file)",
        args.recipe
    ))
}

fn training_records(outcome: &DatasetOutcome) -> Vec<TrainingRecord> {
    outcome
        .items
        .iter()
        .filter(|item| item.error.is_none())
        .map(|item| {
            let eval = item.eval.clone().unwrap_or_default();
            TrainingRecord {
                question: item.question.clone(),
                prompt_digest: item.prompt_digest.clone(),
                answer: item.answer_text.clone().unwrap_or_default(),
                statement_verdicts: eval.verdicts,
                metrics: eval.metrics,
            }
        })
        .collect()
}

fn cmd_run(args: &RunArgs) -> i32 {
    macro_rules! config_err {
        ($result:expr) => {
            match $result {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("citekit run: {e}");
                    return EXIT_CONFIG;
                }
            }
        };
    }
    if args.workers == 0 {
        eprintln!("citekit run: --workers must be at least 1");
        return EXIT_CONFIG;
    }
    if args.init_docs != "docs" {
        eprintln!(
            "citekit run: --init-docs must name the canonical `docs` field \
             (use --field-map docs=<source-key> for renames)"
        );
        return EXIT_CONFIG;
    }
    let dataset = config_err!(load_dataset_arg(&args.dataset, &args.field_map));
    let judge: Arc<dyn Entailment> = Arc::from(config_err!(parse_judge_spec(&args.judge)));
    let backend = config_err!(parse_backend_spec(&args.backend));
    let graph = config_err!(build_graph(args, backend, Arc::clone(&judge)));
    let eval_config = config_err!(eval_config_from(Arc::clone(&judge), &args.metrics));

    let outcome = run_on_dataset(&graph, &dataset, Some(&eval_config), args.workers);

    let doc_view = graph.profile.doc_view.as_str();
    let lines: Vec<AnswerLine> = outcome
        .items
        .iter()
        .map(|item| AnswerLine::from_item(item, graph.profile.init_top_n, doc_view))
        .collect();
    config_err!(write_file(&args.out.join("answers.jsonl"), &render_answers(&lines)));

    let report = ReportFile::from_outcome(judge.id(), &outcome);
    config_err!(write_file(&args.out.join("report.json"), &report.to_json()));

    if let Some(trace_path) = &args.trace_out {
        let mut text = String::new();
        for item in &outcome.items {
            let line = serde_json::json!({"index": item.index, "trace": item.trace});
            text.push_str(&serde_json::to_string(&line).expect("trace serializes"));
            text.push('\n');
        }
        config_err!(write_file(trace_path, &text));
    }
    if let Some(export_path) = &args.export {
        let records = training_records(&outcome);
        config_err!(export_training_data(&records, export_path).map_err(|e| e.to_string()));
    }

    emit(&crate::report::render_table(&args.recipe, &report));
    for item in &outcome.items {
        if let Some(error) = &item.error {
            eprintln!("item {}: {error}", item.index);
        }
    }
    if outcome.scored() >= 1 {
        EXIT_OK
    } else {
        EXIT_TOTAL_FAILURE
    }
}

/// Re-evaluate one stored answer against its record.
fn eval_line(
    line: &AnswerLine,
    record: &crate::dataset::DatasetRecord,
    config: &EvalConfig,
) -> Option<ItemEval> {
    let answer_text = line.answer.as_deref()?;
    let (_, mut store) = bind_record_top_n(record, "docs", line.init_docs).ok()?;
    for raw in &line.runtime_docs {
        store
            .add(raw.to_document().with_origin(crate::model::DocOrigin::RetrievedRuntime))
            .ok()?;
    }
    let mut answer = parse_answer(answer_text);
    if line.doc_view == "snippet" {
        answer = answer.refine_to_snippets(&store);
    }
    Some(evaluate(&answer, record, &store, config))
}

fn cmd_eval(args: &EvalArgs) -> i32 {
    macro_rules! config_err {
        ($result:expr) => {
            match $result {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("citekit eval: {e}");
                    return EXIT_CONFIG;
                }
            }
        };
    }
    let dataset = config_err!(load_dataset_arg(&args.dataset, &args.field_map));
    let bytes = config_err!(
        std::fs::read(&args.answers).map_err(|e| format!("cannot read answers: {e}"))
    );
    let lines = config_err!(parse_answers(&bytes).map_err(|e| e.to_string()));
    if lines.len() != dataset.len() {
        eprintln!(
            "citekit eval: alignment error: {} answers vs {} dataset records",
            lines.len(),
            dataset.len()
        );
        return EXIT_CONFIG;
    }
    let judge: Arc<dyn Entailment> = Arc::from(config_err!(parse_judge_spec(&args.judge)));
    let config = config_err!(eval_config_from(Arc::clone(&judge), &args.metrics));

    let mut indexed = Vec::new();
    let mut failed = 0usize;
    for (line, record) in lines.iter().zip(&dataset.records) {
        match eval_line(line, record, &config) {
            Some(eval) => indexed.push((line.index, eval)),
            None => failed += 1,
        }
    }
    let report = ReportFile::build(judge.id(), indexed, failed);
    if let Some(out) = &args.out {
        config_err!(write_file(&out.join("report.json"), &report.to_json()));
    }
    emit(&crate::report::render_table("eval", &report));
    EXIT_OK
}

fn cmd_list(args: &ListArgs) -> i32 {
    for name in RECIPE_NAMES {
        let spec = spec_for(name).expect("registry name");
        if args.verbose {
            emit(&format!(
                "{name:<24} {} [doc_view={}, doc_count={}]\n",
                summary_for(&spec),
                spec.doc_view.as_str(),
                spec.doc_count
            ));
        } else {
            emit(&format!("{name:<24} {}\n", summary_for(&spec)));
        }
    }
    EXIT_OK
}

/// Parse CLI arguments from the environment and execute; returns the exit
/// status for `main`.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Eval(args) => cmd_eval(args),
        Command::List(args) => cmd_list(args),
    }
}

/// Test-friendly variant of [`run`] taking explicit arguments.
pub fn run_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => match &cli.command {
            Command::Run(args) => cmd_run(args),
            Command::Eval(args) => cmd_eval(args),
            Command::List(args) => cmd_list(args),
        },
        Err(e) => {
            eprintln!("{e}");
            EXIT_CONFIG
        }
    }
}

/// Parse dataset bytes with an optional field map (exposed for tests).
pub fn parse_dataset_bytes(bytes: &[u8], name: &str) -> Result<Dataset, String> {
    parse_dataset(bytes, name, &FieldMap::new()).map_err(|e| e.to_string())
}
