//! Item execution and the dataset runner.
//!
//! Items run independently over a fresh store and pristine backend session,
//! so dataset runs are reproducible at any worker count; results always
//! assemble in dataset order.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::node::{execute, NodeBehavior};
use super::{CorpusSource, Dispatch, ModuleNode, Payload, PipelineGraph};
use crate::backend::{DocRender, LlmBackend};
use crate::dataset::{bind_record_top_n, Dataset, DatasetRecord, RawDoc};
use crate::eval::{evaluate, Entailment, EvalConfig, ItemEval};
use crate::model::{parse_answer, Answer, DocId, DocStore};

/// First 16 hex characters of the SHA-256 of `text`.
pub fn digest(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let out = hasher.finalize();
    let hex: String = out.iter().map(|b| format!("{b:02x}")).collect();
    hex[..16].to_string()
}

/// One node execution in an item's trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub node_id: String,
    pub input_digest: String,
    pub output_digest: String,
    /// 1-based visit count of the node at this execution.
    pub turn: u32,
}

/// The auditable record of one item run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunTrace {
    pub steps: Vec<TraceStep>,
    pub final_answer: String,
    /// Ids of documents added at runtime.
    pub runtime_docs: Vec<DocId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum RunItemError {
    #[error("step budget of {budget} exhausted")]
    StepBudgetExhausted { budget: u32, trace: Box<RunTrace> },
    #[error("node `{node_id}` failed: {message}")]
    NodeFailure {
        node_id: String,
        message: String,
        trace: Box<RunTrace>,
    },
    #[error("binding failed: {0}")]
    Bind(#[from] crate::dataset::DatasetError),
}

impl RunItemError {
    pub fn trace(&self) -> Option<&RunTrace> {
        match self {
            RunItemError::StepBudgetExhausted { trace, .. }
            | RunItemError::NodeFailure { trace, .. } => Some(trace),
            RunItemError::Bind(_) => None,
        }
    }
}

/// Serializes calls to a shared backend that declared itself serial but
/// offers no per-item sessions.
struct SerializedBackend {
    inner: Arc<dyn LlmBackend>,
    lock: Arc<Mutex<()>>,
}

impl LlmBackend for SerializedBackend {
    fn complete(
        &self,
        prompt: &str,
        params: &crate::backend::GenParams,
    ) -> Result<crate::backend::Completion, crate::backend::BackendError> {
        let _guard = self.lock.lock().unwrap();
        self.inner.complete(prompt, params)
    }

    fn id(&self) -> &str {
        self.inner.id()
    }

    fn is_serial(&self) -> bool {
        true
    }

    fn refusal_prefixes(&self) -> &[String] {
        self.inner.refusal_prefixes()
    }
}

fn item_backend(graph: &PipelineGraph) -> Arc<dyn LlmBackend> {
    if let Some(session) = graph.backend.fresh_session() {
        return session;
    }
    if graph.backend.is_serial() {
        return Arc::new(SerializedBackend {
            inner: Arc::clone(&graph.backend),
            lock: Arc::clone(&graph.serial_lock),
        });
    }
    Arc::clone(&graph.backend)
}

/// Mutable per-item state threaded through node executions.
pub struct ItemCtx {
    pub question: String,
    pub store: DocStore,
    pub backend: Arc<dyn LlmBackend>,
    pub judge: Arc<dyn Entailment>,
    /// Retrieval candidate pool (record docs or an external corpus).
    pub pool: Vec<RawDoc>,
    /// Shared key-value data: prefix, plan, feedback, failed_stmt, expanded.
    pub data: BTreeMap<String, String>,
    pub last_retrieved: Vec<DocId>,
    pub trace: RunTrace,
    /// The last prompt a generator rendered; digested into exports.
    pub last_prompt: String,
    visits: BTreeMap<String, u32>,
    steps: u32,
}

impl ItemCtx {
    pub fn visits(&self, node_id: &str) -> u32 {
        self.visits.get(node_id).copied().unwrap_or(0)
    }
}

struct StepOutcome {
    payload: Payload,
}

fn run_node(
    graph: &PipelineGraph,
    node: &ModuleNode,
    payload: Payload,
    ctx: &mut ItemCtx,
) -> Result<StepOutcome, RunItemError> {
    if ctx.steps >= graph.max_total_steps {
        return Err(RunItemError::StepBudgetExhausted {
            budget: graph.max_total_steps,
            trace: Box::new(ctx.trace.clone()),
        });
    }
    ctx.steps += 1;
    let visit = ctx.visits.entry(node.node_id.clone()).or_insert(0);
    *visit += 1;
    let turn = *visit;
    let input_digest = digest(&payload.text_view());
    let out = execute(&node.behavior, payload, ctx).map_err(|e| RunItemError::NodeFailure {
        node_id: node.node_id.clone(),
        message: e.to_string(),
        trace: Box::new(ctx.trace.clone()),
    })?;
    ctx.trace.steps.push(TraceStep {
        node_id: node.node_id.clone(),
        input_digest,
        output_digest: digest(&out.text_view()),
        turn,
    });
    Ok(StepOutcome { payload: out })
}

/// Deliver a payload to `target` under the sender's dispatch mode.
fn deliver(
    graph: &PipelineGraph,
    target: &ModuleNode,
    payload: Payload,
    dispatch: Dispatch,
    ctx: &mut ItemCtx,
) -> Result<Payload, RunItemError> {
    match (dispatch, payload) {
        (Dispatch::Parallel, Payload::TextList(items)) if !target.behavior.consumes_list() => {
            // Fan each element to the target independently; rejoin in input
            // order regardless of branch timing.
            let mut outs = Vec::with_capacity(items.len());
            for item in items {
                let out = run_node(graph, target, Payload::Text(item), ctx)?;
                outs.push(out.payload.text_view());
            }
            Ok(Payload::TextList(outs))
        }
        (Dispatch::Iterative, Payload::TextList(items)) => {
            // Sequential feeding with prefix threading: each element's output
            // becomes part of the accumulated prefix for the next.
            let mut sentences = Vec::with_capacity(items.len());
            for item in items {
                let out = run_node(graph, target, Payload::Text(item), ctx)?;
                let text = out.payload.text_view().trim().to_string();
                if text.is_empty() {
                    continue;
                }
                let mut prefix = ctx.data.get("prefix").cloned().unwrap_or_default();
                if !prefix.is_empty() {
                    prefix.push(' ');
                }
                prefix.push_str(&text);
                ctx.data.insert("prefix".into(), prefix);
                sentences.push(text);
            }
            Ok(Payload::Text(sentences.join(" ")))
        }
        (_, payload) => Ok(run_node(graph, target, payload, ctx)?.payload),
    }
}

fn select_target<'a>(
    node: &'a ModuleNode,
    payload: &Payload,
    source_visits: u32,
) -> Option<&'a str> {
    node.targets
        .iter()
        .find(|(condition, _)| condition.matches(payload, source_visits))
        .map(|(_, target)| target.as_str())
}

/// Execute the graph for one record: bind documents, walk from the entry
/// until an output sink, a dead end, or the step budget.
pub fn run_item(
    graph: &PipelineGraph,
    record: &DatasetRecord,
) -> Result<(Answer, RunTrace), RunItemError> {
    run_item_with_ctx(graph, record).map(|(answer, trace, _)| (answer, trace))
}

/// Result of one dataset item: either an answer with its trace, or the
/// failure that aborted the item. `eval` is present when an evaluator ran.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemResult {
    pub index: usize,
    pub question: String,
    pub answer_text: Option<String>,
    pub trace: RunTrace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<ItemEval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Digest of the last generator prompt, for training exports.
    pub prompt_digest: String,
    /// Runtime documents in store form, so evaluation can be replayed
    /// without re-running generation.
    pub runtime_docs: Vec<crate::model::Document>,
}

/// Outcome of a dataset run, in dataset order.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct DatasetOutcome {
    pub items: Vec<ItemResult>,
}

impl DatasetOutcome {
    pub fn scored(&self) -> usize {
        self.items.iter().filter(|i| i.error.is_none()).count()
    }

    pub fn failed(&self) -> usize {
        self.items.len() - self.scored()
    }
}

fn process_record(
    graph: &PipelineGraph,
    index: usize,
    record: &DatasetRecord,
    eval_config: Option<&EvalConfig>,
) -> ItemResult {
    match run_item_with_ctx(graph, record) {
        Ok((answer, trace, ctx)) => {
            let eval = eval_config.map(|config| evaluate(&answer, record, &ctx.store, config));
            ItemResult {
                index,
                question: record.question.clone(),
                answer_text: Some(trace.final_answer.clone()),
                prompt_digest: digest(&ctx.last_prompt),
                runtime_docs: ctx.store.runtime_docs().into_iter().cloned().collect(),
                trace,
                eval,
                error: None,
            }
        }
        Err(e) => ItemResult {
            index,
            question: record.question.clone(),
            answer_text: None,
            trace: e.trace().cloned().unwrap_or_default(),
            eval: None,
            error: Some(e.to_string()),
            prompt_digest: digest(""),
            runtime_docs: Vec::new(),
        },
    }
}

/// [`run_item`] variant exposing the final item context, so callers can
/// evaluate against the end-of-run store.
pub fn run_item_with_ctx(
    graph: &PipelineGraph,
    record: &DatasetRecord,
) -> Result<(Answer, RunTrace, ItemCtx), RunItemError> {
    let (question, store) = bind_record_top_n(
        record,
        &graph.profile.init_docs_key,
        graph.profile.init_top_n,
    )?;
    let pool = match &graph.corpus {
        CorpusSource::RecordDocs => record.docs.clone(),
        CorpusSource::External(docs) => docs.as_ref().clone(),
    };
    let backend = item_backend(graph);

    let mut ctx = ItemCtx {
        question,
        store,
        backend,
        judge: Arc::clone(&graph.judge),
        pool,
        data: graph.data.clone(),
        last_retrieved: Vec::new(),
        trace: RunTrace::default(),
        last_prompt: String::new(),
        visits: BTreeMap::new(),
        steps: 0,
    };

    let entry = graph
        .node(&graph.entry)
        .unwrap_or_else(|| panic!("validated graph has entry `{}`", graph.entry));
    let mut current = entry;
    let mut payload = run_node(graph, entry, Payload::empty(), &mut ctx)?.payload;

    loop {
        if matches!(current.behavior, NodeBehavior::Output { .. }) {
            break;
        }
        let Some(next_id) = select_target(current, &payload, ctx.visits(&current.node_id)) else {
            break;
        };
        let next = graph
            .node(next_id)
            .unwrap_or_else(|| panic!("validated graph has node `{next_id}`"));
        payload = deliver(graph, next, payload, current.dispatch, &mut ctx)?;
        current = next;
    }

    let final_text = payload.text_view();
    let mut answer = parse_answer(&final_text);
    if graph.profile.doc_view == DocRender::Snippet {
        answer = answer.refine_to_snippets(&ctx.store);
    }
    ctx.trace.final_answer = final_text;
    ctx.trace.runtime_docs = ctx.store.runtime_docs().iter().map(|d| d.doc_id).collect();
    let trace = ctx.trace.clone();
    Ok((answer, trace, ctx))
}

/// Run every record independently (fresh store and backend session per
/// item) across `workers` threads; failures are recorded per item and the
/// result order matches the dataset.
pub fn run_on_dataset(
    graph: &PipelineGraph,
    dataset: &Dataset,
    eval_config: Option<&EvalConfig>,
    workers: usize,
) -> DatasetOutcome {
    assert!(!dataset.is_empty(), "dataset must not be empty");
    let workers = workers.max(1).min(dataset.len());
    if workers == 1 {
        let items = dataset
            .records
            .iter()
            .enumerate()
            .map(|(index, record)| process_record(graph, index, record, eval_config))
            .collect();
        return DatasetOutcome { items };
    }

    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<ItemResult>>> =
        dataset.records.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= dataset.records.len() {
                    break;
                }
                let result = process_record(graph, index, &dataset.records[index], eval_config);
                *slots[index].lock().unwrap() = Some(result);
            });
        }
    });
    let items = slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect();
    DatasetOutcome { items }
}
