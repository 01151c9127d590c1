//! The executable pipeline graph: nodes wrapping generation and enhancing
//! components, conditional targets, dispatch modes, and the dataset runner.

mod node;
mod runner;

pub use node::{
    DocSource, GenMode, GeneratorCfg, IterKind, NodeBehavior, OutputSource, QuerySource,
};
pub use runner::{
    run_item, run_on_dataset, DatasetOutcome, ItemCtx, ItemResult, RunItemError, RunTrace,
    TraceStep,
};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{DocRender, LlmBackend};
use crate::dataset::RawDoc;
use crate::eval::Entailment;

/// Bound on node executions per item, loops included.
pub const DEFAULT_MAX_TOTAL_STEPS: u32 = 24;

/// The value flowing between nodes: plain text, a candidate list, or text
/// carrying a boolean verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    Text(String),
    TextList(Vec<String>),
    Judged { text: String, verdict: bool },
}

impl Payload {
    pub fn empty() -> Self {
        Payload::Text(String::new())
    }

    /// Flattened text view (lists join with newlines).
    pub fn text_view(&self) -> String {
        match self {
            Payload::Text(t) => t.clone(),
            Payload::TextList(items) => items.join("\n"),
            Payload::Judged { text, .. } => text.clone(),
        }
    }

    pub fn verdict(&self) -> Option<bool> {
        match self {
            Payload::Judged { verdict, .. } => Some(*verdict),
            _ => None,
        }
    }
}

/// Routing predicate over (payload text, verdict flag, source visit count).
/// Total: undefined aspects simply fail to match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Always,
    VerdictTrue,
    VerdictFalse,
    /// Source node has executed fewer than `n` times.
    TurnLt(u32),
    TextEmpty,
    TextNonempty,
}

impl Condition {
    pub fn matches(&self, payload: &Payload, source_visits: u32) -> bool {
        match self {
            Condition::Always => true,
            Condition::VerdictTrue => payload.verdict() == Some(true),
            Condition::VerdictFalse => payload.verdict() == Some(false),
            Condition::TurnLt(n) => source_visits < *n,
            Condition::TextEmpty => payload.text_view().trim().is_empty(),
            Condition::TextNonempty => !payload.text_view().trim().is_empty(),
        }
    }
}

/// How a node sends its output onward: as one payload, fanned element-wise
/// to the target (rejoining in input order), or fed element-wise with the
/// accumulated prefix threaded between executions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Dispatch {
    #[default]
    Single,
    Parallel,
    Iterative,
}

/// The component family a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Generator,
    Retriever,
    Planner,
    Feedbacker,
    Editor,
    EvaluatorSink,
    OutputSink,
}

/// A wired node: behavior plus conditional targets, evaluated in order with
/// first match winning.
#[derive(Clone)]
pub struct ModuleNode {
    pub node_id: String,
    pub behavior: NodeBehavior,
    pub targets: Vec<(Condition, String)>,
    pub dispatch: Dispatch,
}

impl std::fmt::Debug for ModuleNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModuleNode")
            .field("node_id", &self.node_id)
            .field("behavior", &self.behavior.label())
            .field("dispatch", &self.dispatch)
            .field("targets", &self.targets)
            .finish()
    }
}

impl ModuleNode {
    pub fn new(node_id: impl Into<String>, behavior: NodeBehavior) -> Self {
        ModuleNode {
            node_id: node_id.into(),
            behavior,
            targets: Vec::new(),
            dispatch: Dispatch::Single,
        }
    }

    pub fn with_dispatch(mut self, dispatch: Dispatch) -> Self {
        self.dispatch = dispatch;
        self
    }

    pub fn with_target(mut self, condition: Condition, to: impl Into<String>) -> Self {
        self.targets.push((condition, to.into()));
        self
    }

    pub fn kind(&self) -> NodeKind {
        self.behavior.kind()
    }
}

/// Reserved id of the auto-appended output sink.
pub const OUTPUT_NODE_ID: &str = "output";

/// Retrieval candidate pool shared by all items of a run.
#[derive(Clone, Default)]
pub enum CorpusSource {
    /// Each item's own record documents.
    #[default]
    RecordDocs,
    /// A fixed external corpus.
    External(Arc<Vec<RawDoc>>),
}

/// Per-item input binding: which record field seeds the store, how many
/// documents to bind, and which document view citations resolve against.
#[derive(Debug, Clone)]
pub struct BindProfile {
    pub init_docs_key: String,
    pub init_top_n: usize,
    pub doc_view: DocRender,
}

impl Default for BindProfile {
    fn default() -> Self {
        BindProfile {
            init_docs_key: "docs".into(),
            init_top_n: crate::dataset::DEFAULT_INIT_DOCS,
            doc_view: DocRender::Full,
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("graph validation failed: {0}")]
    Validation(String),
}

/// The executable wiring plus the run-wide resources it closes over.
#[derive(Clone)]
pub struct PipelineGraph {
    nodes: BTreeMap<String, ModuleNode>,
    node_order: Vec<String>,
    pub entry: String,
    pub max_total_steps: u32,
    pub profile: BindProfile,
    pub corpus: CorpusSource,
    pub backend: Arc<dyn LlmBackend>,
    pub judge: Arc<dyn Entailment>,
    /// Initial shared data values (question and gold are bound per item).
    pub data: BTreeMap<String, String>,
    /// Guards serial backends that cannot hand out per-item sessions.
    pub(crate) serial_lock: Arc<std::sync::Mutex<()>>,
}

impl std::fmt::Debug for PipelineGraph {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PipelineGraph")
            .field("entry", &self.entry)
            .field("max_total_steps", &self.max_total_steps)
            .field("nodes", &self.nodes_ordered().collect::<Vec<_>>())
            .finish()
    }
}

impl PipelineGraph {
    /// Build from explicit nodes; the first is the entry. An `output` sink
    /// is appended when none of the nodes is one.
    pub fn from_nodes(
        nodes: Vec<ModuleNode>,
        backend: Arc<dyn LlmBackend>,
        judge: Arc<dyn Entailment>,
    ) -> Result<Self, PipelineError> {
        assert!(!nodes.is_empty(), "graph needs at least one node");
        let entry = nodes[0].node_id.clone();
        let mut map = BTreeMap::new();
        let mut order = Vec::new();
        let mut has_output = false;
        for node in nodes {
            if node.kind() == NodeKind::OutputSink {
                has_output = true;
            }
            if map.contains_key(&node.node_id) {
                return Err(PipelineError::DuplicateNodeId(node.node_id));
            }
            order.push(node.node_id.clone());
            map.insert(node.node_id.clone(), node);
        }
        if !has_output {
            if map.contains_key(OUTPUT_NODE_ID) {
                return Err(PipelineError::DuplicateNodeId(OUTPUT_NODE_ID.into()));
            }
            let sink = ModuleNode::new(
                OUTPUT_NODE_ID,
                NodeBehavior::Output {
                    source: OutputSource::Payload,
                },
            );
            order.push(sink.node_id.clone());
            map.insert(sink.node_id.clone(), sink);
        }
        Ok(PipelineGraph {
            nodes: map,
            node_order: order,
            entry,
            max_total_steps: DEFAULT_MAX_TOTAL_STEPS,
            profile: BindProfile::default(),
            corpus: CorpusSource::RecordDocs,
            backend,
            judge,
            data: BTreeMap::new(),
            serial_lock: Arc::new(std::sync::Mutex::new(())),
        })
    }

    pub fn node(&self, id: &str) -> Option<&ModuleNode> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: &str) -> Option<&mut ModuleNode> {
        self.nodes.get_mut(id)
    }

    /// Nodes in insertion order.
    pub fn nodes_ordered(&self) -> impl Iterator<Item = &ModuleNode> {
        self.node_order.iter().filter_map(|id| self.nodes.get(id))
    }

    /// Append a conditional edge. Conditions are evaluated in list order, so
    /// an edge added after a catch-all is unreachable (`validate` warns).
    pub fn set_target(
        &mut self,
        from: &str,
        condition: Condition,
        to: &str,
    ) -> Result<(), PipelineError> {
        if !self.nodes.contains_key(to) {
            return Err(PipelineError::UnknownNode(to.into()));
        }
        let node = self
            .nodes
            .get_mut(from)
            .ok_or_else(|| PipelineError::UnknownNode(from.into()))?;
        node.targets.push((condition, to.into()));
        Ok(())
    }

    pub fn with_max_steps(mut self, max_total_steps: u32) -> Self {
        self.max_total_steps = max_total_steps;
        self
    }

    pub fn with_profile(mut self, profile: BindProfile) -> Self {
        self.profile = profile;
        self
    }

    pub fn with_corpus(mut self, corpus: CorpusSource) -> Self {
        self.corpus = corpus;
        self
    }

    /// Check structural invariants; returns reachability lint warnings.
    pub fn validate(&self) -> Result<Vec<String>, PipelineError> {
        if self.max_total_steps == 0 {
            return Err(PipelineError::Validation("max_total_steps must be > 0".into()));
        }
        if !self.nodes.contains_key(&self.entry) {
            return Err(PipelineError::UnknownNode(self.entry.clone()));
        }
        let mut warnings = Vec::new();
        for node in self.nodes.values() {
            if node.kind() == NodeKind::OutputSink && !node.targets.is_empty() {
                return Err(PipelineError::Validation(format!(
                    "output sink `{}` must not have targets",
                    node.node_id
                )));
            }
            let mut saw_catch_all = false;
            for (condition, target) in &node.targets {
                if !self.nodes.contains_key(target) {
                    return Err(PipelineError::UnknownNode(target.clone()));
                }
                if saw_catch_all {
                    warnings.push(format!(
                        "node `{}`: target `{}` is unreachable after a catch-all condition",
                        node.node_id, target
                    ));
                }
                if *condition == Condition::Always {
                    saw_catch_all = true;
                }
            }
        }
        Ok(warnings)
    }
}

/// Chain nodes in order: each node's catch-all target is its successor, the
/// last targets the output sink.
pub fn build_sequence(
    nodes: Vec<ModuleNode>,
    backend: Arc<dyn LlmBackend>,
    judge: Arc<dyn Entailment>,
) -> Result<PipelineGraph, PipelineError> {
    assert!(!nodes.is_empty(), "sequence needs at least one node");
    let ids: Vec<String> = nodes.iter().map(|n| n.node_id.clone()).collect();
    let mut graph = PipelineGraph::from_nodes(nodes, backend, judge)?;
    for (i, id) in ids.iter().enumerate() {
        let next = ids.get(i + 1).map(String::as_str).unwrap_or(OUTPUT_NODE_ID);
        graph.set_target(id, Condition::Always, next)?;
    }
    Ok(graph)
}
