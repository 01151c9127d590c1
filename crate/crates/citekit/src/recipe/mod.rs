//! Declarative registry of the preset method wirings: recipe names map to
//! pipeline graphs, prompt templates and settings.

pub mod prompts;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{DocRender, GenParams, LlmBackend, PromptTemplate};
use crate::eval::Entailment;
use crate::pipeline::{
    build_sequence, BindProfile, Condition, CorpusSource, Dispatch, DocSource, GenMode,
    GeneratorCfg, IterKind, ModuleNode, NodeBehavior, OutputSource, PipelineGraph, PipelineError,
    QuerySource, OUTPUT_NODE_ID,
};

/// Valid enhancer kind labels for recipe files.
pub const ENHANCER_KINDS: [&str; 11] = [
    "reranker",
    "scorer",
    "verifier",
    "summary_retriever",
    "relevance_retriever",
    "inner_retriever",
    "index_retriever",
    "attributer",
    "blueprint",
    "reviser",
    "simplifier",
];

/// Registry recipe names, in listing order.
pub const RECIPE_NAMES: [&str; 13] = [
    "alce_vanilla",
    "alce_rerank",
    "alce_summ",
    "alce_snippet",
    "alce_interact",
    "attribute_then_generate",
    "blueprint",
    "aar",
    "citation_enhanced",
    "vtg",
    "recitation",
    "self_rag",
    "self_rag_snippet",
];

/// Candidate answers sampled for reranking.
pub const RERANK_CANDIDATES: usize = 4;
/// Candidate segments per sentence in the self-RAG loop.
pub const SENTENCE_CANDIDATES: usize = 3;
/// Sentence turns in the self-RAG loop.
pub const MAX_SENTENCE_TURNS: u32 = 4;
/// Entailed-statement fraction below which the reviser fires.
pub const SCORER_THRESHOLD: f64 = 1.0;

#[derive(Debug, Error)]
pub enum RecipeError {
    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),
    #[error("invalid override: {0}")]
    InvalidOverride(String),
    #[error("recipe file violates the schema at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    Direct,
    Iterative,
}

/// A named prompt override in a recipe file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_render: Option<DocRender>,
}

/// Generation parameter overrides in a recipe file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ParamsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_new_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Vec<String>>,
}

impl ParamsSpec {
    pub fn to_params(&self) -> GenParams {
        let mut params = GenParams::default();
        if let Some(m) = self.max_new_tokens {
            params.max_new_tokens = m;
        }
        if let Some(t) = self.temperature {
            params.temperature = t;
        }
        if let Some(stop) = &self.stop {
            params.stop = stop.clone();
        }
        params
    }
}

/// The declarative form of a recipe: what `build_recipe` wires up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeSpec {
    pub name: String,
    pub doc_view: DocRender,
    /// Documents bound per record; zero for real-time retrieval recipes
    /// (the record documents become the retrieval pool instead).
    pub doc_count: usize,
    pub generation_mode: GenerationMode,
    pub enhancers: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prompts: BTreeMap<String, PromptSpec>,
    #[serde(default, skip_serializing_if = "is_default_params")]
    pub params: ParamsSpec,
}

fn is_default_params(p: &ParamsSpec) -> bool {
    *p == ParamsSpec::default()
}

/// The registry's declarative description of a preset recipe.
pub fn spec_for(name: &str) -> Option<RecipeSpec> {
    let spec = |doc_view, doc_count, generation_mode, enhancers: &[&str]| RecipeSpec {
        name: name.to_string(),
        doc_view,
        doc_count,
        generation_mode,
        enhancers: enhancers.iter().map(|s| s.to_string()).collect(),
        prompts: BTreeMap::new(),
        params: ParamsSpec::default(),
    };
    use DocRender::{Full, Snippet, Summary};
    use GenerationMode::{Direct, Iterative};
    Some(match name {
        "alce_vanilla" => spec(Full, 5, Direct, &[]),
        "alce_rerank" => spec(Full, 5, Direct, &["reranker"]),
        "alce_summ" => spec(Summary, 10, Direct, &[]),
        "alce_snippet" => spec(Snippet, 10, Direct, &[]),
        "alce_interact" => spec(Summary, 10, Iterative, &["summary_retriever"]),
        "attribute_then_generate" => spec(Full, 5, Iterative, &["attributer"]),
        "blueprint" => spec(Full, 5, Direct, &["blueprint"]),
        "aar" => spec(Full, 5, Direct, &["scorer", "reviser"]),
        "citation_enhanced" => spec(Full, 0, Direct, &["relevance_retriever"]),
        "vtg" => spec(Full, 5, Direct, &["verifier", "relevance_retriever", "simplifier"]),
        "recitation" => spec(Full, 0, Direct, &["inner_retriever"]),
        "self_rag" => spec(Full, 0, Iterative, &["relevance_retriever", "reranker"]),
        "self_rag_snippet" => spec(Snippet, 0, Iterative, &["relevance_retriever", "reranker"]),
        _ => return None,
    })
}

/// One-line wiring summary for `citekit list`.
pub fn summary_for(spec: &RecipeSpec) -> String {
    let enhancers = if spec.enhancers.is_empty() {
        "none".to_string()
    } else {
        spec.enhancers.join(", ")
    };
    let mode = match spec.generation_mode {
        GenerationMode::Direct => "direct",
        GenerationMode::Iterative => "iterative",
    };
    format!("generation={mode}; enhancers={enhancers}")
}

/// Run-level knobs applied on top of a recipe spec.
#[derive(Clone, Default)]
pub struct RecipeOverrides {
    pub doc_count: Option<usize>,
    pub params: Option<ParamsSpec>,
    pub max_total_steps: Option<u32>,
    pub corpus: Option<CorpusSource>,
    /// Force temperature 0 so sampling backends behave as reproducibly as
    /// they can without seeds.
    pub deterministic: bool,
}

fn template(
    spec: &RecipeSpec,
    role: &str,
    default_body: &str,
    default_view: DocRender,
) -> Result<PromptTemplate, RecipeError> {
    match spec.prompts.get(role) {
        Some(prompt) => PromptTemplate::new(
            prompt.body.clone(),
            prompt.doc_render.unwrap_or(default_view),
        )
        .map_err(|e| RecipeError::SchemaViolation {
            path: format!("prompts.{role}"),
            message: e.to_string(),
        }),
        None => Ok(PromptTemplate::new(default_body, default_view).expect("default validates")),
    }
}

fn generator(
    template: PromptTemplate,
    params: GenParams,
    mode: GenMode,
    doc_source: DocSource,
) -> NodeBehavior {
    NodeBehavior::Generate(GeneratorCfg {
        template,
        params,
        mode,
        doc_source,
    })
}

/// Build a validated pipeline graph for a registry recipe name.
pub fn build_recipe(
    name: &str,
    overrides: &RecipeOverrides,
    backend: Arc<dyn LlmBackend>,
    judge: Arc<dyn Entailment>,
) -> Result<PipelineGraph, RecipeError> {
    let mut spec =
        spec_for(name).ok_or_else(|| RecipeError::UnknownRecipe(name.to_string()))?;
    if let Some(doc_count) = overrides.doc_count {
        spec.doc_count = doc_count;
    }
    if let Some(params) = &overrides.params {
        spec.params = params.clone();
    }
    build_from_spec(&spec, overrides, backend, judge)
}

/// Build a graph from a recipe spec: registry names get their preset wiring
/// (honoring the loaded overrides); other names assemble generically as
/// retrievers/planners, then the generator, then feedbackers/editors.
pub fn build_from_spec(
    spec: &RecipeSpec,
    overrides: &RecipeOverrides,
    backend: Arc<dyn LlmBackend>,
    judge: Arc<dyn Entailment>,
) -> Result<PipelineGraph, RecipeError> {
    for (i, kind) in spec.enhancers.iter().enumerate() {
        if !ENHANCER_KINDS.contains(&kind.as_str()) {
            return Err(RecipeError::SchemaViolation {
                path: format!("enhancers[{i}]"),
                message: format!("unknown enhancer kind `{kind}`"),
            });
        }
    }
    let mut spec = spec.clone();
    if overrides.deterministic {
        spec.params.temperature = Some(0.0);
    }
    let spec = &spec;
    let mut graph = wire(spec, backend, judge)?;
    graph.profile = BindProfile {
        init_docs_key: "docs".into(),
        init_top_n: spec.doc_count,
        doc_view: spec.doc_view,
    };
    if let Some(steps) = overrides.max_total_steps {
        if steps == 0 {
            return Err(RecipeError::InvalidOverride("max_total_steps must be > 0".into()));
        }
        graph.max_total_steps = steps;
    }
    if let Some(corpus) = &overrides.corpus {
        graph.corpus = corpus.clone();
    }
    graph.validate()?;
    Ok(graph)
}

fn wire(
    spec: &RecipeSpec,
    backend: Arc<dyn LlmBackend>,
    judge: Arc<dyn Entailment>,
) -> Result<PipelineGraph, RecipeError> {
    let params = spec.params.to_params();
    let view = spec.doc_view;
    match spec.name.as_str() {
        "alce_vanilla" | "alce_summ" | "alce_snippet" => {
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", prompts::ALCE_ANSWER, view)?,
                    params,
                    GenMode::Direct { candidates: 1 },
                    DocSource::AllStore,
                ),
            );
            Ok(build_sequence(vec![answer], backend, judge)?)
        }
        "alce_rerank" => {
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", prompts::ALCE_ANSWER, view)?,
                    params,
                    GenMode::Direct {
                        candidates: RERANK_CANDIDATES,
                    },
                    DocSource::AllStore,
                ),
            )
            .with_dispatch(Dispatch::Parallel);
            let reranker = ModuleNode::new(
                "reranker",
                NodeBehavior::FeedbackReranker { accumulate: false },
            );
            Ok(build_sequence(vec![answer, reranker], backend, judge)?)
        }
        "alce_interact" => {
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", prompts::INTERACT_ANSWER, view)?,
                    params,
                    GenMode::Iterative(IterKind::Interact),
                    DocSource::AllStore,
                ),
            )
            .with_target(Condition::VerdictTrue, "retriever")
            .with_target(Condition::Always, OUTPUT_NODE_ID);
            let retriever = ModuleNode::new("retriever", NodeBehavior::RetrieveSummaryExpand)
                .with_target(Condition::Always, "answer");
            Ok(PipelineGraph::from_nodes(
                vec![answer, retriever],
                backend,
                judge,
            )?)
        }
        "attribute_then_generate" => {
            let attribute = ModuleNode::new(
                "attribute",
                NodeBehavior::PlanAttribute {
                    template: template(spec, "plan", prompts::ATTRIBUTE_CLUSTERS, DocRender::Full)?,
                    params: params.clone().without_stop(),
                },
            )
            .with_dispatch(Dispatch::Iterative);
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", prompts::ATTRIBUTE_SENTENCE, view)?,
                    params,
                    GenMode::Iterative(IterKind::PlanDriven),
                    DocSource::None,
                ),
            );
            Ok(build_sequence(vec![attribute, answer], backend, judge)?)
        }
        "blueprint" => {
            let plan = ModuleNode::new(
                "plan",
                NodeBehavior::PlanBlueprint {
                    template: template(
                        spec,
                        "plan",
                        prompts::BLUEPRINT_QUESTIONS,
                        DocRender::Full,
                    )?,
                    params: params.clone().without_stop(),
                },
            );
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", prompts::BLUEPRINT_ANSWER, view)?,
                    params,
                    GenMode::Direct { candidates: 1 },
                    DocSource::AllStore,
                ),
            );
            Ok(build_sequence(vec![plan, answer], backend, judge)?)
        }
        "aar" => {
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", prompts::ALCE_ANSWER, view)?,
                    params.clone(),
                    GenMode::Direct { candidates: 1 },
                    DocSource::AllStore,
                ),
            )
            .with_target(Condition::Always, "scorer");
            let scorer = ModuleNode::new(
                "scorer",
                NodeBehavior::FeedbackScorer {
                    threshold: SCORER_THRESHOLD,
                },
            )
            .with_target(Condition::VerdictFalse, "reviser")
            .with_target(Condition::Always, OUTPUT_NODE_ID);
            let reviser = ModuleNode::new(
                "reviser",
                NodeBehavior::EditReviser {
                    template: template(spec, "revise", prompts::REVISE_ANSWER, DocRender::Full)?,
                    params,
                },
            )
            .with_target(Condition::Always, OUTPUT_NODE_ID);
            Ok(PipelineGraph::from_nodes(
                vec![answer, scorer, reviser],
                backend,
                judge,
            )?)
        }
        "citation_enhanced" => {
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", prompts::CLOSED_BOOK_ANSWER, view)?,
                    params,
                    GenMode::Direct { candidates: 1 },
                    DocSource::None,
                ),
            );
            let retriever = ModuleNode::new("retriever", NodeBehavior::AssignCitations { k: 1 });
            Ok(build_sequence(vec![answer, retriever], backend, judge)?)
        }
        "vtg" => {
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", prompts::ALCE_ANSWER, view)?,
                    params,
                    GenMode::Direct { candidates: 1 },
                    DocSource::AllStore,
                ),
            )
            .with_target(Condition::Always, "verifier");
            let verifier = ModuleNode::new("verifier", NodeBehavior::FeedbackVerifier)
                .with_target(Condition::VerdictFalse, "retriever")
                .with_target(Condition::Always, "simplifier");
            let retriever = ModuleNode::new(
                "retriever",
                NodeBehavior::RetrieveRelevance {
                    k: 1,
                    query: QuerySource::FailedStatement,
                },
            )
            .with_target(Condition::Always, "answer");
            let simplifier = ModuleNode::new("simplifier", NodeBehavior::EditSimplifier)
                .with_target(Condition::Always, OUTPUT_NODE_ID);
            Ok(PipelineGraph::from_nodes(
                vec![answer, verifier, retriever, simplifier],
                backend,
                judge,
            )?)
        }
        "recitation" => {
            let passages = if spec.doc_count > 0 { spec.doc_count } else { 5 };
            let retriever = ModuleNode::new(
                "retriever",
                NodeBehavior::RetrieveInner {
                    n: passages,
                    params: params.clone().without_stop(),
                },
            );
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", prompts::ALCE_ANSWER, view)?,
                    params,
                    GenMode::Direct { candidates: 1 },
                    DocSource::AllStore,
                ),
            );
            Ok(build_sequence(vec![retriever, answer], backend, judge)?)
        }
        "self_rag" | "self_rag_snippet" => {
            let answer_default = if spec.name == "self_rag_snippet" {
                prompts::SELF_RAG_SNIPPET_ANSWER
            } else {
                prompts::SELF_RAG_ANSWER
            };
            let query_gen = ModuleNode::new(
                "query_gen",
                generator(
                    template(spec, "query", prompts::SELF_RAG_QUERY, DocRender::Full)?,
                    params.clone(),
                    GenMode::Direct { candidates: 1 },
                    DocSource::None,
                ),
            )
            .with_target(Condition::Always, "retriever");
            let retriever = ModuleNode::new(
                "retriever",
                NodeBehavior::RetrieveRelevance {
                    k: 1,
                    query: QuerySource::Payload,
                },
            )
            .with_target(Condition::Always, "answer");
            let answer = ModuleNode::new(
                "answer",
                generator(
                    template(spec, "answer", answer_default, view)?,
                    params,
                    GenMode::Iterative(IterKind::SentenceLoop {
                        candidates: SENTENCE_CANDIDATES,
                    }),
                    DocSource::LastRetrieved,
                ),
            )
            .with_dispatch(Dispatch::Parallel)
            .with_target(Condition::Always, "reranker");
            let reranker = ModuleNode::new(
                "reranker",
                NodeBehavior::FeedbackReranker { accumulate: true },
            )
            .with_target(Condition::TextEmpty, OUTPUT_NODE_ID)
            .with_target(Condition::TurnLt(MAX_SENTENCE_TURNS), "query_gen")
            .with_target(Condition::Always, OUTPUT_NODE_ID);
            let output = ModuleNode::new(
                OUTPUT_NODE_ID,
                NodeBehavior::Output {
                    source: OutputSource::PrefixData,
                },
            );
            Ok(PipelineGraph::from_nodes(
                vec![query_gen, retriever, answer, reranker, output],
                backend,
                judge,
            )?)
        }
        _ => wire_custom(spec, backend, judge),
    }
}

/// Generic assembly for custom recipe files: retrievers and planners feed
/// the generator; feedbackers and editors post-process its answer.
fn wire_custom(
    spec: &RecipeSpec,
    backend: Arc<dyn LlmBackend>,
    judge: Arc<dyn Entailment>,
) -> Result<PipelineGraph, RecipeError> {
    let params = spec.params.to_params();
    let mut pre: Vec<ModuleNode> = Vec::new();
    let mut post: Vec<ModuleNode> = Vec::new();
    let mut answer_dispatch = Dispatch::Single;
    for (i, kind) in spec.enhancers.iter().enumerate() {
        let id = format!("{kind}_{i}");
        match kind.as_str() {
            "relevance_retriever" => pre.push(ModuleNode::new(
                id,
                NodeBehavior::RetrieveRelevance {
                    k: 1,
                    query: QuerySource::Question,
                },
            )),
            "inner_retriever" => pre.push(ModuleNode::new(
                id,
                NodeBehavior::RetrieveInner {
                    n: spec.doc_count.max(1),
                    params: params.clone().without_stop(),
                },
            )),
            "index_retriever" => pre.push(ModuleNode::new(id, NodeBehavior::RetrieveIndex)),
            "summary_retriever" => {
                pre.push(ModuleNode::new(id, NodeBehavior::RetrieveSummaryExpand))
            }
            "blueprint" => pre.push(ModuleNode::new(
                id,
                NodeBehavior::PlanBlueprint {
                    template: template(spec, "plan", prompts::BLUEPRINT_QUESTIONS, DocRender::Full)?,
                    params: params.clone().without_stop(),
                },
            )),
            "attributer" => pre.push(
                ModuleNode::new(
                    id,
                    NodeBehavior::PlanAttribute {
                        template: template(
                            spec,
                            "plan",
                            prompts::ATTRIBUTE_CLUSTERS,
                            DocRender::Full,
                        )?,
                        params: params.clone().without_stop(),
                    },
                )
                .with_dispatch(Dispatch::Iterative),
            ),
            "scorer" => post.push(ModuleNode::new(
                id,
                NodeBehavior::FeedbackScorer {
                    threshold: SCORER_THRESHOLD,
                },
            )),
            "verifier" => post.push(ModuleNode::new(id, NodeBehavior::FeedbackVerifier)),
            "reranker" => {
                answer_dispatch = Dispatch::Parallel;
                post.push(ModuleNode::new(
                    id,
                    NodeBehavior::FeedbackReranker { accumulate: false },
                ));
            }
            "reviser" => post.push(ModuleNode::new(
                id,
                NodeBehavior::EditReviser {
                    template: template(spec, "revise", prompts::REVISE_ANSWER, DocRender::Full)?,
                    params: params.clone(),
                },
            )),
            "simplifier" => post.push(ModuleNode::new(id, NodeBehavior::EditSimplifier)),
            other => {
                return Err(RecipeError::SchemaViolation {
                    path: format!("enhancers[{i}]"),
                    message: format!("unknown enhancer kind `{other}`"),
                })
            }
        }
    }
    let plan_driven = pre
        .iter()
        .any(|n| matches!(n.behavior, NodeBehavior::PlanAttribute { .. }));
    let mode = match (spec.generation_mode, plan_driven) {
        (GenerationMode::Iterative, true) => GenMode::Iterative(IterKind::PlanDriven),
        (GenerationMode::Iterative, false) => GenMode::Iterative(IterKind::SentenceLoop {
            candidates: 1,
        }),
        (GenerationMode::Direct, _) => GenMode::Direct {
            candidates: if answer_dispatch == Dispatch::Parallel {
                RERANK_CANDIDATES
            } else {
                1
            },
        },
    };
    let answer = ModuleNode::new(
        "answer",
        generator(
            template(spec, "answer", prompts::ALCE_ANSWER, spec.doc_view)?,
            params,
            mode,
            DocSource::AllStore,
        ),
    )
    .with_dispatch(answer_dispatch);
    let mut nodes = pre;
    nodes.push(answer);
    nodes.extend(post);
    Ok(build_sequence(nodes, backend, judge)?)
}

/// Load and validate a recipe file (JSON form of [`RecipeSpec`]).
pub fn load_recipe_file(path: impl AsRef<Path>) -> Result<RecipeSpec, RecipeError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| RecipeError::SchemaViolation {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_recipe_spec(&bytes)
}

/// Parse and validate recipe-spec JSON.
pub fn parse_recipe_spec(bytes: &[u8]) -> Result<RecipeSpec, RecipeError> {
    let spec: RecipeSpec =
        serde_json::from_slice(bytes).map_err(|e| RecipeError::SchemaViolation {
            path: "<root>".into(),
            message: e.to_string(),
        })?;
    if spec.name.trim().is_empty() {
        return Err(RecipeError::SchemaViolation {
            path: "name".into(),
            message: "name must be non-empty".into(),
        });
    }
    for (i, kind) in spec.enhancers.iter().enumerate() {
        if !ENHANCER_KINDS.contains(&kind.as_str()) {
            return Err(RecipeError::SchemaViolation {
                path: format!("enhancers[{i}]"),
                message: format!("unknown enhancer kind `{kind}`"),
            });
        }
    }
    for (role, prompt) in &spec.prompts {
        PromptTemplate::new(prompt.body.clone(), prompt.doc_render.unwrap_or(DocRender::Full))
            .map_err(|e| RecipeError::SchemaViolation {
                path: format!("prompts.{role}"),
                message: e.to_string(),
            })?;
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;
    use crate::eval::SubstringJudge;
    use crate::pipeline::NodeKind;

    fn resources() -> (Arc<dyn LlmBackend>, Arc<dyn Entailment>) {
        (
            Arc::new(ScriptedBackend::new(Vec::<String>::new())),
            Arc::new(SubstringJudge),
        )
    }

    #[test]
    fn registry_has_thirteen_recipes() {
        assert_eq!(RECIPE_NAMES.len(), 13);
        for name in RECIPE_NAMES {
            assert!(spec_for(name).is_some(), "{name}");
        }
        assert!(spec_for("nope").is_none());
    }

    #[test]
    fn unknown_recipe_errors() {
        let (b, j) = resources();
        let err = build_recipe("nope", &RecipeOverrides::default(), b, j).unwrap_err();
        assert!(matches!(err, RecipeError::UnknownRecipe(_)));
    }

    #[test]
    fn every_registry_recipe_builds_and_validates() {
        for name in RECIPE_NAMES {
            let (b, j) = resources();
            let graph = build_recipe(name, &RecipeOverrides::default(), b, j)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            let warnings = graph.validate().unwrap();
            assert!(warnings.is_empty(), "{name}: {warnings:?}");
        }
    }

    #[test]
    fn attribute_then_generate_is_a_two_node_sequence() {
        let (b, j) = resources();
        let graph =
            build_recipe("attribute_then_generate", &RecipeOverrides::default(), b, j).unwrap();
        let attribute = graph.node("attribute").unwrap();
        assert_eq!(attribute.targets, vec![(Condition::Always, "answer".into())]);
        assert_eq!(attribute.dispatch, Dispatch::Iterative);
        let answer = graph.node("answer").unwrap();
        let NodeBehavior::Generate(cfg) = &answer.behavior else {
            panic!("answer is a generator");
        };
        assert!(cfg.mode.is_iterative());
    }

    #[test]
    fn vtg_wires_verdict_false_to_retriever() {
        let (b, j) = resources();
        let graph = build_recipe("vtg", &RecipeOverrides::default(), b, j).unwrap();
        let verifier = graph.node("verifier").unwrap();
        assert_eq!(verifier.targets[0], (Condition::VerdictFalse, "retriever".into()));
        assert_eq!(verifier.targets[1], (Condition::Always, "simplifier".into()));
        assert_eq!(
            graph.node("retriever").unwrap().targets,
            vec![(Condition::Always, "answer".into())]
        );
    }

    #[test]
    fn doc_count_defaults_match_settings() {
        for (name, expect) in [
            ("alce_vanilla", 5),
            ("alce_summ", 10),
            ("alce_snippet", 10),
            ("alce_interact", 10),
            ("citation_enhanced", 0),
            ("self_rag", 0),
        ] {
            let (b, j) = resources();
            let graph = build_recipe(name, &RecipeOverrides::default(), b, j).unwrap();
            assert_eq!(graph.profile.init_top_n, expect, "{name}");
        }
    }

    #[test]
    fn snippet_variant_differs_only_in_view_and_answer_prompt() {
        let plain = spec_for("self_rag").unwrap();
        let snippet = spec_for("self_rag_snippet").unwrap();
        assert_eq!(plain.enhancers, snippet.enhancers);
        assert_eq!(plain.generation_mode, snippet.generation_mode);
        assert_eq!(plain.doc_count, snippet.doc_count);
        assert_ne!(plain.doc_view, snippet.doc_view);

        let (b, j) = resources();
        let g1 = build_recipe("self_rag", &RecipeOverrides::default(), b, j).unwrap();
        let (b, j) = resources();
        let g2 = build_recipe("self_rag_snippet", &RecipeOverrides::default(), b, j).unwrap();
        let shape = |g: &PipelineGraph| {
            g.nodes_ordered()
                .map(|n| (n.node_id.clone(), n.kind(), n.dispatch, n.targets.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(shape(&g1), shape(&g2));
    }

    #[test]
    fn table_matrix_enhancer_labels() {
        for name in RECIPE_NAMES {
            let spec = spec_for(name).unwrap();
            let (b, j) = resources();
            let graph = build_recipe(name, &RecipeOverrides::default(), b, j).unwrap();
            let labels: Vec<&str> = graph
                .nodes_ordered()
                .filter(|n| {
                    !matches!(
                        n.kind(),
                        NodeKind::Generator | NodeKind::OutputSink | NodeKind::EvaluatorSink
                    )
                })
                .map(|n| n.behavior.label())
                .collect();
            let mut expected: Vec<&str> = spec.enhancers.iter().map(String::as_str).collect();
            let mut got = labels.clone();
            expected.sort_unstable();
            got.sort_unstable();
            assert_eq!(got, expected, "{name}");
        }
    }

    #[test]
    fn recipe_spec_round_trips_to_isomorphic_graph() {
        let spec = spec_for("vtg").unwrap();
        let json = serde_json::to_vec_pretty(&spec).unwrap();
        let reloaded = parse_recipe_spec(&json).unwrap();
        assert_eq!(reloaded, spec);
        let (b, j) = resources();
        let g1 = build_from_spec(&spec, &RecipeOverrides::default(), b, j).unwrap();
        let (b, j) = resources();
        let g2 = build_from_spec(&reloaded, &RecipeOverrides::default(), b, j).unwrap();
        let shape = |g: &PipelineGraph| {
            g.nodes_ordered()
                .map(|n| (n.node_id.clone(), n.behavior.label(), n.dispatch, n.targets.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(shape(&g1), shape(&g2));
    }

    #[test]
    fn recipe_file_overrides_doc_count() {
        let json = br#"{
            "name": "alce_summ",
            "doc_view": "summary",
            "doc_count": 10,
            "generation_mode": "direct",
            "enhancers": []
        }"#;
        let spec = parse_recipe_spec(json).unwrap();
        assert_eq!(spec.doc_count, 10);
        let (b, j) = resources();
        let graph = build_from_spec(&spec, &RecipeOverrides::default(), b, j).unwrap();
        assert_eq!(graph.profile.init_top_n, 10);
    }

    #[test]
    fn unknown_enhancer_kind_is_schema_violation() {
        let json = br#"{
            "name": "custom",
            "doc_view": "full",
            "doc_count": 5,
            "generation_mode": "direct",
            "enhancers": ["dense_retriever"]
        }"#;
        let err = parse_recipe_spec(json).unwrap_err();
        let RecipeError::SchemaViolation { path, .. } = err else {
            panic!("expected schema violation");
        };
        assert_eq!(path, "enhancers[0]");
    }

    #[test]
    fn custom_recipe_assembles_generically() {
        let json = br#"{
            "name": "my_method",
            "doc_view": "full",
            "doc_count": 5,
            "generation_mode": "direct",
            "enhancers": ["blueprint", "simplifier"]
        }"#;
        let spec = parse_recipe_spec(json).unwrap();
        let (b, j) = resources();
        let graph = build_from_spec(&spec, &RecipeOverrides::default(), b, j).unwrap();
        let order: Vec<String> = graph
            .nodes_ordered()
            .map(|n| n.node_id.clone())
            .collect();
        assert_eq!(order, ["blueprint_0", "answer", "simplifier_1", OUTPUT_NODE_ID]);
    }

    #[test]
    fn iterative_flags_match_table_rule() {
        let iterative = ["alce_interact", "attribute_then_generate", "self_rag", "self_rag_snippet"];
        for name in RECIPE_NAMES {
            let (b, j) = resources();
            let graph = build_recipe(name, &RecipeOverrides::default(), b, j).unwrap();
            let answer = graph.node("answer").unwrap();
            let NodeBehavior::Generate(cfg) = &answer.behavior else {
                panic!("{name}: answer node is a generator");
            };
            assert_eq!(
                cfg.mode.is_iterative(),
                iterative.contains(&name),
                "{name}"
            );
        }
    }
}
