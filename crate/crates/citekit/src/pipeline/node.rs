//! Node behaviors: what each pipeline node does with a payload.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;

use super::runner::ItemCtx;
use super::{NodeKind, Payload};
use crate::backend::{
    generate, render_docs, render_with_docs_block, DocRender, GenParams, PromptTemplate,
};
use crate::enhance::{
    edit_revise, plan_attribute, plan_blueprint, render_cluster, retrieve_index,
    retrieve_inner, retrieve_relevance, simplify_answer, verify_answer, answer_support_score,
    feedback_rerank, Corpus, EnhanceError, Feedback, Plan,
};
use crate::model::{parse_answer, DocId};

/// Which documents fill a generator's `{docs}` placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DocSource {
    /// Everything currently stored, ascending id.
    #[default]
    AllStore,
    /// Only the documents added by the most recent retrieval.
    LastRetrieved,
    /// No documents (closed-book generation).
    None,
}

/// Iterative generation flavors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterKind {
    /// One sentence per plan element, delivered via iterative dispatch.
    PlanDriven,
    /// Conversational turns with check-document actions.
    Interact,
    /// One sentence turn per graph visit, emitting candidate segments.
    SentenceLoop { candidates: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    Direct { candidates: usize },
    Iterative(IterKind),
}

impl GenMode {
    pub fn is_iterative(&self) -> bool {
        matches!(self, GenMode::Iterative(_))
    }
}

/// A generator node's full configuration.
#[derive(Clone)]
pub struct GeneratorCfg {
    pub template: PromptTemplate,
    pub params: GenParams,
    pub mode: GenMode,
    pub doc_source: DocSource,
}

/// Where a relevance retriever takes its query from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuerySource {
    #[default]
    Question,
    /// The statement the verifier last rejected, falling back to the question.
    FailedStatement,
    /// The incoming payload text (e.g. a generated search query).
    Payload,
}

/// What the output sink publishes as the final answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputSource {
    #[default]
    Payload,
    /// The accumulated sentence prefix (sentence-loop recipes).
    PrefixData,
}

/// The executable component behind a node.
#[derive(Clone)]
pub enum NodeBehavior {
    Generate(GeneratorCfg),
    RetrieveRelevance { k: usize, query: QuerySource },
    /// Interact-style `check(k)`: swap the summary view for the full text.
    RetrieveSummaryExpand,
    /// Fetch a stored document by the index named in the payload.
    RetrieveIndex,
    RetrieveInner { n: usize, params: GenParams },
    /// Post-hoc citation assignment for uncited statements.
    AssignCitations { k: usize },
    PlanBlueprint { template: PromptTemplate, params: GenParams },
    PlanAttribute { template: PromptTemplate, params: GenParams },
    FeedbackScorer { threshold: f64 },
    FeedbackReranker { accumulate: bool },
    FeedbackVerifier,
    EditReviser { template: PromptTemplate, params: GenParams },
    EditSimplifier,
    Output { source: OutputSource },
}

impl NodeBehavior {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeBehavior::Generate(_) => NodeKind::Generator,
            NodeBehavior::RetrieveRelevance { .. }
            | NodeBehavior::RetrieveSummaryExpand
            | NodeBehavior::RetrieveIndex
            | NodeBehavior::RetrieveInner { .. }
            | NodeBehavior::AssignCitations { .. } => NodeKind::Retriever,
            NodeBehavior::PlanBlueprint { .. } | NodeBehavior::PlanAttribute { .. } => {
                NodeKind::Planner
            }
            NodeBehavior::FeedbackScorer { .. }
            | NodeBehavior::FeedbackReranker { .. }
            | NodeBehavior::FeedbackVerifier => NodeKind::Feedbacker,
            NodeBehavior::EditReviser { .. } | NodeBehavior::EditSimplifier => NodeKind::Editor,
            NodeBehavior::Output { .. } => NodeKind::OutputSink,
        }
    }

    /// Enhancer-kind label matching the recipe registry vocabulary.
    pub fn label(&self) -> &'static str {
        match self {
            NodeBehavior::Generate(cfg) => {
                if cfg.mode.is_iterative() {
                    "generator_iterative"
                } else {
                    "generator_direct"
                }
            }
            NodeBehavior::RetrieveRelevance { .. } => "relevance_retriever",
            NodeBehavior::RetrieveSummaryExpand => "summary_retriever",
            NodeBehavior::RetrieveIndex => "index_retriever",
            NodeBehavior::RetrieveInner { .. } => "inner_retriever",
            NodeBehavior::AssignCitations { .. } => "relevance_retriever",
            NodeBehavior::PlanBlueprint { .. } => "blueprint",
            NodeBehavior::PlanAttribute { .. } => "attributer",
            NodeBehavior::FeedbackScorer { .. } => "scorer",
            NodeBehavior::FeedbackReranker { .. } => "reranker",
            NodeBehavior::FeedbackVerifier => "verifier",
            NodeBehavior::EditReviser { .. } => "reviser",
            NodeBehavior::EditSimplifier => "simplifier",
            NodeBehavior::Output { .. } => "output",
        }
    }

    /// Whether the node consumes a candidate list as one input (so parallel
    /// dispatch must not fan it out).
    pub fn consumes_list(&self) -> bool {
        matches!(self, NodeBehavior::FeedbackReranker { .. })
    }
}

fn check_action_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*check\s*\(\s*(\d+)\s*\)\s*\.?\s*$").expect("valid regex"))
}

/// Parse an interact `check(k)` action.
pub fn parse_check_action(text: &str) -> Option<DocId> {
    check_action_re()
        .captures(text)
        .and_then(|c| c[1].parse::<u32>().ok())
        .map(DocId)
}

fn generator_bindings(payload: &Payload, ctx: &ItemCtx) -> BTreeMap<String, String> {
    let mut b = BTreeMap::new();
    b.insert("question".to_string(), ctx.question.clone());
    b.insert(
        "prefix".to_string(),
        ctx.data.get("prefix").cloned().unwrap_or_default(),
    );
    b.insert(
        "feedback".to_string(),
        ctx.data.get("feedback").cloned().unwrap_or_default(),
    );
    let payload_text = payload.text_view();
    let plan = if payload_text.trim().is_empty() {
        ctx.data.get("plan").cloned().unwrap_or_default()
    } else {
        payload_text
    };
    b.insert("plan".to_string(), plan);
    b
}

fn doc_ids_for(source: DocSource, ctx: &ItemCtx) -> Vec<DocId> {
    match source {
        DocSource::AllStore => ctx.store.ids(),
        DocSource::LastRetrieved => ctx.last_retrieved.clone(),
        DocSource::None => Vec::new(),
    }
}

/// Render the `{docs}` block for the interact generator: checked documents
/// show full text, the rest the template's view.
fn interact_docs_block(
    cfg: &GeneratorCfg,
    ctx: &mut ItemCtx,
) -> Result<String, EnhanceError> {
    let expanded: Vec<DocId> = ctx
        .data
        .get("expanded")
        .map(|s| {
            s.split(',')
                .filter_map(|t| t.trim().parse::<u32>().ok())
                .map(DocId)
                .collect()
        })
        .unwrap_or_default();
    let ids = doc_ids_for(cfg.doc_source, ctx);
    let mut lines = Vec::with_capacity(ids.len());
    for id in ids {
        let view = if expanded.contains(&id) {
            DocRender::Full
        } else {
            cfg.template.doc_render
        };
        let rendered = render_docs(&ctx.store, &[id], view)
            .map_err(|e| EnhanceError::Backend(e.into()))?;
        for fallback in rendered.view_fallbacks {
            ctx.trace
                .warnings
                .push(format!("document {fallback} lacks the requested view; using full text"));
        }
        lines.push(rendered.text);
    }
    Ok(lines.join("\n"))
}

fn run_generator(
    cfg: &GeneratorCfg,
    payload: Payload,
    ctx: &mut ItemCtx,
) -> Result<Payload, EnhanceError> {
    let bindings = generator_bindings(&payload, ctx);
    let docs_block = if matches!(cfg.mode, GenMode::Iterative(IterKind::Interact)) {
        interact_docs_block(cfg, ctx)?
    } else {
        let ids = doc_ids_for(cfg.doc_source, ctx);
        let rendered = render_docs(&ctx.store, &ids, cfg.template.doc_render)
            .map_err(|e| EnhanceError::Backend(e.into()))?;
        for fallback in rendered.view_fallbacks {
            ctx.trace
                .warnings
                .push(format!("document {fallback} lacks the requested view; using full text"));
        }
        rendered.text
    };
    let prompt = render_with_docs_block(&cfg.template, &bindings, &docs_block)
        .map_err(|e| EnhanceError::Backend(e.into()))?;
    ctx.last_prompt = prompt.clone();

    match cfg.mode {
        GenMode::Direct { candidates } | GenMode::Iterative(IterKind::SentenceLoop { candidates })
            if candidates > 1 =>
        {
            let mut outs = Vec::with_capacity(candidates);
            for _ in 0..candidates {
                outs.push(generate(ctx.backend.as_ref(), &prompt, &cfg.params)?.text);
            }
            Ok(Payload::TextList(outs))
        }
        GenMode::Iterative(IterKind::Interact) => {
            let completion = generate(ctx.backend.as_ref(), &prompt, &cfg.params)?;
            let is_check = parse_check_action(&completion.text).is_some();
            Ok(Payload::Judged {
                text: completion.text,
                verdict: is_check,
            })
        }
        _ => {
            let completion = generate(ctx.backend.as_ref(), &prompt, &cfg.params)?;
            Ok(Payload::Text(completion.text))
        }
    }
}

fn relevance_corpus(ctx: &ItemCtx) -> Corpus {
    if ctx.pool.is_empty() {
        Corpus::Store
    } else {
        Corpus::Pool(ctx.pool.clone())
    }
}

fn run_relevance(
    k: usize,
    query_source: QuerySource,
    payload: Payload,
    ctx: &mut ItemCtx,
) -> Result<Payload, EnhanceError> {
    let query = match query_source {
        QuerySource::Question => ctx.question.clone(),
        QuerySource::FailedStatement => ctx
            .data
            .get("failed_stmt")
            .cloned()
            .unwrap_or_else(|| ctx.question.clone()),
        QuerySource::Payload => {
            let text = payload.text_view();
            if text.trim().is_empty() {
                ctx.question.clone()
            } else {
                text
            }
        }
    };
    let corpus = relevance_corpus(ctx);
    let result = retrieve_relevance(&query, &corpus, k, &mut ctx.store)?;
    ctx.last_retrieved = result.doc_ids();
    Ok(payload)
}

fn run_summary_expand(payload: Payload, ctx: &mut ItemCtx) -> Result<Payload, EnhanceError> {
    let text = payload.text_view();
    let Some(doc_id) = parse_check_action(&text) else {
        ctx.trace
            .warnings
            .push(format!("summary retriever got a non-check payload: {text:?}"));
        return Ok(payload);
    };
    retrieve_index(&ctx.store, doc_id)?;
    let mut expanded: Vec<String> = ctx
        .data
        .get("expanded")
        .map(|s| s.split(',').map(str::to_string).filter(|t| !t.is_empty()).collect())
        .unwrap_or_default();
    let id_str = doc_id.0.to_string();
    if !expanded.contains(&id_str) {
        expanded.push(id_str);
    }
    ctx.data.insert("expanded".into(), expanded.join(","));
    ctx.last_retrieved = vec![doc_id];
    Ok(Payload::empty())
}

fn run_index(payload: Payload, ctx: &mut ItemCtx) -> Result<Payload, EnhanceError> {
    let text = payload.text_view();
    let doc_id = parse_check_action(&text)
        .or_else(|| text.trim().parse::<u32>().ok().map(DocId))
        .ok_or_else(|| EnhanceError::Internal(format!("no document index in payload {text:?}")))?;
    let doc = retrieve_index(&ctx.store, doc_id)?;
    let rendered = format!("Document [{}](Title: {}): {}", doc.doc_id.0, doc.title, doc.text);
    ctx.last_retrieved = vec![doc_id];
    Ok(Payload::Text(rendered))
}

fn run_assign_citations(k: usize, payload: Payload, ctx: &mut ItemCtx) -> Result<Payload, EnhanceError> {
    let answer = parse_answer(&payload.text_view());
    let mut statements = Vec::with_capacity(answer.statements.len());
    for statement in &answer.statements {
        if !statement.citations.is_empty() {
            statements.push(statement.clone());
            continue;
        }
        let corpus = relevance_corpus(ctx);
        let result = retrieve_relevance(&statement.text, &corpus, k, &mut ctx.store)?;
        let mut revised = statement.clone();
        for doc in &result.docs {
            if ctx.judge.entails(&doc.text, &statement.text)? {
                revised
                    .citations
                    .push(crate::model::Citation::document(doc.doc_id));
                break;
            }
        }
        statements.push(revised);
    }
    let assembled = crate::model::Answer {
        statements,
        full_text: String::new(),
    };
    let text = assembled.render_text();
    Ok(Payload::Text(text))
}

fn run_scorer(threshold: f64, payload: Payload, ctx: &mut ItemCtx) -> Result<Payload, EnhanceError> {
    let text = payload.text_view();
    let answer = parse_answer(&text);
    let score = answer_support_score(&answer, &ctx.store, ctx.judge.as_ref())?;
    let supported = (score * answer.statements.len() as f64).round() as usize;
    ctx.data.insert(
        "feedback".into(),
        format!(
            "Support score {:.2}: {} of {} statements are fully supported by their citations.",
            score,
            supported,
            answer.statements.len()
        ),
    );
    Ok(Payload::Judged {
        text,
        verdict: score >= threshold,
    })
}

fn run_reranker(accumulate: bool, payload: Payload, ctx: &mut ItemCtx) -> Result<Payload, EnhanceError> {
    let candidates = match payload {
        Payload::TextList(items) if !items.is_empty() => items,
        other => vec![other.text_view()],
    };
    let feedback = feedback_rerank(&candidates, ctx.judge.as_ref(), &ctx.store)?;
    let Feedback::RerankChoice { passthrough, .. } = feedback else {
        unreachable!("rerank returns a choice");
    };
    if accumulate && !passthrough.trim().is_empty() {
        let mut prefix = ctx.data.get("prefix").cloned().unwrap_or_default();
        if !prefix.is_empty() {
            prefix.push(' ');
        }
        prefix.push_str(passthrough.trim());
        ctx.data.insert("prefix".into(), prefix);
    }
    Ok(Payload::Text(passthrough))
}

fn run_verifier(payload: Payload, ctx: &mut ItemCtx) -> Result<Payload, EnhanceError> {
    let text = payload.text_view();
    let answer = parse_answer(&text);
    let (verdict, failing) = verify_answer(&answer, &ctx.store, ctx.judge.as_ref())?;
    if let Some(statement) = failing {
        ctx.data.insert("failed_stmt".into(), statement.text);
    }
    Ok(Payload::Judged { text, verdict })
}

fn run_reviser(
    template: &PromptTemplate,
    params: &GenParams,
    payload: Payload,
    ctx: &mut ItemCtx,
) -> Result<Payload, EnhanceError> {
    let answer = parse_answer(&payload.text_view());
    let feedback = ctx.data.get("feedback").cloned().unwrap_or_default();
    let revision = edit_revise(
        &answer,
        &feedback,
        ctx.backend.as_ref(),
        &ctx.store,
        &ctx.question,
        template,
        params,
    )?;
    if !revision.revised {
        ctx.trace
            .warnings
            .push("reviser returned a blank revision; original answer kept".into());
    }
    Ok(Payload::Text(revision.answer.full_text))
}

fn run_simplifier(payload: Payload, ctx: &mut ItemCtx) -> Result<Payload, EnhanceError> {
    let answer = parse_answer(&payload.text_view());
    let simplified = simplify_answer(&answer, &ctx.store, ctx.judge.as_ref())?;
    Ok(Payload::Text(simplified.full_text))
}

fn run_planner_blueprint(
    template: &PromptTemplate,
    params: &GenParams,
    ctx: &mut ItemCtx,
) -> Result<Payload, EnhanceError> {
    let plan = plan_blueprint(
        &ctx.question,
        &ctx.store,
        ctx.backend.as_ref(),
        template,
        params,
    )?;
    let Plan::BlueprintQuestions(questions) = plan else {
        unreachable!("blueprint planner yields questions");
    };
    let joined = questions.join(" ");
    ctx.data.insert("plan".into(), joined.clone());
    Ok(Payload::Text(joined))
}

fn run_planner_attribute(
    template: &PromptTemplate,
    params: &GenParams,
    ctx: &mut ItemCtx,
) -> Result<Payload, EnhanceError> {
    let plan = plan_attribute(
        &ctx.question,
        &ctx.store,
        ctx.backend.as_ref(),
        template,
        params,
    )?;
    let Plan::SpanClusters(clusters) = plan else {
        unreachable!("attributer yields span clusters");
    };
    let rendered: Vec<String> = clusters
        .iter()
        .map(|cluster| render_cluster(cluster, &ctx.store))
        .collect();
    Ok(Payload::TextList(rendered))
}

/// Execute one node behavior against a payload.
pub fn execute(
    behavior: &NodeBehavior,
    payload: Payload,
    ctx: &mut ItemCtx,
) -> Result<Payload, EnhanceError> {
    match behavior {
        NodeBehavior::Generate(cfg) => run_generator(cfg, payload, ctx),
        NodeBehavior::RetrieveRelevance { k, query } => run_relevance(*k, *query, payload, ctx),
        NodeBehavior::RetrieveSummaryExpand => run_summary_expand(payload, ctx),
        NodeBehavior::RetrieveIndex => run_index(payload, ctx),
        NodeBehavior::RetrieveInner { n, params } => {
            let result = retrieve_inner(
                &ctx.question,
                ctx.backend.as_ref(),
                *n,
                &mut ctx.store,
                params,
            )?;
            ctx.last_retrieved = result.doc_ids();
            Ok(payload)
        }
        NodeBehavior::AssignCitations { k } => run_assign_citations(*k, payload, ctx),
        NodeBehavior::PlanBlueprint { template, params } => {
            run_planner_blueprint(template, params, ctx)
        }
        NodeBehavior::PlanAttribute { template, params } => {
            run_planner_attribute(template, params, ctx)
        }
        NodeBehavior::FeedbackScorer { threshold } => run_scorer(*threshold, payload, ctx),
        NodeBehavior::FeedbackReranker { accumulate } => run_reranker(*accumulate, payload, ctx),
        NodeBehavior::FeedbackVerifier => run_verifier(payload, ctx),
        NodeBehavior::EditReviser { template, params } => {
            run_reviser(template, params, payload, ctx)
        }
        NodeBehavior::EditSimplifier => run_simplifier(payload, ctx),
        NodeBehavior::Output { source } => match source {
            OutputSource::Payload => Ok(payload),
            OutputSource::PrefixData => Ok(Payload::Text(
                ctx.data.get("prefix").cloned().unwrap_or_default(),
            )),
        },
    }
}
