//! Ahead planners: blueprint question generation and span attribution.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::EnhanceError;
use crate::backend::{bindings, generate, render_prompt, GenParams, LlmBackend, PromptTemplate};
use crate::eval::tokens;
use crate::model::{DocId, DocStore, SpanRef};

/// Most sub-questions a blueprint may carry.
pub const MAX_BLUEPRINT_QUESTIONS: usize = 4;
/// Minimum token-overlap fraction for a quoted line to map onto a span.
pub const SPAN_MATCH_THRESHOLD: f64 = 0.5;

/// Guidance produced ahead of generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Plan {
    /// Sub-questions the answer should cover.
    BlueprintQuestions(Vec<String>),
    /// Clusters of document spans, one cluster per answer sentence.
    SpanClusters(Vec<Vec<SpanRef>>),
}

impl Plan {
    pub fn len(&self) -> usize {
        match self {
            Plan::BlueprintQuestions(qs) => qs.len(),
            Plan::SpanClusters(cs) => cs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Split a completion into at most four sub-questions on question marks.
/// Only `?`-terminated segments count; ones without an alphanumeric
/// character are dropped.
pub fn parse_blueprint(completion: &str) -> Result<Plan, EnhanceError> {
    let mut segments: Vec<&str> = completion.split('?').collect();
    // The text after the final question mark is a remainder, not a question.
    segments.pop();
    let questions: Vec<String> = segments
        .into_iter()
        .map(str::trim)
        .filter(|seg| seg.chars().any(char::is_alphanumeric))
        .take(MAX_BLUEPRINT_QUESTIONS)
        .map(|seg| format!("{seg}?"))
        .collect();
    if questions.is_empty() {
        return Err(EnhanceError::EmptyPlan);
    }
    Ok(Plan::BlueprintQuestions(questions))
}

/// Prompt the backend for sub-questions over the stored documents.
pub fn plan_blueprint(
    question: &str,
    store: &DocStore,
    backend: &dyn LlmBackend,
    template: &PromptTemplate,
    params: &GenParams,
) -> Result<Plan, EnhanceError> {
    let prompt = render_prompt(
        template,
        &bindings([("question", question)]),
        store,
        &store.ids(),
    )?;
    let completion = generate(backend, &prompt.text, params)?;
    parse_blueprint(&completion.text)
}

fn cluster_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)\s*\.\s*(.*)$").expect("valid regex"))
}

fn doc_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*Document\s*\[(\d+)\][^:]*:\s*(.*)$").expect("valid regex"))
}

/// A quoted line under a `Document[i]:` header, before span matching.
#[derive(Debug, Clone, PartialEq)]
struct QuotedSpan {
    doc_id: DocId,
    quote: String,
}

/// Parse the attributer completion into clusters of document quotes.
fn parse_clusters(completion: &str) -> Result<Vec<Vec<QuotedSpan>>, EnhanceError> {
    let mut clusters: Vec<Vec<QuotedSpan>> = Vec::new();
    let mut current_doc: Option<DocId> = None;
    let mut quote_buf = String::new();

    fn flush(
        clusters: &mut [Vec<QuotedSpan>],
        current_doc: &mut Option<DocId>,
        quote_buf: &mut String,
    ) {
        if let (Some(doc_id), Some(cluster)) = (*current_doc, clusters.last_mut()) {
            let quote = quote_buf.trim();
            if !quote.is_empty() {
                cluster.push(QuotedSpan {
                    doc_id,
                    quote: quote.to_string(),
                });
            }
        }
        *current_doc = None;
        quote_buf.clear();
    }

    for line in completion.lines() {
        if let Some(caps) = doc_header_re().captures(line) {
            flush(&mut clusters, &mut current_doc, &mut quote_buf);
            if clusters.is_empty() {
                // Quoted documents before any cluster header: treat as one
                // implicit cluster so single-cluster outputs still parse.
                clusters.push(Vec::new());
            }
            current_doc = caps[1].parse::<u32>().ok().map(DocId);
            quote_buf = caps[2].trim().to_string();
            continue;
        }
        if let Some(caps) = cluster_header_re().captures(line) {
            flush(&mut clusters, &mut current_doc, &mut quote_buf);
            clusters.push(Vec::new());
            let rest = caps[2].trim();
            if let Some(doc_caps) = doc_header_re().captures(rest) {
                current_doc = doc_caps[1].parse::<u32>().ok().map(DocId);
                quote_buf = doc_caps[2].trim().to_string();
            }
            continue;
        }
        if current_doc.is_some() {
            if !quote_buf.is_empty() {
                quote_buf.push(' ');
            }
            quote_buf.push_str(line.trim());
        }
    }
    flush(&mut clusters, &mut current_doc, &mut quote_buf);

    if clusters.is_empty() {
        return Err(EnhanceError::UnparseablePlan);
    }
    Ok(clusters)
}

/// Fraction of the quote's tokens present in the span.
fn overlap_fraction(quote_tokens: &BTreeSet<String>, span_text: &str) -> f64 {
    if quote_tokens.is_empty() {
        return 0.0;
    }
    let span_tokens: BTreeSet<String> = tokens(span_text).into_iter().collect();
    let hit = quote_tokens.intersection(&span_tokens).count();
    hit as f64 / quote_tokens.len() as f64
}

/// Map a quote onto the best-overlapping span of its document; quotes below
/// [`SPAN_MATCH_THRESHOLD`] (or naming unknown documents) are dropped.
fn match_quote(store: &DocStore, quoted: &QuotedSpan) -> Option<SpanRef> {
    let doc = store.get(quoted.doc_id)?;
    let quote_tokens: BTreeSet<String> = tokens(&quoted.quote).into_iter().collect();
    let mut best: Option<(f64, SpanRef)> = None;
    for span in &doc.spans {
        let frac = overlap_fraction(&quote_tokens, span.text(doc));
        let better = match &best {
            None => true,
            Some((best_frac, _)) => frac > *best_frac,
        };
        if better {
            best = Some((frac, *span));
        }
    }
    best.filter(|(frac, _)| *frac >= SPAN_MATCH_THRESHOLD)
        .map(|(_, span)| span)
}

/// Parse an attributer completion against the store: numbered cluster
/// headers, `Document[i]:` quote lines, token-overlap span matching.
/// Clusters left empty after matching are dropped.
pub fn parse_attribution(completion: &str, store: &DocStore) -> Result<Plan, EnhanceError> {
    let clusters = parse_clusters(completion)?;
    let matched: Vec<Vec<SpanRef>> = clusters
        .iter()
        .map(|cluster| {
            let mut spans = Vec::new();
            for quoted in cluster {
                if let Some(span) = match_quote(store, quoted) {
                    if !spans.contains(&span) {
                        spans.push(span);
                    }
                }
            }
            spans
        })
        .filter(|spans| !spans.is_empty())
        .collect();
    Ok(Plan::SpanClusters(matched))
}

/// Ask the backend to highlight and cluster useful spans.
pub fn plan_attribute(
    question: &str,
    store: &DocStore,
    backend: &dyn LlmBackend,
    template: &PromptTemplate,
    params: &GenParams,
) -> Result<Plan, EnhanceError> {
    let prompt = render_prompt(
        template,
        &bindings([("question", question)]),
        store,
        &store.ids(),
    )?;
    let completion = generate(backend, &prompt.text, params)?;
    if completion.text.trim().is_empty() {
        return Err(EnhanceError::UnparseablePlan);
    }
    parse_attribution(&completion.text, store)
}

/// Render a span cluster as `Document [i]: <span text>` lines for prompting.
pub fn render_cluster(cluster: &[SpanRef], store: &DocStore) -> String {
    cluster
        .iter()
        .filter_map(|span| {
            store
                .get(span.doc_id)
                .map(|doc| format!("Document [{}]: {}", span.doc_id.0, span.text(doc)))
        })
        .collect::<Vec<_>>()
        .join("\n")
}
