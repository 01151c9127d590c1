//! Citation quality metrics: recall, precision, granularity and
//! appropriateness, all judged at statement level.
//!
//! Premise assembly is pinned so independent oracles can reproduce it:
//! document-level citations contribute the full document text, span-level
//! citations the cited spans; texts join with newlines in citation order
//! (recall/precision) or ascending (doc, span) order (granularity).

use std::collections::BTreeSet;
use std::sync::Arc;

use super::judge::{content_tokens, Entailment, JudgeError};
use crate::model::{Answer, Citation, DocStore, SpanRef, Statement};

/// Sentence openers that mark a statement as meta-discourse rather than a
/// citable claim.
const META_PREFIXES: [&str; 11] = [
    "i could not find",
    "i cannot find",
    "i can't find",
    "i do not know",
    "i don't know",
    "i'm sorry",
    "i am sorry",
    "sorry,",
    "there is no information",
    "no information",
    "the provided search results do not",
];

/// Classifies whether a statement needs a citation.
#[derive(Clone)]
pub enum NeedRule {
    /// Declarative sentence contributing at least one content token that is
    /// absent from the question, and not a meta-sentence.
    Heuristic,
    /// Every statement needs a citation.
    AlwaysNeeds,
    Custom(Arc<dyn Fn(&Statement, &str) -> bool + Send + Sync>),
}

impl Default for NeedRule {
    fn default() -> Self {
        NeedRule::Heuristic
    }
}

impl std::fmt::Debug for NeedRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NeedRule::Heuristic => write!(f, "Heuristic"),
            NeedRule::AlwaysNeeds => write!(f, "AlwaysNeeds"),
            NeedRule::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl NeedRule {
    pub fn needs_citation(&self, statement: &Statement, question: &str) -> bool {
        match self {
            NeedRule::AlwaysNeeds => true,
            NeedRule::Custom(rule) => rule(statement, question),
            NeedRule::Heuristic => {
                let text = statement.text.trim();
                if text.is_empty() || text.ends_with('?') {
                    return false;
                }
                let lower = text.to_lowercase();
                if META_PREFIXES.iter().any(|p| lower.starts_with(p)) {
                    return false;
                }
                let question_tokens: BTreeSet<String> =
                    content_tokens(question).into_iter().collect();
                content_tokens(text)
                    .into_iter()
                    .any(|t| !question_tokens.contains(&t))
            }
        }
    }
}

/// Joint premise for a citation set, in citation-list order.
pub fn joint_premise(citations: &[Citation], store: &DocStore) -> String {
    citations
        .iter()
        .map(|c| c.cited_text(store))
        .collect::<Vec<_>>()
        .join("\n")
}

fn entails_set(
    citations: &[Citation],
    statement: &Statement,
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<bool, JudgeError> {
    if citations.is_empty() {
        return Ok(false);
    }
    judge.entails(&joint_premise(citations, store), &statement.text)
}

/// Per-statement verdicts backing recall and the training-data export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct StatementVerdict {
    pub needing: bool,
    pub cited: bool,
    /// Whether the cited texts jointly entail the statement; false when the
    /// statement has no citations.
    pub entailed: bool,
}

pub fn statement_verdicts(
    answer: &Answer,
    store: &DocStore,
    judge: &dyn Entailment,
    need_rule: &NeedRule,
    question: &str,
) -> Result<Vec<StatementVerdict>, JudgeError> {
    answer
        .statements
        .iter()
        .map(|st| {
            Ok(StatementVerdict {
                needing: need_rule.needs_citation(st, question),
                cited: !st.citations.is_empty(),
                entailed: entails_set(&st.citations, st, store, judge)?,
            })
        })
        .collect()
}

/// Recall over citation-needing statements: recalled means cited and jointly
/// entailed. 1.0 when nothing needs a citation.
pub fn citation_recall(
    answer: &Answer,
    store: &DocStore,
    judge: &dyn Entailment,
    need_rule: &NeedRule,
    question: &str,
) -> Result<f64, JudgeError> {
    let verdicts = statement_verdicts(answer, store, judge, need_rule, question)?;
    Ok(recall_from_verdicts(&verdicts))
}

pub fn recall_from_verdicts(verdicts: &[StatementVerdict]) -> f64 {
    let needing = verdicts.iter().filter(|v| v.needing).count();
    if needing == 0 {
        return 1.0;
    }
    let recalled = verdicts
        .iter()
        .filter(|v| v.needing && v.cited && v.entailed)
        .count();
    recalled as f64 / needing as f64
}

/// A citation is irrelevant when it neither entails the statement alone nor
/// is needed by the rest of the set (or the full set never entailed at all).
/// Precision = 1 - irrelevant/total over every cited statement's citations;
/// undefined without citations.
pub fn citation_precision(
    answer: &Answer,
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<Option<f64>, JudgeError> {
    let mut total = 0usize;
    let mut irrelevant = 0usize;
    for st in &answer.statements {
        if st.citations.is_empty() {
            continue;
        }
        let full_entails = entails_set(&st.citations, st, store, judge)?;
        for (idx, citation) in st.citations.iter().enumerate() {
            total += 1;
            let alone = entails_set(std::slice::from_ref(citation), st, store, judge)?;
            if alone {
                continue;
            }
            if !full_entails {
                irrelevant += 1;
                continue;
            }
            let rest: Vec<Citation> = st
                .citations
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != idx)
                .map(|(_, c)| c.clone())
                .collect();
            if entails_set(&rest, st, store, judge)? {
                irrelevant += 1;
            }
        }
    }
    if total == 0 {
        return Ok(None);
    }
    Ok(Some(1.0 - irrelevant as f64 / total as f64))
}

fn span_tokens(span: &SpanRef, store: &DocStore) -> usize {
    store
        .get(span.doc_id)
        .map(|d| span.text(d).split_whitespace().count())
        .unwrap_or(0)
}

fn spans_premise(spans: &[SpanRef], store: &DocStore) -> String {
    let mut ordered: Vec<&SpanRef> = spans.iter().collect();
    ordered.sort_by_key(|s| (s.doc_id, s.span_idx));
    ordered
        .iter()
        .filter_map(|s| store.get(s.doc_id).map(|d| s.text(d).to_string()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Number of the statement's content tokens present in the span.
fn span_overlap(span: &SpanRef, statement: &Statement, store: &DocStore) -> usize {
    let Some(doc) = store.get(span.doc_id) else {
        return 0;
    };
    let span_set: BTreeSet<String> = content_tokens(span.text(doc)).into_iter().collect();
    content_tokens(&statement.text)
        .into_iter()
        .collect::<BTreeSet<_>>()
        .intersection(&span_set)
        .count()
}

/// Expand a statement's citations to the deduplicated span set.
pub fn expand_statement_spans(statement: &Statement, store: &DocStore) -> Vec<SpanRef> {
    let mut seen = BTreeSet::new();
    let mut spans = Vec::new();
    for citation in &statement.citations {
        for span in citation.expand(store) {
            if seen.insert((span.doc_id, span.span_idx)) {
                spans.push(span);
            }
        }
    }
    spans
}

/// Greedy minimal entailing span subset: add spans in descending individual
/// overlap (ties by ascending doc then span index) until the accumulated
/// spans jointly entail the statement. Yields all spans when nothing smaller
/// works.
pub fn minimal_entailing_spans(
    statement: &Statement,
    spans: &[SpanRef],
    store: &DocStore,
    judge: &dyn Entailment,
) -> Result<Vec<SpanRef>, JudgeError> {
    let mut ranked: Vec<SpanRef> = spans.to_vec();
    ranked.sort_by(|a, b| {
        span_overlap(b, statement, store)
            .cmp(&span_overlap(a, statement, store))
            .then(a.doc_id.cmp(&b.doc_id))
            .then(a.span_idx.cmp(&b.span_idx))
    });
    let mut selected: Vec<SpanRef> = Vec::new();
    for span in ranked {
        selected.push(span);
        if judge.entails(&spans_premise(&selected, store), &statement.text)? {
            return Ok(selected);
        }
    }
    Ok(selected)
}

/// Mean over recalled statements of tokens(minimal entailing span subset) /
/// tokens(all cited spans), document-level citations expanding to every span
/// of the document. Undefined without recalled statements.
pub fn citation_granularity(
    answer: &Answer,
    store: &DocStore,
    judge: &dyn Entailment,
    need_rule: &NeedRule,
    question: &str,
) -> Result<Option<f64>, JudgeError> {
    let verdicts = statement_verdicts(answer, store, judge, need_rule, question)?;
    let mut values = Vec::new();
    for (st, verdict) in answer.statements.iter().zip(&verdicts) {
        if !(verdict.needing && verdict.cited && verdict.entailed) {
            continue;
        }
        let spans = expand_statement_spans(st, store);
        let total: usize = spans.iter().map(|s| span_tokens(s, store)).sum();
        if total == 0 {
            continue;
        }
        let minimal = minimal_entailing_spans(st, &spans, store, judge)?;
        let kept: usize = minimal.iter().map(|s| span_tokens(s, store)).sum();
        values.push(kept as f64 / total as f64);
    }
    if values.is_empty() {
        return Ok(None);
    }
    Ok(Some(values.iter().sum::<f64>() / values.len() as f64))
}

/// Fraction of statements whose citation presence matches the need rule.
/// Undefined for an empty answer.
pub fn citation_appropriateness(
    answer: &Answer,
    need_rule: &NeedRule,
    question: &str,
) -> Option<f64> {
    if answer.statements.is_empty() {
        return None;
    }
    let correct = answer
        .statements
        .iter()
        .filter(|st| {
            let needs = need_rule.needs_citation(st, question);
            needs == !st.citations.is_empty()
        })
        .count();
    Some(correct as f64 / answer.statements.len() as f64)
}
