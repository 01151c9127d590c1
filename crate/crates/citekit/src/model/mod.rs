//! Domain types and deterministic text mechanics: document indexing,
//! citation parsing, sentence and span segmentation.

mod parse;

pub use parse::{normalize_ws, parse_answer, segment_spans, segment_text, strip_citations};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based document index, displayed as `[k]` in generated text.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct DocId(pub u32);

impl DocId {
    /// Sentinel for a document that has not been stored yet.
    pub const UNASSIGNED: DocId = DocId(0);

    pub fn is_assigned(self) -> bool {
        self.0 != 0
    }
}

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.0)
    }
}

/// Where a document entered the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocOrigin {
    Initial,
    RetrievedRuntime,
}

/// A sentence-level segment of a document's text.
///
/// `char_range` is a half-open byte range into the owning document's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SpanRef {
    pub doc_id: DocId,
    pub span_idx: u32,
    pub start: usize,
    pub end: usize,
}

impl SpanRef {
    /// Resolve the span's text against its owning document.
    pub fn text<'a>(&self, doc: &'a Document) -> &'a str {
        &doc.text[self.start..self.end]
    }
}

/// An indexed knowledge unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: DocId,
    pub title: String,
    pub text: String,
    /// Sentence-level segmentation of `text`, in ascending offset order.
    pub spans: Vec<SpanRef>,
    /// Extraction view. When it occurs verbatim inside `text`, span-level
    /// citation refinement can map citations of this document onto the
    /// spans the snippet covers.
    pub snippet: Option<String>,
    /// Abstractive view; never mapped back onto spans.
    pub summary: Option<String>,
    pub origin: DocOrigin,
}

impl Document {
    pub fn new(title: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let spans = segment_text(&text)
            .into_iter()
            .enumerate()
            .map(|(i, (start, end))| SpanRef {
                doc_id: DocId::UNASSIGNED,
                span_idx: i as u32,
                start,
                end,
            })
            .collect();
        Document {
            doc_id: DocId::UNASSIGNED,
            title: title.into(),
            text,
            spans,
            snippet: None,
            summary: None,
            origin: DocOrigin::Initial,
        }
    }

    pub fn with_snippet(mut self, snippet: impl Into<String>) -> Self {
        self.snippet = Some(snippet.into());
        self
    }

    pub fn with_summary(mut self, summary: impl Into<String>) -> Self {
        self.summary = Some(summary.into());
        self
    }

    pub fn with_origin(mut self, origin: DocOrigin) -> Self {
        self.origin = origin;
        self
    }

    /// Byte range the snippet occupies in `text`, if present verbatim.
    pub fn snippet_range(&self) -> Option<(usize, usize)> {
        let snippet = self.snippet.as_deref()?.trim();
        if snippet.is_empty() {
            return None;
        }
        self.text.find(snippet).map(|s| (s, s + snippet.len()))
    }

    /// Spans whose range overlaps the snippet, if the snippet maps into `text`.
    pub fn snippet_spans(&self) -> Option<Vec<SpanRef>> {
        let (s, e) = self.snippet_range()?;
        let covered: Vec<SpanRef> = self
            .spans
            .iter()
            .filter(|sp| sp.start < e && sp.end > s)
            .copied()
            .collect();
        if covered.is_empty() {
            None
        } else {
            Some(covered)
        }
    }
}

/// Citation granularity level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CitationLevel {
    Document,
    Span,
}

/// A link from a statement to a document or to specific spans of it.
///
/// A document-level citation denotes all spans of the document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Citation {
    pub doc_id: DocId,
    pub level: CitationLevel,
    pub span_refs: Vec<SpanRef>,
}

impl Citation {
    pub fn document(doc_id: DocId) -> Self {
        Citation {
            doc_id,
            level: CitationLevel::Document,
            span_refs: Vec::new(),
        }
    }

    pub fn spans(doc_id: DocId, span_refs: Vec<SpanRef>) -> Self {
        debug_assert!(!span_refs.is_empty());
        Citation {
            doc_id,
            level: CitationLevel::Span,
            span_refs,
        }
    }

    /// Expand to the concrete span set: a document-level citation yields
    /// every span of the document.
    pub fn expand(&self, store: &DocStore) -> Vec<SpanRef> {
        match self.level {
            CitationLevel::Span => self.span_refs.clone(),
            CitationLevel::Document => store
                .get(self.doc_id)
                .map(|d| d.spans.clone())
                .unwrap_or_default(),
        }
    }

    /// Text backing this citation: the full document text at document level,
    /// the cited spans otherwise.
    pub fn cited_text(&self, store: &DocStore) -> String {
        match self.level {
            CitationLevel::Document => store
                .get(self.doc_id)
                .map(|d| d.text.clone())
                .unwrap_or_default(),
            CitationLevel::Span => {
                let Some(doc) = store.get(self.doc_id) else {
                    return String::new();
                };
                self.span_refs
                    .iter()
                    .map(|s| s.text(doc))
                    .collect::<Vec<_>>()
                    .join(" ")
            }
        }
    }
}

/// A sentence-level unit of a generated answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    /// Sentence text with citation markers removed.
    pub text: String,
    /// Original sentence text, markers included.
    pub raw: String,
    /// Citations in first-occurrence order of their markers in `raw`.
    pub citations: Vec<Citation>,
}

impl Statement {
    pub fn cited_doc_ids(&self) -> Vec<DocId> {
        self.citations.iter().map(|c| c.doc_id).collect()
    }
}

/// A generated answer decomposed into statements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Answer {
    pub statements: Vec<Statement>,
    pub full_text: String,
}

impl Answer {
    /// Reassemble answer text from statements, rendering each statement's
    /// citation set as a canonical ` [i][j]` block before the terminator.
    pub fn render_text(&self) -> String {
        self.statements
            .iter()
            .map(render_statement)
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Rewrite document-level citations as span-level citations covering the
    /// cited document's snippet. Citations of documents without a mappable
    /// snippet are left at document level.
    pub fn refine_to_snippets(&self, store: &DocStore) -> Answer {
        let statements = self
            .statements
            .iter()
            .map(|st| {
                let citations = st
                    .citations
                    .iter()
                    .map(|c| {
                        if c.level != CitationLevel::Document {
                            return c.clone();
                        }
                        match store.get(c.doc_id).and_then(|d| d.snippet_spans()) {
                            Some(spans) => Citation::spans(c.doc_id, spans),
                            None => c.clone(),
                        }
                    })
                    .collect();
                Statement {
                    text: st.text.clone(),
                    raw: st.raw.clone(),
                    citations,
                }
            })
            .collect();
        Answer {
            statements,
            full_text: self.full_text.clone(),
        }
    }
}

fn render_statement(st: &Statement) -> String {
    let markers: String = st.citations.iter().map(|c| c.doc_id.to_string()).collect();
    if markers.is_empty() {
        return st.text.clone();
    }
    let text = st.text.trim_end();
    match text.chars().last() {
        Some(t @ ('.' | '!' | '?')) => {
            let body = text[..text.len() - t.len_utf8()].trim_end();
            format!("{body} {markers}{t}")
        }
        _ => format!("{text} {markers}"),
    }
}

/// Errors from [`DocStore`] mutation.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum StoreError {
    #[error("document store is full (capacity {0})")]
    Full(usize),
    #[error("document already has id {0} assigned")]
    AlreadyStored(DocId),
}

/// Per-item container of documents, assigning unique 1-based indices in
/// arrival order. Ids are never reused within a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocStore {
    docs: BTreeMap<DocId, Document>,
    next_id: u32,
}

impl Default for DocStore {
    fn default() -> Self {
        Self::new()
    }
}

impl DocStore {
    /// Implementation-defined capacity bound.
    pub const CAPACITY: usize = 1_000_000;

    pub fn new() -> Self {
        DocStore {
            docs: BTreeMap::new(),
            next_id: 1,
        }
    }

    /// Insert a document, assigning the next fresh id. No deduplication:
    /// identical content added twice receives two distinct ids.
    pub fn add(&mut self, mut doc: Document) -> Result<DocId, StoreError> {
        if doc.doc_id.is_assigned() {
            return Err(StoreError::AlreadyStored(doc.doc_id));
        }
        if self.docs.len() >= Self::CAPACITY {
            return Err(StoreError::Full(Self::CAPACITY));
        }
        let id = DocId(self.next_id);
        self.next_id += 1;
        doc.doc_id = id;
        for span in &mut doc.spans {
            span.doc_id = id;
        }
        self.docs.insert(id, doc);
        Ok(id)
    }

    pub fn get(&self, id: DocId) -> Option<&Document> {
        self.docs.get(&id)
    }

    pub fn contains(&self, id: DocId) -> bool {
        self.docs.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Documents in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = &Document> {
        self.docs.values()
    }

    pub fn ids(&self) -> Vec<DocId> {
        self.docs.keys().copied().collect()
    }

    /// First document with identical title and text, if any. Used by
    /// retrievers to avoid stacking duplicate runtime copies; the store
    /// itself never deduplicates.
    pub fn find_by_content(&self, title: &str, text: &str) -> Option<DocId> {
        self.docs
            .values()
            .find(|d| d.title == title && d.text == text)
            .map(|d| d.doc_id)
    }

    /// Documents added at runtime, in id order.
    pub fn runtime_docs(&self) -> Vec<&Document> {
        self.docs
            .values()
            .filter(|d| d.origin == DocOrigin::RetrievedRuntime)
            .collect()
    }
}
