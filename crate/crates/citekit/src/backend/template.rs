//! Prompt templating with document context rendering.
//!
//! Templates use brace placeholders from a fixed set: `{question}`, `{docs}`,
//! `{prefix}`, `{feedback}`, `{plan}`. `{docs}` is filled from the document
//! store; the others from a binding map.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DocId, DocStore, Document};

pub const PLACEHOLDERS: [&str; 5] = ["question", "docs", "prefix", "feedback", "plan"];

/// Which view of a document fills `{docs}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DocRender {
    #[default]
    Full,
    Snippet,
    Summary,
}

impl DocRender {
    pub fn as_str(self) -> &'static str {
        match self {
            DocRender::Full => "full",
            DocRender::Snippet => "snippet",
            DocRender::Summary => "summary",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template uses unknown placeholder `{{{0}}}`")]
    UnknownPlaceholder(String),
    #[error("placeholder `{{{0}}}` has no binding")]
    UnboundPlaceholder(String),
    #[error("document {0} is not in the store")]
    UnknownDocId(DocId),
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").expect("valid regex"))
}

/// A prompt body with named placeholders and a document-view selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub body: String,
    pub doc_render: DocRender,
}

impl PromptTemplate {
    /// Validate that every `{word}` placeholder in `body` is a known one.
    pub fn new(body: impl Into<String>, doc_render: DocRender) -> Result<Self, TemplateError> {
        let body = body.into();
        for cap in placeholder_re().captures_iter(&body) {
            let name = &cap[1];
            if !PLACEHOLDERS.contains(&name) {
                return Err(TemplateError::UnknownPlaceholder(name.to_string()));
            }
        }
        Ok(PromptTemplate { body, doc_render })
    }

    pub fn full(body: impl Into<String>) -> Result<Self, TemplateError> {
        Self::new(body, DocRender::Full)
    }

    /// Placeholder names used by the body, in order of first appearance.
    pub fn placeholders(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for cap in placeholder_re().captures_iter(&self.body) {
            let name = cap[1].to_string();
            if !seen.contains(&name) {
                seen.push(name);
            }
        }
        seen
    }
}

/// A rendered prompt plus the documents that fell back to full text because
/// the requested view was missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedPrompt {
    pub text: String,
    pub view_fallbacks: Vec<DocId>,
}

/// Render one `Document [k](Title: t): body` line.
fn render_doc_line(doc: &Document, view: DocRender, fallbacks: &mut Vec<DocId>) -> String {
    let body = match view {
        DocRender::Full => doc.text.as_str(),
        DocRender::Snippet => doc.snippet.as_deref().unwrap_or_else(|| {
            fallbacks.push(doc.doc_id);
            doc.text.as_str()
        }),
        DocRender::Summary => doc.summary.as_deref().unwrap_or_else(|| {
            fallbacks.push(doc.doc_id);
            doc.text.as_str()
        }),
    };
    format!("Document [{}](Title: {}): {}", doc.doc_id.0, doc.title, body)
}

/// Render document lines for `doc_ids` in the given order.
pub fn render_docs(
    store: &DocStore,
    doc_ids: &[DocId],
    view: DocRender,
) -> Result<RenderedPrompt, TemplateError> {
    let mut fallbacks = Vec::new();
    let mut lines = Vec::with_capacity(doc_ids.len());
    for id in doc_ids {
        let doc = store.get(*id).ok_or(TemplateError::UnknownDocId(*id))?;
        lines.push(render_doc_line(doc, view, &mut fallbacks));
    }
    Ok(RenderedPrompt {
        text: lines.join("\n"),
        view_fallbacks: fallbacks,
    })
}

/// Fill a template. `{docs}` is bound via `store` + `doc_ids`; every other
/// placeholder present in the body must have an entry in `bindings`.
pub fn render_prompt(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
    store: &DocStore,
    doc_ids: &[DocId],
) -> Result<RenderedPrompt, TemplateError> {
    let mut fallbacks = Vec::new();
    let docs_block = if template.body.contains("{docs}") {
        let rendered = render_docs(store, doc_ids, template.doc_render)?;
        fallbacks = rendered.view_fallbacks;
        rendered.text
    } else {
        String::new()
    };
    let text = render_with_docs_block(template, bindings, &docs_block)?;
    Ok(RenderedPrompt {
        text,
        view_fallbacks: fallbacks,
    })
}

/// Fill a template with a pre-rendered `{docs}` block. Used when documents
/// need mixed views (e.g. summaries with selected full texts expanded).
pub fn render_with_docs_block(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
    docs_block: &str,
) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.body.len());
    let mut last = 0;
    for cap in placeholder_re().captures_iter(&template.body) {
        let whole = cap.get(0).expect("capture 0");
        let name = &cap[1];
        out.push_str(&template.body[last..whole.start()]);
        if name == "docs" {
            out.push_str(docs_block);
        } else {
            let value = bindings
                .get(name)
                .ok_or_else(|| TemplateError::UnboundPlaceholder(name.to_string()))?;
            out.push_str(value);
        }
        last = whole.end();
    }
    out.push_str(&template.body[last..]);
    Ok(out)
}

/// Convenience for building binding maps.
pub fn bindings<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with_views() -> DocStore {
        let mut store = DocStore::new();
        store
            .add(
                Document::new("Alpha", "Full text of alpha. Second sentence.")
                    .with_snippet("Full text of alpha.")
                    .with_summary("alpha summarized"),
            )
            .unwrap();
        store
            .add(Document::new("Beta", "Beta has no views."))
            .unwrap();
        store
    }

    #[test]
    fn question_only_template_is_verbatim() {
        let t = PromptTemplate::full("{question}").unwrap();
        let out = render_prompt(
            &t,
            &bindings([("question", "Who wrote it?")]),
            &DocStore::new(),
            &[],
        )
        .unwrap();
        assert_eq!(out.text, "Who wrote it?");
    }

    #[test]
    fn unknown_placeholder_rejected_at_construction() {
        let err = PromptTemplate::full("{question} {bogus}").unwrap_err();
        assert_eq!(err, TemplateError::UnknownPlaceholder("bogus".into()));
    }

    #[test]
    fn unbound_placeholder_fails_at_render() {
        let t = PromptTemplate::full("{question} {plan}").unwrap();
        let err = render_prompt(
            &t,
            &bindings([("question", "q")]),
            &DocStore::new(),
            &[],
        )
        .unwrap_err();
        assert_eq!(err, TemplateError::UnboundPlaceholder("plan".into()));
    }

    #[test]
    fn docs_render_in_id_order_with_titles() {
        let store = store_with_views();
        let t = PromptTemplate::full("{docs}").unwrap();
        let out = render_prompt(&t, &bindings([]), &store, &[DocId(2), DocId(1)]).unwrap();
        let lines: Vec<&str> = out.text.lines().collect();
        assert_eq!(lines[0], "Document [2](Title: Beta): Beta has no views.");
        assert!(lines[1].starts_with("Document [1](Title: Alpha): Full text of alpha."));
    }

    #[test]
    fn unknown_doc_id_is_an_error() {
        let store = store_with_views();
        let t = PromptTemplate::full("{docs}").unwrap();
        let err = render_prompt(&t, &bindings([]), &store, &[DocId(9)]).unwrap_err();
        assert_eq!(err, TemplateError::UnknownDocId(DocId(9)));
    }

    #[test]
    fn snippet_view_falls_back_with_flag() {
        let store = store_with_views();
        let t = PromptTemplate::new("{docs}", DocRender::Snippet).unwrap();
        let out = render_prompt(&t, &bindings([]), &store, &[DocId(1), DocId(2)]).unwrap();
        assert!(out.text.contains("Document [1](Title: Alpha): Full text of alpha.\n"));
        assert!(out.text.contains("Document [2](Title: Beta): Beta has no views."));
        assert_eq!(out.view_fallbacks, [DocId(2)]);
    }

    #[test]
    fn prefix_layout_matches_sentence_answer_prompt() {
        let store = store_with_views();
        let t = PromptTemplate::full(
            "Instruction: Write only a sentence.\n\nQuestion:{question}\n\nPrefix:{prefix}\n\n{docs}\n\nAnswer: ",
        )
        .unwrap();
        let out = render_prompt(
            &t,
            &bindings([("question", "Q?"), ("prefix", "First sentence [1].")]),
            &store,
            &[DocId(1)],
        )
        .unwrap();
        assert!(out.text.contains("Question:Q?"));
        assert!(out.text.contains("Prefix:First sentence [1]."));
        let prefix_pos = out.text.find("Prefix:").unwrap();
        let docs_pos = out.text.find("Document [1]").unwrap();
        assert!(prefix_pos < docs_pos);
        assert!(out.text.ends_with("Answer: "));
    }

    #[test]
    fn literal_braces_without_known_names_pass_through() {
        let t = PromptTemplate::full("keep {not a placeholder} and {123}").unwrap();
        let out = render_prompt(&t, &bindings([]), &DocStore::new(), &[]).unwrap();
        assert_eq!(out.text, "keep {not a placeholder} and {123}");
    }
}
