//! Uniform generation contract over real and mock LLMs.
//!
//! Every backend sits behind [`LlmBackend`]; the free functions [`generate`]
//! and [`generate_iterative`] add the engine-side semantics (stop-string
//! truncation, refusal detection, prefix threading) so they hold regardless
//! of what a backend returns.

mod http;
mod scripted;
mod template;

pub use http::HttpBackend;
pub use scripted::{ScriptedBackend, ScriptedSpec, Trigger};
pub use template::{
    bindings, render_docs, render_prompt, render_with_docs_block, DocRender, PromptTemplate,
    RenderedPrompt, TemplateError, PLACEHOLDERS,
};

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::DocId;
use crate::model::DocStore;

/// Sampling and truncation parameters for one generation call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            max_new_tokens: 500,
            temperature: 0.5,
            stop: vec!["\n".to_string()],
        }
    }
}

impl GenParams {
    pub fn without_stop(mut self) -> Self {
        self.stop.clear();
        self
    }
}

/// One backend response, prompt excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub backend_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Error)]
pub enum BackendError {
    /// Transport or service failure; `retryable` distinguishes transient
    /// conditions from configuration problems.
    #[error("backend unavailable ({}): {message}", if *.retryable { "retryable" } else { "permanent" })]
    Unavailable { retryable: bool, message: String },
    /// The model declined to produce the requested content.
    #[error("backend refused: {message}")]
    Refusal { message: String },
    #[error("turn {turn}: {source}")]
    AtTurn {
        turn: usize,
        #[source]
        source: Box<BackendError>,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
}

impl BackendError {
    pub fn at_turn(self, turn: usize) -> BackendError {
        BackendError::AtTurn {
            turn,
            source: Box::new(self),
        }
    }
}

/// The generation contract. Implementations either tolerate concurrent
/// `complete` calls or declare themselves serial; the engine serializes
/// calls to serial backends.
pub trait LlmBackend: Send + Sync {
    /// Raw completion for a prompt. Stop-string truncation and refusal
    /// detection are applied by [`generate`], not here.
    fn complete(&self, prompt: &str, params: &GenParams) -> Result<Completion, BackendError>;

    /// Stable identifier recorded on completions and traces.
    fn id(&self) -> &str;

    /// Whether calls must not overlap.
    fn is_serial(&self) -> bool {
        false
    }

    /// A pristine copy for running one dataset item, when the backend is
    /// stateful. Returning `None` shares `self` across items.
    fn fresh_session(&self) -> Option<Arc<dyn LlmBackend>> {
        None
    }

    /// Refusal prefixes to detect; empty means pass-through.
    fn refusal_prefixes(&self) -> &[String] {
        &[]
    }
}

/// Truncate at the earliest occurrence of any stop string.
fn truncate_at_stop(text: &str, stop: &[String]) -> String {
    let cut = stop
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    text[..cut].to_string()
}

fn is_refusal(text: &str, prefixes: &[String]) -> bool {
    let trimmed = text.trim_start().to_lowercase();
    prefixes
        .iter()
        .any(|p| !p.is_empty() && trimmed.starts_with(&p.to_lowercase()))
}

/// Generate with stop-string truncation and refusal detection applied.
/// Deterministic for the scripted backend.
pub fn generate(
    backend: &dyn LlmBackend,
    prompt: &str,
    params: &GenParams,
) -> Result<Completion, BackendError> {
    let mut completion = backend.complete(prompt, params)?;
    completion.text = truncate_at_stop(&completion.text, &params.stop);
    if is_refusal(&completion.text, backend.refusal_prefixes()) {
        return Err(BackendError::Refusal {
            message: completion.text,
        });
    }
    Ok(completion)
}

/// Per-turn bindings for [`generate_iterative_with`]: turn index (0-based)
/// and the accumulated prefix so far.
pub type TurnBindings<'a> = &'a dyn Fn(usize, &str) -> BTreeMap<String, String>;

/// Sentence-by-sentence generation: each turn re-renders the prompt with
/// `{prefix}` bound to the accepted prior outputs joined by single spaces.
/// A completion satisfying `stop_condition` is discarded and ends the loop;
/// at most `max_turns` backend calls are made. Errors carry the turn index.
pub fn generate_iterative(
    backend: &dyn LlmBackend,
    template: &PromptTemplate,
    base_bindings: &BTreeMap<String, String>,
    store: &DocStore,
    doc_ids: &[DocId],
    params: &GenParams,
    stop_condition: &dyn Fn(&str) -> bool,
    max_turns: usize,
) -> Result<Vec<Completion>, BackendError> {
    let base = base_bindings.clone();
    generate_iterative_with(
        backend,
        template,
        &|_, _| base.clone(),
        store,
        doc_ids,
        params,
        stop_condition,
        max_turns,
    )
}

/// [`generate_iterative`] with per-turn bindings (plan clusters, per-turn
/// documents). `{prefix}` is always overwritten with the accumulated text.
#[allow(clippy::too_many_arguments)]
pub fn generate_iterative_with(
    backend: &dyn LlmBackend,
    template: &PromptTemplate,
    turn_bindings: TurnBindings<'_>,
    store: &DocStore,
    doc_ids: &[DocId],
    params: &GenParams,
    stop_condition: &dyn Fn(&str) -> bool,
    max_turns: usize,
) -> Result<Vec<Completion>, BackendError> {
    let mut completions: Vec<Completion> = Vec::new();
    let mut prefix = String::new();
    for turn in 0..max_turns {
        let mut b = turn_bindings(turn, &prefix);
        b.insert("prefix".to_string(), prefix.clone());
        let prompt = render_prompt(template, &b, store, doc_ids)?;
        let completion =
            generate(backend, &prompt.text, params).map_err(|e| e.at_turn(turn))?;
        if stop_condition(&completion.text) {
            break;
        }
        if !prefix.is_empty() {
            prefix.push(' ');
        }
        prefix.push_str(completion.text.trim());
        completions.push(completion);
    }
    Ok(completions)
}

/// Stop condition that ends iteration on blank output.
pub fn stop_on_empty(text: &str) -> bool {
    text.trim().is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_passthrough() {
        let backend = ScriptedBackend::new(["A [1]."]);
        let got = generate(&backend, "p", &GenParams::default()).unwrap();
        assert_eq!(got.text, "A [1].");
        assert_eq!(got.backend_id, "scripted");
    }

    #[test]
    fn stop_string_truncates() {
        let backend = ScriptedBackend::new(["A.\nB."]);
        let got = generate(&backend, "p", &GenParams::default()).unwrap();
        assert_eq!(got.text, "A.");
    }

    #[test]
    fn earliest_stop_wins() {
        let backend = ScriptedBackend::new(["one|two\nthree"]);
        let params = GenParams {
            stop: vec!["\n".into(), "|".into()],
            ..GenParams::default()
        };
        assert_eq!(generate(&backend, "p", &params).unwrap().text, "one");
    }

    #[test]
    fn refusal_prefix_detected() {
        let backend =
            ScriptedBackend::new(["I cannot recite copyrighted text."]).with_refusal_prefixes(
                ["i cannot"],
            );
        let err = generate(&backend, "p", &GenParams::default()).unwrap_err();
        assert!(matches!(err, BackendError::Refusal { .. }));
    }

    #[test]
    fn iterative_stops_on_empty() {
        let backend = ScriptedBackend::new(["S1.", "S2.", ""]);
        let got = generate_iterative(
            &backend,
            &PromptTemplate::full("{prefix}|go").unwrap(),
            &bindings([]),
            &DocStore::new(),
            &[],
            &GenParams::default(),
            &stop_on_empty,
            10,
        )
        .unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[1].text, "S2.");
    }

    #[test]
    fn iterative_caps_at_max_turns() {
        let backend = ScriptedBackend::new(["S1.", "S2."]);
        let got = generate_iterative(
            &backend,
            &PromptTemplate::full("{prefix}").unwrap(),
            &bindings([]),
            &DocStore::new(),
            &[],
            &GenParams::default(),
            &|_| false,
            1,
        )
        .unwrap();
        assert_eq!(got.len(), 1);
        assert_eq!(backend.history().len(), 1);
    }

    #[test]
    fn iterative_threads_prefix_into_prompt() {
        let backend = ScriptedBackend::new(["S1 [1].", "S2 [4].", ""]);
        generate_iterative(
            &backend,
            &PromptTemplate::full("Prefix:{prefix}|Answer:").unwrap(),
            &bindings([]),
            &DocStore::new(),
            &[],
            &GenParams::default(),
            &stop_on_empty,
            10,
        )
        .unwrap();
        let prompts = backend.history();
        assert_eq!(prompts[0].prompt, "Prefix:|Answer:");
        assert_eq!(prompts[1].prompt, "Prefix:S1 [1].|Answer:");
        assert_eq!(prompts[2].prompt, "Prefix:S1 [1]. S2 [4].|Answer:");
    }

    #[test]
    fn iterative_attaches_turn_to_errors() {
        let backend = ScriptedBackend::new(["ok.", "REFUSE: no"]).with_refusal_prefixes(["refuse"]);
        let err = generate_iterative(
            &backend,
            &PromptTemplate::full("{prefix}").unwrap(),
            &bindings([]),
            &DocStore::new(),
            &[],
            &GenParams::default(),
            &|_| false,
            5,
        )
        .unwrap_err();
        assert!(matches!(err, BackendError::AtTurn { turn: 1, .. }));
    }
}
