//! Deterministic scripted backend for tests and offline runs.
//!
//! Responses come from an ordered queue, optionally routed by prompt-substring
//! triggers so one script can serve distinct sub-prompts (query generation vs
//! answer generation). An exhausted queue yields empty completions, which the
//! usual stop conditions treat as end-of-generation.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{BackendError, Completion, GenParams, LlmBackend};

/// A prompt-substring routed response queue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    /// Matches when the prompt contains this substring.
    pub contains: String,
    pub responses: Vec<String>,
}

/// On-disk form of a script (`--backend scripted:<file>`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ScriptedSpec {
    #[serde(default)]
    pub responses: Vec<String>,
    #[serde(default)]
    pub triggers: Vec<Trigger>,
    #[serde(default)]
    pub refusal_prefixes: Vec<String>,
}

#[derive(Debug, Clone)]
struct QueueState {
    default_queue: VecDeque<String>,
    trigger_queues: Vec<(String, VecDeque<String>)>,
}

/// Record of one scripted call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRecord {
    pub prompt: String,
    pub response: String,
}

/// Serial by construction; each dataset item receives a pristine session
/// (queues reset, history shared with the parent for assertions).
pub struct ScriptedBackend {
    pristine: QueueState,
    state: Mutex<QueueState>,
    history: Arc<Mutex<Vec<PromptRecord>>>,
    refusal_prefixes: Vec<String>,
}

impl ScriptedBackend {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let queue: VecDeque<String> = responses.into_iter().map(Into::into).collect();
        let pristine = QueueState {
            default_queue: queue,
            trigger_queues: Vec::new(),
        };
        ScriptedBackend {
            state: Mutex::new(pristine.clone()),
            pristine,
            history: Arc::new(Mutex::new(Vec::new())),
            refusal_prefixes: Vec::new(),
        }
    }

    pub fn from_spec(spec: &ScriptedSpec) -> Self {
        let mut backend = ScriptedBackend::new(spec.responses.clone());
        for trigger in &spec.triggers {
            backend = backend.with_trigger(&trigger.contains, trigger.responses.clone());
        }
        backend.refusal_prefixes = spec.refusal_prefixes.clone();
        backend
    }

    /// Route prompts containing `substring` to their own queue. Triggers are
    /// checked in insertion order; first non-empty match wins.
    pub fn with_trigger<I, S>(mut self, substring: &str, responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let queue: VecDeque<String> = responses.into_iter().map(Into::into).collect();
        self.pristine
            .trigger_queues
            .push((substring.to_string(), queue));
        *self.state.lock().unwrap() = self.pristine.clone();
        self
    }

    pub fn with_refusal_prefixes<I, S>(mut self, prefixes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.refusal_prefixes = prefixes.into_iter().map(Into::into).collect();
        self
    }

    /// All prompts and responses seen so far, across fresh sessions.
    pub fn history(&self) -> Vec<PromptRecord> {
        self.history.lock().unwrap().clone()
    }

    pub fn calls(&self) -> usize {
        self.history.lock().unwrap().len()
    }

    fn pop_response(&self, prompt: &str) -> String {
        let mut state = self.state.lock().unwrap();
        for (needle, queue) in &mut state.trigger_queues {
            if prompt.contains(needle.as_str()) {
                if let Some(response) = queue.pop_front() {
                    return response;
                }
            }
        }
        state.default_queue.pop_front().unwrap_or_default()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, prompt: &str, _params: &GenParams) -> Result<Completion, BackendError> {
        let response = self.pop_response(prompt);
        self.history.lock().unwrap().push(PromptRecord {
            prompt: prompt.to_string(),
            response: response.clone(),
        });
        Ok(Completion {
            text: response,
            backend_id: self.id().to_string(),
            usage: None,
        })
    }

    fn id(&self) -> &str {
        "scripted"
    }

    fn is_serial(&self) -> bool {
        true
    }

    fn fresh_session(&self) -> Option<Arc<dyn LlmBackend>> {
        Some(Arc::new(ScriptedBackend {
            pristine: self.pristine.clone(),
            state: Mutex::new(self.pristine.clone()),
            history: Arc::clone(&self.history),
            refusal_prefixes: self.refusal_prefixes.clone(),
        }))
    }

    fn refusal_prefixes(&self) -> &[String] {
        &self.refusal_prefixes
    }
}
