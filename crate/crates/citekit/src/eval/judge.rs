//! Pluggable entailment judges.
//!
//! The deterministic lexical and substring judges keep desk-scale runs
//! reproducible; the HTTP judge delegates to an external NLI service for
//! faithful reproduction runs. A scripted judge serves pipeline tests that
//! need a fixed verdict sequence.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("entailment judge unavailable: {0}")]
    Unavailable(String),
}

/// Decides whether `premise` supports `hypothesis`.
pub trait Entailment: Send + Sync {
    fn entails(&self, premise: &str, hypothesis: &str) -> Result<bool, JudgeError>;

    /// Short identifier for reports.
    fn id(&self) -> String;
}

/// Default threshold for the lexical judge.
pub const DEFAULT_LEXICAL_THRESHOLD: f64 = 0.6;

/// Fixed 50-word stoplist for content-token extraction.
pub const STOPLIST: [&str; 50] = [
    "a", "an", "the", "and", "or", "but", "if", "then", "else", "when", "while", "of", "at", "by",
    "for", "with", "about", "against", "between", "into", "through", "during", "before", "after",
    "above", "below", "to", "from", "up", "down", "in", "out", "on", "off", "over", "under",
    "again", "further", "once", "here", "there", "all", "any", "both", "each", "is", "are", "was",
    "were", "be",
];

/// Lowercased alphanumeric tokens of `text`.
pub fn tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// [`tokens`] minus the stoplist.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokens(text)
        .into_iter()
        .filter(|t| !STOPLIST.contains(&t.as_str()))
        .collect()
}

fn counts(items: &[String]) -> HashMap<&str, usize> {
    let mut map = HashMap::new();
    for item in items {
        *map.entry(item.as_str()).or_insert(0) += 1;
    }
    map
}

/// True when the fraction of the hypothesis' content-token multiset found in
/// the premise reaches the threshold. An hypothesis without content tokens is
/// vacuously entailed.
pub struct LexicalJudge {
    pub threshold: f64,
}

impl LexicalJudge {
    pub fn new(threshold: f64) -> Self {
        assert!(threshold > 0.0 && threshold <= 1.0, "threshold in (0,1]");
        LexicalJudge { threshold }
    }
}

impl Default for LexicalJudge {
    fn default() -> Self {
        LexicalJudge::new(DEFAULT_LEXICAL_THRESHOLD)
    }
}

impl Entailment for LexicalJudge {
    fn entails(&self, premise: &str, hypothesis: &str) -> Result<bool, JudgeError> {
        let hyp = content_tokens(hypothesis);
        if hyp.is_empty() {
            return Ok(true);
        }
        let premise_tokens = content_tokens(premise);
        let premise_counts = counts(&premise_tokens);
        let mut hyp_counts = counts(&hyp);
        let mut overlap = 0usize;
        for (token, need) in hyp_counts.drain() {
            let have = premise_counts.get(token).copied().unwrap_or(0);
            overlap += need.min(have);
        }
        Ok(overlap as f64 / hyp.len() as f64 >= self.threshold)
    }

    fn id(&self) -> String {
        format!("lexical:{}", self.threshold)
    }
}

/// Exact-oracle judge: the normalized hypothesis must occur inside the
/// normalized premise.
pub struct SubstringJudge;

fn normalize(text: &str) -> String {
    tokens(text).join(" ")
}

impl Entailment for SubstringJudge {
    fn entails(&self, premise: &str, hypothesis: &str) -> Result<bool, JudgeError> {
        Ok(normalize(premise).contains(&normalize(hypothesis)))
    }

    fn id(&self) -> String {
        "substring".into()
    }
}

/// Remote NLI judge: POST {premise, hypothesis}, expect {entailed: bool}.
pub struct HttpNliJudge {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpNliJudge {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client");
        HttpNliJudge {
            endpoint: endpoint.into(),
            client,
        }
    }
}

impl Entailment for HttpNliJudge {
    fn entails(&self, premise: &str, hypothesis: &str) -> Result<bool, JudgeError> {
        let response = self
            .client
            .post(&self.endpoint)
            .json(&json!({"premise": premise, "hypothesis": hypothesis}))
            .send()
            .map_err(|e| JudgeError::Unavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(JudgeError::Unavailable(format!(
                "{} from {}",
                response.status(),
                self.endpoint
            )));
        }
        let value: serde_json::Value = response
            .json()
            .map_err(|e| JudgeError::Unavailable(format!("malformed judge response: {e}")))?;
        value
            .get("entailed")
            .and_then(serde_json::Value::as_bool)
            .ok_or_else(|| JudgeError::Unavailable("response lacks boolean `entailed`".into()))
    }

    fn id(&self) -> String {
        format!("http_nli:{}", self.endpoint)
    }
}

/// Fixed verdict sequence; `fallback` answers once the queue is exhausted.
pub struct ScriptedJudge {
    verdicts: Mutex<VecDeque<bool>>,
    fallback: bool,
    calls: Mutex<usize>,
}

impl ScriptedJudge {
    pub fn new<I: IntoIterator<Item = bool>>(verdicts: I) -> Self {
        ScriptedJudge {
            verdicts: Mutex::new(verdicts.into_iter().collect()),
            fallback: false,
            calls: Mutex::new(0),
        }
    }

    pub fn with_fallback(mut self, fallback: bool) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn calls(&self) -> usize {
        *self.calls.lock().unwrap()
    }
}

impl Entailment for ScriptedJudge {
    fn entails(&self, _premise: &str, _hypothesis: &str) -> Result<bool, JudgeError> {
        *self.calls.lock().unwrap() += 1;
        Ok(self
            .verdicts
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or(self.fallback))
    }

    fn id(&self) -> String {
        "scripted".into()
    }
}

/// Parse a CLI judge spec: `lexical:<threshold>` | `substring` | `http:<url>`.
pub fn parse_judge_spec(spec: &str) -> Result<Box<dyn Entailment>, String> {
    if spec == "substring" {
        return Ok(Box::new(SubstringJudge));
    }
    if spec == "lexical" {
        return Ok(Box::new(LexicalJudge::default()));
    }
    if let Some(rest) = spec.strip_prefix("lexical:") {
        let threshold: f64 = rest
            .parse()
            .map_err(|_| format!("bad lexical threshold `{rest}`"))?;
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(format!("lexical threshold {threshold} outside (0,1]"));
        }
        return Ok(Box::new(LexicalJudge::new(threshold)));
    }
    if spec.starts_with("http://") || spec.starts_with("https://") {
        return Ok(Box::new(HttpNliJudge::new(spec)));
    }
    if let Some(url) = spec.strip_prefix("http:") {
        return Ok(Box::new(HttpNliJudge::new(url)));
    }
    Err(format!(
        "unknown judge spec `{spec}` (expected lexical:<t> | substring | http:<url>)"
    ))
}
