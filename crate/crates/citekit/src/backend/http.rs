//! Chat-completion HTTP backend.
//!
//! One wire protocol covers hosted APIs and local servers exposing the same
//! endpoint: POST `<base>/chat/completions` with model, messages, temperature,
//! max_tokens and stop. The bearer token comes from `CITEKIT_API_KEY`.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{BackendError, Completion, GenParams, LlmBackend, TokenUsage};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "CITEKIT_API_KEY";

pub struct HttpBackend {
    base_url: String,
    model: String,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    refusal_prefixes: Vec<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("http client");
        HttpBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            client,
            api_key: std::env::var(API_KEY_ENV).ok(),
            refusal_prefixes: Vec::new(),
        }
    }

    pub fn with_refusal_prefixes<I, S>(mut self, prefixes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.refusal_prefixes = prefixes.into_iter().map(Into::into).collect();
        self
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, prompt: &str, params: &GenParams) -> Result<Completion, BackendError> {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_new_tokens,
        });
        if !params.stop.is_empty() {
            body["stop"] = json!(params.stop);
        }
        let mut request = self.client.post(self.endpoint()).json(&body);
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| BackendError::Unavailable {
            retryable: true,
            message: e.to_string(),
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Unavailable {
                retryable: status.is_server_error(),
                message: format!("{} from {}", status, self.endpoint()),
            });
        }
        let parsed: ChatResponse = response.json().map_err(|e| BackendError::Unavailable {
            retryable: false,
            message: format!("malformed chat response: {e}"),
        })?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Unavailable {
                retryable: false,
                message: "chat response has no choices".into(),
            })?;
        Ok(Completion {
            text: choice.message.content,
            backend_id: self.id().to_string(),
            usage: parsed.usage.map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
        })
    }

    fn id(&self) -> &str {
        &self.model
    }

    fn refusal_prefixes(&self) -> &[String] {
        &self.refusal_prefixes
    }
}
