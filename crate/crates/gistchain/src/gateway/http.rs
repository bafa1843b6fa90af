//! Chat-completion and embeddings over the common JSON wire protocol:
//! `POST {endpoint}/chat/completions` with a `messages` array and
//! `POST {endpoint}/embeddings` with an `input` array. Usage counts are
//! taken from the response `usage` object.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{ChatBackend, Completion, EmbedBackend, Message, TransportError, Usage};

#[derive(Debug, Clone)]
pub struct HttpSettings {
    /// Base URL, e.g. `http://localhost:8000/v1`.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

fn agent(timeout: Duration) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build()
        .into()
}

fn url(endpoint: &str, path: &str) -> String {
    format!("{}/{}", endpoint.trim_end_matches('/'), path)
}

fn post(
    agent: &ureq::Agent,
    settings: &HttpSettings,
    path: &str,
    body: serde_json::Value,
) -> Result<String, TransportError> {
    let mut req = agent.post(&url(&settings.endpoint, path));
    if let Some(key) = &settings.api_key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req.send_json(body).map_err(map_err)?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(TransportError::Status(status));
    }
    resp.body_mut().read_to_string().map_err(map_err)
}

fn map_err(e: ureq::Error) -> TransportError {
    match e {
        ureq::Error::Timeout(_) => TransportError::Timeout,
        ureq::Error::StatusCode(code) => TransportError::Status(code),
        other => TransportError::Io(other.to_string()),
    }
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

pub struct HttpChat {
    settings: HttpSettings,
    agent: ureq::Agent,
}

impl HttpChat {
    pub fn new(settings: HttpSettings) -> Self {
        let agent = agent(settings.timeout);
        Self { settings, agent }
    }
}

impl ChatBackend for HttpChat {
    fn chat(&self, messages: &[Message]) -> Result<Completion, TransportError> {
        let body = json!({ "model": self.settings.model, "messages": messages });
        let raw = post(&self.agent, &self.settings, "chat/completions", body)?;
        let parsed: ChatResponse = serde_json::from_str(&raw).map_err(|e| TransportError::Malformed(e.to_string()))?;
        let text = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| TransportError::Malformed("no choices".into()))?;
        let usage = parsed
            .usage
            .map(|u| Usage::new(u.prompt_tokens, u.completion_tokens))
            .unwrap_or_default();
        Ok(Completion { text, usage })
    }
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingItem>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct EmbeddingItem {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f32>,
}

pub struct HttpEmbed {
    settings: HttpSettings,
    agent: ureq::Agent,
}

impl HttpEmbed {
    pub fn new(settings: HttpSettings) -> Self {
        let agent = agent(settings.timeout);
        Self { settings, agent }
    }
}

impl EmbedBackend for HttpEmbed {
    fn embed(&self, texts: &[String]) -> Result<(Vec<Vec<f32>>, Usage), TransportError> {
        let body = json!({ "model": self.settings.model, "input": texts });
        let raw = post(&self.agent, &self.settings, "embeddings", body)?;
        let mut parsed: EmbeddingResponse =
            serde_json::from_str(&raw).map_err(|e| TransportError::Malformed(e.to_string()))?;
        parsed.data.sort_by_key(|d| d.index.unwrap_or(0));
        let usage = parsed
            .usage
            .map(|u| Usage::new(u.prompt_tokens, u.completion_tokens))
            .unwrap_or_default();
        Ok((parsed.data.into_iter().map(|d| d.embedding).collect(), usage))
    }
}
