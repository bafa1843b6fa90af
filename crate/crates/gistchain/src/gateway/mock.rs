//! Deterministic test doubles for offline runs.
//!
//! A mock script is a JSON document with one entry per role:
//!
//! ```json
//! {
//!   "central":    { "rules": [ ... ], "default_response": "...", "default_usage": {"prompt_tokens": 1, "completion_tokens": 1} },
//!   "auxiliary":  { "rules": [ ... ] },
//!   "downstream": { "rules": [ ... ] },
//!   "embedder":   { "dimension": 64, "seed": 7 }
//! }
//! ```
//!
//! Each rule has either `contains` (a string or a list of strings that must
//! all occur in the prompt) or `pattern` (a regular expression; `$1`, `$name`
//! in `response` expand to its captures), plus `response` and optional
//! `prompt_tokens` / `completion_tokens`. The prompt is the concatenation of
//! all message contents separated by newlines. Rules are tried in order and
//! the first match wins. Without explicit counts, usage is the engine token
//! count of prompt and response.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gistchain_core::text;

use std::sync::Arc;

use super::{ChatBackend, Completion, EmbedBackend, Gateway, Message, RetryPolicy, Role, TransportError, Usage};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub central: Option<MockRole>,
    #[serde(default)]
    pub auxiliary: Option<MockRole>,
    #[serde(default)]
    pub downstream: Option<MockRole>,
    #[serde(default)]
    pub embedder: Option<MockEmbedder>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, MockError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| MockError::Io(path.display().to_string(), e.to_string()))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, MockError> {
        let script: Self = serde_json::from_str(text).map_err(|e| MockError::Parse(e.to_string()))?;
        for role in [&script.central, &script.auxiliary, &script.downstream]
            .into_iter()
            .flatten()
        {
            ScriptedMock::new(role.clone())?;
        }
        Ok(script)
    }

    /// Gateway with every scripted role installed.
    pub fn into_gateway(self) -> Result<Gateway, MockError> {
        let mut gw = Gateway::new();
        for (role, script) in [
            (Role::Central, self.central),
            (Role::Auxiliary, self.auxiliary),
            (Role::Downstream, self.downstream),
        ] {
            if let Some(script) = script {
                gw = gw.with_chat(role, Arc::new(ScriptedMock::new(script)?), RetryPolicy::default());
            }
        }
        if let Some(embedder) = self.embedder {
            gw = gw.with_embedder(Arc::new(embedder), RetryPolicy::default(), 64);
        }
        Ok(gw)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MockError {
    #[error("reading mock script {0}: {1}")]
    Io(String, String),
    #[error("invalid mock script: {0}")]
    Parse(String),
    #[error("rule {0}: needs exactly one of `contains` or `pattern`")]
    Matcher(usize),
    #[error("rule {0}: bad pattern: {1}")]
    Pattern(usize, String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRole {
    #[serde(default)]
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default_response: String,
    #[serde(default)]
    pub default_usage: Option<Usage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default)]
    pub contains: Option<OneOrMany>,
    #[serde(default)]
    pub pattern: Option<String>,
    pub response: String,
    #[serde(default)]
    pub prompt_tokens: Option<u64>,
    #[serde(default)]
    pub completion_tokens: Option<u64>,
}

impl MockRule {
    pub fn contains(needle: &str, response: &str) -> Self {
        Self {
            contains: Some(OneOrMany::One(needle.into())),
            pattern: None,
            response: response.into(),
            prompt_tokens: None,
            completion_tokens: None,
        }
    }

    pub fn pattern(pattern: &str, response: &str) -> Self {
        Self {
            contains: None,
            pattern: Some(pattern.into()),
            response: response.into(),
            prompt_tokens: None,
            completion_tokens: None,
        }
    }

    pub fn with_usage(mut self, prompt_tokens: u64, completion_tokens: u64) -> Self {
        self.prompt_tokens = Some(prompt_tokens);
        self.completion_tokens = Some(completion_tokens);
        self
    }
}

enum Matcher {
    Contains(Vec<String>),
    Pattern(Regex),
}

struct CompiledRule {
    matcher: Matcher,
    rule: MockRule,
}

/// Rule-driven chat backend. Stateless: the same prompt always produces the
/// same completion, so it is safe to share across worker threads.
pub struct ScriptedMock {
    rules: Vec<CompiledRule>,
    default_response: String,
    default_usage: Option<Usage>,
}

impl ScriptedMock {
    pub fn new(role: MockRole) -> Result<Self, MockError> {
        let mut rules = Vec::with_capacity(role.rules.len());
        for (i, rule) in role.rules.into_iter().enumerate() {
            let matcher = match (&rule.contains, &rule.pattern) {
                (Some(OneOrMany::One(s)), None) => Matcher::Contains(vec![s.clone()]),
                (Some(OneOrMany::Many(v)), None) => Matcher::Contains(v.clone()),
                (None, Some(p)) => Matcher::Pattern(Regex::new(p).map_err(|e| MockError::Pattern(i, e.to_string()))?),
                _ => return Err(MockError::Matcher(i)),
            };
            rules.push(CompiledRule { matcher, rule });
        }
        Ok(Self {
            rules,
            default_response: role.default_response,
            default_usage: role.default_usage,
        })
    }

    pub fn from_rules(rules: Vec<MockRule>, default_response: &str) -> Result<Self, MockError> {
        Self::new(MockRole {
            rules,
            default_response: default_response.into(),
            default_usage: None,
        })
    }

    pub fn respond(&self, prompt: &str) -> Completion {
        for c in &self.rules {
            let text = match &c.matcher {
                Matcher::Contains(needles) if needles.iter().all(|n| prompt.contains(n.as_str())) => {
                    c.rule.response.clone()
                }
                Matcher::Pattern(re) => match re.captures(prompt) {
                    Some(caps) => {
                        let mut out = String::new();
                        caps.expand(&c.rule.response, &mut out);
                        out
                    }
                    None => continue,
                },
                Matcher::Contains(_) => continue,
            };
            let usage = Usage::new(
                c.rule.prompt_tokens.unwrap_or_else(|| text::token_count(prompt) as u64),
                c.rule
                    .completion_tokens
                    .unwrap_or_else(|| text::token_count(&text) as u64),
            );
            return Completion { text, usage };
        }
        let usage = self.default_usage.unwrap_or_else(|| {
            Usage::new(
                text::token_count(prompt) as u64,
                text::token_count(&self.default_response) as u64,
            )
        });
        Completion {
            text: self.default_response.clone(),
            usage,
        }
    }
}

pub(crate) fn flatten(messages: &[Message]) -> String {
    messages
        .iter()
        .map(|m| m.content.as_str())
        .collect::<Vec<_>>()
        .join("\n")
}

impl ChatBackend for ScriptedMock {
    fn chat(&self, messages: &[Message]) -> Result<Completion, TransportError> {
        Ok(self.respond(&flatten(messages)))
    }
}

/// Feature-hashing embedder: every token adds a seeded pseudo-random signed
/// weight to one coordinate, so texts sharing vocabulary point in similar
/// directions. Texts without tokens hash as a whole. Output is bitwise
/// deterministic for a given seed and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockEmbedder {
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
}

impl MockEmbedder {
    pub fn vector(&self, input: &str) -> Vec<f32> {
        let dim = self.dimension.max(1);
        let mut v = vec![0.0f32; dim];
        let tokens = text::tokenize(input);
        let mut feed = |key: &[u8]| {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update(key);
            let d = h.finalize();
            let bucket = u64::from_le_bytes(d[0..8].try_into().expect("8 bytes")) % dim as u64;
            let mag = 0.5 + f32::from(d[8]) / 255.0;
            let sign = if d[9] & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket as usize] += sign * mag;
        };
        if tokens.is_empty() {
            feed(input.as_bytes());
        } else {
            for t in &tokens {
                feed(t.as_bytes());
            }
        }
        if v.iter().all(|&x| x == 0.0) {
            v[0] = 1.0;
        }
        v
    }
}

impl EmbedBackend for MockEmbedder {
    fn embed(&self, texts: &[String]) -> Result<(Vec<Vec<f32>>, Usage), TransportError> {
        let tokens: u64 = texts.iter().map(|t| text::token_count(t) as u64).sum();
        Ok((texts.iter().map(|t| self.vector(t)).collect(), Usage::new(tokens, 0)))
    }
}
