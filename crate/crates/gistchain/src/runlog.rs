//! The run log: one JSON document per run.
//!
//! Schema version 1. Top-level fields:
//!
//! | field | content |
//! |---|---|
//! | `schema_version` | `1` |
//! | `run_id` | hash of task and effective config |
//! | `task_id`, `task` | |
//! | `config` | effective engine config |
//! | `preamble` | the central model's initial reasoning |
//! | `intents` | per intent: description, status, queries with depth, rounds (hits per query, new, browsed and evidence doc ids, verdict), subspace |
//! | `events` | fallbacks and forced decisions |
//! | `central_calls`, `parse_retries` | logical central calls and re-asks |
//! | `ledger` | token and call totals from the gateway |
//! | `timings` | clock readings in ms |
//! | `context` | template version, budget, steps, rendered text |
//! | `answer` | optional downstream answer with the hash of the context it saw |
//! | `error` | set when the run aborted |
//!
//! The per-call ledger is not included: calls made in parallel complete in
//! no fixed order, and the log is meant to be byte-stable.

use std::path::Path;

use gistchain_core::context::{self, ContextStep, TaskContext, TEMPLATE_VERSION};
use gistchain_core::{ContextError, IntentStatus};
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::discovery::{Discovery, IntentTrace};
use crate::events::Event;
use crate::gateway::LedgerTotals;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub started_ms: u64,
    pub discovery_done_ms: u64,
    pub finished_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub template_version: String,
    pub budget: usize,
    pub steps: Vec<ContextStep>,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub text: String,
    /// SHA-256 of the rendered context given to the downstream model.
    pub context_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub schema_version: u32,
    pub run_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    pub task: String,
    pub config: EngineConfig,
    pub preamble: String,
    pub intents: Vec<IntentTrace>,
    pub events: Vec<Event>,
    pub central_calls: usize,
    pub parse_retries: usize,
    pub ledger: LedgerTotals,
    pub timings: Timings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<AnswerRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunLogError {
    #[error("reading run log {0}: {1}")]
    Io(String, String),
    #[error("invalid run log {0}: {1}")]
    Parse(String, String),
    #[error("run log schema version {0} is not supported")]
    Version(u32),
}

/// Stable identifier of a (task, config) pair.
pub fn run_id(task: &str, config: &EngineConfig) -> String {
    let mut bytes = task.as_bytes().to_vec();
    bytes.push(0);
    bytes.extend(serde_json::to_vec(config).expect("config serializes"));
    crate::checksum(&bytes)[..16].to_string()
}

/// Context steps for a discovery result, in chain order.
pub fn context_steps(intents: &[IntentTrace]) -> Vec<ContextStep> {
    intents
        .iter()
        .map(|t| ContextStep {
            intent_id: t.intent.intent_id,
            intent: t.intent.description.clone(),
            status: t.intent.status,
            evidence: if t.intent.status == IntentStatus::Abandoned {
                String::new()
            } else {
                t.subspace.summary.clone()
            },
            retrieved: t.subspace.retrieved_count,
            browsed: t.subspace.browsed_count,
            truncated: false,
        })
        .collect()
}

impl RunLog {
    pub fn new(task_id: Option<String>, task: &str, config: &EngineConfig, discovery: Discovery) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            run_id: run_id(task, config),
            task_id,
            task: task.to_string(),
            config: config.clone(),
            preamble: discovery.preamble,
            intents: discovery.intents,
            events: discovery.events,
            central_calls: discovery.central_calls,
            parse_retries: discovery.parse_retries,
            ledger: LedgerTotals::default(),
            timings: Timings {
                started_ms: 0,
                discovery_done_ms: 0,
                finished_ms: 0,
            },
            context: None,
            answer: None,
            error: None,
        }
    }

    /// Assemble the task context from the logged chain alone.
    pub fn replay_context(&self) -> Result<TaskContext, ContextError> {
        let budget = self.context.as_ref().map_or(self.config.context.budget, |c| c.budget);
        context::assemble(&self.task, &self.preamble, context_steps(&self.intents), budget)
    }

    pub fn set_context(&mut self, ctx: &TaskContext) {
        self.context = Some(ContextRecord {
            template_version: TEMPLATE_VERSION.to_string(),
            budget: self.config.context.budget,
            steps: ctx.steps.clone(),
            rendered: ctx.rendered.clone(),
        });
    }

    /// The logged context as a [`TaskContext`].
    pub fn task_context(&self) -> Option<TaskContext> {
        self.context.as_ref().map(|c| TaskContext {
            task: self.task.clone(),
            preamble: self.preamble.clone(),
            steps: c.steps.clone(),
            rendered: c.rendered.clone(),
        })
    }

    /// Every doc id retrieved by any query of the run.
    pub fn retrieved_doc_ids(&self) -> std::collections::BTreeSet<&str> {
        self.intents
            .iter()
            .flat_map(|t| t.rounds.iter())
            .flat_map(|r| r.spaces.iter())
            .flat_map(|s| s.hits.iter().map(|h| h.doc_id.as_str()))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run log serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, RunLogError> {
        let log: Self = serde_json::from_str(text).map_err(|e| RunLogError::Parse(String::new(), e.to_string()))?;
        if log.schema_version != SCHEMA_VERSION {
            return Err(RunLogError::Version(log.schema_version));
        }
        Ok(log)
    }

    pub fn load(path: &Path) -> Result<Self, RunLogError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| RunLogError::Io(name.clone(), e.to_string()))?;
        Self::from_json(&text).map_err(|e| match e {
            RunLogError::Parse(_, m) => RunLogError::Parse(name, m),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }
}
