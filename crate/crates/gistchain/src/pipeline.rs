//! End-to-end runs: discovery, context assembly, optional answer, and the
//! depth sweep.

use std::collections::BTreeSet;

use gistchain_core::context::{self, TaskContext};
use gistchain_core::{Document, HybridIndex};
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::discovery::{Agent, DiscoveryConfig};
use crate::gateway::{Gateway, GatewayError, Role};
use crate::index_store::{build_index, IndexStoreError};
use crate::prompts;
use crate::runlog::{context_steps, AnswerRecord, RunLog};
use crate::search::SearchBackend;
use crate::store::{CorpusStore, StoreError};

/// Corpus store with embedded gists plus the hybrid index over it.
pub fn build_corpus(
    docs: Vec<Document>,
    gateway: &Gateway,
    config: &EngineConfig,
) -> Result<(CorpusStore, HybridIndex), IndexStoreError> {
    if docs.is_empty() {
        return Err(StoreError::EmptyCorpus("no documents".into()).into());
    }
    let mut store = CorpusStore::new();
    for doc in docs {
        store.insert(doc)?;
    }
    store.build_gists(
        gateway,
        config.gist.mode,
        config.gist.effective_budget(),
        config.synthesis.workers,
    )?;
    let index = build_index(&store, config.index.bm25(), config.index.pool_size)?;
    Ok((store, index))
}

/// Single downstream call over the rendered context.
pub fn answer(ctx: &TaskContext, gateway: &Gateway) -> Result<AnswerRecord, GatewayError> {
    let reply = gateway.complete(Role::Downstream, &prompts::answer(&ctx.task, &ctx.rendered))?;
    Ok(AnswerRecord {
        text: reply.text.trim().to_string(),
        context_hash: crate::checksum(ctx.rendered.as_bytes()),
    })
}

/// Run one task. Failures are recorded in the log's `error` field; the
/// returned log is complete up to the point of failure.
pub fn run_task(
    task_id: Option<String>,
    task: &str,
    source: &dyn SearchBackend,
    gateway: &Gateway,
    config: &EngineConfig,
    with_answer: bool,
) -> RunLog {
    let started = gateway.clock().now_ms();
    let agent = Agent::new(gateway, source, config.discovery, config.synthesis);
    let (discovery, error) = match agent.run(task) {
        Ok(d) => (d, None),
        Err(a) => (*a.partial, Some(a.error.to_string())),
    };
    let mut log = RunLog::new(task_id, task, config, discovery);
    log.timings.started_ms = started;
    log.timings.discovery_done_ms = gateway.clock().now_ms();
    log.error = error;
    if log.error.is_none() {
        match context::assemble(
            &log.task,
            &log.preamble,
            context_steps(&log.intents),
            config.context.budget,
        ) {
            Ok(ctx) => {
                log.set_context(&ctx);
                if with_answer {
                    match answer(&ctx, gateway) {
                        Ok(a) => log.answer = Some(a),
                        Err(e) => log.error = Some(format!("ProviderError: {e}")),
                    }
                }
            }
            Err(e) => log.error = Some(e.to_string()),
        }
    }
    log.ledger = gateway.ledger().totals();
    log.timings.finished_ms = gateway.clock().now_ms();
    log
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task_id: String,
    pub task: String,
    /// Documents known to be needed; used for coverage.
    #[serde(default)]
    pub relevant: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCoverage {
    pub task_id: String,
    pub coverage: f64,
    pub intents: usize,
    pub rounds: usize,
    pub retrieved: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthCoverage {
    pub depth: usize,
    /// Mean fraction of relevant documents retrieved.
    pub coverage: f64,
    pub mean_intents: f64,
    pub tasks: Vec<TaskCoverage>,
}

/// Fraction of `relevant` present in the run's retrieved set; 1 for an
/// empty relevant set.
pub fn coverage(log: &RunLog, relevant: &[String]) -> f64 {
    let wanted: BTreeSet<&str> = relevant.iter().map(String::as_str).collect();
    if wanted.is_empty() {
        return 1.0;
    }
    let got = log.retrieved_doc_ids();
    wanted.intersection(&got).count() as f64 / wanted.len() as f64
}

/// Run every task at every depth with a fresh gateway per run.
pub fn depth_sweep<F>(
    tasks: &[TaskSpec],
    depths: &[usize],
    source: &dyn SearchBackend,
    config: &EngineConfig,
    gateway: F,
) -> Result<Vec<DepthCoverage>, crate::config::ConfigError>
where
    F: Fn(&EngineConfig) -> Result<Gateway, crate::config::ConfigError>,
{
    let mut report = Vec::with_capacity(depths.len());
    for &depth in depths {
        let config = EngineConfig {
            discovery: DiscoveryConfig {
                max_diffusion_depth: depth,
                ..config.discovery
            },
            ..config.clone()
        };
        let mut per_task = Vec::with_capacity(tasks.len());
        for t in tasks {
            let gw = gateway(&config)?;
            let log = run_task(Some(t.task_id.clone()), &t.task, source, &gw, &config, false);
            per_task.push(TaskCoverage {
                task_id: t.task_id.clone(),
                coverage: coverage(&log, &t.relevant),
                intents: log.intents.len(),
                rounds: log.intents.iter().map(|i| i.rounds.len()).sum(),
                retrieved: log.retrieved_doc_ids().len(),
            });
        }
        let n = per_task.len().max(1) as f64;
        report.push(DepthCoverage {
            depth,
            coverage: per_task.iter().map(|t| t.coverage).sum::<f64>() / n,
            mean_intents: per_task.iter().map(|t| t.intents as f64).sum::<f64>() / n,
            tasks: per_task,
        });
    }
    Ok(report)
}
