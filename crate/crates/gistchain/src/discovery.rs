//! The discovery loop.
//!
//! The central model first answers what it can from its own knowledge and
//! names the first information intent. Each intent is decomposed into
//! atomic queries and explored in rounds: the round's queries are retrieved
//! in parallel, documents not seen before under the intent are filtered on
//! their gists, the survivors are read in full, and the evidence is reduced
//! into the intent's subspace. After every round but the last the central
//! model judges sufficiency and may propose more queries. Once an intent is
//! settled the central model either names the next intent or stops.
//!
//! With `max_diffusion_depth = d` an intent runs at most `d + 1` rounds, and
//! a run makes at most `1 + max_intents * (2 + d)` logical central calls.
//! A structured reply that cannot be parsed is requested once more; those
//! retries are counted separately.

use std::collections::BTreeSet;

use gistchain_core::structured::{self, NextStep, ParseFailure, Verdict};
use gistchain_core::{AtomicSpace, EvidenceUnit, Intent, IntentStatus, KnowledgeSubspace, RankedHit};
use serde::{Deserialize, Serialize};

use crate::events::{Event, EventKind};
use crate::gateway::{Gateway, Message, Role};
use crate::pool::bounded_map;
use crate::prompts;
use crate::search::{RetrievalError, SearchBackend};
use crate::synthesis::{SynthesisConfig, Synthesizer};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscoveryConfig {
    pub max_diffusion_depth: usize,
    pub max_intents: usize,
    /// Hits kept per atomic query.
    pub top_k: usize,
    /// Queries admitted per decomposition or expansion.
    pub max_queries: usize,
    pub alpha: f64,
    pub workers: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            max_diffusion_depth: 5,
            max_intents: 8,
            top_k: gistchain_core::hybrid::DEFAULT_TOP_K,
            max_queries: 6,
            alpha: gistchain_core::hybrid::DEFAULT_ALPHA,
            workers: 8,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_intents == 0 || self.top_k == 0 || self.max_queries == 0 || self.workers == 0 {
            return Err("max_intents, top_k, max_queries and workers must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("alpha must lie in [0, 1], got {}", self.alpha));
        }
        Ok(())
    }

    /// Upper bound on logical central-role calls for one run.
    pub fn central_call_bound(&self) -> usize {
        1 + self.max_intents * (2 + self.max_diffusion_depth)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AgentError {
    #[error("PlanningFailure: {0}")]
    Planning(String),
    #[error("RetrievalError: {0}")]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictTrace {
    pub sufficient: bool,
    /// Queries the model proposed.
    pub proposed: Vec<String>,
    /// The proposed queries that were new and got issued next round.
    pub admitted: Vec<String>,
    /// The verdict was coerced rather than given.
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub spaces: Vec<AtomicSpace>,
    /// Documents first seen under the intent in this round.
    pub new_docs: Vec<String>,
    /// The new documents that passed the gist filter.
    pub browsed: Vec<String>,
    pub evidence_docs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<VerdictTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentTrace {
    pub intent: Intent,
    pub rounds: Vec<RoundTrace>,
    pub subspace: KnowledgeSubspace,
}

impl IntentTrace {
    /// Every doc id retrieved under the intent, in first-seen order.
    pub fn retrieved(&self) -> Vec<&str> {
        self.rounds
            .iter()
            .flat_map(|r| r.new_docs.iter().map(String::as_str))
            .collect()
    }

    pub fn browsed(&self) -> Vec<&str> {
        self.rounds
            .iter()
            .flat_map(|r| r.browsed.iter().map(String::as_str))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub preamble: String,
    pub intents: Vec<IntentTrace>,
    pub events: Vec<Event>,
    pub central_calls: usize,
    pub parse_retries: usize,
}

/// A run that stopped early, with whatever was gathered before the error.
#[derive(Debug, Clone, PartialEq)]
pub struct Aborted {
    pub error: AgentError,
    pub partial: Box<Discovery>,
}

pub struct Agent<'a> {
    gateway: &'a Gateway,
    source: &'a dyn SearchBackend,
    config: DiscoveryConfig,
    synthesis: SynthesisConfig,
}

impl<'a> Agent<'a> {
    pub fn new(
        gateway: &'a Gateway,
        source: &'a dyn SearchBackend,
        config: DiscoveryConfig,
        synthesis: SynthesisConfig,
    ) -> Self {
        Self {
            gateway,
            source,
            config,
            synthesis,
        }
    }

    pub fn config(&self) -> &DiscoveryConfig {
        &self.config
    }

    pub fn run(&self, task: &str) -> Result<Discovery, Aborted> {
        let mut log = Discovery::default();
        let first = match self.initial_reasoning(task, &mut log) {
            Ok(f) => f,
            Err(error) => {
                return Err(Aborted {
                    error,
                    partial: Box::new(log),
                })
            }
        };
        let mut next = first;
        while let Some(description) = next.take() {
            let id = log.intents.len() + 1;
            let trace = match self.resolve_intent(task, Intent::new(id, description), &mut log) {
                Ok(t) => t,
                Err(error) => {
                    return Err(Aborted {
                        error,
                        partial: Box::new(log),
                    })
                }
            };
            log.intents.push(trace);
            next = self.advance(task, &mut log);
        }
        Ok(log)
    }

    /// Returns the first intent, or `None` when the model needs no lookup.
    pub fn initial_reasoning(&self, task: &str, log: &mut Discovery) -> Result<Option<String>, AgentError> {
        if task.trim().is_empty() {
            return Err(AgentError::Planning("empty task".into()));
        }
        let plan = self
            .ask(&prompts::plan(task), structured::parse_plan, None, log)
            .map_err(AgentError::Planning)?;
        log.preamble = plan.preamble.unwrap_or_default();
        Ok(match plan.next {
            NextStep::Intent(d) => Some(d),
            NextStep::Done => None,
        })
    }

    /// Atomic queries for round 0, already admitted to the intent.
    pub fn decompose(&self, task: &str, intent: &mut Intent, log: &mut Discovery) -> Result<(), String> {
        let id = intent.intent_id;
        let proposed = self.ask(
            &prompts::decompose(task, intent, self.config.max_queries),
            structured::parse_queries,
            Some(id),
            log,
        )?;
        if intent.admit_queries(&proposed, 0, self.config.max_queries).is_empty() {
            log.events.push(Event::new(
                Some(id),
                EventKind::EmptyDecomposition,
                "no usable query proposed",
            ));
            let fallback = intent.description.clone();
            intent.admit_queries([fallback], 0, 1);
        }
        Ok(())
    }

    /// Sufficiency judgment after `round`. Unusable replies count as
    /// sufficient; the flag reports such a coercion.
    pub fn diffusion_round(
        &self,
        task: &str,
        intent: &Intent,
        round: usize,
        evidence: &str,
        new_hits: &[String],
        log: &mut Discovery,
    ) -> (Verdict, bool) {
        let messages = prompts::verdict(task, intent, round, evidence, new_hits);
        match self.ask(&messages, structured::parse_verdict, Some(intent.intent_id), log) {
            Ok(v) => (v, false),
            Err(reason) => {
                log.events
                    .push(Event::new(Some(intent.intent_id), EventKind::ForcedSufficient, reason));
                let v = Verdict {
                    sufficient: true,
                    new_queries: Vec::new(),
                };
                (v, true)
            }
        }
    }

    pub fn resolve_intent(
        &self,
        task: &str,
        mut intent: Intent,
        log: &mut Discovery,
    ) -> Result<IntentTrace, AgentError> {
        let id = intent.intent_id;
        if let Err(reason) = self.decompose(task, &mut intent, log) {
            log.events
                .push(Event::new(Some(id), EventKind::IntentAbandoned, reason));
            intent.status = IntentStatus::Abandoned;
            return Ok(IntentTrace {
                intent,
                rounds: Vec::new(),
                subspace: KnowledgeSubspace::empty(id),
            });
        }
        let synth = Synthesizer::new(self.gateway, self.source, self.synthesis);
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut browsed_total = 0;
        let mut units: Vec<EvidenceUnit> = Vec::new();
        let mut subspace = KnowledgeSubspace::empty(id);
        let mut rounds = Vec::new();
        let mut round = 0;
        loop {
            let frontier: Vec<_> = intent
                .queries
                .iter()
                .filter(|q| q.issued_at_round == round)
                .cloned()
                .collect();
            let results = bounded_map(&frontier, self.config.workers, |q| {
                self.source.search(&q.text, self.config.top_k, self.config.alpha)
            });
            let mut spaces = Vec::with_capacity(frontier.len());
            let mut fresh: Vec<RankedHit> = Vec::new();
            for (q, r) in frontier.iter().zip(results) {
                let hits = r?.hits;
                for h in &hits {
                    if seen.insert(h.doc_id.clone()) {
                        fresh.push(h.clone());
                    }
                }
                spaces.push(AtomicSpace {
                    query_id: q.query_id.clone(),
                    hits,
                });
            }
            let filtered = synth.filter(&fresh, &intent);
            log.events.extend(filtered.events);
            let (new_units, extract_events) = synth.extract_all(&filtered.kept, &intent);
            log.events.extend(extract_events);
            browsed_total += filtered.kept.len();
            let evidence_docs: Vec<String> = new_units.iter().map(|u| u.doc_id.clone()).collect();
            if !new_units.is_empty() {
                units.extend(new_units);
                let (k, event) = synth.reduce(units.clone(), &intent, seen.len(), browsed_total);
                log.events.extend(event);
                subspace = k;
            }
            subspace.retrieved_count = seen.len();
            subspace.browsed_count = browsed_total;
            let new_docs: Vec<String> = fresh.iter().map(|h| h.doc_id.clone()).collect();
            let mut trace = RoundTrace {
                round,
                spaces,
                new_docs,
                browsed: filtered.kept,
                evidence_docs,
                verdict: None,
            };
            intent.rounds_used = round + 1;
            if round >= self.config.max_diffusion_depth {
                rounds.push(trace);
                break;
            }
            let (verdict, forced) = self.diffusion_round(task, &intent, round, &subspace.summary, &trace.new_docs, log);
            let mut vt = VerdictTrace {
                sufficient: verdict.sufficient,
                proposed: verdict.new_queries.clone(),
                admitted: Vec::new(),
                forced,
            };
            if !verdict.sufficient {
                let admitted = intent.admit_queries(&verdict.new_queries, round + 1, self.config.max_queries);
                if admitted.is_empty() {
                    log.events.push(Event::new(
                        Some(id),
                        EventKind::ForcedSufficient,
                        format!("round {round}: no new query proposed"),
                    ));
                    vt.sufficient = true;
                    vt.forced = true;
                } else {
                    vt.admitted = admitted.into_iter().map(|q| q.text).collect();
                }
            }
            let stop = vt.sufficient;
            trace.verdict = Some(vt);
            rounds.push(trace);
            if stop {
                break;
            }
            round += 1;
        }
        intent.status = IntentStatus::Resolved;
        Ok(IntentTrace {
            intent,
            rounds,
            subspace,
        })
    }

    /// Next intent description, or `None` to stop. Always consults the
    /// model; at the intent cap its answer is overridden.
    pub fn advance(&self, task: &str, log: &mut Discovery) -> Option<String> {
        let chain: Vec<(Intent, KnowledgeSubspace)> = log
            .intents
            .iter()
            .map(|t| (t.intent.clone(), t.subspace.clone()))
            .collect();
        let messages = prompts::advance(task, &log.preamble, &chain);
        let next = match self.ask(&messages, structured::parse_plan, None, log) {
            Ok(plan) => plan.next,
            Err(reason) => {
                log.events.push(Event::new(None, EventKind::ForcedDone, reason));
                return None;
            }
        };
        match next {
            NextStep::Done => None,
            NextStep::Intent(_) if log.intents.len() >= self.config.max_intents => {
                log.events.push(Event::new(
                    None,
                    EventKind::ForcedDone,
                    format!("intent cap {} reached", self.config.max_intents),
                ));
                None
            }
            NextStep::Intent(d) => Some(d),
        }
    }

    /// One logical central call with a single re-ask on failure.
    fn ask<T>(
        &self,
        messages: &[Message],
        parse: fn(&str) -> Result<T, ParseFailure>,
        intent_id: Option<usize>,
        log: &mut Discovery,
    ) -> Result<T, String> {
        log.central_calls += 1;
        let first = match self.gateway.complete(Role::Central, messages) {
            Ok(reply) => match parse(&reply.text) {
                Ok(v) => return Ok(v),
                Err(f) => (Some(reply.text), f.reason),
            },
            Err(e) => (None, e.to_string()),
        };
        log.parse_retries += 1;
        log.events.push(Event::new(intent_id, EventKind::ParseRetry, first.1));
        let mut retry = messages.to_vec();
        if let Some(previous) = first.0 {
            retry.push(Message::assistant(previous));
        }
        retry.push(Message::user(prompts::JSON_REMINDER));
        let reply = self
            .gateway
            .complete(Role::Central, &retry)
            .map_err(|e| e.to_string())?;
        parse(&reply.text).map_err(|f| f.reason)
    }
}
