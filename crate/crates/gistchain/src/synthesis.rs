//! Memory-guided map–reduce over retrieved documents.
//!
//! `filter` judges each candidate from its gist alone, `extract` reads the
//! surviving documents in full and pulls out evidence, and `reduce` merges
//! the evidence into one summary per intent. Filter and extract calls run on
//! a bounded worker pool; their results are collected in input order, and
//! `reduce` sorts units by document id first, so the outcome does not depend
//! on which worker finished first.

use gistchain_core::text;
use gistchain_core::{Document, EvidenceUnit, Intent, KnowledgeSubspace, RankedHit};
use serde::{Deserialize, Serialize};

use crate::events::{Event, EventKind};
use crate::gateway::{Gateway, Role};
use crate::pool::bounded_map;
use crate::prompts;
use crate::search::SearchBackend;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub workers: usize,
    /// Tokens of raw text per extraction call.
    pub chunk_tokens: usize,
    /// Token cap per evidence unit.
    pub evidence_cap: usize,
    /// Token cap per intent summary.
    pub summary_cap: usize,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            workers: 8,
            chunk_tokens: 6000,
            evidence_cap: 512,
            summary_cap: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterOutcome {
    /// Accepted doc ids, in input order.
    pub kept: Vec<String>,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extraction {
    Evidence(EvidenceUnit),
    NoEvidence { failure: Option<String> },
}

pub struct Synthesizer<'a> {
    gateway: &'a Gateway,
    source: &'a dyn SearchBackend,
    config: SynthesisConfig,
}

enum FilterVerdict {
    Accept,
    Reject,
    Retain(String),
}

fn chunk_spans(text: &str, chunk_tokens: usize) -> Vec<&str> {
    let ends: Vec<usize> = text::token_spans(text).map(|(_, e)| e).collect();
    if ends.len() <= chunk_tokens || chunk_tokens == 0 {
        return vec![text];
    }
    let mut out = Vec::new();
    let mut start = 0;
    for group in ends.chunks(chunk_tokens) {
        let end = *group.last().expect("chunks are non-empty");
        out.push(&text[start..end]);
        start = end;
    }
    if let Some(last) = out.last_mut() {
        // trailing punctuation belongs to the final chunk
        let begin = text.len() - text[start..].len() - last.len();
        *last = &text[begin..];
    }
    out
}

fn is_none_reply(reply: &str) -> bool {
    reply
        .trim()
        .trim_end_matches('.')
        .eq_ignore_ascii_case(prompts::NO_EVIDENCE)
        || reply.trim().is_empty()
}

impl<'a> Synthesizer<'a> {
    pub fn new(gateway: &'a Gateway, source: &'a dyn SearchBackend, config: SynthesisConfig) -> Self {
        Self {
            gateway,
            source,
            config,
        }
    }

    pub fn config(&self) -> &SynthesisConfig {
        &self.config
    }

    /// Gist-only relevance check. Output is an order-preserving subset of
    /// the input; documents whose verdict is unusable are kept.
    pub fn filter(&self, hits: &[RankedHit], intent: &Intent) -> FilterOutcome {
        let verdicts = bounded_map(hits, self.config.workers, |hit| self.judge(hit, intent));
        let mut kept = Vec::new();
        let mut events = Vec::new();
        for (hit, verdict) in hits.iter().zip(verdicts) {
            match verdict {
                FilterVerdict::Accept => kept.push(hit.doc_id.clone()),
                FilterVerdict::Reject => {}
                FilterVerdict::Retain(why) => {
                    events.push(Event::new(
                        Some(intent.intent_id),
                        EventKind::FilterRetained,
                        format!("{}: {why}", hit.doc_id),
                    ));
                    kept.push(hit.doc_id.clone());
                }
            }
        }
        FilterOutcome { kept, events }
    }

    fn judge(&self, hit: &RankedHit, intent: &Intent) -> FilterVerdict {
        let Some(gist) = self.source.gist(&hit.doc_id) else {
            return FilterVerdict::Retain("no gist available".into());
        };
        match self
            .gateway
            .complete(Role::Auxiliary, &prompts::filter(intent, &hit.doc_id, &gist.gist_text))
        {
            Ok(reply) => match text::tokenize(&reply.text).first().map(String::as_str) {
                Some(prompts::FILTER_ACCEPT) => FilterVerdict::Accept,
                Some(prompts::FILTER_REJECT) => FilterVerdict::Reject,
                _ => FilterVerdict::Retain(format!("unparseable verdict {:?}", reply.text)),
            },
            Err(e) => FilterVerdict::Retain(e.to_string()),
        }
    }

    /// Evidence for `intent` from the full text of `doc`. Long documents are
    /// read chunk by chunk and the per-chunk extracts compressed by one more
    /// call.
    pub fn extract(&self, doc: &Document, intent: &Intent) -> Extraction {
        let chunks = chunk_spans(&doc.raw_text, self.config.chunk_tokens);
        let parts = chunks.len();
        let mut extracts = Vec::new();
        for (i, chunk) in chunks.iter().enumerate() {
            let messages = prompts::extract(intent, &doc.doc_id, i + 1, parts, chunk);
            match self.gateway.complete(Role::Auxiliary, &messages) {
                Ok(reply) if is_none_reply(&reply.text) => {}
                Ok(reply) => extracts.push(reply.text.trim().to_string()),
                Err(e) => {
                    return Extraction::NoEvidence {
                        failure: Some(e.to_string()),
                    }
                }
            }
        }
        let content = match extracts.len() {
            0 => return Extraction::NoEvidence { failure: None },
            _ if parts == 1 => extracts.pop().expect("one extract"),
            _ => {
                let joined = extracts.join("\n");
                match self
                    .gateway
                    .complete(Role::Auxiliary, &prompts::compress(intent, &doc.doc_id, &joined))
                {
                    Ok(reply) if is_none_reply(&reply.text) => return Extraction::NoEvidence { failure: None },
                    Ok(reply) => reply.text.trim().to_string(),
                    Err(e) => {
                        return Extraction::NoEvidence {
                            failure: Some(e.to_string()),
                        }
                    }
                }
            }
        };
        Extraction::Evidence(EvidenceUnit {
            doc_id: doc.doc_id.clone(),
            intent_id: intent.intent_id,
            content: text::truncate_tokens(&content, self.config.evidence_cap).to_string(),
            salience_note: None,
        })
    }

    /// Extract from several documents in parallel; results in input order.
    pub fn extract_all(&self, doc_ids: &[String], intent: &Intent) -> (Vec<EvidenceUnit>, Vec<Event>) {
        let results = bounded_map(doc_ids, self.config.workers, |id| match self.source.document(id) {
            Some(doc) => self.extract(doc, intent),
            None => Extraction::NoEvidence {
                failure: Some("document not found".into()),
            },
        });
        let mut units = Vec::new();
        let mut events = Vec::new();
        for (id, r) in doc_ids.iter().zip(results) {
            match r {
                Extraction::Evidence(u) => units.push(u),
                Extraction::NoEvidence { failure: Some(why) } => events.push(Event::new(
                    Some(intent.intent_id),
                    EventKind::ExtractFailed,
                    format!("{id}: {why}"),
                )),
                Extraction::NoEvidence { failure: None } => {}
            }
        }
        (units, events)
    }

    /// Merge evidence units into the intent's knowledge subspace.
    pub fn reduce(
        &self,
        mut units: Vec<EvidenceUnit>,
        intent: &Intent,
        retrieved_count: usize,
        browsed_count: usize,
    ) -> (KnowledgeSubspace, Option<Event>) {
        units.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if units.is_empty() {
            return (
                KnowledgeSubspace {
                    retrieved_count,
                    browsed_count,
                    ..KnowledgeSubspace::empty(intent.intent_id)
                },
                None,
            );
        }
        let pairs: Vec<(String, String)> = units.iter().map(|u| (u.doc_id.clone(), u.content.clone())).collect();
        let (summary, event) = match self.gateway.complete(Role::Auxiliary, &prompts::reduce(intent, &pairs)) {
            Ok(reply) => (reply.text.trim().to_string(), None),
            Err(e) => {
                let joined = pairs
                    .iter()
                    .map(|(id, c)| format!("[{id}] {c}"))
                    .collect::<Vec<_>>()
                    .join("\n");
                let event = Event::new(Some(intent.intent_id), EventKind::ReduceFallback, e.to_string());
                (joined, Some(event))
            }
        };
        let summary = text::truncate_tokens(&summary, self.config.summary_cap).to_string();
        let subspace = KnowledgeSubspace {
            intent_id: intent.intent_id,
            empty: summary.is_empty(),
            summary,
            units,
            retrieved_count,
            browsed_count,
        };
        (subspace, event)
    }
}
