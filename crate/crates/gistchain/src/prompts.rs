//! Default prompt templates.
//!
//! Every prompt starts its user message with a bracketed marker such as
//! `[[DECOMPOSE]]` so that scripted mocks (and humans reading transcripts)
//! can tell the call sites apart. The reasoning-model prompts ask for a
//! single JSON object in the formats accepted by
//! [`gistchain_core::structured`].

use gistchain_core::chain::Intent;
use gistchain_core::KnowledgeSubspace;

use crate::gateway::Message;

pub const FILTER_ACCEPT: &str = "accept";
pub const FILTER_REJECT: &str = "reject";
/// Reply meaning "this document has nothing for the intent".
pub const NO_EVIDENCE: &str = "NONE";

const CENTRAL_SYSTEM: &str = "You are the reasoning engine of a retrieval agent. You plan what must be \
learned to solve a task, one information intent at a time. Reply with a single JSON object and nothing else.";

const AUX_SYSTEM: &str = "You are a careful document processor. Follow the instruction exactly and be concise.";

pub const JSON_REMINDER: &str =
    "Your previous reply could not be parsed. Reply again with exactly one JSON object in the requested format.";

pub fn gist(title: Option<&str>, text: &str, budget: usize) -> Vec<Message> {
    vec![
        Message::system(AUX_SYSTEM),
        Message::user(format!(
            "[[GIST]]\nWrite a gist of the document below in at most {budget} words: its title, overall topic, \
             scope and structure (sections, kinds of content it contains). Describe categories of content \
             instead of listing individual details.\nTitle: {}\nDocument:\n{text}",
            title.unwrap_or("(untitled)")
        )),
    ]
}

pub fn plan(task: &str) -> Vec<Message> {
    vec![
        Message::system(CENTRAL_SYSTEM),
        Message::user(format!(
            "[[PLAN]]\nTask: {task}\n\nFirst resolve whatever you can from your own knowledge and state it \
             briefly as \"preamble\". Then state the first information intent: what must be looked up next. \
             Format: {{\"preamble\": \"...\", \"intent\": \"...\"}}. If nothing needs to be looked up, \
             reply {{\"preamble\": \"...\", \"done\": true}}."
        )),
    ]
}

pub fn decompose(task: &str, intent: &Intent, max_queries: usize) -> Vec<Message> {
    vec![
        Message::system(CENTRAL_SYSTEM),
        Message::user(format!(
            "[[DECOMPOSE]]\nTask: {task}\nIntent {}: {}\n\nSplit this intent into at most {max_queries} \
             atomic search queries, each answerable by a single search. Format: {{\"queries\": [\"...\"]}}.",
            intent.intent_id, intent.description
        )),
    ]
}

pub fn verdict(task: &str, intent: &Intent, round: usize, evidence: &str, new_hits: &[String]) -> Vec<Message> {
    let issued: Vec<&str> = intent.queries.iter().map(|q| q.text.as_str()).collect();
    let hits = if new_hits.is_empty() {
        "(none)".to_string()
    } else {
        new_hits.join("\n")
    };
    let evidence = if evidence.is_empty() { "(none yet)" } else { evidence };
    vec![
        Message::system(CENTRAL_SYSTEM),
        Message::user(format!(
            "[[VERDICT]]\nTask: {task}\nIntent {}: {}\nRound: {round}\nQueries issued so far:\n{}\n\
             New documents this round:\n{hits}\nEvidence so far:\n{evidence}\n\nIs the evidence sufficient to \
             resolve the intent? If not, propose new queries that cover what is missing. Format: \
             {{\"sufficient\": true|false, \"new_queries\": [\"...\"]}}.",
            intent.intent_id,
            intent.description,
            issued.join("\n")
        )),
    ]
}

pub fn advance(task: &str, preamble: &str, chain: &[(Intent, KnowledgeSubspace)]) -> Vec<Message> {
    let mut steps = String::new();
    for (intent, k) in chain {
        let info = if k.summary.is_empty() {
            "(no evidence)"
        } else {
            k.summary.as_str()
        };
        steps.push_str(&format!(
            "Intent {}: {}\nEvidence: {}\n",
            intent.intent_id, intent.description, info
        ));
    }
    vec![
        Message::system(CENTRAL_SYSTEM),
        Message::user(format!(
            "[[ADVANCE]]\nTask: {task}\nPreamble: {preamble}\nResolved intents: {}\n{steps}\nGiven the evidence \
             so far, state the next information intent as {{\"intent\": \"...\"}}, or reply {{\"done\": true}} \
             if the task can now be answered.",
            chain.len()
        )),
    ]
}

pub fn filter(intent: &Intent, doc_id: &str, gist: &str) -> Vec<Message> {
    vec![
        Message::system(AUX_SYSTEM),
        Message::user(format!(
            "[[FILTER]]\nIntent: {}\nDocument {doc_id} gist: {gist}\n\nCould this document contain information \
             for the intent? Answer with one word: {FILTER_ACCEPT} or {FILTER_REJECT}.",
            intent.description
        )),
    ]
}

pub fn extract(intent: &Intent, doc_id: &str, part: usize, parts: usize, text: &str) -> Vec<Message> {
    vec![
        Message::system(AUX_SYSTEM),
        Message::user(format!(
            "[[EXTRACT]]\nIntent: {}\nDocument {doc_id} (part {part}/{parts}):\n{text}\n\nCopy out the facts \
             in this text that serve the intent, as short statements. If there are none, reply {NO_EVIDENCE}.",
            intent.description
        )),
    ]
}

pub fn compress(intent: &Intent, doc_id: &str, extracts: &str) -> Vec<Message> {
    vec![
        Message::system(AUX_SYSTEM),
        Message::user(format!(
            "[[COMPRESS]]\nIntent: {}\nDocument {doc_id} extracts:\n{extracts}\n\nMerge these extracts into one \
             concise, non-redundant list of facts for the intent.",
            intent.description
        )),
    ]
}

pub fn reduce(intent: &Intent, units: &[(String, String)]) -> Vec<Message> {
    let mut body = String::new();
    for (doc_id, content) in units {
        body.push_str(&format!("[{doc_id}] {content}\n"));
    }
    vec![
        Message::system(AUX_SYSTEM),
        Message::user(format!(
            "[[REDUCE]]\nIntent {}: {}\nEvidence units:\n{body}\nSynthesize the evidence into a compact summary \
             that resolves the intent. Keep names, titles, numbers and dates exact, and cite document ids in brackets.",
            intent.intent_id, intent.description
        )),
    ]
}

pub fn answer(task: &str, rendered: &str) -> Vec<Message> {
    vec![
        Message::system("Answer the task using the provided context. Reply with the answer only."),
        Message::user(format!("[[ANSWER]]\n{rendered}\nTask: {task}\nAnswer:")),
    ]
}
