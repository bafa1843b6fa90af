//! Exact-match scoring of run logs against a gold file.
//!
//! Gold is JSON lines `{"task_id": ..., "answer": ..., "metric": "em"}`;
//! `metric` defaults to `em`. Items asking for `llm_equivalence` need a
//! judge model, which is not implemented; they are reported as unsupported
//! and left out of the aggregate.

use std::collections::BTreeMap;
use std::fmt;

use gistchain_core::eval::exact_match;
use serde::{Deserialize, Serialize};

use crate::runlog::RunLog;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Em,
    LlmEquivalence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldItem {
    pub task_id: String,
    pub answer: String,
    #[serde(default)]
    pub metric: Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    MissingAnswer,
    Unsupported,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub task_id: String,
    pub predicted: Option<String>,
    pub gold: String,
    /// `None` for unsupported metrics.
    pub em: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<Flag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub items: Vec<ItemScore>,
    /// Mean EM over scored items; `None` when nothing was scorable.
    pub aggregate_em: Option<f64>,
    pub scored: usize,
}

pub fn parse_gold(text: &str) -> Result<Vec<GoldItem>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("gold line {}: {e}", i + 1)))
        .collect()
}

/// Score answers keyed by task id against gold items, in gold order.
pub fn score(answers: &BTreeMap<String, String>, gold: &[GoldItem]) -> Report {
    let mut items = Vec::with_capacity(gold.len());
    for g in gold {
        let predicted = answers.get(&g.task_id).cloned();
        let (em, flag) = match (g.metric, &predicted) {
            (Metric::LlmEquivalence, _) => (None, Some(Flag::Unsupported)),
            (Metric::Em, None) => (Some(0.0), Some(Flag::MissingAnswer)),
            (Metric::Em, Some(p)) => (Some(exact_match(p, &g.answer)), None),
        };
        items.push(ItemScore {
            task_id: g.task_id.clone(),
            predicted,
            gold: g.answer.clone(),
            em,
            flag,
        });
    }
    let scored: Vec<f64> = items.iter().filter_map(|i| i.em).collect();
    let aggregate_em = (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64);
    Report {
        scored: scored.len(),
        items,
        aggregate_em,
    }
}

/// Answers of the given logs keyed by task id (falling back to run id).
pub fn answers_from_logs(logs: &[RunLog]) -> BTreeMap<String, String> {
    logs.iter()
        .filter_map(|l| {
            let key = l.task_id.clone().unwrap_or_else(|| l.run_id.clone());
            l.answer.as_ref().map(|a| (key, a.text.clone()))
        })
        .collect()
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in &self.items {
            let em = i.em.map_or("-".to_string(), |v| format!("{v}"));
            let flag = match i.flag {
                Some(Flag::MissingAnswer) => "  [missing answer]",
                Some(Flag::Unsupported) => "  [unsupported metric]",
                None => "",
            };
            writeln!(
                f,
                "{}\tEM={em}\tpredicted={:?}\tgold={:?}{flag}",
                i.task_id,
                i.predicted.as_deref().unwrap_or(""),
                i.gold
            )?;
        }
        match self.aggregate_em {
            Some(a) => write!(f, "aggregate EM: {a:.4} over {} item(s)", self.scored),
            None => write!(f, "aggregate EM: n/a (no scorable items)"),
        }
    }
}
