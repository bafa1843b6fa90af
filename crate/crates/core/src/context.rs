//! Task-specific context: the resolved chain rendered as LLM-ready text.
//!
//! Rendering uses a fixed template (see [`TEMPLATE_VERSION`]):
//!
//! ```text
//! Task: <task>
//! Initial reasoning (model-derived, unverified): <preamble>
//!
//! The task requires the following steps and information:
//!
//! Step 1: <intent description>
//! Info: <synthesized evidence>
//! ```
//!
//! The preamble line is omitted when the preamble is empty and the steps
//! section is omitted when there are no steps. Abandoned intents render
//! `Info: [unresolved]`; resolved intents without evidence render
//! `Info: [no evidence found]`.
//!
//! When the rendering exceeds the token budget, evidence is cut
//! proportionally to its length (largest first) until it fits. Intent
//! descriptions and step structure are never truncated.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::chain::IntentStatus;
use crate::error::ContextError;
use crate::text;

pub const TEMPLATE_VERSION: &str = "chain-v1";
pub const DEFAULT_CONTEXT_BUDGET: usize = 8192;

const UNRESOLVED: &str = "[unresolved]";
const NO_EVIDENCE: &str = "[no evidence found]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextStep {
    pub intent_id: usize,
    pub intent: String,
    pub status: IntentStatus,
    pub evidence: String,
    pub retrieved: usize,
    pub browsed: usize,
    /// Evidence was shortened to fit the context budget.
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskContext {
    pub task: String,
    pub preamble: String,
    pub steps: Vec<ContextStep>,
    pub rendered: String,
}

/// Render the chain, truncating evidence to stay within `budget` tokens.
pub fn assemble(
    task: &str,
    preamble: &str,
    mut steps: Vec<ContextStep>,
    budget: usize,
) -> Result<TaskContext, ContextError> {
    if steps.is_empty() && preamble.trim().is_empty() {
        return Err(ContextError::Empty);
    }
    steps.sort_by_key(|s| s.intent_id);
    for (position, step) in steps.iter().enumerate() {
        if step.intent_id != position + 1 {
            return Err(ContextError::BrokenChain {
                position,
                found: step.intent_id,
            });
        }
    }

    loop {
        let rendered = render(task, preamble, &steps);
        let needed = text::token_count(&rendered);
        if needed <= budget {
            return Ok(TaskContext {
                task: task.into(),
                preamble: preamble.into(),
                steps,
                rendered,
            });
        }
        let lengths: Vec<usize> = steps.iter().map(cuttable_tokens).collect();
        let total: usize = lengths.iter().sum();
        if total == 0 {
            return Err(ContextError::ContextOverflow { needed, budget });
        }
        let excess = needed - budget;
        let mut order: Vec<usize> = (0..steps.len()).collect();
        order.sort_by(|&a, &b| lengths[b].cmp(&lengths[a]).then(a.cmp(&b)));
        let mut remaining = excess;
        for i in order {
            if remaining == 0 {
                break;
            }
            let share = (excess * lengths[i]).div_ceil(total);
            let cut = share.min(lengths[i]).min(remaining);
            if cut == 0 {
                continue;
            }
            let keep = lengths[i] - cut;
            let step = &mut steps[i];
            step.evidence = String::from(text::truncate_tokens(&step.evidence, keep));
            step.truncated = true;
            remaining -= cut;
        }
    }
}

fn cuttable_tokens(step: &ContextStep) -> usize {
    if step.status == IntentStatus::Abandoned {
        0
    } else {
        text::token_count(&step.evidence)
    }
}

/// Pure rendering of the template; no budget handling.
pub fn render(task: &str, preamble: &str, steps: &[ContextStep]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Task: {task}");
    if !preamble.trim().is_empty() {
        let _ = writeln!(out, "Initial reasoning (model-derived, unverified): {preamble}");
    }
    if !steps.is_empty() {
        out.push_str("\nThe task requires the following steps and information:\n");
        for step in steps {
            let info = match step.status {
                IntentStatus::Abandoned => UNRESOLVED,
                _ if step.evidence.is_empty() && !step.truncated => NO_EVIDENCE,
                _ => step.evidence.as_str(),
            };
            let _ = write!(out, "\nStep {}: {}\nInfo: {}\n", step.intent_id, step.intent, info);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn step(id: usize, intent: &str, evidence: &str) -> ContextStep {
        ContextStep {
            intent_id: id,
            intent: intent.into(),
            status: IntentStatus::Resolved,
            evidence: evidence.into(),
            retrieved: 0,
            browsed: 0,
            truncated: false,
        }
    }

    #[test]
    fn preamble_only() {
        let ctx = assemble("What?", "Hafnia", vec![], 100).unwrap();
        assert_eq!(
            ctx.rendered,
            "Task: What?\nInitial reasoning (model-derived, unverified): Hafnia\n"
        );
        assert_eq!(assemble("What?", " ", vec![], 100), Err(ContextError::Empty));
    }

    #[test]
    fn table_shaped_chain() {
        let steps = vec![
            step(2, "Identify the 2021 article.", "Nutrients (2021)."),
            step(
                1,
                "Identify the scientific genus named for Copenhagen.",
                "The genus is Hafnia.",
            ),
        ];
        let ctx = assemble("Which animals?", "", steps, 1000).unwrap();
        assert_eq!(
            ctx.rendered,
            "Task: Which animals?\n\nThe task requires the following steps and information:\n\n\
             Step 1: Identify the scientific genus named for Copenhagen.\nInfo: The genus is Hafnia.\n\n\
             Step 2: Identify the 2021 article.\nInfo: Nutrients (2021).\n"
        );
        assert_eq!(ctx.steps[0].intent_id, 1);
    }

    #[test]
    fn gaps_are_rejected() {
        let err = assemble("t", "", vec![step(1, "a", "b"), step(3, "c", "d")], 100).unwrap_err();
        assert_eq!(err, ContextError::BrokenChain { position: 1, found: 3 });
    }

    #[test]
    fn markers_for_abandoned_and_empty() {
        let mut abandoned = step(2, "b", "ignored");
        abandoned.status = IntentStatus::Abandoned;
        let ctx = assemble("t", "", vec![step(1, "a", ""), abandoned], 100).unwrap();
        assert!(ctx.rendered.contains("Step 1: a\nInfo: [no evidence found]\n"));
        assert!(ctx.rendered.contains("Step 2: b\nInfo: [unresolved]\n"));
    }

    #[test]
    fn overflow_truncates_evidence_only() {
        let long: Vec<String> = (0..300).map(|i| format!("e{i}")).collect();
        let short: Vec<String> = (0..100).map(|i| format!("s{i}")).collect();
        let steps = vec![
            step(1, "first intent", &long.join(" ")),
            step(2, "second intent", &short.join(" ")),
        ];
        let structure = text::token_count(&render(
            "t",
            "",
            &[step(1, "first intent", ""), step(2, "second intent", "")],
        )) - 2 * text::token_count(NO_EVIDENCE);
        let budget = structure + 200;
        let ctx = assemble("t", "", steps, budget).unwrap();
        assert!(text::token_count(&ctx.rendered) <= budget);
        assert!(ctx.rendered.contains("Step 1: first intent"));
        assert!(ctx.rendered.contains("Step 2: second intent"));
        let kept: Vec<usize> = ctx.steps.iter().map(|s| text::token_count(&s.evidence)).collect();
        // proportional: 300:100 shrinks to 150:50
        assert_eq!(kept, [150, 50]);
        assert!(ctx.steps.iter().all(|s| s.truncated));
    }

    #[test]
    fn structure_alone_overflows() {
        let err = assemble("a long task statement here", "", vec![step(1, "intent words", "ev")], 3).unwrap_err();
        assert!(matches!(err, ContextError::ContextOverflow { budget: 3, .. }));
    }

    proptest::proptest! {
        #[test]
        fn rendering_fits_budget_and_keeps_structure(
            lens in proptest::collection::vec(0usize..60, 1..5),
            slack in 0usize..120,
        ) {
            let steps: Vec<ContextStep> = lens
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let words: Vec<String> = (0..n).map(|j| format!("w{j}")).collect();
                    step(i + 1, &format!("intent {i}"), &words.join(" "))
                })
                .collect();
            let bare: Vec<ContextStep> = steps
                .iter()
                // the no-evidence marker is structure and is never cut
                .map(|s| ContextStep { evidence: String::new(), truncated: !s.evidence.is_empty(), ..s.clone() })
                .collect();
            let floor = text::token_count(&render("task", "pre", &bare));
            let ctx = assemble("task", "pre", steps.clone(), floor + slack).unwrap();
            proptest::prop_assert!(text::token_count(&ctx.rendered) <= floor + slack);
            for (orig, got) in steps.iter().zip(&ctx.steps) {
                proptest::prop_assert_eq!(&orig.intent, &got.intent);
                proptest::prop_assert!(orig.evidence.starts_with(got.evidence.as_str()));
            }
            let again = assemble("task", "pre", steps, floor + slack).unwrap();
            proptest::prop_assert_eq!(again.rendered, ctx.rendered);
        }
    }
}
