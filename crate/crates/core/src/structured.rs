//! Structured replies from the reasoning model.
//!
//! Replies are free text that should contain one JSON object. The first
//! object that parses and satisfies the requested schema wins; anything else
//! is reported as a [`ParseFailure`] value rather than an error, so callers
//! can apply their own fallback.
//!
//! Schemas:
//! - verdict: `{"sufficient": bool, "new_queries": [string]}` (`new_queries` optional)
//! - queries: `{"queries": [string]}`
//! - intents: `{"preamble": string?, "intent": string?, "done": bool?}`; either
//!   `done` is true or `intent` is a non-empty string

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schema {
    Verdict,
    Queries,
    Intents,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub sufficient: bool,
    #[serde(default)]
    pub new_queries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryList {
    pub queries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum NextStep {
    Intent(String),
    Done,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub preamble: Option<String>,
    pub next: NextStep,
}

#[derive(Debug, Deserialize)]
struct RawPlan {
    #[serde(default)]
    preamble: Option<String>,
    #[serde(default)]
    intent: Option<String>,
    #[serde(default)]
    done: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Structured {
    Verdict(Verdict),
    Queries(Vec<String>),
    Plan(Plan),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub schema: Schema,
    pub reason: String,
}

pub fn parse_structured(text: &str, schema: Schema) -> Result<Structured, ParseFailure> {
    match schema {
        Schema::Verdict => parse_verdict(text).map(Structured::Verdict),
        Schema::Queries => parse_queries(text).map(Structured::Queries),
        Schema::Intents => parse_plan(text).map(Structured::Plan),
    }
}

pub fn parse_verdict(text: &str) -> Result<Verdict, ParseFailure> {
    first_matching(text, Schema::Verdict, |v: Verdict| Some(v))
}

pub fn parse_queries(text: &str) -> Result<Vec<String>, ParseFailure> {
    first_matching(text, Schema::Queries, |q: QueryList| Some(q.queries))
}

pub fn parse_plan(text: &str) -> Result<Plan, ParseFailure> {
    first_matching(text, Schema::Intents, |p: RawPlan| {
        let preamble = p.preamble.filter(|s| !s.trim().is_empty());
        let next = match p.intent.filter(|s| !s.trim().is_empty()) {
            _ if p.done => NextStep::Done,
            Some(intent) => NextStep::Intent(intent.trim().to_string()),
            None => return None,
        };
        Some(Plan { preamble, next })
    })
}

fn first_matching<T, U>(text: &str, schema: Schema, accept: impl Fn(T) -> Option<U>) -> Result<U, ParseFailure>
where
    T: DeserializeOwned,
{
    let mut saw_object = false;
    for (i, _) in text.match_indices('{') {
        let mut de = serde_json::Deserializer::from_str(&text[i..]);
        let Ok(value) = serde_json::Value::deserialize(&mut de) else {
            continue;
        };
        if !value.is_object() {
            continue;
        }
        saw_object = true;
        if let Some(found) = serde_json::from_value::<T>(value).ok().and_then(&accept) {
            return Ok(found);
        }
    }
    let reason = if saw_object {
        "no JSON object matched the schema"
    } else {
        "no JSON object found"
    };
    Err(ParseFailure {
        schema,
        reason: reason.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn well_formed_verdict() {
        let v = parse_verdict(r#"{"sufficient": true, "new_queries": []}"#).unwrap();
        assert!(v.sufficient);
        assert!(v.new_queries.is_empty());
    }

    #[test]
    fn verdict_after_noise() {
        let v = parse_verdict(r#"Reasoning... {"sufficient": false, "new_queries": ["x"]}"#).unwrap();
        assert_eq!(
            v,
            Verdict {
                sufficient: false,
                new_queries: vec!["x".into()]
            }
        );
        // braces in prose before the object are skipped
        let v = parse_verdict(r#"set {a, b} then {"sufficient": true} trailing } junk"#).unwrap();
        assert!(v.sufficient);
    }

    #[test]
    fn absent_object_is_failure() {
        let f = parse_structured("no json here", Schema::Verdict).unwrap_err();
        assert_eq!(f.schema, Schema::Verdict);
        assert_eq!(f.reason, "no JSON object found");
        assert!(parse_verdict(r#"{"other": 1}"#).is_err());
    }

    #[test]
    fn nested_objects_parse_as_the_outer_value() {
        let q = parse_queries(
            r#"```json
{"queries": ["a", "b"], "meta": {"x": 1}}
```"#,
        )
        .unwrap();
        assert_eq!(q, ["a", "b"]);
    }

    #[test]
    fn plans() {
        let p = parse_plan(r#"{"preamble": "Genus is Hafnia", "intent": "Find the records"}"#).unwrap();
        assert_eq!(p.preamble.as_deref(), Some("Genus is Hafnia"));
        assert_eq!(p.next, NextStep::Intent("Find the records".into()));
        assert_eq!(parse_plan(r#"{"done": true}"#).unwrap().next, NextStep::Done);
        assert!(parse_plan(r#"{"intent": "  "}"#).is_err());
        assert!(matches!(
            parse_structured(r#"{"intent": "x"}"#, Schema::Intents),
            Ok(Structured::Plan(_))
        ));
    }
}
