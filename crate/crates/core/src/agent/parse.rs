//! Strict-delimiter parsing of decision and reflection responses.

use serde_json::Value;
use thiserror::Error;

use super::{Action, Decision, ReflectionVerdict, Verdict};
use crate::screenreader::Swipe;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("missing {0} block")]
    MissingDelimiter(&'static str),
    #[error("action block is not valid JSON: {0}")]
    MalformedJson(String),
    #[error("action list is empty")]
    EmptyActionList,
    #[error("action is missing field {0:?}")]
    MissingField(&'static str),
    #[error("unknown action_type {0:?}")]
    UnknownAction(String),
    #[error("malformed repetition count {0}")]
    BadRepetitions(String),
    #[error("malformed stop_at_occurrence {0}")]
    BadOccurrence(String),
    #[error("answer {0:?} is not A, B or C")]
    BadVerdict(String),
}

/// Text between the first `open` and the following `close`.
fn block<'a>(raw: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = raw.find(open)? + open.len();
    let len = raw[start..].find(close)?;
    Some(&raw[start..start + len])
}

fn strip_fence(s: &str) -> &str {
    let s = s.trim();
    let Some(rest) = s.strip_prefix("```") else {
        return s;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

pub fn parse_decision_response(raw: &str) -> Result<Decision, ParseError> {
    let body = block(raw, "<|begin_action|>", "<|end_action|>").ok_or(ParseError::MissingDelimiter("action"))?;
    let thought = block(raw, "<|begin_think|>", "<|end_think|>").unwrap_or("").trim().to_string();
    let value: Value = serde_json::from_str(strip_fence(body)).map_err(|e| ParseError::MalformedJson(e.to_string()))?;
    let first = match value {
        Value::Array(items) => items.into_iter().next().ok_or(ParseError::EmptyActionList)?,
        other => other,
    };
    let (action_value, description) = match first.get("action") {
        Some(a) => (a.clone(), first.get("description").and_then(Value::as_str).unwrap_or("").to_string()),
        None => (first, String::new()),
    };
    let action = parse_action(&action_value)?;
    Ok(Decision { thought, action, description })
}

fn count(v: Option<&Value>, default: Option<u32>, err: fn(String) -> ParseError) -> Result<u32, ParseError> {
    let parsed = match v {
        None => return default.ok_or_else(|| err("missing".into())),
        Some(Value::Number(n)) => n.as_u64().and_then(|n| u32::try_from(n).ok()),
        Some(Value::String(s)) => s.trim().parse::<u32>().ok(),
        Some(_) => None,
    };
    match parsed {
        Some(n) if n >= 1 => Ok(n),
        _ => Err(err(v.map(Value::to_string).unwrap_or_default())),
    }
}

pub(crate) fn parse_action(v: &Value) -> Result<Action, ParseError> {
    let kind = match v.get("action_type") {
        Some(Value::String(s)) => s.as_str(),
        Some(other) => return Err(ParseError::UnknownAction(other.to_string())),
        None => return Err(ParseError::MissingField("action_type")),
    };
    let swipe = || -> Result<Swipe, ParseError> {
        let stop_at = match v.get("stop_at") {
            None | Some(Value::Null) => String::new(),
            Some(Value::String(s)) => s.clone(),
            Some(_) => return Err(ParseError::MissingField("stop_at")),
        };
        Ok(Swipe {
            repetitions: count(v.get("repetitions"), None, ParseError::BadRepetitions)?,
            stop_at,
            stop_at_occurrence: count(v.get("stop_at_occurrence"), Some(1), ParseError::BadOccurrence)?,
        })
    };
    Ok(match kind {
        "SWIPE_RIGHT" => Action::SwipeRight(swipe()?),
        "SWIPE_LEFT" => Action::SwipeLeft(swipe()?),
        "DOUBLE_TAP" => Action::DoubleTap,
        "PRESS_BACK" => Action::PressBack,
        "TYPE" => match v.get("typed_text") {
            Some(Value::String(s)) => Action::Type { typed_text: s.clone() },
            _ => return Err(ParseError::MissingField("typed_text")),
        },
        "WAIT" => Action::Wait,
        "STATUS_TASK_COMPLETE" => Action::StatusTaskComplete,
        "TASK_IMPOSSIBLE" => Action::TaskImpossible,
        other => return Err(ParseError::UnknownAction(other.to_string())),
    })
}

pub fn parse_reflection_response(raw: &str) -> Result<ReflectionVerdict, ParseError> {
    let answer = block(raw, "<|begin_answer|>", "<|end_answer|>").ok_or(ParseError::MissingDelimiter("answer"))?;
    let thought = block(raw, "<|begin_think|>", "<|end_think|>").unwrap_or("").trim().to_string();
    let token: String = answer
        .trim()
        .chars()
        .take_while(|c| c.is_ascii_alphanumeric())
        .collect();
    let verdict = match token.to_ascii_uppercase().as_str() {
        "A" => Verdict::A,
        "B" => Verdict::B,
        "C" => Verdict::C,
        _ => return Err(ParseError::BadVerdict(answer.trim().to_string())),
    };
    Ok(ReflectionVerdict { verdict, thought })
}
