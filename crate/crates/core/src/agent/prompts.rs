//! Prompt templates and a single-pass slot formatter.

use thiserror::Error;

use super::{Action, DecisionContext, ReflectionContext};
use crate::screenreader::TranscriptItem;
use crate::taskgen::TaskSpecification;

pub const DECISION_TEMPLATE: &str = include_str!("../../templates/decision.txt");
pub const REFLECTION_TEMPLATE: &str = include_str!("../../templates/reflection.txt");
pub const STAGE1_TEMPLATE: &str = include_str!("../../templates/analyzer_stage1.txt");
pub const STAGE2_TEMPLATE: &str = include_str!("../../templates/analyzer_stage2.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("template references unknown slot {0:?}")]
    UnknownSlot(String),
    #[error("unbalanced brace at byte {0}")]
    Unbalanced(usize),
}

/// Extra text for the two decision-prompt slots that have no fixed content.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptOptions {
    pub additional_info: String,
    pub typing_additional: String,
}

/// Fills `{slot}` placeholders in one pass; values are never rescanned.
///
/// With `escapes`, `{{`/`}}` are literal braces and every placeholder must
/// be supplied. Without, only known slot names are replaced and all other
/// braces pass through.
pub fn render(template: &str, slots: &[(&str, &str)], escapes: bool) -> Result<String, PromptError> {
    let bytes = template.as_bytes();
    let mut out = String::with_capacity(template.len() + 256);
    let mut i = 0;
    let mut lit = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if escapes && bytes.get(i + 1) == Some(&b'{') => {
                out.push_str(&template[lit..i]);
                out.push('{');
                i += 2;
                lit = i;
            }
            b'}' if escapes && bytes.get(i + 1) == Some(&b'}') => {
                out.push_str(&template[lit..i]);
                out.push('}');
                i += 2;
                lit = i;
            }
            b'}' if escapes => return Err(PromptError::Unbalanced(i)),
            b'{' => {
                let end = template[i + 1..].find('}').map(|e| i + 1 + e);
                let name = end.map(|e| &template[i + 1..e]);
                let is_ident = name.is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_'));
                match (name, end) {
                    (Some(n), Some(e)) if is_ident => match slots.iter().find(|(k, _)| *k == n) {
                        Some((_, v)) => {
                            out.push_str(&template[lit..i]);
                            out.push_str(v);
                            i = e + 1;
                            lit = i;
                        }
                        None if escapes => return Err(PromptError::UnknownSlot(n.to_string())),
                        None => i += 1,
                    },
                    _ if escapes => return Err(PromptError::Unbalanced(i)),
                    _ => i += 1,
                }
            }
            _ => i += 1,
        }
    }
    out.push_str(&template[lit..]);
    Ok(out)
}

/// Transcript items in the record layout the prompts describe.
pub fn transcript_block(items: &[TranscriptItem]) -> String {
    items
        .iter()
        .map(|t| {
            let text = serde_json::to_string(&t.transcript).expect("strings serialize");
            format!("  {{\n    \"index\": {},\n    \"transcript\": {text}\n  }},", t.index)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn keyboard_word(up: bool) -> &'static str {
    if up {
        "activated"
    } else {
        "not activated"
    }
}

pub fn render_decision_prompt(ctx: &DecisionContext, opts: &PromptOptions) -> String {
    let count = ctx.attempts_remaining.to_string();
    let transcripts = transcript_block(&ctx.transcript_items);
    let focused = ctx.focused_element_transcript.clone().unwrap_or_default();
    render(
        DECISION_TEMPLATE,
        &[
            ("direction", ctx.direction_hint.word()),
            ("count", &count),
            ("task", &ctx.task.desc),
            ("transcript_dict", &transcripts),
            ("last_element_transcript", &focused),
            ("keyboard_status_str", keyboard_word(ctx.keyboard_status)),
            ("additional_info_str", &opts.additional_info),
            ("typing_additional_str", &opts.typing_additional),
            ("action_direction", ctx.direction_hint.action_name()),
        ],
        true,
    )
    .expect("decision template slots are fixed")
}

pub fn render_reflection_prompt(ctx: &ReflectionContext) -> String {
    let transcripts = transcript_block(&ctx.transcript_after);
    render(
        REFLECTION_TEMPLATE,
        &[
            ("progress_str", &ctx.progress),
            ("keyboard_status_str_1", keyboard_word(ctx.keyboard_before)),
            ("keyboard_status_str_2", keyboard_word(ctx.keyboard_after)),
            ("transcript", &transcripts),
            ("task", &ctx.task.desc),
            ("thought", &ctx.thought),
            ("action", &ctx.action.to_json()),
        ],
        true,
    )
    .expect("reflection template slots are fixed")
}

fn stage_slots<'a>(task: &'a TaskSpecification, element: &'a str, action: &'a str, before: &'a str, after: &'a str) -> Vec<(&'static str, &'a str)> {
    vec![
        ("description", task.desc.as_str()),
        ("element", element),
        ("criterion", task.crit.as_str()),
        ("action_taken", action),
        ("transcript_before", before),
        ("transcript_after", after),
    ]
}

pub fn render_stage1_prompt(task: &TaskSpecification, action: &Action, before: &[TranscriptItem], after: &[TranscriptItem]) -> String {
    let element = format!("{} (index {})", task.elem.name, task.elem.index);
    let (action, before, after) = (action.to_json(), transcript_block(before), transcript_block(after));
    render(STAGE1_TEMPLATE, &stage_slots(task, &element, &action, &before, &after), false).expect("literal mode never fails")
}

pub fn render_stage2_prompt(
    task: &TaskSpecification,
    action: &Action,
    stage1_reasoning: &str,
    before: &[TranscriptItem],
    after: &[TranscriptItem],
) -> String {
    let element = format!("{} (index {})", task.elem.name, task.elem.index);
    let (action, before, after) = (action.to_json(), transcript_block(before), transcript_block(after));
    let mut slots = stage_slots(task, &element, &action, &before, &after);
    slots.push(("stage_1_reasoning", stage1_reasoning));
    render(STAGE2_TEMPLATE, &slots, false).expect("literal mode never fails")
}
