//! Two-stage trace analysis: per-step outcome assessment, then root-cause
//! classification of failed steps into the five error categories.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agent::{render_stage1_prompt, render_stage2_prompt, Action, RemoteClient, RemoteError};
use crate::app_model::ErrorCategory;
use crate::criterion::Evidence;
use crate::executor::{ExecutionTrace, StepTrace};
use crate::screenreader::{TranscriptItem, WRAP_TOKEN};
use crate::similarity::{token_overlap, transcript_similarity, DEFAULT_STOP_THRESHOLD};
use crate::taskgen::TaskSpecification;

pub const REPORT_FORMAT: &str = "fa11y-report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskStatus {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeAssessment {
    pub overall_task_status: TaskStatus,
    pub task_status_reasoning: String,
    pub immediate_action_status: ActionStatus,
    pub action_status_reasoning: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RootCauseReport {
    pub thought: String,
    pub problematic_element: String,
    pub element_index: i64,
    pub explanation: String,
    #[serde(default)]
    pub category: Option<ErrorCategory>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskEvidence {
    pub task_desc: String,
    pub evidence: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub screen: String,
    pub element: String,
    pub category: ErrorCategory,
    /// Indices of the failing steps.
    pub evidence: Vec<usize>,
    pub task_desc: String,
    /// Further tasks that surfaced the same finding.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub merged: Vec<TaskEvidence>,
    /// Resolved app element, when the caller knows it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub element_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub label_threshold: f64,
    pub stop_threshold: f64,
    /// Elements an exploration may visit before the target counts as unreachable.
    pub exploration_budget: usize,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig { label_threshold: 0.3, stop_threshold: DEFAULT_STOP_THRESHOLD, exploration_budget: 60 }
    }
}

#[derive(Debug, Error)]
pub enum AnalyzerError {
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("stage output is not the expected JSON object: {0}")]
    Format(String),
}

fn spoken(step: &StepTrace) -> Vec<&str> {
    step.observation.iter().map(|t| t.transcript.as_str()).filter(|t| *t != WRAP_TOKEN).collect()
}

fn saw_wrap(step: &StepTrace) -> bool {
    step.observation.iter().any(TranscriptItem::is_wrap)
}

/// Label part of a composed transcript.
fn label_of(transcript: &str) -> &str {
    transcript.split(", ").next().unwrap_or(transcript)
}

fn is_input_transcript(t: &str) -> bool {
    let l = t.to_lowercase();
    ["edit box", "text field", "edit text"].iter().any(|k| l.contains(k))
}

/// What was focused before `i`: the last item heard by an earlier step.
fn focused_before(steps: &[StepTrace], i: usize) -> Option<&str> {
    steps[..i].iter().rev().find_map(|s| s.last_heard())
}

fn assessment(complete: bool, task_reason: String, ok: bool, action_reason: impl Into<String>) -> OutcomeAssessment {
    OutcomeAssessment {
        overall_task_status: if complete { TaskStatus::Complete } else { TaskStatus::Incomplete },
        task_status_reasoning: task_reason,
        immediate_action_status: if ok { ActionStatus::Success } else { ActionStatus::Failure },
        action_status_reasoning: action_reason.into(),
    }
}

/// Stage 1 for step `i` of `steps`.
pub fn assess_step(steps: &[StepTrace], i: usize, task: &TaskSpecification, cfg: &AnalyzerConfig) -> OutcomeAssessment {
    let step = &steps[i];
    let crit = task.criterion();
    let texts = step.texts();
    let complete = crit.holds(&Evidence { transcripts: &texts, keyboard: step.keyboard_status, screen: step.screen.as_deref() });
    let mut task_reason = if complete {
        format!("The success criterion {} holds after this step.", task.crit)
    } else {
        format!("The success criterion {} is not yet met.", task.crit)
    };
    if crit.is_free_text() {
        task_reason.push_str(" (criterion is free text; judged by keyword match)");
    }
    let heard = spoken(step);
    let verdict = |ok, why: String| assessment(complete, task_reason.clone(), ok, why);
    if let Some(e) = &step.error {
        return verdict(false, format!("The action was not carried out: {e}."));
    }
    match &step.action {
        Action::SwipeRight(s) | Action::SwipeLeft(s) => {
            if heard.is_empty() {
                return verdict(false, "The swipe produced no announcement.".into());
            }
            if i > 0 && steps[i - 1].observation == step.observation {
                return verdict(false, "The transcript did not change.".into());
            }
            if !s.stop_at.is_empty() {
                let last = step.last_heard().unwrap_or("");
                if transcript_similarity(last, &s.stop_at) < cfg.stop_threshold {
                    return verdict(false, format!("The swipe never reached \"{}\".", s.stop_at));
                }
            }
            verdict(true, "The swipe moved focus to new elements.".into())
        }
        Action::DoubleTap => {
            let before = focused_before(steps, i);
            if before.is_some_and(is_input_transcript) {
                if step.keyboard_status {
                    verdict(true, "The keyboard appeared after tapping the text field.".into())
                } else {
                    verdict(false, "Tapping the text field did not bring up the keyboard.".into())
                }
            } else if heard.is_empty() {
                verdict(false, "The double-tap produced no feedback.".into())
            } else {
                verdict(true, "The double-tap produced new announcements.".into())
            }
        }
        Action::Type { typed_text } => {
            let needle = typed_text.to_lowercase();
            if needle.is_empty() || heard.iter().any(|t| t.to_lowercase().contains(&needle)) {
                verdict(true, "The typed text was announced.".into())
            } else {
                verdict(false, "The typed text was not announced.".into())
            }
        }
        Action::PressBack | Action::Wait | Action::StatusTaskComplete | Action::TaskImpossible => {
            verdict(true, "No outcome is expected from this action.".into())
        }
    }
}

fn target_heard(trace: &ExecutionTrace, cfg: &AnalyzerConfig) -> bool {
    let name = trace.task.elem.name.as_str();
    trace.steps.iter().any(|s| {
        let stop = s.action.swipe().map(|sw| sw.stop_at.as_str()).filter(|x| !x.is_empty());
        spoken(s).iter().any(|t| {
            transcript_similarity(label_of(t), name) >= cfg.stop_threshold
                || stop.is_some_and(|stop| transcript_similarity(t, stop) >= cfg.stop_threshold)
        })
    })
}

fn has_cycle_without_wrap(step: &StepTrace) -> bool {
    if saw_wrap(step) {
        return false;
    }
    let heard = spoken(step);
    let mut seen = std::collections::HashSet::new();
    heard.iter().any(|t| !seen.insert(*t))
}

/// Stage 2 for a failed step `i`. `complete_at` is the first COMPLETE step.
pub fn classify_root_cause(trace: &ExecutionTrace, i: usize, complete_at: Option<usize>, cfg: &AnalyzerConfig) -> RootCauseReport {
    let steps = &trace.steps;
    let step = &steps[i];
    let task = &trace.task;
    let index = task.elem.index as i64;
    let report = |category: Option<ErrorCategory>, element: &str, thought: String, explanation: String| RootCauseReport {
        thought,
        problematic_element: if element.is_empty() { "N/A".into() } else { element.to_string() },
        element_index: index,
        explanation,
        category,
    };
    let none = |why: &str| report(None, "", format!("Intended {}; {why}", step.action.name()), format!("No accessibility error: {why}"));
    if let Some(e) = &step.error {
        return none(&format!("the agent's action could not be executed ({e})"));
    }
    let later_complete = complete_at.is_some_and(|c| c > i);
    let later = &steps[i + 1..];
    match &step.action {
        Action::DoubleTap => {
            let focused = focused_before(steps, i).unwrap_or("");
            let label = label_of(focused);
            let heard_now = spoken(step);
            if !heard_now.is_empty() {
                return if later_complete { none("the element responded and the task later completed") } else {
                    report(
                        Some(ErrorCategory::Actionability),
                        label,
                        format!("Double-tapped \"{focused}\"; it spoke but did not do what the task needs."),
                        "The element does not perform its action when activated with the screen reader.".into(),
                    )
                };
            }
            let reheard_same = later.iter().any(|s| spoken(s).contains(&focused));
            let reheard_changed = later
                .iter()
                .any(|s| spoken(s).iter().any(|t| label_of(t) == label && *t != focused));
            let anything_later = later.iter().any(|s| !spoken(s).is_empty());
            let feedback = later_complete || (!reheard_same && (reheard_changed || anything_later));
            if feedback {
                report(
                    Some(ErrorCategory::Feedback),
                    label,
                    format!("Double-tapped \"{focused}\" and heard nothing, yet the app state changed afterwards."),
                    "The action took effect without any spoken confirmation, so a screen reader user gets no feedback.".into(),
                )
            } else {
                report(
                    Some(ErrorCategory::Actionability),
                    label,
                    format!("Double-tapped \"{focused}\"; nothing was announced and re-reading it shows no change."),
                    "The element failed to respond to a double-tap activation.".into(),
                )
            }
        }
        Action::SwipeRight(s) | Action::SwipeLeft(s) => {
            if spoken(step).is_empty() || s.stop_at.is_empty() {
                return none("the exploration itself was uneventful");
            }
            if later_complete {
                let c = complete_at.expect("later_complete");
                let tap = (i + 1..=c).rev().find(|&j| steps[j].action == Action::DoubleTap);
                let activated = tap.and_then(|j| focused_before(steps, j)).unwrap_or("");
                let label = label_of(activated);
                if token_overlap(label, &task.elem.name) < cfg.label_threshold {
                    return report(
                        Some(ErrorCategory::Label),
                        label,
                        format!("Looked for \"{}\" but the working element announces itself as \"{activated}\".", task.elem.name),
                        format!("The element's spoken label \"{label}\" does not describe its purpose \"{}\".", task.elem.name),
                    );
                }
                // a target heard inside the failing batch was missed by name, not by distance
                if !saw_wrap(step) && !spoken(step).contains(&activated) {
                    return report(
                        Some(ErrorCategory::Navigation),
                        &task.elem.name,
                        format!("A full batch of swipes did not reach \"{}\".", s.stop_at),
                        "The element is buried behind many focus stops, making it tedious to reach by swiping.".into(),
                    );
                }
                return none("the element was reachable within the explored range");
            }
            if target_heard(trace, cfg) {
                return none("the target was heard but the task did not complete");
            }
            if steps.iter().any(saw_wrap) {
                return report(
                    Some(ErrorCategory::Locatability),
                    &task.elem.name,
                    format!("A full traversal of the screen never announced \"{}\".", task.elem.name),
                    "The element cannot be focused with the screen reader.".into(),
                );
            }
            let swipes = steps.iter().filter(|s| s.action.swipe().is_some());
            let explored: usize = swipes.clone().map(|s| spoken(s).len()).sum();
            if has_cycle_without_wrap(step) && (explored >= cfg.exploration_budget || swipes.count() > 1) {
                return report(
                    Some(ErrorCategory::Navigation),
                    &task.elem.name,
                    "Swiping kept repeating the same transcripts without reaching the end of the screen.".into(),
                    "Focus is trapped or cluttered so the target can never be reached.".into(),
                );
            }
            none("the target was never reached, but the screen was not fully explored")
        }
        Action::Type { .. } if step.keyboard_status => report(
            Some(ErrorCategory::Feedback),
            label_of(focused_before(steps, i).unwrap_or("")),
            "Typed into the field but nothing was echoed.".into(),
            "Typed text is not announced.".into(),
        ),
        _ => none("the failure is attributable to the agent rather than the app"),
    }
}

/// Assesses every step, classifies failures, and returns one report per
/// categorized failing step.
pub fn analyze_trace(trace: &ExecutionTrace, cfg: &AnalyzerConfig) -> Vec<ErrorReport> {
    analyze_detailed(trace, cfg).reports
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAnalysis {
    pub step: usize,
    pub assessment: OutcomeAssessment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_cause: Option<RootCauseReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceAnalysis {
    pub steps: Vec<StepAnalysis>,
    pub reports: Vec<ErrorReport>,
}

pub fn analyze_detailed(trace: &ExecutionTrace, cfg: &AnalyzerConfig) -> TraceAnalysis {
    let n = trace.steps.len();
    let assessments: Vec<OutcomeAssessment> = (0..n).map(|i| assess_step(&trace.steps, i, &trace.task, cfg)).collect();
    let complete_at = assessments.iter().position(|a| a.overall_task_status == TaskStatus::Complete);
    let last = complete_at.unwrap_or(n.saturating_sub(1));
    let mut steps = Vec::new();
    let mut reports = Vec::new();
    for (i, a) in assessments.into_iter().enumerate().take(last + 1) {
        let root_cause = (a.immediate_action_status == ActionStatus::Failure).then(|| classify_root_cause(trace, i, complete_at, cfg));
        if let Some(category) = root_cause.as_ref().and_then(|r| r.category) {
            reports.push(ErrorReport {
                screen: trace.screen.clone().unwrap_or_default(),
                element: trace.task.elem.name.clone(),
                category,
                evidence: vec![i],
                task_desc: trace.task.desc.clone(),
                merged: vec![],
                element_id: None,
            });
        }
        steps.push(StepAnalysis { step: i, assessment: a, root_cause });
    }
    TraceAnalysis { steps, reports: aggregate_reports(reports) }
}

/// Deduplicates by (screen, element, category), merging evidence, keeping
/// first-seen order.
pub fn aggregate_reports(reports: Vec<ErrorReport>) -> Vec<ErrorReport> {
    let mut out: Vec<ErrorReport> = Vec::new();
    for r in reports {
        let existing = out
            .iter_mut()
            .find(|o| o.screen == r.screen && o.element == r.element && o.category == r.category);
        let Some(o) = existing else {
            out.push(r);
            continue;
        };
        if o.element_id.is_none() {
            o.element_id = r.element_id.clone();
        }
        let mut groups = vec![TaskEvidence { task_desc: r.task_desc, evidence: r.evidence }];
        groups.extend(r.merged);
        for g in groups {
            if g.task_desc == o.task_desc {
                o.evidence.extend(g.evidence);
                o.evidence.sort_unstable();
                o.evidence.dedup();
            } else if let Some(m) = o.merged.iter_mut().find(|m| m.task_desc == g.task_desc) {
                m.evidence.extend(g.evidence);
                m.evidence.sort_unstable();
                m.evidence.dedup();
            } else {
                o.merged.push(g);
            }
        }
    }
    out
}

pub fn reports_to_json(reports: &[ErrorReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports always serialize")
}

pub fn render_markdown(reports: &[ErrorReport]) -> String {
    let mut s = String::from("# Accessibility findings\n\n");
    if reports.is_empty() {
        s.push_str("No accessibility errors detected.\n");
        return s;
    }
    s.push_str("| Screen | Element | Category | Evidence steps | Task |\n|---|---|---|---|---|\n");
    for r in reports {
        let steps: Vec<String> = r.evidence.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "| {} | {} | {} | {} | {} |", r.screen, r.element.replace('|', "\\|"), r.category, steps.join(", "), r.task_desc.replace('|', "\\|"));
    }
    s
}

fn first_json_object(raw: &str) -> Result<Value, AnalyzerError> {
    let start = raw.find('{').ok_or_else(|| AnalyzerError::Format("no JSON object".into()))?;
    let end = raw.rfind('}').ok_or_else(|| AnalyzerError::Format("no JSON object".into()))?;
    if end < start {
        return Err(AnalyzerError::Format("no JSON object".into()));
    }
    serde_json::from_str(&raw[start..=end]).map_err(|e| AnalyzerError::Format(e.to_string()))
}

pub fn parse_stage1(raw: &str) -> Result<OutcomeAssessment, AnalyzerError> {
    let v = first_json_object(raw)?;
    let field = |k: &str| v.get(k).and_then(Value::as_str).unwrap_or("").trim().to_uppercase();
    let text = |k: &str| v.get(k).and_then(Value::as_str).unwrap_or("").to_string();
    let complete = match field("overall_task_status").as_str() {
        "COMPLETE" => true,
        "INCOMPLETE" => false,
        other => return Err(AnalyzerError::Format(format!("overall_task_status {other:?}"))),
    };
    let ok = match field("immediate_action_status").as_str() {
        "SUCCESS" => true,
        "FAILURE" => false,
        other => return Err(AnalyzerError::Format(format!("immediate_action_status {other:?}"))),
    };
    Ok(assessment(complete, text("task_status_reasoning"), ok, text("action_status_reasoning")))
}

/// Category from an explicit field, else from keywords in the explanation.
fn category_of(v: &Value) -> Option<ErrorCategory> {
    if let Some(c) = v.get("category").and_then(Value::as_str) {
        return ErrorCategory::from_name(c);
    }
    let text = format!(
        "{} {}",
        v.get("explanation").and_then(Value::as_str).unwrap_or(""),
        v.get("thought").and_then(Value::as_str).unwrap_or("")
    )
    .to_lowercase();
    if text.contains("no accessibility error") {
        return None;
    }
    let keys: [(&str, ErrorCategory); 5] = [
        ("locatab", ErrorCategory::Locatability),
        ("actionab", ErrorCategory::Actionability),
        ("label", ErrorCategory::Label),
        ("feedback", ErrorCategory::Feedback),
        ("navigat", ErrorCategory::Navigation),
    ];
    keys.iter().find(|(k, _)| text.contains(k)).map(|(_, c)| *c)
}

pub fn parse_stage2(raw: &str) -> Result<RootCauseReport, AnalyzerError> {
    let v = first_json_object(raw)?;
    let text = |k: &str| v.get(k).and_then(Value::as_str).unwrap_or("").to_string();
    let element_index = match v.get("element_index") {
        Some(Value::Number(n)) => n.as_i64().unwrap_or(-1),
        Some(Value::String(s)) => s.trim().parse().unwrap_or(-1),
        _ => -1,
    };
    let problematic = text("problematic_element");
    let category = if problematic.eq_ignore_ascii_case("N/A") { None } else { category_of(&v) };
    Ok(RootCauseReport {
        thought: text("thought"),
        problematic_element: if problematic.is_empty() { "N/A".into() } else { problematic },
        element_index,
        explanation: text("explanation"),
        category,
    })
}

/// Both stages through a remote model using the analyzer prompts.
pub fn analyze_trace_remote(trace: &ExecutionTrace, client: &RemoteClient) -> Result<TraceAnalysis, AnalyzerError> {
    let mut steps = Vec::new();
    let mut reports = Vec::new();
    let empty: Vec<TranscriptItem> = Vec::new();
    for (i, step) in trace.steps.iter().enumerate() {
        let before = if i == 0 { &empty } else { &trace.steps[i - 1].observation };
        let a = parse_stage1(&client.invoke(&render_stage1_prompt(&trace.task, &step.action, before, &step.observation))?)?;
        let root_cause = if a.immediate_action_status == ActionStatus::Failure {
            let prompt = render_stage2_prompt(&trace.task, &step.action, &a.action_status_reasoning, before, &step.observation);
            Some(parse_stage2(&client.invoke(&prompt)?)?)
        } else {
            None
        };
        if let Some(category) = root_cause.as_ref().and_then(|r| r.category) {
            reports.push(ErrorReport {
                screen: trace.screen.clone().unwrap_or_default(),
                element: trace.task.elem.name.clone(),
                category,
                evidence: vec![i],
                task_desc: trace.task.desc.clone(),
                merged: vec![],
                element_id: None,
            });
        }
        let done = a.overall_task_status == TaskStatus::Complete;
        steps.push(StepAnalysis { step: i, assessment: a, root_cause });
        if done {
            break;
        }
    }
    Ok(TraceAnalysis { steps, reports: aggregate_reports(reports) })
}
