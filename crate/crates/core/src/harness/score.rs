//! Matching reports to ground truth and writing evaluation artifacts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::agent::TokenUsage;
use crate::analyzer::{render_markdown, reports_to_json, ErrorReport};
use crate::app_model::{ErrorCategory, GroundTruth};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_category: BTreeMap<ErrorCategory, CategoryCounts>,
    pub tasks: usize,
    pub completed_tasks: usize,
    pub task_success_rate: f64,
    pub runtime_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_usage: Option<TokenUsage>,
}

/// Precision, recall and F1; each is 0 when its denominator is 0.
pub fn metrics(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// A report is a true positive when its screen, resolved element and
/// category equal an unmatched ground-truth entry.
pub fn score(reports: &[ErrorReport], truth: &[GroundTruth]) -> EvaluationResult {
    let mut open: BTreeSet<&GroundTruth> = truth.iter().collect();
    let mut per_category: BTreeMap<ErrorCategory, CategoryCounts> =
        ErrorCategory::ALL.iter().map(|c| (*c, CategoryCounts::default())).collect();
    let (mut tp, mut fp) = (0, 0);
    for r in reports {
        let hit = r.element_id.as_ref().and_then(|id| {
            open.iter()
                .find(|g| g.screen == r.screen && &g.element == id && g.category == r.category)
                .copied()
        });
        let counts = per_category.get_mut(&r.category).expect("all categories present");
        match hit {
            Some(g) => {
                open.remove(g);
                tp += 1;
                counts.tp += 1;
            }
            None => {
                fp += 1;
                counts.fp += 1;
            }
        }
    }
    for g in &open {
        per_category.get_mut(&g.category).expect("all categories present").fn_ += 1;
    }
    let fn_ = open.len();
    let (precision, recall, f1) = metrics(tp, fp, fn_);
    EvaluationResult {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1,
        per_category,
        tasks: 0,
        completed_tasks: 0,
        task_success_rate: 0.0,
        runtime_ms: 0,
        token_usage: None,
    }
}

/// Every report must name a screen of the corpus.
pub fn check_screens(reports: &[ErrorReport], screens: &[String]) -> Result<(), HarnessError> {
    match reports.iter().find(|r| !screens.contains(&r.screen)) {
        Some(r) => Err(HarnessError::CorpusMismatch(format!("report for unknown screen {:?}", r.screen))),
        None => Ok(()),
    }
}

pub fn breakdown_table(result: &EvaluationResult) -> String {
    let mut s = String::from("| Category | TP | FP | FN | Recall |\n|---|---|---|---|---|\n");
    for (c, n) in &result.per_category {
        let (_, r, _) = metrics(n.tp, n.fp, n.fn_);
        let _ = writeln!(s, "| {c} | {} | {} | {} | {:.3} |", n.tp, n.fp, n.fn_, r);
    }
    let _ = writeln!(s, "| Total | {} | {} | {} | {:.3} |", result.tp, result.fp, result.fn_, result.recall);
    s
}

/// Markdown summary without timing, so identical runs give identical bytes.
pub fn summary_markdown(result: &EvaluationResult, reports: &[ErrorReport]) -> String {
    let mut s = String::from("# Evaluation summary\n\n");
    let _ = writeln!(s, "- Tasks: {} ({} completed, success rate {:.3})", result.tasks, result.completed_tasks, result.task_success_rate);
    let _ = writeln!(s, "- Precision: {:.3}", result.precision);
    let _ = writeln!(s, "- Recall: {:.3}", result.recall);
    let _ = writeln!(s, "- F1: {:.3}\n", result.f1);
    s.push_str("## Per category\n\n");
    s.push_str(&breakdown_table(result));
    s.push('\n');
    s.push_str(&render_markdown(reports).replacen("# ", "## ", 1));
    s
}

/// Writes `evaluation.json`, `reports.json`, `breakdown.md` and `summary.md`.
pub fn emit_report(result: &EvaluationResult, reports: &[ErrorReport], out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io { path: out_dir.to_path_buf(), source })?;
    let files = [
        ("evaluation.json", serde_json::to_string_pretty(result).expect("result serializes") + "\n"),
        ("reports.json", reports_to_json(reports) + "\n"),
        ("breakdown.md", breakdown_table(result)),
        ("summary.md", summary_markdown(result, reports)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
