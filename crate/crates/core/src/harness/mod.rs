//! Corpus synthesis, end-to-end runs and scoring against injected faults.

mod run;
mod score;
mod synth;

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::RemoteError;
use crate::app_model::{AppError, ErrorCategory};
use crate::taskgen::TaskGenError;

pub use run::{run_corpus, Backend, RunConfig, RunOutput, TaskRun};
pub use score::{
    breakdown_table, check_screens, emit_report, metrics, score, summary_markdown, CategoryCounts, EvaluationResult,
};
pub use synth::{analyzed_ground_truth, load_corpus, synth_corpus, write_corpus, CorpusManifest, CorpusSpec, TEMPLATE_KEYS};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("fault plan infeasible: {0}")]
    Infeasible(String),
    #[error("bad fault plan {0:?}: expected five comma-separated counts")]
    BadPlan(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    App(#[from] AppError),
    #[error(transparent)]
    TaskGen(#[from] TaskGenError),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("corpus mismatch: {0}")]
    CorpusMismatch(String),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// Number of faults to inject per category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub locatability: usize,
    pub actionability: usize,
    pub label: usize,
    pub feedback: usize,
    pub navigation: usize,
}

impl FaultPlan {
    pub fn count(&self, c: ErrorCategory) -> usize {
        match c {
            ErrorCategory::Locatability => self.locatability,
            ErrorCategory::Actionability => self.actionability,
            ErrorCategory::Label => self.label,
            ErrorCategory::Feedback => self.feedback,
            ErrorCategory::Navigation => self.navigation,
        }
    }

    pub fn total(&self) -> usize {
        ErrorCategory::ALL.iter().map(|c| self.count(*c)).sum()
    }
}

impl FromStr for FaultPlan {
    type Err = HarnessError;

    /// Locatability, Actionability, Label, Feedback, Navigation.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Result<Vec<usize>, _> = s.split(',').map(|p| p.trim().parse::<usize>()).collect();
        match parts.as_deref() {
            Ok(&[locatability, actionability, label, feedback, navigation]) => {
                Ok(FaultPlan { locatability, actionability, label, feedback, navigation })
            }
            _ => Err(HarnessError::BadPlan(s.to_string())),
        }
    }
}
