//! Decision and reflection backends: a deterministic oracle and a remote
//! chat-completion client, plus the prompts and response parsers they share.

mod oracle;
mod parse;
mod prompts;
mod remote;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::screenreader::{GestureRequest, Swipe, TranscriptItem};
use crate::taskgen::TaskSpecification;

pub use oracle::OracleAgent;
pub use parse::{parse_decision_response, parse_reflection_response, ParseError};
pub use prompts::{
    render, render_decision_prompt, render_reflection_prompt, render_stage1_prompt, render_stage2_prompt,
    transcript_block, PromptError, PromptOptions, DECISION_TEMPLATE, REFLECTION_TEMPLATE, STAGE1_TEMPLATE,
    STAGE2_TEMPLATE,
};
pub use remote::{
    AuditEntry, RemoteAgent, RemoteClient, RemoteConfig, RemoteError, TokenUsage, Transport,
    TransportFailure, UreqTransport,
};

/// Anything the agent may ask for: a proxy gesture or a meta action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action_type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    SwipeRight(Swipe),
    SwipeLeft(Swipe),
    DoubleTap,
    PressBack,
    Type { typed_text: String },
    Wait,
    StatusTaskComplete,
    TaskImpossible,
}

impl Action {
    pub const NAMES: [&'static str; 8] = [
        "SWIPE_RIGHT",
        "SWIPE_LEFT",
        "DOUBLE_TAP",
        "PRESS_BACK",
        "TYPE",
        "WAIT",
        "STATUS_TASK_COMPLETE",
        "TASK_IMPOSSIBLE",
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Action::SwipeRight(_) => "SWIPE_RIGHT",
            Action::SwipeLeft(_) => "SWIPE_LEFT",
            Action::DoubleTap => "DOUBLE_TAP",
            Action::PressBack => "PRESS_BACK",
            Action::Type { .. } => "TYPE",
            Action::Wait => "WAIT",
            Action::StatusTaskComplete => "STATUS_TASK_COMPLETE",
            Action::TaskImpossible => "TASK_IMPOSSIBLE",
        }
    }

    /// The proxy gesture, or `None` for WAIT and the terminal meta actions.
    pub fn gesture(&self) -> Option<GestureRequest> {
        Some(match self {
            Action::SwipeRight(s) => GestureRequest::SwipeRight(s.clone()),
            Action::SwipeLeft(s) => GestureRequest::SwipeLeft(s.clone()),
            Action::DoubleTap => GestureRequest::DoubleTap,
            Action::PressBack => GestureRequest::PressBack,
            Action::Type { typed_text } => GestureRequest::Type { typed_text: typed_text.clone() },
            Action::Wait | Action::StatusTaskComplete | Action::TaskImpossible => return None,
        })
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Action::StatusTaskComplete | Action::TaskImpossible)
    }

    pub fn swipe(&self) -> Option<&Swipe> {
        match self {
            Action::SwipeRight(s) | Action::SwipeLeft(s) => Some(s),
            _ => None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("actions always serialize")
    }
}

impl From<GestureRequest> for Action {
    fn from(g: GestureRequest) -> Self {
        match g {
            GestureRequest::SwipeRight(s) => Action::SwipeRight(s),
            GestureRequest::SwipeLeft(s) => Action::SwipeLeft(s),
            GestureRequest::DoubleTap => Action::DoubleTap,
            GestureRequest::PressBack => Action::PressBack,
            GestureRequest::Type { typed_text } => Action::Type { typed_text },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub thought: String,
    pub action: Action,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    /// Met the expectation.
    A,
    /// Wrong page; go back.
    B,
    /// No change.
    C,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::A => "A",
            Verdict::B => "B",
            Verdict::C => "C",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionVerdict {
    pub verdict: Verdict,
    pub thought: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryState {
    pub goal: String,
    pub environment_notes: String,
    pub step_summaries: Vec<String>,
    pub progress_summary: String,
}

impl MemoryState {
    pub fn new(goal: &str) -> Self {
        MemoryState { goal: goal.to_string(), ..Default::default() }
    }

    pub fn record(&mut self, summary: String) {
        self.step_summaries.push(summary);
        self.progress_summary = self
            .step_summaries
            .iter()
            .enumerate()
            .map(|(i, s)| format!("Step {}: {s}", i + 1))
            .collect::<Vec<_>>()
            .join("\n");
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwipeDirection {
    Right,
    Left,
}

impl SwipeDirection {
    pub fn word(self) -> &'static str {
        match self {
            SwipeDirection::Right => "right",
            SwipeDirection::Left => "left",
        }
    }

    pub fn action_name(self) -> &'static str {
        match self {
            SwipeDirection::Right => "SWIPE_RIGHT",
            SwipeDirection::Left => "SWIPE_LEFT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionContext {
    pub task: TaskSpecification,
    pub transcript_items: Vec<TranscriptItem>,
    pub focused_element_transcript: Option<String>,
    pub keyboard_status: bool,
    pub memory: MemoryState,
    pub direction_hint: SwipeDirection,
    pub attempts_remaining: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReflectionContext {
    pub progress: String,
    pub transcript_after: Vec<TranscriptItem>,
    pub keyboard_before: bool,
    pub keyboard_after: bool,
    pub thought: String,
    pub action: Action,
    pub task: TaskSpecification,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("malformed agent response: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Transport(#[from] RemoteError),
}

/// A Decision/Reflection provider. One instance serves one task run.
pub trait AgentBackend {
    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, AgentError>;
    fn reflect(&mut self, ctx: &ReflectionContext) -> Result<ReflectionVerdict, AgentError>;
}

impl<T: AgentBackend + ?Sized> AgentBackend for Box<T> {
    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, AgentError> {
        (**self).decide(ctx)
    }

    fn reflect(&mut self, ctx: &ReflectionContext) -> Result<ReflectionVerdict, AgentError> {
        (**self).reflect(ctx)
    }
}
