//! Task execution: the decide / act / reflect loop over the screen-reader
//! proxy, producing an [`ExecutionTrace`].

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agent::{
    Action, AgentBackend, AgentError, DecisionContext, MemoryState, ReflectionContext, ReflectionVerdict, SwipeDirection,
    Verdict,
};
use crate::app_model::{reset_env, ActivationPath, AppDefinition, EnvState};
use crate::criterion::Evidence;
use crate::screenreader::{GestureRequest, GestureResult, ProxyConfig, ScreenReader, Swipe, TranscriptItem, WRAP_TOKEN};
use crate::similarity::DEFAULT_STOP_THRESHOLD;
use crate::taskgen::{stable_hash, TaskSpecification};

pub const TRACE_FORMAT: &str = "fa11y-trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    /// Swipes per exploration batch.
    pub k: u32,
    pub max_exploration_attempts: u32,
    pub max_steps: usize,
    pub loop_window: usize,
    pub stop_threshold: f64,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        ExecutorConfig { k: 20, max_exploration_attempts: 3, max_steps: 25, loop_window: 4, stop_threshold: DEFAULT_STOP_THRESHOLD }
    }
}

impl ExecutorConfig {
    pub fn exploration_budget(&self) -> u32 {
        self.k * self.max_exploration_attempts
    }

    pub fn proxy(&self) -> ScreenReader {
        ScreenReader::new(ProxyConfig { stop_threshold: self.stop_threshold, ..ProxyConfig::default() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Complete,
    Impossible,
    LoopDetected,
    StepLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTrace {
    pub progress_summary: String,
    pub thought: String,
    pub action: Action,
    pub observation: Vec<TranscriptItem>,
    pub keyboard_status: bool,
    pub reflection: ReflectionVerdict,
    /// Screen after the step, as the executor saw it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StepTrace {
    pub fn texts(&self) -> Vec<String> {
        self.observation.iter().map(|t| t.transcript.clone()).collect()
    }

    /// Last non-wrap item heard, if any.
    pub fn last_heard(&self) -> Option<&str> {
        self.observation.iter().rev().map(|t| t.transcript.as_str()).find(|t| *t != WRAP_TOKEN)
    }

    pub fn digest(&self) -> u64 {
        let texts: Vec<&[u8]> = self.observation.iter().map(|t| t.transcript.as_bytes()).collect();
        stable_hash(&texts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    #[serde(default = "trace_format")]
    pub format: String,
    pub task: TaskSpecification,
    /// Screen the task started on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<String>,
    pub steps: Vec<StepTrace>,
    pub terminal: Terminal,
    #[serde(default)]
    pub wall_time_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn trace_format() -> String {
    TRACE_FORMAT.to_string()
}

impl ExecutionTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traces always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Same trace with timing removed, for comparisons.
    pub fn canonical(&self) -> Self {
        ExecutionTrace { wall_time_ms: 0, ..self.clone() }
    }
}

fn evidence_holds(task: &TaskSpecification, texts: &[String], keyboard: bool, screen: &str) -> bool {
    task.criterion().holds(&Evidence { transcripts: texts, keyboard, screen: Some(screen) })
}

fn summarize(action: &Action, result: &GestureResult) -> String {
    let heard = result.transcripts.iter().filter(|t| !t.is_wrap()).count();
    let last = result.focused_element_transcript.as_deref().unwrap_or("nothing");
    match action {
        Action::SwipeRight(s) | Action::SwipeLeft(s) if s.stop_at.is_empty() => {
            format!("{} x{}: heard {heard} items, now on \"{last}\"", action.name(), s.repetitions)
        }
        Action::SwipeRight(s) | Action::SwipeLeft(s) => {
            format!("{} x{} toward \"{}\": heard {heard} items, now on \"{last}\"", action.name(), s.repetitions, s.stop_at)
        }
        _ if result.transcripts.is_empty() => format!("{}: no announcement", action.name()),
        _ => format!("{}: heard \"{}\"", action.name(), result.texts().join(" / ")),
    }
}

/// Applies the task's setup activations by touch, as a sighted helper would.
pub fn prepare_env(app: Arc<AppDefinition>, task: &TaskSpecification) -> EnvState {
    let mut env = reset_env(app);
    for id in task.setup_activations() {
        env.apply_activation(id, ActivationPath::Touch);
    }
    env.focus = None;
    env.pending_announcements.clear();
    env
}

struct Run<'a> {
    task: &'a TaskSpecification,
    config: &'a ExecutorConfig,
    proxy: ScreenReader,
    env: EnvState,
    memory: MemoryState,
    steps: Vec<StepTrace>,
    notes: Vec<String>,
    last: GestureResult,
}

enum Outcome {
    Continue,
    Stop(Terminal),
}

impl Run<'_> {
    fn reflect(&mut self, agent: &mut dyn AgentBackend, ctx: &ReflectionContext) -> Result<ReflectionVerdict, Terminal> {
        let mut tries = 0;
        loop {
            match agent.reflect(ctx) {
                Ok(v) => return Ok(v),
                Err(AgentError::Parse(e)) if tries == 0 => {
                    tries += 1;
                    self.notes.push(format!("step {}: reflection re-asked after: {e}", self.steps.len()));
                }
                Err(AgentError::Parse(e)) => {
                    return Ok(ReflectionVerdict { verdict: Verdict::A, thought: format!("unparseable reflection: {e}") });
                }
                Err(AgentError::Transport(e)) => {
                    self.notes.push(format!("step {}: agent transport failure: {e}", self.steps.len()));
                    return Err(Terminal::StepLimit);
                }
            }
        }
    }

    fn record(&mut self, thought: String, action: Action, result: GestureResult, reflection: ReflectionVerdict, error: Option<String>) {
        let summary = summarize(&action, &result);
        self.steps.push(StepTrace {
            progress_summary: self.memory.progress_summary.clone(),
            thought,
            action,
            observation: result.transcripts.clone(),
            keyboard_status: result.keyboard_status,
            reflection,
            screen: Some(self.env.current_screen.clone()),
            error,
        });
        self.memory.record(summary);
        self.last = result;
    }

    fn perform(&mut self, action: &Action) -> (GestureResult, Option<String>) {
        match action.gesture() {
            Some(g) => match self.proxy.perform(&mut self.env, &g) {
                Ok(r) => (r, None),
                Err(e) => (self.idle_result(), Some(e.to_string())),
            },
            None if *action == Action::Wait => (self.proxy.wait(&mut self.env), None),
            None => (self.idle_result(), None),
        }
    }

    fn idle_result(&self) -> GestureResult {
        GestureResult {
            transcripts: vec![],
            focused_element_transcript: self.proxy.focused_transcript(&self.env),
            keyboard_status: self.env.keyboard_visible,
            stopped_early: false,
        }
    }

    fn after_step(&mut self) -> Outcome {
        let step = self.steps.last().expect("a step was just recorded");
        if evidence_holds(self.task, &step.texts(), step.keyboard_status, &self.env.current_screen) {
            return Outcome::Stop(Terminal::Complete);
        }
        if detect_loop(&self.steps, self.config) {
            return Outcome::Stop(Terminal::LoopDetected);
        }
        Outcome::Continue
    }

    fn step(&mut self, agent: &mut dyn AgentBackend) -> Outcome {
        let batches = self
            .steps
            .iter()
            .filter(|s| matches!(&s.action, Action::SwipeRight(sw) if sw.repetitions >= self.config.k))
            .count() as u32;
        let ctx = DecisionContext {
            task: self.task.clone(),
            transcript_items: self.last.transcripts.clone(),
            focused_element_transcript: self.last.focused_element_transcript.clone(),
            keyboard_status: self.last.keyboard_status,
            memory: self.memory.clone(),
            direction_hint: SwipeDirection::Right,
            attempts_remaining: self.config.max_exploration_attempts.saturating_sub(batches),
        };
        let decision = match agent.decide(&ctx) {
            Err(AgentError::Parse(_)) => agent.decide(&ctx),
            other => other,
        };
        let decision = match decision {
            Ok(d) => d,
            Err(AgentError::Parse(e)) => {
                let idle = self.idle_result();
                let verdict = ReflectionVerdict { verdict: Verdict::C, thought: "no action was taken".into() };
                self.record(String::new(), Action::Wait, idle, verdict, Some(format!("malformed decision: {e}")));
                return match detect_loop(&self.steps, self.config) {
                    true => Outcome::Stop(Terminal::LoopDetected),
                    false => Outcome::Continue,
                };
            }
            Err(AgentError::Transport(e)) => {
                self.notes.push(format!("step {}: agent transport failure: {e}", self.steps.len()));
                return Outcome::Stop(Terminal::StepLimit);
            }
        };
        if decision.action.is_terminal() {
            let terminal = match decision.action {
                Action::StatusTaskComplete => Terminal::Complete,
                _ => Terminal::Impossible,
            };
            let idle = self.idle_result();
            let verdict = ReflectionVerdict { verdict: Verdict::A, thought: "task ended by the agent".into() };
            self.record(decision.thought, decision.action, idle, verdict, None);
            return Outcome::Stop(terminal);
        }
        let keyboard_before = self.env.keyboard_visible;
        let (result, error) = self.perform(&decision.action);
        let rctx = ReflectionContext {
            progress: self.memory.progress_summary.clone(),
            transcript_after: result.transcripts.clone(),
            keyboard_before,
            keyboard_after: result.keyboard_status,
            thought: decision.thought.clone(),
            action: decision.action.clone(),
            task: self.task.clone(),
        };
        let verdict = match self.reflect(agent, &rctx) {
            Ok(v) => v,
            Err(t) => return Outcome::Stop(t),
        };
        let wrong_page = verdict.verdict == Verdict::B;
        self.record(decision.thought, decision.action, result, verdict, error);
        if let Outcome::Stop(t) = self.after_step() {
            return Outcome::Stop(t);
        }
        if wrong_page && self.steps.len() < self.config.max_steps {
            let (result, error) = self.perform(&Action::PressBack);
            let verdict = ReflectionVerdict { verdict: Verdict::A, thought: "returned after landing on the wrong page".into() };
            self.record("Return to the previous page.".into(), Action::PressBack, result, verdict, error);
            return self.after_step();
        }
        Outcome::Continue
    }
}

/// Runs one task from a fresh environment until a terminal condition.
pub fn execute_task(app: Arc<AppDefinition>, task: &TaskSpecification, agent: &mut dyn AgentBackend, config: &ExecutorConfig) -> ExecutionTrace {
    let start = Instant::now();
    let env = prepare_env(app, task);
    let screen = Some(env.current_screen.clone());
    let mut run = Run {
        task,
        config,
        proxy: config.proxy(),
        last: GestureResult { keyboard_status: env.keyboard_visible, ..GestureResult::default() },
        env,
        memory: MemoryState::new(&task.desc),
        steps: Vec::new(),
        notes: Vec::new(),
    };
    let terminal = if evidence_holds(task, &[], run.env.keyboard_visible, &run.env.current_screen) {
        Terminal::Complete
    } else {
        loop {
            if run.steps.len() >= config.max_steps {
                break Terminal::StepLimit;
            }
            if let Outcome::Stop(t) = run.step(agent) {
                break t;
            }
        }
    };
    ExecutionTrace {
        format: TRACE_FORMAT.into(),
        task: task.clone(),
        screen,
        steps: run.steps,
        terminal,
        wall_time_ms: start.elapsed().as_millis() as u64,
        notes: run.notes,
    }
}

/// True iff the last `loop_window` steps hold two identical (action,
/// observation) pairs with no newly heard transcript in between.
pub fn detect_loop(steps: &[StepTrace], config: &ExecutorConfig) -> bool {
    if config.loop_window < 2 || steps.len() < 2 {
        return false;
    }
    // index at which each step first heard something new
    let mut seen: HashSet<&str> = HashSet::new();
    let fresh: Vec<bool> = steps
        .iter()
        .map(|s| {
            let mut any = false;
            for t in s.observation.iter().map(|t| t.transcript.as_str()).filter(|t| *t != WRAP_TOKEN) {
                any |= seen.insert(t);
            }
            any
        })
        .collect();
    let from = steps.len().saturating_sub(config.loop_window);
    let key = |s: &StepTrace| (s.action.to_json(), s.digest());
    let j = steps.len() - 1;
    (from..j).any(|i| key(&steps[i]) == key(&steps[j]) && !fresh[i + 1..=j].iter().any(|f| *f))
}

/// Batches of `k` exploring swipes from no focus, stopping at the first
/// batch that wraps or that `related` accepts.
pub fn initial_exploration(
    env: &mut EnvState,
    config: &ExecutorConfig,
    mut related: impl FnMut(&GestureResult) -> bool,
) -> Vec<GestureResult> {
    let proxy = config.proxy();
    let mut out = Vec::new();
    for _ in 0..config.max_exploration_attempts {
        let r = proxy
            .perform(env, &GestureRequest::SwipeRight(Swipe::explore(config.k)))
            .expect("k is within the repetition cap");
        let done = r.saw_wrap() || related(&r);
        out.push(r);
        if done {
            break;
        }
    }
    out
}

/// Re-runs a trace's actions on a fresh environment and returns what each
/// step would observe.
pub fn replay(app: Arc<AppDefinition>, trace: &ExecutionTrace, config: &ExecutorConfig) -> Vec<Vec<TranscriptItem>> {
    let mut env = prepare_env(app, &trace.task);
    let proxy = config.proxy();
    trace
        .steps
        .iter()
        .map(|s| match s.action.gesture() {
            Some(g) => proxy.perform(&mut env, &g).map(|r| r.transcripts).unwrap_or_default(),
            None if s.action == Action::Wait && s.error.is_none() => proxy.wait(&mut env).transcripts,
            None => Vec::new(),
        })
        .collect()
}
