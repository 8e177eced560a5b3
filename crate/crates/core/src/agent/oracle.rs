//! Deterministic ground-truth-aware agent.
//!
//! The oracle sees only what a screen-reader user hears. It keeps a
//! perceived ring of transcripts in swipe order and plans moves over it.
//! Ground truth is used for one thing: knowing which heard transcript is
//! the task's target.

use std::collections::VecDeque;
use std::sync::Arc;

use super::{
    Action, AgentBackend, AgentError, Decision, DecisionContext, ReflectionContext, ReflectionVerdict, Verdict,
};
use crate::app_model::{ActivationEffect, AppDefinition, ElementId, Role, UiElement};
use crate::criterion::{Criterion, Evidence};
use crate::screenreader::{compose_with_state, Swipe, WRAP_TOKEN};
use crate::similarity::token_overlap;
use crate::taskgen::{true_name, TaskSpecification};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Seek,
    Activate,
    AfterTap,
    Verify,
    Typed,
    Done,
}

#[derive(Debug, Clone)]
pub struct OracleAgent {
    app: Arc<AppDefinition>,
    target: Option<UiElement>,
    k: u32,
    attempts: u32,
    phase: Phase,
    ring: Vec<String>,
    ring_len: Option<usize>,
    cursor: Option<usize>,
    /// Ring positions are only meaningful when perception began from no focus.
    anchored: bool,
    batches: u32,
    navigations: u32,
    silent_taps: u32,
    verified: bool,
    queue: VecDeque<Action>,
    last: Option<Action>,
}

impl OracleAgent {
    pub fn new(app: Arc<AppDefinition>, target: Option<&str>, k: u32, attempts: u32) -> Self {
        let target = target.and_then(|id| find_element(&app, id)).cloned();
        OracleAgent {
            app,
            target,
            k,
            attempts,
            phase: Phase::Seek,
            ring: Vec::new(),
            ring_len: None,
            cursor: None,
            anchored: true,
            batches: 0,
            navigations: 0,
            silent_taps: 0,
            verified: false,
            queue: VecDeque::new(),
            last: None,
        }
    }

    /// Best guess at which initial-screen element a task names, by visual name.
    pub fn resolve_target(app: &AppDefinition, task: &TaskSpecification) -> Option<ElementId> {
        let screen = app.screen(&app.initial_screen)?;
        let name = task.elem.name.trim();
        let exact = screen.elements.iter().find(|e| true_name(e).eq_ignore_ascii_case(name));
        if let Some(e) = exact {
            return Some(e.id.clone());
        }
        screen
            .elements
            .iter()
            .map(|e| (token_overlap(&true_name(e), name), e))
            .filter(|(s, _)| *s >= 0.5)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, e)| e.id.clone())
    }

    fn actual_transcript(&self) -> Option<String> {
        self.target.as_ref().map(|t| {
            compose_with_state(t, t.a11y.as_ref().and_then(|a| a.state_announcement.as_deref()))
        })
    }

    /// What the task's name predicts the target will sound like.
    fn expected_transcript(&self, task: &TaskSpecification) -> String {
        match &self.target {
            Some(t) if t.a11y.is_some() => {
                let mut named = t.clone();
                if let Some(a) = named.a11y.as_mut() {
                    a.label = task.elem.name.clone();
                }
                compose_with_state(&named, t.a11y.as_ref().and_then(|a| a.state_announcement.as_deref()))
            }
            _ => task.elem.name.clone(),
        }
    }

    fn forget(&mut self) {
        self.ring.clear();
        self.ring_len = None;
        self.cursor = None;
        self.anchored = true;
    }

    fn place(&mut self, pos: usize, heard: &str) {
        if pos == self.ring.len() {
            self.ring.push(heard.to_string());
        } else if pos < self.ring.len() {
            self.ring[pos] = heard.to_string();
        }
        self.cursor = Some(pos);
    }

    fn perceive(&mut self, ctx: &DecisionContext) {
        let items: Vec<&str> = ctx.transcript_items.iter().map(|t| t.transcript.as_str()).collect();
        match self.last.clone() {
            Some(Action::SwipeRight(_)) => {
                let mut after_wrap = false;
                for t in items {
                    if t == WRAP_TOKEN {
                        if self.ring_len.is_none() && self.anchored {
                            self.ring_len = self.cursor.map(|c| c + 1);
                        }
                        after_wrap = true;
                        continue;
                    }
                    let next = match (self.cursor, after_wrap) {
                        (_, true) | (None, _) => 0,
                        (Some(c), false) => match self.ring_len {
                            Some(n) => (c + 1) % n,
                            None => c + 1,
                        },
                    };
                    after_wrap = false;
                    self.place(next, t);
                }
            }
            Some(Action::SwipeLeft(_)) => {
                let mut after_wrap = self.cursor.is_none();
                for t in items {
                    if t == WRAP_TOKEN {
                        after_wrap = true;
                        continue;
                    }
                    let next = match (self.cursor, after_wrap, self.ring_len) {
                        (_, true, Some(n)) => Some(n - 1),
                        (_, true, None) => None,
                        (Some(c), false, _) if c > 0 => Some(c - 1),
                        _ => None,
                    };
                    after_wrap = false;
                    match next {
                        Some(p) => self.place(p, t),
                        None => {
                            // position unknown: start a fresh, unanchored ring
                            self.forget();
                            self.anchored = false;
                            self.ring.push(t.to_string());
                            self.cursor = Some(0);
                        }
                    }
                }
            }
            Some(Action::DoubleTap) | Some(Action::PressBack) => {
                let keyboard_only = ctx.keyboard_status && self.is_input();
                if !keyboard_only {
                    self.forget();
                }
            }
            _ => {}
        }
    }

    fn is_input(&self) -> bool {
        self.target.as_ref().is_some_and(|t| t.role == Role::TextInput)
    }

    fn target_position(&self, transcript: &str) -> Option<usize> {
        // prefer the target's true reading position when it matches what was heard
        let truth = self.target.as_ref().and_then(|t| linear_index(&self.app, &t.id));
        match truth {
            Some(i) if self.anchored && self.ring.get(i).map(String::as_str) == Some(transcript) => Some(i),
            _ => self.ring.iter().position(|t| t == transcript),
        }
    }

    /// Shortest perceived move from the cursor to `p`.
    fn move_to(&self, p: usize, transcript: &str) -> Action {
        let c = self.cursor.unwrap_or(0);
        let hits = |positions: &mut dyn Iterator<Item = usize>| {
            positions.filter(|q| self.ring.get(*q).map(String::as_str) == Some(transcript)).count() as u32
        };
        let (right, reps) = match self.ring_len {
            Some(n) => {
                let r = (p + n - c) % n;
                let l = (c + n - p) % n;
                if r <= l {
                    (true, r)
                } else {
                    (false, l)
                }
            }
            None if p > c => (true, p - c),
            None => (false, c - p),
        };
        let occ = match (self.ring_len, right) {
            (Some(n), true) => hits(&mut (1..=reps).map(|d| (c + d) % n)),
            (Some(n), false) => hits(&mut (1..=reps).map(|d| (c + n - d) % n)),
            (None, true) => hits(&mut (1..=reps).map(|d| c + d)),
            (None, false) => hits(&mut (1..=reps).filter_map(|d| c.checked_sub(d))),
        };
        let swipe = Swipe::to(reps as u32, transcript, occ.max(1));
        if right {
            Action::SwipeRight(swipe)
        } else {
            Action::SwipeLeft(swipe)
        }
    }

    fn seek(&mut self, ctx: &DecisionContext) -> (Action, String) {
        let actual = self.actual_transcript();
        if let Some(a) = &actual {
            if self.cursor.and_then(|c| self.ring.get(c)) == Some(a) {
                self.phase = Phase::Activate;
                return self.activate(ctx);
            }
            if let Some(p) = self.target_position(a) {
                if self.navigations < 2 && Some(p) != self.cursor {
                    self.navigations += 1;
                    return (self.move_to(p, a), format!("The target \"{a}\" was heard earlier; move focus back to it."));
                }
            }
        }
        if self.ring_len.is_some() {
            return (Action::TaskImpossible, "Every element on the screen was heard and none matches the task.".into());
        }
        if self.batches < self.attempts {
            self.batches += 1;
            let stop = self.expected_transcript(&ctx.task);
            return (
                Action::SwipeRight(Swipe::to(self.k, stop.clone(), 1)),
                format!("Explore by swiping right until \"{stop}\" is focused."),
            );
        }
        (Action::TaskImpossible, "The exploration budget is used up without finding the target.".into())
    }

    fn activate(&mut self, ctx: &DecisionContext) -> (Action, String) {
        if self.is_input() && ctx.keyboard_status {
            let id = self.target.as_ref().map(|t| t.id.clone()).unwrap_or_default();
            let value = Criterion::parse_lenient(&ctx.task.crit)
                .expected_state(&id)
                .map(str::to_string)
                .unwrap_or_default();
            self.phase = Phase::Typed;
            return (Action::Type { typed_text: value.clone() }, format!("Type \"{value}\" into the focused field."));
        }
        self.phase = Phase::AfterTap;
        (Action::DoubleTap, "The target is focused; activate it.".into())
    }

    fn verify(&mut self) -> (Action, String) {
        self.verified = true;
        self.phase = Phase::Verify;
        self.queue.push_back(Action::SwipeRight(Swipe::explore(1)));
        (Action::SwipeLeft(Swipe::explore(1)), "Nothing conclusive was announced; step away and back to re-read the element.".into())
    }

    fn plan(&mut self, ctx: &DecisionContext) -> (Action, String) {
        let spoken: Vec<&str> = ctx
            .transcript_items
            .iter()
            .map(|t| t.transcript.as_str())
            .filter(|t| *t != WRAP_TOKEN)
            .collect();
        match self.phase {
            Phase::Done => (Action::TaskImpossible, "Nothing left to try.".into()),
            Phase::Seek => self.seek(ctx),
            Phase::Activate => self.activate(ctx),
            Phase::AfterTap if self.is_input() && ctx.keyboard_status => self.activate(ctx),
            Phase::AfterTap if spoken.is_empty() => {
                self.silent_taps += 1;
                if self.silent_taps == 1 {
                    self.verify()
                } else {
                    (Action::TaskImpossible, "Activation produces no response.".into())
                }
            }
            Phase::AfterTap if !self.verified => self.verify(),
            Phase::AfterTap | Phase::Typed => (Action::TaskImpossible, "The expected outcome never appeared.".into()),
            Phase::Verify => {
                let unchanged = self.actual_transcript().is_some() && ctx.focused_element_transcript == self.actual_transcript();
                if unchanged && self.silent_taps == 1 {
                    self.phase = Phase::Activate;
                    self.activate(ctx)
                } else {
                    (Action::TaskImpossible, "Re-reading the element shows the task cannot be finished.".into())
                }
            }
        }
    }
}

fn find_in<'a>(elements: &'a [UiElement], id: &str) -> Option<&'a UiElement> {
    elements.iter().find_map(|e| {
        if e.id == id {
            return Some(e);
        }
        match &e.on_activate {
            Some(ActivationEffect::OpenOverlay { elements, .. }) => find_in(elements, id),
            _ => None,
        }
    })
}

fn find_element<'a>(app: &'a AppDefinition, id: &str) -> Option<&'a UiElement> {
    let initial = app.screen(&app.initial_screen)?;
    find_in(&initial.elements, id).or_else(|| app.screens.iter().find_map(|s| find_in(&s.elements, id)))
}

fn linear_index(app: &AppDefinition, id: &str) -> Option<usize> {
    let screen = app.screen(&app.initial_screen)?;
    screen.elements.iter().filter(|e| e.is_focusable()).position(|e| e.id == id)
}

impl AgentBackend for OracleAgent {
    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, AgentError> {
        self.perceive(ctx);
        let texts: Vec<String> = ctx.transcript_items.iter().map(|t| t.transcript.clone()).collect();
        let ev = Evidence { transcripts: &texts, keyboard: ctx.keyboard_status, screen: None };
        let (action, thought) = if !texts.is_empty() && ctx.task.criterion().holds(&ev) {
            (Action::StatusTaskComplete, "The success criterion is met by the last transcript.".to_string())
        } else if let Some(a) = self.queue.pop_front() {
            (a, "Continue re-reading the element.".to_string())
        } else {
            self.plan(ctx)
        };
        if action.is_terminal() {
            self.phase = Phase::Done;
        }
        self.last = Some(action.clone());
        let description = format!("{} toward: {}", action.name(), ctx.task.desc);
        Ok(Decision { thought, action, description })
    }

    fn reflect(&mut self, ctx: &ReflectionContext) -> Result<ReflectionVerdict, AgentError> {
        let spoken: Vec<&str> = ctx
            .transcript_after
            .iter()
            .map(|t| t.transcript.as_str())
            .filter(|t| *t != WRAP_TOKEN)
            .collect();
        if spoken.is_empty() && ctx.keyboard_after == ctx.keyboard_before {
            return Ok(ReflectionVerdict { verdict: Verdict::C, thought: "The action produced no change.".into() });
        }
        if ctx.action == Action::DoubleTap {
            let expected = match self.target.as_ref().and_then(|t| t.on_activate.as_ref()) {
                Some(ActivationEffect::Navigate { target }) => Some(target.as_str()),
                _ => None,
            };
            let wrong = self.app.screens.iter().any(|s| {
                Some(s.id.as_str()) != expected
                    && s.title_announcement.as_deref().is_some_and(|title| spoken.iter().any(|t| *t == title.trim()))
                    && expected.is_some()
            });
            if wrong {
                return Ok(ReflectionVerdict { verdict: Verdict::B, thought: "A different screen than intended opened.".into() });
            }
        }
        Ok(ReflectionVerdict { verdict: Verdict::A, thought: "The action had the expected effect.".into() })
    }
}
