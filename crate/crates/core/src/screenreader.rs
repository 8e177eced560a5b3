//! Screen-reader proxy: linear focus navigation, activation, back and typing
//! over an [`EnvState`], reporting what would be spoken.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_model::{ActivationPath, ElementId, EnvState, Focus, Role, UiElement};
use crate::similarity::{transcript_similarity, DEFAULT_STOP_THRESHOLD};

/// Transcript item emitted when focus passes the end of the list.
pub const WRAP_TOKEN: &str = "<wrap>";

pub const DEFAULT_REPETITION_CAP: u32 = 60;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptItem {
    pub index: usize,
    pub transcript: String,
}

impl TranscriptItem {
    pub fn is_wrap(&self) -> bool {
        self.transcript == WRAP_TOKEN
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Swipe {
    pub repetitions: u32,
    #[serde(default)]
    pub stop_at: String,
    #[serde(default = "one")]
    pub stop_at_occurrence: u32,
}

fn one() -> u32 {
    1
}

impl Swipe {
    pub fn explore(repetitions: u32) -> Self {
        Swipe { repetitions, stop_at: String::new(), stop_at_occurrence: 1 }
    }

    pub fn to(repetitions: u32, stop_at: impl Into<String>, occurrence: u32) -> Self {
        Swipe { repetitions, stop_at: stop_at.into(), stop_at_occurrence: occurrence }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action_type", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GestureRequest {
    SwipeRight(Swipe),
    SwipeLeft(Swipe),
    DoubleTap,
    PressBack,
    Type { typed_text: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GestureResult {
    pub transcripts: Vec<TranscriptItem>,
    pub focused_element_transcript: Option<String>,
    pub keyboard_status: bool,
    pub stopped_early: bool,
}

impl GestureResult {
    pub fn texts(&self) -> Vec<String> {
        self.transcripts.iter().map(|t| t.transcript.clone()).collect()
    }

    pub fn saw_wrap(&self) -> bool {
        self.transcripts.iter().any(TranscriptItem::is_wrap)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProxyError {
    #[error("repetitions must be between 1 and {cap}, got {got}")]
    Repetitions { got: u32, cap: u32 },
    #[error("stop_at_occurrence must be at least 1")]
    Occurrence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyConfig {
    pub stop_threshold: f64,
    pub repetition_cap: u32,
    /// When set, multi-step swipes occasionally skip an element, seeded.
    #[serde(default)]
    pub list_quirk_seed: Option<u64>,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        ProxyConfig {
            stop_threshold: DEFAULT_STOP_THRESHOLD,
            repetition_cap: DEFAULT_REPETITION_CAP,
            list_quirk_seed: None,
        }
    }
}

/// Utterance for an element: `label[, state][, role]`, empty parts skipped.
pub fn compose_transcript(element: &UiElement) -> String {
    let state = element.a11y.as_ref().and_then(|a| a.state_announcement.as_deref());
    compose_with_state(element, state)
}

pub fn compose_with_state(element: &UiElement, state: Option<&str>) -> String {
    let Some(a) = &element.a11y else {
        return String::new();
    };
    [a.label.as_str(), state.unwrap_or(""), a.role_announcement.as_str()]
        .into_iter()
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Focusable elements of the effective screen in reading order.
pub fn linearize(state: &EnvState) -> Vec<ElementId> {
    state
        .effective_elements()
        .iter()
        .filter(|e| e.is_focusable())
        .map(|e| e.id.clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Right,
    Left,
}

#[derive(Debug, Clone, Default)]
pub struct ScreenReader {
    pub config: ProxyConfig,
}

impl ScreenReader {
    pub fn new(config: ProxyConfig) -> Self {
        ScreenReader { config }
    }

    /// Spoken form of an element in the current state.
    pub fn transcript_of(&self, state: &EnvState, element: &UiElement) -> String {
        compose_with_state(element, state.element_state(element))
    }

    pub fn focused_transcript(&self, state: &EnvState) -> Option<String> {
        let f = state.focus.as_ref()?;
        state.effective_element(&f.element).map(|e| self.transcript_of(state, e))
    }

    pub fn perform(&self, state: &mut EnvState, request: &GestureRequest) -> Result<GestureResult, ProxyError> {
        if let GestureRequest::SwipeLeft(s) | GestureRequest::SwipeRight(s) = request {
            if s.repetitions == 0 || s.repetitions > self.config.repetition_cap {
                return Err(ProxyError::Repetitions { got: s.repetitions, cap: self.config.repetition_cap });
            }
            if s.stop_at_occurrence == 0 {
                return Err(ProxyError::Occurrence);
            }
        }
        state
            .gesture_log
            .push(serde_json::to_string(request).expect("gestures always serialize"));
        Ok(match request {
            GestureRequest::SwipeRight(s) => self.swipe(state, Direction::Right, s),
            GestureRequest::SwipeLeft(s) => self.swipe(state, Direction::Left, s),
            GestureRequest::DoubleTap => self.double_tap(state),
            GestureRequest::PressBack => self.press_back(state),
            GestureRequest::Type { typed_text } => self.type_text(state, typed_text),
        })
    }

    /// Drains announcements queued outside any gesture.
    pub fn wait(&self, state: &mut EnvState) -> GestureResult {
        state.gesture_log.push("WAIT".into());
        let texts: Vec<String> = state.pending_announcements.drain(..).collect();
        self.finish(state, texts, false)
    }

    fn finish(&self, state: &EnvState, texts: Vec<String>, stopped_early: bool) -> GestureResult {
        let focused_element_transcript = match texts.last() {
            Some(t) if t == WRAP_TOKEN => None,
            Some(t) => Some(t.clone()),
            None => self.focused_transcript(state),
        };
        GestureResult {
            transcripts: texts
                .into_iter()
                .enumerate()
                .map(|(index, transcript)| TranscriptItem { index, transcript })
                .collect(),
            focused_element_transcript,
            keyboard_status: state.keyboard_visible,
            stopped_early,
        }
    }

    fn swipe(&self, state: &mut EnvState, dir: Direction, req: &Swipe) -> GestureResult {
        let lin = linearize(state);
        if lin.is_empty() {
            state.focus = None;
            return self.finish(state, vec![WRAP_TOKEN.to_string()], false);
        }
        let trap = state.screen().focus_trap.as_ref().filter(|_| state.overlay_stack.is_empty()).and_then(|t| {
            let a = lin.iter().position(|id| *id == t.first)?;
            let b = lin.iter().position(|id| *id == t.last)?;
            Some((a, b))
        });
        let mut pos = state
            .focus
            .as_ref()
            .and_then(|f| lin.iter().position(|id| *id == f.element));
        let mut texts = Vec::new();
        let mut matches = 0;
        let mut stopped = false;
        for rep in 0..req.repetitions {
            let mut steps = 1;
            if let Some(seed) = self.config.list_quirk_seed {
                if rep > 0 && quirk_roll(seed, state.gesture_log.len() as u64, rep as u64) {
                    steps = 2;
                }
            }
            for _ in 0..steps {
                let (next, wrapped) = step(pos, lin.len(), trap, dir);
                if wrapped {
                    texts.push(WRAP_TOKEN.to_string());
                }
                pos = Some(next);
            }
            let idx = pos.expect("set above");
            let el = state.effective_element(&lin[idx]).expect("linearized ids exist");
            let spoken = self.transcript_of(state, el);
            let hit = !req.stop_at.is_empty()
                && transcript_similarity(&spoken, &req.stop_at) >= self.config.stop_threshold;
            texts.push(spoken);
            if hit {
                matches += 1;
                if matches == req.stop_at_occurrence {
                    stopped = true;
                    break;
                }
            }
        }
        state.focus = pos.map(|i| Focus { element: lin[i].clone(), index: i });
        self.finish(state, texts, stopped)
    }

    fn double_tap(&self, state: &mut EnvState) -> GestureResult {
        let texts = match state.focus.clone() {
            Some(f) => state.apply_activation(&f.element, ActivationPath::ScreenReader),
            None => Vec::new(),
        };
        self.refresh_focus(state);
        self.finish(state, texts, false)
    }

    fn press_back(&self, state: &mut EnvState) -> GestureResult {
        let texts = if state.keyboard_visible {
            state.keyboard_visible = false;
            Vec::new()
        } else if state.overlay_stack.pop().is_some() {
            state.focus = None;
            state.title_of(&state.current_screen.clone())
        } else if let Some(prev) = state.screen_history.pop() {
            state.current_screen = prev;
            state.focus = None;
            state.title_of(&state.current_screen.clone())
        } else {
            Vec::new()
        };
        self.finish(state, texts, false)
    }

    fn type_text(&self, state: &mut EnvState, typed: &str) -> GestureResult {
        let target = state
            .focus
            .as_ref()
            .and_then(|f| state.effective_element(&f.element))
            .filter(|e| e.role == Role::TextInput)
            .map(|e| e.id.clone());
        let texts = match target {
            Some(id) if state.keyboard_visible => {
                state.element_states.insert(id, typed.to_string());
                if typed.is_empty() {
                    Vec::new()
                } else {
                    vec![typed.to_string()]
                }
            }
            _ => Vec::new(),
        };
        self.finish(state, texts, false)
    }

    fn refresh_focus(&self, state: &mut EnvState) {
        if let Some(f) = &state.focus {
            let lin = linearize(state);
            state.focus = lin
                .iter()
                .position(|id| *id == f.element)
                .map(|index| Focus { element: f.element.clone(), index });
        }
    }
}

/// One focus move. Returns the new position and whether the end was passed.
fn step(pos: Option<usize>, n: usize, trap: Option<(usize, usize)>, dir: Direction) -> (usize, bool) {
    match (dir, pos) {
        (Direction::Right, None) => (0, false),
        (Direction::Left, None) => (n - 1, false),
        (Direction::Right, Some(p)) => match trap {
            Some((a, b)) if p == b => (a, false),
            _ if p + 1 == n => (0, true),
            _ => (p + 1, false),
        },
        (Direction::Left, Some(p)) => match trap {
            Some((a, b)) if p == a => (b, false),
            _ if p == 0 => (n - 1, true),
            _ => (p - 1, false),
        },
    }
}

fn quirk_roll(seed: u64, gesture: u64, rep: u64) -> bool {
    // splitmix64 finalizer
    let mut z = seed ^ gesture.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ rep.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z.is_multiple_of(8)
}
