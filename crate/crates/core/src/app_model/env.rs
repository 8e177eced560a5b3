use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ActivationEffect, AppDefinition, ElementId, ScreenId, ScreenModel, UiElement};

/// Which input channel fired an activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationPath {
    /// Direct touch: the effect always fires.
    Touch,
    /// Screen-reader double-tap: fires only when activation is enabled.
    ScreenReader,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Focus {
    pub element: ElementId,
    /// Position in the current linearization.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Overlay {
    pub owner: ElementId,
    pub elements: Vec<UiElement>,
}

/// Mutable simulator state for one task run.
#[derive(Debug, Clone, Serialize)]
pub struct EnvState {
    #[serde(skip)]
    app: Arc<AppDefinition>,
    pub current_screen: ScreenId,
    pub overlay_stack: Vec<Overlay>,
    pub screen_history: Vec<ScreenId>,
    pub focus: Option<Focus>,
    pub keyboard_visible: bool,
    /// Only elements whose state changed since reset.
    pub element_states: BTreeMap<ElementId, String>,
    pub pending_announcements: VecDeque<String>,
    pub gesture_log: Vec<String>,
}

impl PartialEq for EnvState {
    fn eq(&self, other: &Self) -> bool {
        self.same_except_log(other) && self.gesture_log == other.gesture_log
    }
}

/// Fresh state at the app's initial screen.
pub fn reset_env(app: Arc<AppDefinition>) -> EnvState {
    EnvState::reset(app)
}

impl EnvState {
    pub fn reset(app: Arc<AppDefinition>) -> Self {
        let current_screen = app.initial_screen.clone();
        EnvState {
            app,
            current_screen,
            overlay_stack: Vec::new(),
            screen_history: Vec::new(),
            focus: None,
            keyboard_visible: false,
            element_states: BTreeMap::new(),
            pending_announcements: VecDeque::new(),
            gesture_log: Vec::new(),
        }
    }

    pub fn app(&self) -> &Arc<AppDefinition> {
        &self.app
    }

    pub fn screen(&self) -> &ScreenModel {
        self.app
            .screen(&self.current_screen)
            .expect("current screen always exists in a validated app")
    }

    /// Elements of the top overlay if one is open, else of the screen.
    pub fn effective_elements(&self) -> &[UiElement] {
        match self.overlay_stack.last() {
            Some(o) => &o.elements,
            None => &self.screen().elements,
        }
    }

    pub fn effective_element(&self, id: &str) -> Option<&UiElement> {
        self.effective_elements().iter().find(|e| e.id == id)
    }

    /// Current state value: the changed value if any, else the declared one.
    pub fn element_state<'a>(&'a self, element: &'a UiElement) -> Option<&'a str> {
        self.element_states
            .get(&element.id)
            .map(String::as_str)
            .or_else(|| element.a11y.as_ref().and_then(|a| a.state_announcement.as_deref()))
    }

    pub fn same_except_log(&self, other: &Self) -> bool {
        self.current_screen == other.current_screen
            && self.overlay_stack == other.overlay_stack
            && self.screen_history == other.screen_history
            && self.focus == other.focus
            && self.keyboard_visible == other.keyboard_visible
            && self.element_states == other.element_states
            && self.pending_announcements == other.pending_announcements
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state always serializes")
    }

    pub(crate) fn title_of(&self, screen: &str) -> Vec<String> {
        self.app
            .screen(screen)
            .and_then(|s| s.title_announcement.as_deref())
            .map(split_announcement)
            .unwrap_or_default()
    }

    /// Fires `element`'s activation effect on the effective screen and
    /// returns what gets announced. Inert elements change nothing.
    pub fn apply_activation(&mut self, element: &str, path: ActivationPath) -> Vec<String> {
        let Some(el) = self.effective_element(element) else {
            return Vec::new();
        };
        if path == ActivationPath::ScreenReader && !el.a11y.as_ref().is_some_and(|a| a.activation_enabled) {
            return Vec::new();
        }
        let Some(effect) = el.on_activate.clone() else {
            return Vec::new();
        };
        match effect {
            ActivationEffect::Navigate { target } => {
                let from = std::mem::replace(&mut self.current_screen, target.clone());
                self.screen_history.push(from);
                self.overlay_stack.clear();
                self.focus = None;
                self.keyboard_visible = false;
                self.title_of(&target)
            }
            ActivationEffect::OpenOverlay { elements, announce } => {
                self.overlay_stack.push(Overlay { owner: element.to_string(), elements });
                self.focus = None;
                split_announcement(&announce)
            }
            ActivationEffect::ToggleState { new_state, announce } => {
                self.element_states.insert(element.to_string(), new_state);
                split_announcement(&announce)
            }
            ActivationEffect::ShowKeyboard { announce } => {
                self.keyboard_visible = true;
                split_announcement(&announce)
            }
            ActivationEffect::AnnounceOnly { text } => split_announcement(&text),
            ActivationEffect::None => Vec::new(),
        }
    }
}

/// One announcement item per non-empty line.
pub(crate) fn split_announcement(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty()).map(str::to_string).collect()
}
