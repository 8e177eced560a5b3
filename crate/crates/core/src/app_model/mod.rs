//! Declarative virtual apps: screens, elements, accessibility metadata,
//! activation effects, and the fault history that doubles as ground truth.

mod env;
mod fault;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use env::{reset_env, ActivationPath, EnvState, Focus, Overlay};
pub use fault::{ground_truth_errors, inject_fault, GroundTruth, DECOY_ICON};

pub const APP_FORMAT_VERSION: &str = "fa11y-app/1";

pub type ScreenId = String;
pub type ElementId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Button,
    TextInput,
    Selector,
    Tab,
    Link,
    StaticText,
    Image,
    Container,
    Ad,
}

/// Functional category of an element as a sighted tester would judge it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementCategory {
    Information,
    Action,
    Input,
    Navigation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorCategory {
    Locatability,
    Actionability,
    Label,
    Feedback,
    Navigation,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::Locatability,
        ErrorCategory::Actionability,
        ErrorCategory::Label,
        ErrorCategory::Feedback,
        ErrorCategory::Navigation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorCategory::Locatability => "Locatability",
            ErrorCategory::Actionability => "Actionability",
            ErrorCategory::Label => "Label",
            ErrorCategory::Feedback => "Feedback",
            ErrorCategory::Navigation => "Navigation",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(name.trim()))
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Integer rectangle, serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 4]", into = "[i32; 4]")]
pub struct Rect {
    pub x: i32,
    pub y: i32,
    pub w: i32,
    pub h: i32,
}

impl From<[i32; 4]> for Rect {
    fn from([x, y, w, h]: [i32; 4]) -> Self {
        Rect { x, y, w, h }
    }
}

impl From<Rect> for [i32; 4] {
    fn from(r: Rect) -> Self {
        [r.x, r.y, r.w, r.h]
    }
}

impl Rect {
    pub fn new(x: i32, y: i32, w: i32, h: i32) -> Self {
        Rect { x, y, w, h }
    }

    fn within(&self, vp: Viewport) -> bool {
        self.x >= 0 && self.y >= 0 && self.w >= 0 && self.h >= 0 && self.x + self.w <= vp.w && self.y + self.h <= vp.h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Viewport {
    pub w: i32,
    pub h: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccessibilityMetadata {
    /// Empty means the element has no label.
    pub label: String,
    pub role_announcement: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_announcement: Option<String>,
    pub focusable: bool,
    pub activation_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationEffect {
    Navigate { target: ScreenId },
    OpenOverlay { elements: Vec<UiElement>, announce: String },
    ToggleState { new_state: String, announce: String },
    ShowKeyboard {
        #[serde(default)]
        announce: String,
    },
    AnnounceOnly { text: String },
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UiElement {
    pub id: ElementId,
    pub bounds: Rect,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visual_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icon_class: Option<String>,
    pub touch_actionable: bool,
    pub category: ElementCategory,
    /// Absent means the screen reader cannot see the element at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a11y: Option<AccessibilityMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_activate: Option<ActivationEffect>,
}

impl UiElement {
    pub fn is_focusable(&self) -> bool {
        self.a11y.as_ref().is_some_and(|a| a.focusable)
    }

    /// Drawn on screen, so a visual detector can find it.
    pub fn is_visible(&self) -> bool {
        self.visual_text.is_some() || self.icon_class.is_some()
    }
}

/// Contiguous focus range that swipes cannot leave.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocusTrap {
    pub first: ElementId,
    pub last: ElementId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenModel {
    pub id: ScreenId,
    pub viewport: Viewport,
    /// Spoken when the screen is entered or restored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title_announcement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus_trap: Option<FocusTrap>,
    /// Reading order.
    pub elements: Vec<UiElement>,
}

impl ScreenModel {
    pub fn element(&self, id: &str) -> Option<&UiElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub category: ErrorCategory,
    /// Disambiguates `target` when element ids repeat across screens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screen: Option<ScreenId>,
    pub target: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl FaultSpec {
    pub fn new(category: ErrorCategory, screen: &str, target: &str) -> Self {
        FaultSpec {
            category,
            screen: Some(screen.to_string()),
            target: target.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppDefinition {
    pub version: String,
    pub initial_screen: ScreenId,
    pub screens: Vec<ScreenModel>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
    /// Faults already applied to this app, in application order.
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
}

#[derive(Debug, Error, PartialEq)]
pub enum AppError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid app at {path}: {message}")]
    Validation { path: String, message: String },
    #[error("fault target {0:?} not found")]
    UnknownTarget(String),
    #[error("{category} fault needs parameter {param:?}")]
    MissingParam { category: ErrorCategory, param: &'static str },
    #[error("{category} fault cannot apply to {target:?}: {reason}")]
    Inapplicable { category: ErrorCategory, target: String, reason: String },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> AppError {
    AppError::Validation { path: path.into(), message: message.into() }
}

impl AppDefinition {
    pub fn screen(&self, id: &str) -> Option<&ScreenModel> {
        self.screens.iter().find(|s| s.id == id)
    }

    pub fn screen_mut(&mut self, id: &str) -> Option<&mut ScreenModel> {
        self.screens.iter_mut().find(|s| s.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("app definitions always serialize")
    }

    /// Checks every structural invariant, naming the first offending path.
    pub fn validate(&self) -> Result<(), AppError> {
        if self.version != APP_FORMAT_VERSION {
            return Err(invalid("version", format!("expected {APP_FORMAT_VERSION:?}, got {:?}", self.version)));
        }
        let mut ids = HashSet::new();
        for (si, screen) in self.screens.iter().enumerate() {
            if !ids.insert(screen.id.as_str()) {
                return Err(invalid(format!("screens[{si}].id"), format!("duplicate screen id {:?}", screen.id)));
            }
        }
        if !ids.contains(self.initial_screen.as_str()) {
            return Err(invalid("initial_screen", format!("unknown screen {:?}", self.initial_screen)));
        }
        for (si, screen) in self.screens.iter().enumerate() {
            let path = format!("screens[{si}]");
            self.validate_elements(&screen.elements, screen.viewport, &format!("{path}.elements"))?;
            if let Some(trap) = &screen.focus_trap {
                let first = screen.position(&trap.first);
                let last = screen.position(&trap.last);
                match (first, last) {
                    (Some(a), Some(b)) if a <= b => {}
                    (None, _) => return Err(invalid(format!("{path}.focus_trap.first"), format!("unknown element {:?}", trap.first))),
                    (_, None) => return Err(invalid(format!("{path}.focus_trap.last"), format!("unknown element {:?}", trap.last))),
                    _ => return Err(invalid(format!("{path}.focus_trap"), "first must precede last")),
                }
            }
        }
        for (fi, f) in self.faults.iter().enumerate() {
            if fault::locate(self, f).is_none() {
                return Err(invalid(format!("faults[{fi}].target"), format!("unknown target {:?}", f.target)));
            }
        }
        Ok(())
    }

    fn validate_elements(&self, elements: &[UiElement], vp: Viewport, path: &str) -> Result<(), AppError> {
        let mut seen = HashSet::new();
        for (ei, e) in elements.iter().enumerate() {
            let here = format!("{path}[{ei}]");
            if !seen.insert(e.id.as_str()) {
                return Err(invalid(format!("{here}.id"), format!("duplicate element id {:?}", e.id)));
            }
            if !e.bounds.within(vp) {
                return Err(invalid(format!("{here}.bounds"), format!("{:?} outside viewport {}x{}", <[i32; 4]>::from(e.bounds), vp.w, vp.h)));
            }
            if matches!(e.role, Role::StaticText | Role::Image) && !e.touch_actionable && e.on_activate.is_some() {
                return Err(invalid(format!("{here}.on_activate"), "inert static element cannot have an activation effect"));
            }
            match &e.on_activate {
                Some(ActivationEffect::Navigate { target }) if self.screen(target).is_none() => {
                    return Err(invalid(format!("{here}.on_activate.target"), format!("unknown screen {target:?}")));
                }
                Some(ActivationEffect::OpenOverlay { elements, .. }) => {
                    self.validate_elements(elements, vp, &format!("{here}.on_activate.elements"))?;
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Parses and validates an app-definition document.
pub fn load_app(document: &str) -> Result<AppDefinition, AppError> {
    let app: AppDefinition = serde_json::from_str(document).map_err(|e| AppError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    app.validate()?;
    Ok(app)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn a11y(label: &str, role: &str) -> AccessibilityMetadata {
        AccessibilityMetadata {
            label: label.into(),
            role_announcement: role.into(),
            state_announcement: None,
            focusable: true,
            activation_enabled: true,
        }
    }

    pub fn button(id: &str, label: &str, effect: ActivationEffect) -> UiElement {
        UiElement {
            id: id.into(),
            bounds: Rect::new(0, 0, 10, 10),
            role: Role::Button,
            visual_text: Some(label.into()),
            icon_class: None,
            touch_actionable: true,
            category: ElementCategory::Action,
            a11y: Some(a11y(label, "button")),
            on_activate: Some(effect),
        }
    }

    pub fn text(id: &str, label: &str) -> UiElement {
        UiElement {
            id: id.into(),
            bounds: Rect::new(0, 0, 10, 10),
            role: Role::StaticText,
            visual_text: Some(label.into()),
            icon_class: None,
            touch_actionable: false,
            category: ElementCategory::Information,
            a11y: Some(a11y(label, "")),
            on_activate: None,
        }
    }

    pub fn input(id: &str, label: &str) -> UiElement {
        UiElement {
            id: id.into(),
            bounds: Rect::new(0, 0, 10, 10),
            role: Role::TextInput,
            visual_text: Some(label.into()),
            icon_class: None,
            touch_actionable: true,
            category: ElementCategory::Input,
            a11y: Some(a11y(label, "edit box")),
            on_activate: Some(ActivationEffect::ShowKeyboard { announce: format!("Editing, {label}") }),
        }
    }

    pub fn screen(id: &str, elements: Vec<UiElement>) -> ScreenModel {
        ScreenModel {
            id: id.into(),
            viewport: Viewport { w: 100, h: 100 },
            title_announcement: None,
            focus_trap: None,
            elements,
        }
    }

    pub fn app(screens: Vec<ScreenModel>) -> AppDefinition {
        AppDefinition {
            version: APP_FORMAT_VERSION.into(),
            initial_screen: screens[0].id.clone(),
            screens,
            metadata: BTreeMap::new(),
            faults: vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": "fa11y-app/1",
        "initial_screen": "home",
        "screens": [{
            "id": "home",
            "viewport": {"w": 360, "h": 640},
            "elements": [{
                "id": "ok", "bounds": [10, 10, 100, 40], "role": "button",
                "visual_text": "OK", "touch_actionable": true, "category": "action",
                "a11y": {"label": "OK", "role_announcement": "button", "focusable": true, "activation_enabled": true},
                "on_activate": {"kind": "announce_only", "text": "Confirmed"}
            }]
        }],
        "faults": []
    }"#;

    #[test]
    fn minimal_document_loads() {
        let app = load_app(MINIMAL).unwrap();
        assert_eq!(app.screens.len(), 1);
        assert_eq!(app.screens[0].elements[0].id, "ok");
        assert_eq!(load_app(&app.to_json()).unwrap(), app);
    }

    #[test]
    fn dangling_navigation_target_is_named() {
        let doc = MINIMAL.replace(r#"{"kind": "announce_only", "text": "Confirmed"}"#, r#"{"kind": "navigate", "target": "checkout"}"#);
        match load_app(&doc) {
            Err(AppError::Validation { path, message }) => {
                assert_eq!(path, "screens[0].elements[0].on_activate.target");
                assert!(message.contains("checkout"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_bounds_rejected() {
        let mut app = load_app(MINIMAL).unwrap();
        let dup = app.screens[0].elements[0].clone();
        app.screens[0].elements.push(dup);
        assert!(matches!(app.validate(), Err(AppError::Validation { path, .. }) if path == "screens[0].elements[1].id"));
        let mut app = load_app(MINIMAL).unwrap();
        app.screens[0].elements[0].bounds = Rect::new(300, 0, 100, 10);
        assert!(matches!(app.validate(), Err(AppError::Validation { path, .. }) if path.ends_with("bounds")));
    }

    #[test]
    fn unknown_fields_and_bad_json_rejected() {
        let doc = MINIMAL.replace(r#""initial_screen""#, r#""colour": 1, "initial_screen""#);
        assert!(matches!(load_app(&doc), Err(AppError::Parse { .. })));
        let doc = MINIMAL.replace(r#""focusable": true"#, r#""focusable": true, "hint": "x""#);
        assert!(matches!(load_app(&doc), Err(AppError::Parse { .. })));
        assert!(matches!(load_app("{"), Err(AppError::Parse { .. })));
        let doc = MINIMAL.replace("fa11y-app/1", "fa11y-app/2");
        assert!(matches!(load_app(&doc), Err(AppError::Validation { path, .. }) if path == "version"));
    }

    #[test]
    fn static_text_cannot_carry_effects() {
        let mut app = load_app(MINIMAL).unwrap();
        let e = &mut app.screens[0].elements[0];
        e.role = Role::StaticText;
        e.touch_actionable = false;
        assert!(app.validate().is_err());
    }
}
