//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

pub mod prompt_cases;
pub mod proxy_oracle;

use std::collections::BTreeMap;

use fa11y::app_model::{
    AccessibilityMetadata, ActivationEffect, AppDefinition, ElementCategory, Rect, Role, ScreenModel, UiElement, Viewport,
    APP_FORMAT_VERSION,
};

pub fn a11y(label: &str, role: &str) -> AccessibilityMetadata {
    AccessibilityMetadata {
        label: label.into(),
        role_announcement: role.into(),
        state_announcement: None,
        focusable: true,
        activation_enabled: true,
    }
}

pub fn element(id: &str, label: &str, role: Role, category: ElementCategory, effect: Option<ActivationEffect>) -> UiElement {
    let word = match role {
        Role::TextInput => "edit box",
        Role::Selector => "switch",
        Role::StaticText => "",
        _ => "button",
    };
    UiElement {
        id: id.into(),
        bounds: Rect::new(0, 0, 100, 40),
        role,
        visual_text: Some(label.into()),
        icon_class: None,
        touch_actionable: effect.is_some(),
        category,
        a11y: Some(a11y(label, word)),
        on_activate: effect,
    }
}

pub fn button(id: &str, label: &str, effect: ActivationEffect) -> UiElement {
    element(id, label, Role::Button, ElementCategory::Action, Some(effect))
}

pub fn text(id: &str, label: &str) -> UiElement {
    element(id, label, Role::StaticText, ElementCategory::Information, None)
}

pub fn input(id: &str, label: &str) -> UiElement {
    element(
        id,
        label,
        Role::TextInput,
        ElementCategory::Input,
        Some(ActivationEffect::ShowKeyboard { announce: format!("Editing, {label}") }),
    )
}

pub fn toggle(id: &str, label: &str) -> UiElement {
    let mut e = element(
        id,
        label,
        Role::Selector,
        ElementCategory::Action,
        Some(ActivationEffect::ToggleState { new_state: "On".into(), announce: "On".into() }),
    );
    e.a11y.as_mut().unwrap().state_announcement = Some("Off".into());
    e
}

pub fn screen(id: &str, elements: Vec<UiElement>) -> ScreenModel {
    ScreenModel { id: id.into(), viewport: Viewport { w: 1080, h: 2400 }, title_announcement: None, focus_trap: None, elements }
}

pub fn titled(id: &str, title: &str) -> ScreenModel {
    let mut s = screen(id, vec![text("heading", title)]);
    s.title_announcement = Some(title.into());
    s
}

pub fn app(screens: Vec<ScreenModel>) -> AppDefinition {
    AppDefinition {
        version: APP_FORMAT_VERSION.into(),
        initial_screen: screens[0].id.clone(),
        screens,
        metadata: BTreeMap::new(),
        faults: Vec::new(),
    }
}
