//! Fault transforms. Each applied [`FaultSpec`] is appended to the app's
//! fault history, which is the ground truth used for scoring.

use serde::{Deserialize, Serialize};

use super::{
    AccessibilityMetadata, ActivationEffect, AppDefinition, AppError, ElementCategory, ErrorCategory, FaultSpec,
    FocusTrap, Role, ScreenId, UiElement,
};

pub const DECOY_ICON: &str = "airplane";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundTruth {
    pub screen: ScreenId,
    pub element: String,
    pub category: ErrorCategory,
}

/// Where a fault target lives: the screen index and the element index, or
/// `None` for a screen-level target.
pub(super) fn locate(app: &AppDefinition, fault: &FaultSpec) -> Option<(usize, Option<usize>)> {
    let candidates = app
        .screens
        .iter()
        .enumerate()
        .filter(|(_, s)| fault.screen.as_deref().is_none_or(|id| s.id == id));
    let mut screen_hit = None;
    for (si, s) in candidates {
        if let Some(ei) = s.position(&fault.target) {
            return Some((si, Some(ei)));
        }
        if s.id == fault.target && screen_hit.is_none() {
            screen_hit = Some((si, None));
        }
    }
    screen_hit
}

/// Returns a copy of `app` with the fault applied and recorded.
///
/// Applying a spec that is already in the history returns the app unchanged.
pub fn inject_fault(app: &AppDefinition, fault: &FaultSpec) -> Result<AppDefinition, AppError> {
    if app.faults.contains(fault) {
        return Ok(app.clone());
    }
    let (si, ei) = locate(app, fault).ok_or_else(|| AppError::UnknownTarget(fault.target.clone()))?;
    let mut out = app.clone();
    let category = fault.category;
    let inapplicable = |reason: &str| AppError::Inapplicable {
        category,
        target: fault.target.clone(),
        reason: reason.to_string(),
    };

    let Some(ei) = ei else {
        // screen-level target: only a silent screen entry makes sense
        if category != ErrorCategory::Feedback {
            return Err(inapplicable("only Feedback faults may target a screen"));
        }
        out.screens[si].title_announcement = None;
        out.faults.push(fault.clone());
        return Ok(out);
    };

    let screen = &mut out.screens[si];
    match category {
        ErrorCategory::Locatability => {
            let remove = fault.params.get("remove_a11y").and_then(|v| v.as_bool()).unwrap_or(false);
            let el = &mut screen.elements[ei];
            match (&mut el.a11y, remove) {
                (a11y @ Some(_), true) => *a11y = None,
                (Some(a), false) => a.focusable = false,
                (None, _) => {}
            }
        }
        ErrorCategory::Actionability => {
            let a = screen.elements[ei]
                .a11y
                .as_mut()
                .ok_or_else(|| inapplicable("element has no accessibility metadata"))?;
            a.activation_enabled = false;
        }
        ErrorCategory::Label => {
            let wrong = fault.params.get("wrong_label").and_then(|v| v.as_str()).unwrap_or("");
            let a = screen.elements[ei]
                .a11y
                .as_mut()
                .ok_or_else(|| inapplicable("element has no accessibility metadata"))?;
            a.label = wrong.to_string();
        }
        ErrorCategory::Feedback => match screen.elements[ei].on_activate.as_mut() {
            Some(ActivationEffect::OpenOverlay { announce, .. })
            | Some(ActivationEffect::ToggleState { announce, .. })
            | Some(ActivationEffect::ShowKeyboard { announce }) => announce.clear(),
            Some(ActivationEffect::AnnounceOnly { text }) => text.clear(),
            _ => return Err(inapplicable("element has no announcing activation effect")),
        },
        ErrorCategory::Navigation => {
            if let Some(count) = fault.params.get("clutter_count") {
                let count = count.as_u64().ok_or(AppError::MissingParam { category, param: "clutter_count" })?;
                let target = screen.elements[ei].clone();
                let decoys = (0..count).map(|i| decoy(&target, i as usize));
                screen.elements.splice(ei..ei, decoys);
            } else if let Some(range) = fault.params.get("trap_range") {
                let ids: Vec<&str> = range
                    .as_array()
                    .map(|a| a.iter().filter_map(|v| v.as_str()).collect())
                    .unwrap_or_default();
                let [first, last] = ids[..] else {
                    return Err(AppError::MissingParam { category, param: "trap_range" });
                };
                match (screen.position(first), screen.position(last)) {
                    (Some(a), Some(b)) if a <= b => {}
                    _ => return Err(inapplicable("trap_range must name two ordered elements of the screen")),
                }
                screen.focus_trap = Some(FocusTrap { first: first.into(), last: last.into() });
            } else {
                return Err(AppError::MissingParam { category, param: "clutter_count" });
            }
        }
    }
    out.faults.push(fault.clone());
    Ok(out)
}

fn decoy(target: &UiElement, i: usize) -> UiElement {
    UiElement {
        id: format!("{}__decoy_{i}", target.id),
        bounds: target.bounds,
        role: Role::Image,
        visual_text: None,
        icon_class: Some(DECOY_ICON.into()),
        touch_actionable: false,
        category: ElementCategory::Information,
        a11y: Some(AccessibilityMetadata {
            label: "Airplane".into(),
            role_announcement: "image".into(),
            state_announcement: None,
            focusable: true,
            activation_enabled: true,
        }),
        on_activate: None,
    }
}

/// The injected faults as `(screen, element, category)`, ordered by screen
/// declaration order and then reading order.
pub fn ground_truth_errors(app: &AppDefinition) -> Vec<GroundTruth> {
    let mut keyed: Vec<((usize, usize), GroundTruth)> = app
        .faults
        .iter()
        .filter_map(|f| {
            let (si, ei) = locate(app, f)?;
            Some((
                (si, ei.map_or(0, |e| e + 1)),
                GroundTruth {
                    screen: app.screens[si].id.clone(),
                    element: f.target.clone(),
                    category: f.category,
                },
            ))
        })
        .collect();
    keyed.sort_by_key(|a| a.0);
    keyed.dedup_by(|a, b| a.1 == b.1);
    keyed.into_iter().map(|(_, g)| g).collect()
}
