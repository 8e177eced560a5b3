//! Task generation from the visual layer: simulated element detection,
//! captioning, and one [`TaskSpecification`] per interactive candidate.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_model::{ActivationEffect, AppDefinition, ElementCategory, ElementId, Rect, Role, ScreenId, ScreenModel, UiElement};
use crate::criterion::{Criterion, Predicate};
use crate::similarity::token_overlap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSource {
    TextDetector,
    IconDetector,
    Spurious,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementCandidate {
    pub bounds: Rect,
    pub source: CandidateSource,
    pub raw_text: Option<String>,
    /// Absent for spurious candidates.
    pub matched_element: Option<ElementId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub name: String,
    pub category: ElementCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElemRef {
    pub name: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpecification {
    pub desc: String,
    #[serde(default)]
    pub prereq: Vec<String>,
    pub elem: ElemRef,
    pub crit: String,
}

impl TaskSpecification {
    pub fn criterion(&self) -> Criterion {
        Criterion::parse_lenient(&self.crit)
    }

    /// Prerequisite setup activations, written `activate:<element-id>`.
    pub fn setup_activations(&self) -> impl Iterator<Item = &str> {
        self.prereq.iter().filter_map(|p| p.strip_prefix("activate:")).map(str::trim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub miss_rate: f64,
    /// Chance per screen of one hallucinated candidate.
    pub spurious_rate: f64,
    pub caption_error_rate: f64,
    pub seed: u64,
}

impl DetectorConfig {
    pub fn noiseless(seed: u64) -> Self {
        DetectorConfig { miss_rate: 0.0, spurious_rate: 0.0, caption_error_rate: 0.0, seed }
    }

    /// Rates matching a real OCR + icon pipeline on app screenshots.
    pub fn calibrated(seed: u64) -> Self {
        DetectorConfig { miss_rate: 0.257, spurious_rate: 0.15, caption_error_rate: 0.066, seed }
    }

    pub fn validate(&self) -> Result<(), TaskGenError> {
        for (name, v) in [
            ("miss_rate", self.miss_rate),
            ("spurious_rate", self.spurious_rate),
            ("caption_error_rate", self.caption_error_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(TaskGenError::Rate { name, value: v });
            }
        }
        Ok(())
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::noiseless(0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TaskGenError {
    #[error("{name} must lie in [0, 1], got {value}")]
    Rate { name: &'static str, value: f64 },
    #[error("unknown screen {0:?}")]
    UnknownScreen(String),
}

/// A generated task plus the bookkeeping the harness needs for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTask {
    pub screen: ScreenId,
    pub spec: TaskSpecification,
    pub source: CandidateSource,
    pub matched_element: Option<ElementId>,
}

/// FNV-1a, stable across platforms and releases.
pub(crate) fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.iter().chain(std::iter::once(&0xff)) {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

fn rng_for(seed: u64, screen: &str, stream: &str, n: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stable_hash(&[&seed.to_le_bytes(), screen.as_bytes(), stream.as_bytes(), &n.to_le_bytes()]))
}

const SPURIOUS_NAMES: &[&str] = &["Sponsored", "Learn more", "Dismiss", "Rate us", "Get the app", "Watch video"];
const OFF_TOPIC_NAMES: &[&str] = &["Continue", "Download", "Sign up", "Close", "Explore", "Help center", "Rewards"];
const APPENDED_WORDS: &[&str] = &["options", "icon", "area", "panel"];

pub fn detect_candidates(screen: &ScreenModel, config: &DetectorConfig) -> Vec<ElementCandidate> {
    let mut rng = rng_for(config.seed, &screen.id, "detect", 0);
    let mut out = Vec::new();
    for e in screen.elements.iter().filter(|e| e.is_visible()) {
        let missed = rng.gen_bool(config.miss_rate);
        if missed {
            continue;
        }
        let (source, raw_text) = match (&e.visual_text, &e.icon_class) {
            (Some(t), _) => (CandidateSource::TextDetector, Some(t.clone())),
            (None, _) => (CandidateSource::IconDetector, None),
        };
        out.push(ElementCandidate { bounds: e.bounds, source, raw_text, matched_element: Some(e.id.clone()) });
    }
    if rng.gen_bool(config.spurious_rate) {
        let taken: Vec<&str> = screen.elements.iter().filter_map(|e| e.visual_text.as_deref()).collect();
        let free: Vec<&&str> = SPURIOUS_NAMES.iter().filter(|n| !taken.contains(n)).collect();
        if let Some(name) = free.choose(&mut rng) {
            let bounds = screen.elements.first().map_or(Rect::new(0, 0, 1, 1), |e| e.bounds);
            out.push(ElementCandidate {
                bounds,
                source: CandidateSource::Spurious,
                raw_text: Some((**name).to_string()),
                matched_element: None,
            });
        }
    }
    out
}

/// Human name for an icon class, as a captioning model would give it.
pub fn icon_name(icon: &str) -> String {
    let known = match icon {
        "magnifier" | "search" => "Search",
        "home" | "house" => "Home",
        "gear" | "cog" => "Settings",
        "heart" => "Favorites",
        "cart" => "Cart",
        "bell" => "Notifications",
        "person" | "avatar" => "Profile",
        "hamburger" | "menu" => "Menu",
        "back-arrow" => "Back",
        "plus" => "Add",
        "share" => "Share",
        "swap" => "Swap",
        "funnel" | "filter" => "Filter",
        "calendar" => "Calendar",
        "airplane" => "Airplane",
        "sort" => "Sort",
        "close" | "x" => "Close",
        _ => "",
    };
    if !known.is_empty() {
        return known.to_string();
    }
    let spaced = icon.replace(['-', '_'], " ");
    let mut chars = spaced.chars();
    chars.next().map_or(String::new(), |c| c.to_uppercase().collect::<String>() + chars.as_str())
}

/// The name a noiseless captioner gives an element.
pub fn true_name(element: &UiElement) -> String {
    match (&element.visual_text, &element.icon_class) {
        (Some(t), _) => t.clone(),
        (None, Some(i)) => icon_name(i),
        (None, None) => String::new(),
    }
}

pub fn caption_candidate(candidate: &ElementCandidate, index: usize, screen: &ScreenModel, config: &DetectorConfig) -> Caption {
    let Some(element) = candidate.matched_element.as_deref().and_then(|id| screen.element(id)) else {
        return Caption {
            name: candidate.raw_text.clone().unwrap_or_else(|| "Unknown".into()),
            category: ElementCategory::Action,
        };
    };
    let name = true_name(element);
    let mut rng = rng_for(config.seed, &screen.id, "caption", index);
    let name = if rng.gen_bool(config.caption_error_rate) { corrupt(&name, &mut rng) } else { name };
    Caption { name, category: element.category }
}

fn corrupt(name: &str, rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.5) {
        let options: Vec<&&str> = OFF_TOPIC_NAMES.iter().filter(|o| token_overlap(o, name) == 0.0).collect();
        (**options.choose(rng).expect("list has disjoint names")).to_string()
    } else {
        format!("{name} {}", APPENDED_WORDS.choose(rng).expect("non-empty"))
    }
}

pub fn generate_task_specs(screen: &ScreenModel, captions: &[(ElementCandidate, Caption)]) -> Vec<TaskSpecification> {
    captions
        .iter()
        .enumerate()
        .filter(|(_, (_, c))| c.category != ElementCategory::Information)
        .map(|(index, (cand, cap))| {
            let element = cand.matched_element.as_deref().and_then(|id| screen.element(id));
            spec_for(element, cap, index, None)
        })
        .collect()
}

fn spec_for(element: Option<&UiElement>, cap: &Caption, index: usize, app: Option<&AppDefinition>) -> TaskSpecification {
    let name = cap.name.clone();
    let elem = ElemRef { name: name.clone(), index };
    let announced = |s: &str| Criterion::All(vec![Predicate::Announced(s.to_string())]).to_string();
    let Some(el) = element else {
        return TaskSpecification { desc: format!("Tap '{name}'"), prereq: vec![], elem, crit: announced(&name) };
    };
    let (desc, crit) = match &el.on_activate {
        _ if el.role == Role::TextInput || cap.category == ElementCategory::Input => {
            let value = detail_value(&name, &el.id);
            let state = Criterion::All(vec![Predicate::State { element: el.id.clone(), value: value.to_string() }]);
            (format!("Enter '{value}' as the {}", name.to_lowercase()), state.to_string())
        }
        Some(ActivationEffect::ToggleState { new_state, .. }) => {
            let state = Criterion::All(vec![Predicate::State { element: el.id.clone(), value: new_state.clone() }]);
            (format!("Set '{name}' to '{new_state}'"), state.to_string())
        }
        Some(ActivationEffect::Navigate { target }) => {
            // destination title when the app is known, else its id
            let title = app
                .and_then(|a| a.screen(target))
                .and_then(|s| s.title_announcement.as_deref())
                .map(first_line)
                .filter(|t| !t.is_empty())
                .unwrap_or_else(|| target.clone());
            (format!("Open '{name}'"), announced(&title))
        }
        Some(ActivationEffect::OpenOverlay { elements, announce }) => {
            let first = elements
                .iter()
                .find_map(|e| e.a11y.as_ref().map(|a| a.label.clone()).filter(|l| !l.is_empty()))
                .unwrap_or_else(|| announce.clone());
            (format!("Open the '{name}' menu"), announced(&first))
        }
        Some(ActivationEffect::AnnounceOnly { text }) => {
            let line = text.lines().next().unwrap_or("").trim().to_string();
            (format!("Tap '{name}'"), announced(if line.is_empty() { &name } else { &line }))
        }
        Some(ActivationEffect::ShowKeyboard { .. }) => {
            let kb = Criterion::All(vec![Predicate::Keyboard(true)]);
            (format!("Start typing in '{name}'"), kb.to_string())
        }
        Some(ActivationEffect::None) | None => (format!("Tap '{name}'"), announced(&name)),
    };
    TaskSpecification { desc, prereq: vec![], elem, crit }
}

const CITIES: &[&str] = &["New York, NY", "San Francisco, CA", "Chicago, IL", "Seattle, WA", "Boston, MA"];
const DATES: &[&str] = &["March 14", "April 2", "May 21", "June 9", "July 30"];
const NAMES: &[&str] = &["Alex Morgan", "Sam Rivera", "Jordan Lee", "Casey Kim"];
const EMAILS: &[&str] = &["alex@example.com", "sam@example.com", "jordan@example.com"];
const QUERIES: &[&str] = &["wireless headphones", "coffee grinder", "running shoes", "desk lamp"];
const NUMBERS: &[&str] = &["2", "3", "4"];
const GENERIC: &[&str] = &["hello", "sample text", "test note"];

/// Concrete input value picked by field kind and a stable hash of the name.
pub fn detail_value(name: &str, id: &str) -> &'static str {
    let lower = name.to_lowercase();
    let has = |words: &[&str]| words.iter().any(|w| lower.contains(w));
    let table = if has(&["city", "airport", "from", "destination", "where", "location"]) {
        CITIES
    } else if has(&["date", "when", "day", "depart", "return"]) {
        DATES
    } else if has(&["email"]) {
        EMAILS
    } else if has(&["name", "passenger", "traveler"]) {
        NAMES
    } else if has(&["search", "query", "find", "look"]) {
        QUERIES
    } else if has(&["guest", "quantity", "number", "count", "adults"]) {
        NUMBERS
    } else {
        GENERIC
    };
    // origin and destination fields never share a city
    let slot = if table == CITIES && has(&["departure", "from", "origin"]) {
        0
    } else if table == CITIES && has(&["arrival", "destination", "to "]) {
        1
    } else {
        (stable_hash(&[lower.as_bytes(), id.as_bytes()]) % table.len() as u64) as usize
    };
    table[slot]
}

/// Runs detection, captioning and spec generation for one screen, keeping
/// the candidate each task came from.
pub fn generate_tasks(app: &AppDefinition, screen_id: &str, config: &DetectorConfig) -> Result<Vec<GeneratedTask>, TaskGenError> {
    config.validate()?;
    let screen = app.screen(screen_id).ok_or_else(|| TaskGenError::UnknownScreen(screen_id.to_string()))?;
    let candidates = detect_candidates(screen, config);
    let captions: Vec<(ElementCandidate, Caption)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), caption_candidate(c, i, screen, config)))
        .collect();
    let mut out = Vec::new();
    for (index, (cand, cap)) in captions.iter().enumerate() {
        if cap.category == ElementCategory::Information {
            continue;
        }
        let element = cand.matched_element.as_deref().and_then(|id| screen.element(id));
        let spec = spec_for(element, cap, index, Some(app));
        out.push(GeneratedTask {
            screen: screen.id.clone(),
            spec,
            source: cand.source,
            matched_element: cand.matched_element.clone(),
        });
    }
    Ok(out)
}

fn first_line(s: &str) -> String {
    s.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("").to_string()
}
