//! Template-driven screen synthesis with seeded fault injection.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FaultPlan, HarnessError};
use crate::app_model::{
    ground_truth_errors, inject_fault, load_app, AccessibilityMetadata, ActivationEffect, AppDefinition, ElementCategory,
    ErrorCategory, FaultSpec, GroundTruth, Rect, Role, ScreenModel, UiElement, Viewport, APP_FORMAT_VERSION,
};
use crate::similarity::{token_overlap, transcript_similarity, DEFAULT_STOP_THRESHOLD};

const VIEWPORT: Viewport = Viewport { w: 1080, h: 2400 };
const MAX_FAULTS_PER_SCREEN: usize = 3;
const WRONG_LABELS: &[&str] = &["Next", "Continue", "Item", "Graphic", "View", "Learn", "Go", "Open"];

#[derive(Debug, Clone, Copy)]
enum Kind {
    Input,
    /// Off to On.
    Toggle,
    Navigate(&'static str),
    Overlay(&'static [&'static str]),
    Announce(&'static str),
}

#[derive(Debug, Clone, Copy)]
struct Archetype {
    name: &'static str,
    icon: Option<&'static str>,
    role: Role,
    kind: Kind,
}

const fn a(name: &'static str, role: Role, kind: Kind) -> Archetype {
    Archetype { name, icon: None, role, kind }
}

const fn icon(name: &'static str, icon: &'static str, role: Role, kind: Kind) -> Archetype {
    Archetype { name, icon: Some(icon), role, kind }
}

struct Template {
    key: &'static str,
    title: &'static str,
    info: &'static [&'static str],
    pool: &'static [Archetype],
}

use Kind::*;
use Role::{Ad, Button, Selector, Tab, TextInput};

const TEMPLATES: &[Template] = &[
    Template {
        key: "form",
        title: "Book a flight",
        info: &["Trip details", "Prices include taxes"],
        pool: &[
            icon("Back", "back-arrow", Button, Navigate("Home page")),
            a("Departure city", TextInput, Input),
            a("Arrival city", TextInput, Input),
            icon("Swap", "swap", Button, Announce("Departure and arrival swapped")),
            a("Outbound date", TextInput, Input),
            a("Return date", TextInput, Input),
            a("Round trip", Selector, Toggle),
            a("Flexible dates", Selector, Toggle),
            a("Number of adults", TextInput, Input),
            a("Cabin class", Button, Overlay(&["Economy", "Premium economy", "Business"])),
            a("Passenger name", TextInput, Input),
            a("Email address", TextInput, Input),
            a("Promo code", TextInput, Input),
            a("Search flights", Button, Navigate("Flight results")),
        ],
    },
    Template {
        key: "list",
        title: "Search results",
        info: &["24 items found", "Top rated"],
        pool: &[
            icon("Back", "back-arrow", Button, Navigate("Home page")),
            a("Search products", TextInput, Input),
            icon("Filter", "funnel", Button, Overlay(&["Brand", "Price range", "Customer rating"])),
            a("Sort by price", Selector, Toggle),
            a("Free shipping only", Selector, Toggle),
            a("Noise cancelling earbuds", Button, Navigate("Earbuds details")),
            a("Espresso machine", Button, Navigate("Espresso machine details")),
            a("Trail running jacket", Button, Navigate("Jacket details")),
            a("Smart watch", Button, Navigate("Watch details")),
            a("Desk organizer", Button, Navigate("Organizer details")),
            icon("Favorites", "heart", Selector, Toggle),
            icon("Share", "share", Button, Announce("Link copied")),
            a("Load more", Button, Announce("More results loaded")),
            icon("Cart", "cart", Button, Navigate("Shopping cart")),
        ],
    },
    Template {
        key: "tabs",
        title: "Discover",
        info: &["Recommended for you", "Trending now"],
        pool: &[
            a("Daily mix", Button, Navigate("Daily mix playlist")),
            a("Podcasts", Button, Navigate("Podcast library")),
            a("Play", Button, Announce("Playing")),
            a("Shuffle", Selector, Toggle),
            a("Download", Button, Announce("Download started")),
            icon("Add", "plus", Button, Overlay(&["New playlist", "New folder", "Import"])),
            a("More options", Button, Overlay(&["Share playlist", "Add to queue", "Report"])),
            a("Offline mode", Selector, Toggle),
            icon("Home", "home", Tab, Navigate("Home feed")),
            icon("Search", "magnifier", Tab, Navigate("Search page")),
            icon("Notifications", "bell", Tab, Navigate("Notification center")),
            icon("Profile", "person", Tab, Navigate("Your profile")),
            icon("Settings", "gear", Tab, Navigate("Settings page")),
        ],
    },
    Template {
        key: "menu",
        title: "Settings",
        info: &["Preferences", "Version 4.2"],
        pool: &[
            icon("Menu", "hamburger", Button, Overlay(&["My account", "Order history", "Help and support"])),
            a("Display name", TextInput, Input),
            a("Dark mode", Selector, Toggle),
            a("Push notifications", Selector, Toggle),
            a("Location access", Selector, Toggle),
            a("Autoplay videos", Selector, Toggle),
            a("Language", Button, Overlay(&["English", "Spanish", "French"])),
            a("Text size", Button, Overlay(&["Small", "Medium", "Large"])),
            a("Privacy policy", Button, Navigate("Privacy policy document")),
            a("Terms of service", Button, Navigate("Terms document")),
            a("Clear cache", Button, Announce("Cache cleared")),
            a("Sign out", Button, Announce("Signed out")),
            icon("Close", "close", Button, Navigate("Home page")),
        ],
    },
    Template {
        key: "feed",
        title: "News feed",
        info: &["Posted 2 hours ago", "Photo by Jamie"],
        pool: &[
            icon("Notifications", "bell", Button, Navigate("Notification center")),
            a("Messages", Button, Navigate("Inbox")),
            a("Write a post", TextInput, Input),
            a("Like post", Selector, Toggle),
            a("Comment", Button, Navigate("Comments")),
            a("Share post", Button, Announce("Post shared")),
            a("Follow author", Selector, Toggle),
            a("Bookmark", Selector, Toggle),
            a("Post options", Button, Overlay(&["Report post", "Mute author", "Copy link"])),
            a("Shop the summer sale", Ad, Navigate("Advertiser website")),
            a("Install game now", Ad, Announce("Opening store")),
            a("Refresh feed", Button, Announce("Feed updated")),
            icon("Profile", "person", Button, Navigate("Your profile")),
        ],
    },
];

pub const TEMPLATE_KEYS: [&str; 5] = ["form", "list", "tabs", "menu", "feed"];

/// What to synthesize.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub screens: usize,
    pub fault_plan: FaultPlan,
    pub seed: u64,
    /// Inclusive bounds on interactive elements per analyzed screen.
    pub interactive_range: (usize, usize),
}

impl CorpusSpec {
    pub fn new(screens: usize, fault_plan: FaultPlan, seed: u64) -> Self {
        CorpusSpec { screens, fault_plan, seed, interactive_range: (5, 9) }
    }

    /// Denser screens for fault-free success-rate runs.
    pub fn fault_free(screens: usize, seed: u64) -> Self {
        CorpusSpec { screens, fault_plan: FaultPlan::default(), seed, interactive_range: (7, 11) }
    }
}

/// On-disk index of a synthesized corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    /// App files relative to the manifest.
    pub apps: Vec<String>,
    pub fault_plan: FaultPlan,
    pub seed: u64,
    #[serde(default)]
    pub screens: usize,
    #[serde(default)]
    pub interactive_range: Option<(usize, usize)>,
}

fn slug(name: &str) -> String {
    let mut s = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            s.push(c.to_ascii_lowercase());
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_string()
}

fn row(i: usize) -> Rect {
    Rect::new(40, 120 + 140 * i as i32, 1000, 120)
}

fn text_element(id: &str, text: &str, i: usize) -> UiElement {
    UiElement {
        id: id.to_string(),
        bounds: row(i),
        role: Role::StaticText,
        visual_text: Some(text.to_string()),
        icon_class: None,
        touch_actionable: false,
        category: ElementCategory::Information,
        a11y: Some(AccessibilityMetadata {
            label: text.to_string(),
            role_announcement: String::new(),
            state_announcement: None,
            focusable: true,
            activation_enabled: true,
        }),
        on_activate: None,
    }
}

fn role_word(role: Role) -> &'static str {
    match role {
        Role::TextInput => "edit box",
        Role::Selector => "switch",
        Role::Tab => "tab",
        Role::Link => "link",
        _ => "button",
    }
}

fn interactive(arch: &Archetype, id: &str, i: usize, dest: Option<&str>) -> UiElement {
    let on_activate = match arch.kind {
        Input => ActivationEffect::ShowKeyboard { announce: format!("Editing, {}", arch.name) },
        Toggle => ActivationEffect::ToggleState { new_state: "On".into(), announce: "On".into() },
        Navigate(_) => ActivationEffect::Navigate { target: dest.expect("navigate needs a destination").to_string() },
        Overlay(items) => ActivationEffect::OpenOverlay {
            elements: items
                .iter()
                .enumerate()
                .map(|(k, item)| {
                    let mut e = interactive(&a(item, Button, Announce("")), &format!("{id}_option_{}", k + 1), k, None);
                    e.on_activate = Some(ActivationEffect::AnnounceOnly { text: format!("{item} selected") });
                    e
                })
                .collect(),
            announce: format!("{} menu\n{}", arch.name, items[0]),
        },
        Announce(text) => ActivationEffect::AnnounceOnly { text: text.to_string() },
    };
    UiElement {
        id: id.to_string(),
        bounds: row(i),
        role: arch.role,
        visual_text: if arch.icon.is_some() { None } else { Some(arch.name.to_string()) },
        icon_class: arch.icon.map(str::to_string),
        touch_actionable: true,
        category: match (arch.kind, arch.role) {
            (Input, _) => ElementCategory::Input,
            (_, Role::Tab | Role::Link) => ElementCategory::Navigation,
            _ => ElementCategory::Action,
        },
        a11y: Some(AccessibilityMetadata {
            label: arch.name.to_string(),
            role_announcement: role_word(arch.role).to_string(),
            state_announcement: matches!(arch.kind, Toggle).then(|| "Off".to_string()),
            focusable: true,
            activation_enabled: true,
        }),
        on_activate: Some(on_activate),
    }
}

struct Draft {
    template: &'static Template,
    id: String,
    /// Chosen archetypes in reading order.
    picks: Vec<&'static Archetype>,
    /// Extra info text and the pick index it precedes.
    info: Option<(&'static str, usize)>,
}

fn draft_screen(i: usize, spec: &CorpusSpec, rng: &mut ChaCha8Rng) -> Draft {
    let template = &TEMPLATES[i % TEMPLATES.len()];
    let (lo, hi) = spec.interactive_range;
    let hi = hi.clamp(1, template.pool.len());
    let n = rng.gen_range(lo.clamp(1, hi)..=hi);
    let mut idx: Vec<usize> = (0..template.pool.len()).collect();
    idx.shuffle(rng);
    idx.truncate(n);
    idx.sort_unstable();
    let picks = idx.iter().map(|&k| &template.pool[k]).collect::<Vec<_>>();
    let info = rng
        .gen_bool(0.5)
        .then(|| (*template.info.choose(rng).expect("info texts"), rng.gen_range(1..picks.len().max(2))));
    Draft { template, id: format!("{}_{:02}", template.key, i + 1), picks, info }
}

fn build_app(d: &Draft) -> AppDefinition {
    let mut elements = vec![text_element("title", d.template.title, 0)];
    let mut destinations = Vec::new();
    for (k, arch) in d.picks.iter().enumerate() {
        if let Some((text, before)) = d.info {
            if before == k {
                elements.push(text_element("info", text, elements.len()));
            }
        }
        let id = slug(arch.name);
        let dest = match arch.kind {
            Navigate(title) => {
                let dest_id = format!("{}__{id}", d.id);
                destinations.push(ScreenModel {
                    id: dest_id.clone(),
                    viewport: VIEWPORT,
                    title_announcement: Some(title.to_string()),
                    focus_trap: None,
                    elements: vec![text_element("heading", title, 0)],
                });
                Some(dest_id)
            }
            _ => None,
        };
        elements.push(interactive(arch, &id, elements.len(), dest.as_deref()));
    }
    let mut screens = vec![ScreenModel {
        id: d.id.clone(),
        viewport: VIEWPORT,
        title_announcement: Some(d.template.title.to_string()),
        focus_trap: None,
        elements,
    }];
    screens.extend(destinations);
    AppDefinition {
        version: APP_FORMAT_VERSION.into(),
        initial_screen: d.id.clone(),
        screens,
        metadata: BTreeMap::from([("template".to_string(), d.template.key.to_string())]),
        faults: Vec::new(),
    }
}

fn is_interactive(e: &UiElement) -> bool {
    e.category != ElementCategory::Information
}

fn eligible(e: &UiElement, category: ErrorCategory) -> bool {
    is_interactive(e)
        && match category {
            ErrorCategory::Feedback => matches!(
                e.on_activate,
                Some(ActivationEffect::ToggleState { .. } | ActivationEffect::OpenOverlay { .. })
            ),
            _ => true,
        }
}

fn wrong_label(screen: &ScreenModel, target: &UiElement) -> String {
    let name = target.a11y.as_ref().map_or("", |a| a.label.as_str());
    let labels: Vec<&str> = screen.elements.iter().filter_map(|e| e.a11y.as_ref()).map(|a| a.label.as_str()).collect();
    WRONG_LABELS
        .iter()
        .find(|w| {
            token_overlap(w, name) == 0.0
                && labels.iter().all(|l| transcript_similarity(l, w) < DEFAULT_STOP_THRESHOLD)
        })
        .copied()
        .unwrap_or("Unlabeled")
        .to_string()
}

/// Moves the last interactive element of the analyzed screen to the end of the
/// reading order and returns its id.
fn last_interactive_to_end(app: &mut AppDefinition) -> String {
    let screen = &mut app.screens[0];
    let pos = screen.elements.iter().rposition(is_interactive).expect("screens have interactive elements");
    let el = screen.elements.remove(pos);
    screen.elements.push(el);
    for (i, e) in screen.elements.iter_mut().enumerate() {
        e.bounds = row(i);
    }
    screen.elements.last().expect("non-empty").id.clone()
}

fn navigation_fault(app: &mut AppDefinition, clutter: bool, rng: &mut ChaCha8Rng) -> FaultSpec {
    let target = last_interactive_to_end(app);
    let screen = &app.screens[0];
    let f = FaultSpec::new(ErrorCategory::Navigation, &screen.id, &target);
    let n = screen.elements.len();
    if clutter || n < 4 {
        return f.with_param("clutter_count", rng.gen_range(20..=30u64));
    }
    let span = rng.gen_range(3..=4usize).min(n - 2);
    let first = &screen.elements[n - 1 - span].id;
    let last = &screen.elements[n - 2].id;
    f.with_param("trap_range", serde_json::json!([first, last]))
}

/// Builds the corpus: one analyzed screen per app plus navigation
/// destinations, with faults injected per plan.
pub fn synth_corpus(spec: &CorpusSpec) -> Result<Vec<AppDefinition>, HarnessError> {
    let plan = spec.fault_plan;
    if plan.navigation > spec.screens {
        return Err(HarnessError::Infeasible(format!(
            "{} navigation faults need as many screens, only {} requested",
            plan.navigation, spec.screens
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let drafts: Vec<Draft> = (0..spec.screens).map(|i| draft_screen(i, spec, &mut rng)).collect();
    let mut apps: Vec<AppDefinition> = drafts.iter().map(build_app).collect();

    let mut order: Vec<usize> = (0..apps.len()).collect();
    order.shuffle(&mut rng);
    let (nav, rest) = order.split_at(plan.navigation);
    let mut faults: Vec<Vec<FaultSpec>> = vec![Vec::new(); apps.len()];
    for (k, &s) in nav.iter().enumerate() {
        faults[s].push(navigation_fault(&mut apps[s], k % 2 == 0, &mut rng));
    }

    let mut wanted = Vec::new();
    for c in [ErrorCategory::Feedback, ErrorCategory::Label, ErrorCategory::Actionability, ErrorCategory::Locatability] {
        wanted.extend(std::iter::repeat_n(c, plan.count(c)));
    }
    let mut cursor = 0;
    for category in wanted {
        let mut placed = false;
        for step in 0..rest.len() {
            let s = rest[(cursor + step) % rest.len()];
            if faults[s].len() >= MAX_FAULTS_PER_SCREEN {
                continue;
            }
            let screen = &apps[s].screens[0];
            let free: Vec<&UiElement> = screen
                .elements
                .iter()
                .filter(|e| eligible(e, category) && faults[s].iter().all(|f| f.target != e.id))
                .collect();
            let Some(target) = free.choose(&mut rng) else { continue };
            let mut f = FaultSpec::new(category, &screen.id, &target.id);
            match category {
                ErrorCategory::Label => f = f.with_param("wrong_label", wrong_label(screen, target)),
                ErrorCategory::Locatability if rng.gen_bool(0.5) => f = f.with_param("remove_a11y", true),
                _ => {}
            }
            faults[s].push(f);
            cursor = (cursor + step + 1) % rest.len().max(1);
            placed = true;
            break;
        }
        if !placed {
            return Err(HarnessError::Infeasible(format!("no eligible element left for a {category} fault")));
        }
    }

    apps.into_iter()
        .zip(faults)
        .map(|(app, fs)| fs.iter().try_fold(app, |app, f| inject_fault(&app, f)).map_err(HarnessError::from))
        .collect()
}

/// Injected faults on each app's analyzed screen.
pub fn analyzed_ground_truth(apps: &[AppDefinition]) -> Vec<GroundTruth> {
    apps.iter()
        .flat_map(|app| ground_truth_errors(app).into_iter().filter(|g| g.screen == app.initial_screen))
        .collect()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// Writes `apps/<screen>.json`, `ground_truth.json` and `manifest.json`.
pub fn write_corpus(apps: &[AppDefinition], spec: &CorpusSpec, dir: &Path) -> Result<CorpusManifest, HarnessError> {
    let app_dir = dir.join("apps");
    fs::create_dir_all(&app_dir).map_err(io_err(&app_dir))?;
    let mut files = Vec::new();
    for app in apps {
        let rel = format!("apps/{}.json", app.initial_screen);
        let path = dir.join(&rel);
        fs::write(&path, app.to_json() + "\n").map_err(io_err(&path))?;
        files.push(rel);
    }
    let truth = dir.join("ground_truth.json");
    let body = serde_json::to_string_pretty(&analyzed_ground_truth(apps)).expect("ground truth serializes");
    fs::write(&truth, body + "\n").map_err(io_err(&truth))?;
    let manifest = CorpusManifest {
        apps: files,
        fault_plan: spec.fault_plan,
        seed: spec.seed,
        screens: spec.screens,
        interactive_range: Some(spec.interactive_range),
    };
    let path = dir.join("manifest.json");
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, body + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

/// Reads a corpus directory written by [`write_corpus`].
pub fn load_corpus(dir: &Path) -> Result<(CorpusManifest, Vec<AppDefinition>), HarnessError> {
    let path: PathBuf = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: CorpusManifest =
        serde_json::from_str(&text).map_err(|source| HarnessError::Json { path: path.clone(), source })?;
    let apps = manifest
        .apps
        .iter()
        .map(|rel| {
            let p = dir.join(rel);
            let doc = fs::read_to_string(&p).map_err(io_err(&p))?;
            Ok(load_app(&doc)?)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok((manifest, apps))
}
