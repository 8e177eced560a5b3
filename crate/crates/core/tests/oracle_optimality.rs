//! The oracle agent finishes fault-free tasks in the fewest agent steps a
//! breadth-first search over whole gestures can find.

mod common;

use std::collections::VecDeque;
use std::sync::Arc;

use fa11y::agent::{Action, OracleAgent};
use fa11y::app_model::{ActivationEffect, AppDefinition, EnvState};
use fa11y::criterion::{Evidence, Predicate};
use fa11y::executor::{execute_task, prepare_env, ExecutorConfig, Terminal};
use fa11y::screenreader::{ScreenReader, Swipe};
use fa11y::taskgen::{generate_tasks, DetectorConfig, TaskSpecification};
use proptest::prelude::*;

const LABELS: [&str; 6] = ["Search", "Profile", "Dark mode", "Email address", "Notifications", "Help"];

fn build(kinds: &[u8]) -> AppDefinition {
    let mut elements = vec![common::text("title", "Welcome")];
    let mut extra = Vec::new();
    for (i, k) in kinds.iter().enumerate() {
        let (id, label) = (format!("e{i}"), LABELS[i]);
        elements.push(match k % 4 {
            0 => {
                let dest = format!("dest{i}");
                extra.push(common::titled(&dest, &format!("{label} page")));
                common::button(&id, label, ActivationEffect::Navigate { target: dest })
            }
            1 => common::toggle(&id, label),
            2 => common::input(&id, label),
            _ => common::button(&id, label, ActivationEffect::AnnounceOnly { text: format!("{label} opened") }),
        });
    }
    let mut screens = vec![common::screen("home", elements)];
    screens.extend(extra);
    common::app(screens)
}

fn moves(n: u32, typed: &str) -> Vec<Action> {
    let mut out = vec![Action::DoubleTap, Action::Type { typed_text: typed.to_string() }];
    for r in 1..=n {
        out.push(Action::SwipeRight(Swipe::explore(r)));
        out.push(Action::SwipeLeft(Swipe::explore(r)));
    }
    out
}

/// Fewest whole actions after which one step's observation satisfies the task.
fn bfs_min(app: Arc<AppDefinition>, task: &TaskSpecification, depth: usize) -> Option<usize> {
    let proxy = ScreenReader::default();
    let crit = task.criterion();
    let n = app.screen(&app.initial_screen).unwrap().elements.len() as u32;
    let typed = crit
        .predicates()
        .iter()
        .find_map(|p| match p {
            Predicate::State { value, .. } => Some(value.clone()),
            _ => None,
        })
        .unwrap_or_default();
    let actions = moves(n, &typed);
    let mut queue: VecDeque<(EnvState, usize)> = VecDeque::from([(prepare_env(app, task), 0)]);
    while let Some((env, d)) = queue.pop_front() {
        if d == depth {
            continue;
        }
        for a in &actions {
            let mut next = env.clone();
            let Some(g) = a.gesture() else { continue };
            let Ok(r) = proxy.perform(&mut next, &g) else { continue };
            let texts = r.texts();
            let ev = Evidence { transcripts: &texts, keyboard: next.keyboard_visible, screen: Some(&next.current_screen) };
            if crit.holds(&ev) {
                return Some(d + 1);
            }
            queue.push_back((next, d + 1));
        }
    }
    None
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn oracle_step_count_is_minimal(kinds in prop::collection::vec(0u8..4, 1..=5)) {
        let app = Arc::new(build(&kinds));
        let config = ExecutorConfig::default();
        let tasks = generate_tasks(&app, "home", &DetectorConfig::noiseless(7)).unwrap();
        prop_assert!(!tasks.is_empty());
        for t in tasks {
            let target = OracleAgent::resolve_target(&app, &t.spec);
            let mut agent = OracleAgent::new(app.clone(), target.as_deref(), config.k, config.max_exploration_attempts);
            let trace = execute_task(app.clone(), &t.spec, &mut agent, &config);
            prop_assert_eq!(trace.terminal, Terminal::Complete, "{}", t.spec.desc);
            let best = bfs_min(app.clone(), &t.spec, trace.steps.len());
            prop_assert_eq!(best, Some(trace.steps.len()), "{}", t.spec.desc);
        }
    }
}
