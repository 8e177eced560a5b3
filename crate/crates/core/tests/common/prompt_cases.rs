//! Fixed prompt contexts for golden comparison and a parser fuzz driver.
#![allow(dead_code)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use fa11y::agent::{
    parse_decision_response, parse_reflection_response, render_decision_prompt, render_reflection_prompt,
    render_stage1_prompt, render_stage2_prompt, Action, DecisionContext, MemoryState, PromptOptions, ReflectionContext,
    SwipeDirection,
};
use fa11y::screenreader::{Swipe, TranscriptItem};
use fa11y::taskgen::{ElemRef, TaskSpecification};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub fn task() -> TaskSpecification {
    TaskSpecification {
        desc: "Enter 'New York, NY' as the departure city".into(),
        prereq: vec![],
        elem: ElemRef { name: "City / airport input field".into(), index: 4 },
        crit: "state(departure_city)='New York, NY'".into(),
    }
}

fn items(texts: &[&str]) -> Vec<TranscriptItem> {
    texts.iter().enumerate().map(|(index, t)| TranscriptItem { index, transcript: t.to_string() }).collect()
}

pub fn rendered_prompts() -> Vec<(&'static str, String)> {
    let mut memory = MemoryState::new(&task().desc);
    memory.record("Swiped right to the departure field.".into());
    let heard = items(&["Book a flight", "City / airport input field, edit box"]);
    let decision = DecisionContext {
        task: task(),
        transcript_items: heard.clone(),
        focused_element_transcript: Some("City / airport input field, edit box".into()),
        keyboard_status: false,
        memory: memory.clone(),
        direction_hint: SwipeDirection::Right,
        attempts_remaining: 3,
    };
    let options = PromptOptions {
        additional_info: "### Progress ###\nStep 1: Swiped right to the departure field.".into(),
        typing_additional: "- The keyboard must be visible before typing.".into(),
    };
    let reflection = ReflectionContext {
        progress: memory.progress_summary.clone(),
        transcript_after: Vec::new(),
        keyboard_before: false,
        keyboard_after: false,
        thought: "The departure field is focused; activate it.".into(),
        action: Action::DoubleTap,
        task: task(),
    };
    let seek = Action::SwipeRight(Swipe::to(20, "City / airport input field, edit box", 1));
    vec![
        ("decision", render_decision_prompt(&decision, &options)),
        ("reflection", render_reflection_prompt(&reflection)),
        ("stage1", render_stage1_prompt(&task(), &Action::DoubleTap, &heard, &[])),
        (
            "stage2",
            render_stage2_prompt(&task(), &seek, "The double-tap produced no feedback.", &items(&["Book a flight"]), &heard),
        ),
    ]
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(format!("{name}.txt"))
}

/// Compares every rendered prompt to its golden file. With `FA11Y_BLESS=1`
/// the files are rewritten instead.
pub fn check_goldens() -> Result<(), String> {
    let bless = std::env::var("FA11Y_BLESS").is_ok_and(|v| v == "1");
    for (name, text) in rendered_prompts() {
        let path = golden_path(name);
        if bless {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &text).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        if want != text {
            let line = want.lines().zip(text.lines()).position(|(a, b)| a != b).unwrap_or(0);
            return Err(format!("{name} prompt differs from its golden file near line {}", line + 1));
        }
    }
    Ok(())
}

fn response_strategy() -> impl Strategy<Value = String> {
    let fragment = prop_oneof![
        Just("<|begin_think|>".to_string()),
        Just("<|end_think|>".to_string()),
        Just("<|begin_action|>".to_string()),
        Just("<|end_action|>".to_string()),
        Just("```json".to_string()),
        Just("```".to_string()),
        Just(r#"[{"action": {"action_type": "SWIPE_RIGHT", "repetitions": "20", "stop_at": "", "stop_at_occurrence": "1"}, "description": "x"}]"#.to_string()),
        Just(r#"{"action_type": "TYPE", "typed_text": 5}"#.to_string()),
        Just(r#"{"action_type": "SWIPE_LEFT", "repetitions": -3}"#.to_string()),
        Just(r#"{"action_type": "DOUBLE_TAP"}"#.to_string()),
        Just(r#"[{"action": null}]"#.to_string()),
        Just("A".to_string()),
        Just("[".to_string()),
        Just("{".to_string()),
        Just("\"".to_string()),
        "\\PC{0,24}",
        any::<String>(),
    ];
    prop::collection::vec(fragment, 0..8).prop_map(|parts| parts.concat())
}

/// Feeds `cases` generated responses to both parsers; any panic is a failure.
pub fn fuzz_parsers(cases: u32) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner
        .run(&response_strategy(), |raw| {
            let ok = catch_unwind(AssertUnwindSafe(|| {
                let _ = parse_decision_response(&raw);
                let _ = parse_reflection_response(&raw);
            }));
            ok.map_err(|_| TestCaseError::fail(format!("parser panicked on {raw:?}")))
        })
        .map_err(|e| e.to_string())
}
