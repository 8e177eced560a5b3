//! Brute-force traversal model and the proxy property checks run against it.
#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use fa11y::app_model::{reset_env, ActivationEffect, ActivationPath, AppDefinition, FocusTrap};
use fa11y::screenreader::{linearize, GestureRequest, ScreenReader, Swipe, WRAP_TOKEN};
use fa11y::similarity::{transcript_similarity, DEFAULT_STOP_THRESHOLD};
use proptest::prelude::*;

use super::{app, button, screen};

pub const LABELS: [&str; 5] = ["Alpha", "Bravo", "Charlie", "Delta", "Echo"];

#[derive(Debug, Clone)]
pub struct Fx {
    pub label: usize,
    pub focusable: bool,
    pub enabled: bool,
}

#[derive(Debug, Clone)]
pub struct Gesture {
    pub right: bool,
    pub reps: u32,
    /// Label index (5 means a label that never matches) and occurrence.
    pub stop: Option<(usize, u32)>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub elements: Vec<Fx>,
    pub trap: Option<(usize, usize)>,
    pub gestures: Vec<Gesture>,
}

pub fn fixture_strategy() -> impl Strategy<Value = Fixture> {
    let el = (0usize..5, prop::bool::weighted(0.8), prop::bool::weighted(0.8))
        .prop_map(|(label, focusable, enabled)| Fx { label, focusable, enabled });
    let gesture = (any::<bool>(), 1u32..20, prop::option::of((0usize..6, 1u32..3)))
        .prop_map(|(right, reps, stop)| Gesture { right, reps, stop });
    (prop::collection::vec(el, 0..=8), prop::option::of((0usize..8, 0usize..8)), prop::collection::vec(gesture, 1..6))
        .prop_map(|(elements, trap, gestures)| Fixture { elements, trap, gestures })
}

impl Fixture {
    pub fn transcript(&self, i: usize) -> String {
        format!("{}, button", LABELS[self.elements[i].label])
    }

    /// Trap as element indices, kept only when both ends are focusable and ordered.
    pub fn valid_trap(&self) -> Option<(usize, usize)> {
        let (a, b) = self.trap?;
        (a <= b && b < self.elements.len() && self.elements[a].focusable && self.elements[b].focusable).then_some((a, b))
    }

    pub fn build(&self) -> AppDefinition {
        let els = self
            .elements
            .iter()
            .enumerate()
            .map(|(i, fx)| {
                let mut e = button(&format!("e{i}"), LABELS[fx.label], ActivationEffect::AnnounceOnly { text: format!("Tapped {i}") });
                let a = e.a11y.as_mut().unwrap();
                a.focusable = fx.focusable;
                a.activation_enabled = fx.enabled;
                e
            })
            .collect();
        let mut s = screen("s", els);
        s.focus_trap = self.valid_trap().map(|(a, b)| FocusTrap { first: format!("e{a}"), last: format!("e{b}") });
        app(vec![s])
    }

    /// Focusable element indices in reading order.
    pub fn order(&self) -> Vec<usize> {
        (0..self.elements.len()).filter(|&i| self.elements[i].focusable).collect()
    }
}

/// Successor tables derived from the explicit visiting order a user hears
/// when swiping from an unfocused start: the plain cycle with a wrap marker
/// between laps, overridden by the trap's closed loop.
pub struct Model {
    pub order: Vec<usize>,
    right: HashMap<Option<usize>, (usize, bool)>,
    left: HashMap<Option<usize>, (usize, bool)>,
}

fn record(orbit: &[Option<usize>], table: &mut HashMap<Option<usize>, (usize, bool)>) {
    // `None` entries in the orbit are wrap markers; the very first entry is the start.
    let mut prev: Option<usize> = None;
    let mut wrapped = false;
    let mut started = false;
    for item in orbit {
        match item {
            None => wrapped = true,
            Some(x) => {
                let key = if started { Some(prev.unwrap()) } else { None };
                table.insert(key, (*x, wrapped));
                prev = Some(*x);
                started = true;
                wrapped = false;
            }
        }
    }
}

impl Model {
    pub fn new(fx: &Fixture) -> Self {
        let order = fx.order();
        let n = order.len();
        let (mut right, mut left) = (HashMap::new(), HashMap::new());
        if n > 0 {
            let mut lap_r: Vec<Option<usize>> = (0..n).map(Some).collect();
            let mut lap_l: Vec<Option<usize>> = (0..n).rev().map(Some).collect();
            for _ in 0..2 {
                lap_r.push(None);
                lap_r.extend((0..n).map(Some));
                lap_l.push(None);
                lap_l.extend((0..n).rev().map(Some));
            }
            record(&lap_r, &mut right);
            record(&lap_l, &mut left);
            if let Some((a, b)) = fx.valid_trap() {
                let (pa, pb) = (order.iter().position(|&i| i == a).unwrap(), order.iter().position(|&i| i == b).unwrap());
                right.insert(Some(pb), (pa, false));
                left.insert(Some(pa), (pb, false));
            }
        }
        Model { order, right, left }
    }

    /// Transcripts, wraps included, and the final position for one swipe.
    pub fn swipe(&self, fx: &Fixture, from: Option<usize>, g: &Gesture) -> (Vec<String>, Option<usize>) {
        if self.order.is_empty() {
            return (vec![WRAP_TOKEN.to_string()], None);
        }
        let table = if g.right { &self.right } else { &self.left };
        let mut pos = from;
        let mut out = Vec::new();
        let mut hits = 0;
        for _ in 0..g.reps {
            let (next, wrapped) = table[&pos];
            if wrapped {
                out.push(WRAP_TOKEN.to_string());
            }
            pos = Some(next);
            let t = fx.transcript(self.order[next]);
            out.push(t.clone());
            if let Some((label, occ)) = g.stop {
                if transcript_similarity(&t, &stop_text(label)) >= DEFAULT_STOP_THRESHOLD {
                    hits += 1;
                    if hits == occ {
                        break;
                    }
                }
            }
        }
        (out, pos)
    }
}

pub fn stop_text(label: usize) -> String {
    LABELS.get(label).map_or_else(|| "Zulu, image".to_string(), |l| format!("{l}, button"))
}

pub fn request(g: &Gesture) -> GestureRequest {
    let s = match g.stop {
        Some((label, occ)) => Swipe::to(g.reps, stop_text(label), occ),
        None => Swipe::explore(g.reps),
    };
    if g.right {
        GestureRequest::SwipeRight(s)
    } else {
        GestureRequest::SwipeLeft(s)
    }
}

/// Runs every property on one fixture.
pub fn check_fixture(fx: &Fixture) -> Result<(), String> {
    let app = Arc::new(fx.build());
    app.validate().map_err(|e| e.to_string())?;
    let proxy = ScreenReader::default();
    let model = Model::new(fx);
    let n = model.order.len();

    // traversal completeness
    if n > 0 && fx.valid_trap().is_none() {
        let mut env = reset_env(app.clone());
        let r = proxy.perform(&mut env, &GestureRequest::SwipeRight(Swipe::explore(n as u32))).unwrap();
        let want: Vec<String> = model.order.iter().map(|&i| fx.transcript(i)).collect();
        if r.texts() != want {
            return Err(format!("completeness: heard {:?}, want {want:?}", r.texts()));
        }
        if linearize(&env).len() != n {
            return Err("linearization length".into());
        }
    }

    // wrap counting: wraps never consume a repetition
    if n > 0 && fx.valid_trap().is_none() {
        for reps in 1..=(3 * n as u32).min(60) {
            let mut env = reset_env(app.clone());
            let r = proxy.perform(&mut env, &GestureRequest::SwipeRight(Swipe::explore(reps))).unwrap();
            let wraps = r.transcripts.iter().filter(|t| t.is_wrap()).count();
            let spoken = r.transcripts.len() - wraps;
            if wraps != (reps as usize - 1) / n || spoken != reps as usize {
                return Err(format!("wrap count for {reps} reps over {n}: {wraps} wraps, {spoken} spoken"));
            }
            let indices: Vec<usize> = r.transcripts.iter().map(|t| t.index).collect();
            if indices != (0..r.transcripts.len()).collect::<Vec<_>>() {
                return Err("transcript indices are not consecutive".into());
            }
        }
    }

    // gesture sequences against the model, with stop_at soundness
    let mut env = reset_env(app.clone());
    let mut pos: Option<usize> = None;
    for g in &fx.gestures {
        let r = proxy.perform(&mut env, &request(g)).map_err(|e| e.to_string())?;
        let (want, next) = model.swipe(fx, pos, g);
        if r.texts() != want {
            return Err(format!("gesture {g:?} from {pos:?}: heard {:?}, want {want:?}", r.texts()));
        }
        pos = next;
        let focus = env.focus.as_ref().map(|f| f.element.clone());
        if focus != pos.map(|p| format!("e{}", model.order[p])) {
            return Err(format!("focus {focus:?} after {g:?}"));
        }
        if let Some((label, occ)) = g.stop {
            let stop = stop_text(label);
            let hits = r.texts().iter().filter(|t| transcript_similarity(t, &stop) >= DEFAULT_STOP_THRESHOLD).count();
            let spoken = r.transcripts.iter().filter(|t| !t.is_wrap()).count();
            let ok = if r.stopped_early {
                hits == occ as usize && r.texts().last().is_some_and(|t| transcript_similarity(t, &stop) >= DEFAULT_STOP_THRESHOLD)
            } else {
                n == 0 || (hits < occ as usize && spoken == g.reps as usize)
            };
            if !ok {
                return Err(format!("stop_at soundness for {g:?}: {hits} hits, stopped {}", r.stopped_early));
            }
        }
    }

    // touch and screen-reader activation agree whenever activation is enabled
    for (i, e) in fx.elements.iter().enumerate() {
        let id = format!("e{i}");
        let fresh = reset_env(app.clone());
        let (mut touch, mut sr) = (fresh.clone(), fresh.clone());
        let said_touch = touch.apply_activation(&id, ActivationPath::Touch);
        let said_sr = sr.apply_activation(&id, ActivationPath::ScreenReader);
        if e.enabled {
            if said_touch != said_sr || !touch.same_except_log(&sr) {
                return Err(format!("parity broken for e{i}"));
            }
        } else if !said_sr.is_empty() || !sr.same_except_log(&fresh) {
            return Err(format!("disabled e{i} reacted to a double-tap"));
        }
        if e.focusable && fx.valid_trap().is_none() {
            // reach it by swiping, then double-tap through the proxy
            let mut env = reset_env(app.clone());
            let k = model.order.iter().position(|&x| x == i).unwrap() as u32 + 1;
            proxy.perform(&mut env, &GestureRequest::SwipeRight(Swipe::explore(k))).unwrap();
            let r = proxy.perform(&mut env, &GestureRequest::DoubleTap).unwrap();
            let want = if e.enabled { said_touch.clone() } else { Vec::new() };
            if r.texts() != want {
                return Err(format!("double-tap on e{i}: {:?}, want {want:?}", r.texts()));
            }
        }
    }
    Ok(())
}
