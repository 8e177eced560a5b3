//! Success-criterion expressions attached to every task.
//!
//! A criterion is a conjunction of observable predicates:
//!
//! ```text
//! state(city_field)='New York, NY' & keyboard=true
//! announced~"Search results"
//! screen=detail
//! ```
//!
//! Criteria that do not parse (for example free text from a remote model) are
//! kept verbatim and evaluated by keyword matching.

use std::fmt;

use thiserror::Error;

use crate::screenreader::WRAP_TOKEN;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    /// The element's state value is announced.
    State { element: String, value: String },
    Screen(String),
    Keyboard(bool),
    /// Some announcement contains the text (case-insensitive).
    Announced(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Criterion {
    All(Vec<Predicate>),
    FreeText(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CriterionError {
    #[error("empty criterion")]
    Empty,
    #[error("unexpected input at byte {at}: {found:?}")]
    Unexpected { at: usize, found: String },
    #[error("unterminated string starting at byte {0}")]
    Unterminated(usize),
    #[error("keyboard predicate expects true or false, got {0:?}")]
    BadBool(String),
}

/// What a criterion is checked against: the announcements of one step.
#[derive(Debug, Clone, Copy)]
pub struct Evidence<'a> {
    pub transcripts: &'a [String],
    pub keyboard: bool,
    /// Current screen, when the caller tracked it.
    pub screen: Option<&'a str>,
}

impl Criterion {
    pub fn parse(text: &str) -> Result<Self, CriterionError> {
        Parser { src: text, pos: 0 }.parse_all().map(Criterion::All)
    }

    /// Parses, falling back to free text when the expression is malformed.
    pub fn parse_lenient(text: &str) -> Self {
        Self::parse(text).unwrap_or_else(|_| Criterion::FreeText(text.to_string()))
    }

    pub fn is_free_text(&self) -> bool {
        matches!(self, Criterion::FreeText(_))
    }

    pub fn predicates(&self) -> &[Predicate] {
        match self {
            Criterion::All(p) => p,
            Criterion::FreeText(_) => &[],
        }
    }

    /// The value a `state(element)=…` predicate expects, if any.
    pub fn expected_state(&self, element: &str) -> Option<&str> {
        self.predicates().iter().find_map(|p| match p {
            Predicate::State { element: e, value } if e == element => Some(value.as_str()),
            _ => None,
        })
    }

    pub fn holds(&self, ev: &Evidence<'_>) -> bool {
        let spoken: Vec<&str> = ev
            .transcripts
            .iter()
            .map(String::as_str)
            .filter(|t| *t != WRAP_TOKEN)
            .collect();
        match self {
            Criterion::All(preds) => !preds.is_empty() && preds.iter().all(|p| p.holds(&spoken, ev)),
            Criterion::FreeText(text) => free_text_holds(text, &spoken),
        }
    }
}

impl Predicate {
    fn holds(&self, spoken: &[&str], ev: &Evidence<'_>) -> bool {
        match self {
            Predicate::State { value, .. } => {
                !value.is_empty() && spoken.iter().any(|t| contains_parts(t, value))
            }
            Predicate::Screen(id) => ev.screen == Some(id.as_str()),
            Predicate::Keyboard(b) => ev.keyboard == *b,
            Predicate::Announced(s) => {
                let needle = s.to_lowercase();
                spoken.iter().any(|t| t.to_lowercase().contains(&needle))
            }
        }
    }
}

/// True when `value` occurs in `transcript` as a run of whole comma-separated
/// parts, so "on" does not match "Notifications, off, switch".
fn contains_parts(transcript: &str, value: &str) -> bool {
    let hay = format!(", {}, ", transcript.to_lowercase());
    let needle = format!(", {}, ", value.to_lowercase());
    hay.contains(&needle)
}

const STOPWORDS: &[&str] = &[
    "that", "with", "this", "from", "then", "have", "should", "been", "will", "into", "when",
    "screen", "task", "user", "element", "shows", "show", "announced", "state",
];

fn free_text_holds(text: &str, spoken: &[&str]) -> bool {
    let joined = spoken.join("\n").to_lowercase();
    let quoted = quoted_fragments(text);
    if !quoted.is_empty() {
        return quoted.iter().all(|q| joined.contains(&q.to_lowercase()));
    }
    let keywords: Vec<String> = crate::similarity::tokens(text)
        .into_iter()
        .filter(|t| t.len() >= 4 && !STOPWORDS.contains(&t.as_str()))
        .collect();
    !keywords.is_empty() && keywords.iter().all(|k| joined.contains(k.as_str()))
}

fn quoted_fragments(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for quote in ['"', '\''] {
        let parts: Vec<&str> = text.split(quote).collect();
        // odd pieces are inside a closed pair of quotes
        for i in (1..parts.len().saturating_sub(1)).step_by(2) {
            if !parts[i].trim().is_empty() {
                out.push(parts[i].to_string());
            }
        }
        if !out.is_empty() {
            break;
        }
    }
    out
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::State { element, value } => write!(f, "state({element})={}", quote(value, '\'')),
            Predicate::Screen(id) => write!(f, "screen={id}"),
            Predicate::Keyboard(b) => write!(f, "keyboard={b}"),
            Predicate::Announced(s) => write!(f, "announced~{}", quote(s, '"')),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::All(preds) => {
                for (i, p) in preds.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" & ")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            Criterion::FreeText(t) => f.write_str(t),
        }
    }
}

fn quote(s: &str, q: char) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push(q);
    for c in s.chars() {
        if c == q || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push(q);
    out
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn unexpected(&self) -> CriterionError {
        CriterionError::Unexpected {
            at: self.pos,
            found: self.rest().chars().take(12).collect(),
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), CriterionError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.unexpected())
        }
    }

    fn parse_all(mut self) -> Result<Vec<Predicate>, CriterionError> {
        self.skip_ws();
        if self.rest().is_empty() {
            return Err(CriterionError::Empty);
        }
        let mut preds = vec![self.predicate()?];
        loop {
            self.skip_ws();
            if self.rest().is_empty() {
                return Ok(preds);
            }
            if !(self.eat("&&") || self.eat("&")) {
                return Err(self.unexpected());
            }
            preds.push(self.predicate()?);
        }
    }

    fn predicate(&mut self) -> Result<Predicate, CriterionError> {
        if self.eat("state") {
            self.expect("(")?;
            let element = self.ident()?;
            self.expect(")")?;
            self.expect("=")?;
            let value = self.string()?;
            Ok(Predicate::State { element, value })
        } else if self.eat("screen") {
            self.expect("=")?;
            Ok(Predicate::Screen(self.ident()?))
        } else if self.eat("keyboard") {
            self.expect("=")?;
            let word = self.ident()?;
            match word.as_str() {
                "true" => Ok(Predicate::Keyboard(true)),
                "false" => Ok(Predicate::Keyboard(false)),
                _ => Err(CriterionError::BadBool(word)),
            }
        } else if self.eat("announced") {
            self.expect("~")?;
            Ok(Predicate::Announced(self.string()?))
        } else {
            Err(self.unexpected())
        }
    }

    fn ident(&mut self) -> Result<String, CriterionError> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-' || c == '.'))
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.unexpected());
        }
        let id = self.rest()[..len].to_string();
        self.pos += len;
        Ok(id)
    }

    fn string(&mut self) -> Result<String, CriterionError> {
        self.skip_ws();
        let start = self.pos;
        let mut chars = self.rest().char_indices();
        let q = match chars.next() {
            Some((_, c @ ('\'' | '"'))) => c,
            _ => return Err(self.unexpected()),
        };
        let mut out = String::new();
        let mut escaped = false;
        for (i, c) in chars {
            if escaped {
                out.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == q {
                self.pos = start + i + c.len_utf8();
                return Ok(out);
            } else {
                out.push(c);
            }
        }
        Err(CriterionError::Unterminated(start))
    }
}
