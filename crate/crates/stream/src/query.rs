//! Continuous-query text.
//!
//! ```text
//! EVERY <n> <unit> compute the <agg> [value] of [the] <attr>
//!     (of the last <n> <unit> | starting <n> <unit> ago)
//!     FROM <store words> and streaming <stream words>
//! ```
//!
//! Units are second(s), minute(s), hour(s) and day(s). Keywords are
//! case-sensitive; any run of whitespace separates words.

use std::fmt;

use thiserror::Error;

use crate::aggregate::AggregateKind;
use crate::tuple::Timestamp;
use crate::window::WindowSpec;

const UNITS: [(&str, u64); 4] = [("day", 86_400), ("hour", 3_600), ("minute", 60), ("second", 1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryWindow {
    /// `of the last <width>`: a window sliding by the query period.
    Last(u64),
    /// `starting <lookback> ago`: a landmark anchored when the query is registered.
    StartingAgo(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContinuousQuery {
    /// Seconds between evaluations.
    pub period: u64,
    pub aggregate: AggregateKind,
    pub attribute: String,
    pub window: QueryWindow,
    pub historic_source: String,
    pub live_source: String,
}

/// A query registered at a fixed time, which pins landmark origins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundQuery {
    pub query: ContinuousQuery,
    pub registered_at: Timestamp,
}

impl ContinuousQuery {
    pub fn register(&self, at: Timestamp) -> BoundQuery {
        BoundQuery { query: self.clone(), registered_at: at }
    }
}

impl BoundQuery {
    pub fn window_spec(&self) -> WindowSpec {
        match self.query.window {
            QueryWindow::Last(width) => WindowSpec::Sliding { width: width as i64, slide: self.query.period as i64 },
            QueryWindow::StartingAgo(t) => WindowSpec::Landmark { origin: self.registered_at - t as i64 },
        }
    }

    /// Evaluation instants `registered_at + k * period` for `k = 0, 1, ...` up to `until`.
    pub fn schedule(&self, until: Timestamp) -> impl Iterator<Item = Timestamp> + '_ {
        (0..)
            .map(move |k: i64| self.registered_at + k * self.query.period as i64)
            .take_while(move |&t| t <= until)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryErrorKind {
    #[error("expected {expected}, found `{found}`")]
    Expected { expected: String, found: String },
    #[error("expected {0}, found end of query")]
    UnexpectedEnd(String),
    #[error("unknown aggregate `{0}`")]
    UnknownAggregate(String),
    #[error("unknown time unit `{0}`")]
    UnknownUnit(String),
    #[error("duration must be positive")]
    NonPositiveDuration,
    #[error("`{0}` is not a number")]
    BadNumber(String),
    #[error("duration is too large")]
    Overflow,
}

/// A parse failure at byte offset `position` of the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {position}: {kind}")]
pub struct QueryError {
    pub position: usize,
    pub kind: QueryErrorKind,
}

struct Parser<'a> {
    words: Vec<(usize, &'a str)>,
    next: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let mut words = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    words.push((s, &text[s..i]));
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            words.push((s, &text[s..]));
        }
        Self { words, next: 0, end: text.len() }
    }

    fn fail<T>(&self, position: usize, kind: QueryErrorKind) -> Result<T, QueryError> {
        Err(QueryError { position, kind })
    }

    fn peek(&self) -> Option<&'a str> {
        self.words.get(self.next).map(|w| w.1)
    }

    fn peek_at(&self, ahead: usize) -> Option<&'a str> {
        self.words.get(self.next + ahead).map(|w| w.1)
    }

    fn word(&mut self, what: &str) -> Result<(usize, &'a str), QueryError> {
        match self.words.get(self.next) {
            Some(&w) => {
                self.next += 1;
                Ok(w)
            }
            None => self.fail(self.end, QueryErrorKind::UnexpectedEnd(what.to_string())),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        let (pos, w) = self.word(&format!("`{kw}`"))?;
        if w != kw {
            return self.fail(pos, QueryErrorKind::Expected { expected: format!("`{kw}`"), found: w.to_string() });
        }
        Ok(())
    }

    fn duration(&mut self) -> Result<u64, QueryError> {
        let (pos, n) = self.word("a number")?;
        let count: i128 = match n.parse() {
            Ok(c) => c,
            Err(_) => return self.fail(pos, QueryErrorKind::BadNumber(n.to_string())),
        };
        if count <= 0 {
            return self.fail(pos, QueryErrorKind::NonPositiveDuration);
        }
        let (upos, unit) = self.word("a time unit")?;
        let Some(&(_, secs)) = UNITS.iter().find(|(name, _)| unit == *name || unit.strip_suffix('s') == Some(name)) else {
            return self.fail(upos, QueryErrorKind::UnknownUnit(unit.to_string()));
        };
        match u64::try_from(count).ok().and_then(|c| c.checked_mul(secs)).filter(|&s| s <= i64::MAX as u64) {
            Some(s) => Ok(s),
            None => self.fail(pos, QueryErrorKind::Overflow),
        }
    }

    /// Words up to (not including) the first `stop` pair, or to the end.
    fn words_until(&mut self, what: &str, stop: Option<(&str, &str)>) -> Result<String, QueryError> {
        let start = self.next;
        while let Some(w) = self.peek() {
            if stop.is_some_and(|(a, b)| w == a && self.peek_at(1) == Some(b)) {
                break;
            }
            self.next += 1;
        }
        if self.next == start {
            let pos = self.words.get(start).map_or(self.end, |w| w.0);
            let found = self.words.get(start).map(|w| w.1.to_string());
            return match found {
                Some(found) => self.fail(pos, QueryErrorKind::Expected { expected: what.to_string(), found }),
                None => self.fail(pos, QueryErrorKind::UnexpectedEnd(what.to_string())),
            };
        }
        Ok(self.words[start..self.next].iter().map(|w| w.1).collect::<Vec<_>>().join(" "))
    }
}

pub fn parse_query(text: &str) -> Result<ContinuousQuery, QueryError> {
    let mut p = Parser::new(text);
    p.keyword("EVERY")?;
    let period = p.duration()?;
    p.keyword("compute")?;
    p.keyword("the")?;
    let (apos, agg) = p.word("an aggregate")?;
    let aggregate = agg.parse().map_err(|a| QueryError { position: apos, kind: QueryErrorKind::UnknownAggregate(a) })?;
    if p.peek() == Some("value") {
        p.next += 1;
    }
    p.keyword("of")?;
    if p.peek() == Some("the") && p.peek_at(1).is_some_and(|w| w != "of" && w != "starting") {
        p.next += 1;
    }
    let (_, attribute) = p.word("an attribute name")?;
    let (wpos, w) = p.word("`of the last` or `starting`")?;
    let window = match w {
        "of" => {
            p.keyword("the")?;
            p.keyword("last")?;
            QueryWindow::Last(p.duration()?)
        }
        "starting" => {
            let lookback = p.duration()?;
            p.keyword("ago")?;
            QueryWindow::StartingAgo(lookback)
        }
        other => {
            return p.fail(wpos, QueryErrorKind::Expected {
                expected: "`of the last` or `starting`".into(),
                found: other.to_string(),
            })
        }
    };
    p.keyword("FROM")?;
    let historic_source = p.words_until("a store name", Some(("and", "streaming")))?;
    p.keyword("and")?;
    p.keyword("streaming")?;
    let live_source = p.words_until("a stream name", None)?;
    Ok(ContinuousQuery { period, aggregate, attribute: attribute.to_string(), window, historic_source, live_source })
}

fn render_duration(secs: u64) -> String {
    let (name, size) = UNITS.iter().copied().find(|&(_, size)| secs.is_multiple_of(size)).expect("seconds divide everything");
    let n = secs / size;
    format!("{n} {name}{}", if n == 1 { "" } else { "s" })
}

impl fmt::Display for ContinuousQuery {
    /// Canonical text: largest whole unit, `value` after the aggregate,
    /// single spaces.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EVERY {} compute the {} value of {} ", render_duration(self.period), self.aggregate, self.attribute)?;
        match self.window {
            QueryWindow::Last(w) => write!(f, "of the last {}", render_duration(w))?,
            QueryWindow::StartingAgo(t) => write!(f, "starting {} ago", render_duration(t))?,
        }
        write!(f, " FROM {} and streaming {}", self.historic_source, self.live_source)
    }
}
