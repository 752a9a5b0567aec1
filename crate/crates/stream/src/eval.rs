//! One evaluation of a windowed aggregate over history plus live tuples.

use std::collections::BTreeMap;

use crate::aggregate::{aggregate, AggregateKind};
use crate::buffer::BoundedBuffer;
use crate::error::StreamError;
use crate::query::BoundQuery;
use crate::store::HistoricStore;
use crate::tuple::{StreamTuple, Timestamp, Value};
use crate::window::{window_bounds, WindowSpec};

/// Merges two time-ordered sequences, history first among equal
/// timestamps. A live tuple identical to a not-yet-matched history tuple
/// with the same timestamp is dropped; repeats within one source are kept.
pub fn merge_sources<'a>(
    history: &'a [StreamTuple],
    live: impl IntoIterator<Item = &'a StreamTuple>,
) -> Vec<&'a StreamTuple> {
    let mut live = live.into_iter().peekable();
    let mut out = Vec::with_capacity(history.len());
    let mut h = 0;
    while h < history.len() || live.peek().is_some() {
        let ts = match (history.get(h), live.peek()) {
            (Some(a), Some(b)) => a.timestamp.min(b.timestamp),
            (Some(a), None) => a.timestamp,
            (None, Some(b)) => b.timestamp,
            (None, None) => unreachable!(),
        };
        let group_start = h;
        while history.get(h).is_some_and(|t| t.timestamp == ts) {
            out.push(&history[h]);
            h += 1;
        }
        let mut matched = vec![false; h - group_start];
        while let Some(t) = live.next_if(|t| t.timestamp == ts) {
            let twin = (group_start..h).find(|&i| !matched[i - group_start] && history[i] == *t);
            match twin {
                Some(i) => matched[i - group_start] = true,
                None => out.push(t),
            }
        }
    }
    out
}

/// Aggregates `attribute` over the window at `now`, reading the store's
/// in-window range and the buffer's in-window tuples. The buffer is held
/// for the whole read so no tuple is in flight between the two.
pub fn evaluate_window(
    spec: &WindowSpec,
    kind: AggregateKind,
    attribute: &str,
    store: &HistoricStore,
    live: &BoundedBuffer,
    now: Timestamp,
) -> Result<Value, StreamError> {
    let bounds = window_bounds(spec, now)?;
    live.with_contents(|buffered| {
        let history = store.range_bounds(&bounds)?;
        let merged = merge_sources(&history, buffered.iter().filter(|t| bounds.contains(t.timestamp)));
        aggregate(merged, attribute, kind)
    })
}

/// Evaluates a registered query at `now`; the result tuple has a single
/// `value` attribute.
pub fn evaluate(
    query: &BoundQuery,
    store: &HistoricStore,
    live: &BoundedBuffer,
    now: Timestamp,
) -> Result<StreamTuple, StreamError> {
    let q = &query.query;
    let value = evaluate_window(&query.window_spec(), q.aggregate, &q.attribute, store, live, now)?;
    Ok(StreamTuple { timestamp: now, attributes: BTreeMap::from([("value".to_string(), value)]) })
}
