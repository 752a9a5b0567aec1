//! Random streams and naive recompute oracles. The oracles never call the
//! crate's window or aggregate code.

#![allow(dead_code)]

use std::sync::Arc;

use rand::prelude::*;
use tiersim_stream::{
    evaluate_window, parse_query, AggregateKind, BoundedBuffer, ContinuousQuery, HistoricStore, QueryWindow, StreamError,
    StreamTuple, Value, WindowSpec,
};

/// Time-ordered tuples with repeated timestamps. Each carries a distinct
/// `seq`, and `x` is a multiple of 1/16 so every sum is exact.
pub fn random_stream(rng: &mut impl Rng, max_len: usize) -> Vec<StreamTuple> {
    let n = rng.gen_range(0..=max_len);
    let mut ts = rng.gen_range(-50..50);
    (0..n)
        .map(|i| {
            ts += [0, 0, 1, 1, 2, 5, 17][rng.gen_range(0..7)];
            let x = if rng.gen_bool(0.2) {
                Value::Int(rng.gen_range(-1000..1000))
            } else {
                Value::Float(rng.gen_range(-16_000..16_000) as f64 / 16.0)
            };
            StreamTuple::from_pairs(ts, [("seq", Value::Int(i as i64)), ("x", x)])
        })
        .collect()
}

pub fn random_window(rng: &mut impl Rng) -> WindowSpec {
    match rng.gen_range(0..3) {
        0 => WindowSpec::Tumbling { width: rng.gen_range(1..60), origin: rng.gen_range(-30..30) },
        1 => WindowSpec::Sliding { width: rng.gen_range(1..120), slide: rng.gen_range(1..30) },
        _ => WindowSpec::Landmark { origin: rng.gen_range(-80..200) },
    }
}

fn in_window(spec: &WindowSpec, now: i64, ts: i64) -> bool {
    match *spec {
        WindowSpec::Sliding { width, .. } => now - width <= ts && ts <= now,
        WindowSpec::Landmark { origin } => origin <= ts && ts <= now,
        WindowSpec::Tumbling { width, origin } => {
            // walk aligned boundaries to the last one not after now
            let mut end = origin;
            while end > now {
                end -= width;
            }
            while end + width <= now {
                end += width;
            }
            end - width <= ts && ts < end
        }
    }
}

/// Recomputes the aggregate from scratch; `None` means an empty window.
pub fn naive(tuples: &[StreamTuple], spec: &WindowSpec, now: i64, kind: AggregateKind) -> Option<Value> {
    let xs: Vec<f64> = tuples
        .iter()
        .filter(|t| in_window(spec, now, t.timestamp))
        .map(|t| match t.get("x") {
            Some(Value::Int(i)) => *i as f64,
            Some(Value::Float(f)) => *f,
            _ => panic!("generated tuples carry a numeric x"),
        })
        .collect();
    if kind == AggregateKind::Count {
        return Some(Value::Int(xs.len() as i64));
    }
    if xs.is_empty() {
        return None;
    }
    let mut r = xs[0];
    for &x in &xs[1..] {
        r = match kind {
            AggregateKind::Min => if x < r { x } else { r },
            AggregateKind::Max => if x > r { x } else { r },
            _ => r + x,
        };
    }
    Some(Value::Float(if kind == AggregateKind::Mean { r / xs.len() as f64 } else { r }))
}

fn compare(got: Result<Value, StreamError>, want: Option<Value>, what: &str) -> Result<(), String> {
    match (got, want) {
        (Ok(g), Some(w)) if g == w => Ok(()),
        (Err(StreamError::EmptyWindow), None) => Ok(()),
        (got, want) => Err(format!("{what}: evaluate gave {got:?}, oracle {want:?}")),
    }
}

fn fresh_store(dir: &std::path::Path, name: &str) -> Arc<HistoricStore> {
    Arc::new(HistoricStore::create(name, dir.join(format!("{name}.log"))).unwrap())
}

fn probe_times(rng: &mut impl Rng, stream: &[StreamTuple], spec: &WindowSpec) -> Vec<i64> {
    let last = stream.last().map_or(0, |t| t.timestamp);
    let mut times: Vec<i64> = (0..4).map(|_| rng.gen_range(-60..last + 60)).collect();
    times.push(last);
    if let WindowSpec::Landmark { origin } = *spec {
        times.retain(|&t| t >= origin);
        times.push(origin);
    }
    times
}

/// History in a store, the rest pushed live; evaluate must match the naive
/// oracle over the whole stream for every aggregate.
pub fn check_merge_case(rng: &mut impl Rng) -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let stream = random_stream(rng, 200);
    let spec = random_window(rng);
    let split = rng.gen_range(0..=stream.len());
    let history = fresh_store(dir.path(), "history");
    history.append_all(&stream[..split]).map_err(|e| e.to_string())?;
    let capacity = rng.gen_range(1..=stream.len().max(1) + 1);
    let live = BoundedBuffer::new(capacity, fresh_store(dir.path(), "spill")).unwrap();
    // spilled tuples land in the history store when the flag is set
    let live = if rng.gen_bool(0.5) { BoundedBuffer::new(capacity, history.clone()).unwrap() } else { live };
    let spills_elsewhere = !Arc::ptr_eq(live.store(), &history);
    for t in &stream[split..] {
        live.push(t.clone()).map_err(|e| e.to_string())?;
    }
    let visible: Vec<StreamTuple> = if spills_elsewhere {
        let spilled = live.store().scan().unwrap();
        stream.iter().filter(|t| !spilled.contains(t)).cloned().collect()
    } else {
        stream.clone()
    };
    for now in probe_times(rng, &stream, &spec) {
        for kind in AggregateKind::ALL {
            let got = evaluate_window(&spec, kind, "x", &history, &live, now);
            compare(got, naive(&visible, &spec, now, kind), &format!("{spec:?} now={now} {kind}"))?;
        }
    }
    Ok(())
}

/// Pushing through a small buffer loses nothing and evaluates exactly like
/// an unbounded buffer.
pub fn check_spill_case(rng: &mut impl Rng, capacity: usize) -> Result<(), String> {
    let dir = tempfile::tempdir().unwrap();
    let stream = random_stream(rng, 150);
    let small_store = fresh_store(dir.path(), "small");
    let small = BoundedBuffer::new(capacity, small_store.clone()).unwrap();
    let big_store = fresh_store(dir.path(), "big");
    let big = BoundedBuffer::new(stream.len() + 1, big_store.clone()).unwrap();
    for t in &stream {
        small.push(t.clone()).map_err(|e| e.to_string())?;
        big.push(t.clone()).map_err(|e| e.to_string())?;
    }
    if small.len() > capacity {
        return Err(format!("buffer holds {} > capacity {capacity}", small.len()));
    }
    let mut rejoined = small_store.scan().map_err(|e| e.to_string())?;
    rejoined.extend(small.snapshot());
    if rejoined != stream {
        return Err(format!("capacity {capacity}: store + buffer differs from the pushed stream"));
    }
    if !big_store.scan().unwrap().is_empty() {
        return Err("unbounded buffer spilled".into());
    }
    let spec = random_window(rng);
    for now in probe_times(rng, &stream, &spec) {
        for kind in AggregateKind::ALL {
            let a = evaluate_window(&spec, kind, "x", &small_store, &small, now);
            let b = evaluate_window(&spec, kind, "x", &big_store, &big, now);
            match (&a, &b) {
                (Ok(x), Ok(y)) if x == y => {}
                (Err(StreamError::EmptyWindow), Err(StreamError::EmptyWindow)) => {}
                _ => return Err(format!("capacity {capacity}, {spec:?} now={now} {kind}: {a:?} vs {b:?}")),
            }
        }
    }
    Ok(())
}

/// The three speed-test queries, verbatim including tabs and line breaks.
pub const SPEEDTEST_QUERIES: [&str; 3] = [
    "EVERY 60 seconds compute the max value of download_speed \nof the last 3 minutes \nFROM \tcassandra database neubot series speedtests and streaming \nRabbitMQ queue neubotspeed",
    "EVERY \t5 minutes compute the mean of the download_speed \nof the last 120 days \nFROM \tcassandra database neubot series speedtests and streaming \nrabbitmq queue neubotspeed",
    "EVERY 30 seconds compute the mean value of upload_speed \n starting 10 days ago \nFROM \tcassandra database neubot series speedtests and streaming\nrabbitmq queue neubotspeed",
];

pub fn speedtest_expected() -> [ContinuousQuery; 3] {
    let q = |period, aggregate, attribute: &str, window, live: &str| ContinuousQuery {
        period,
        aggregate,
        attribute: attribute.to_string(),
        window,
        historic_source: "cassandra database neubot series speedtests".to_string(),
        live_source: live.to_string(),
    };
    [
        q(60, AggregateKind::Max, "download_speed", QueryWindow::Last(180), "RabbitMQ queue neubotspeed"),
        q(300, AggregateKind::Mean, "download_speed", QueryWindow::Last(10_368_000), "rabbitmq queue neubotspeed"),
        q(30, AggregateKind::Mean, "upload_speed", QueryWindow::StartingAgo(864_000), "rabbitmq queue neubotspeed"),
    ]
}

/// Each query parses to its pinned form and its canonical text round-trips.
pub fn check_speedtest_queries() -> Result<(), String> {
    for (text, want) in SPEEDTEST_QUERIES.iter().zip(speedtest_expected()) {
        let got = parse_query(text).map_err(|e| format!("{text:?}: {e}"))?;
        if got != want {
            return Err(format!("{text:?} parsed to {got:?}"));
        }
        let canonical = got.to_string();
        let reparsed = parse_query(&canonical).map_err(|e| format!("{canonical:?}: {e}"))?;
        if reparsed != got || reparsed.to_string() != canonical {
            return Err(format!("{canonical:?} does not round-trip"));
        }
    }
    Ok(())
}
