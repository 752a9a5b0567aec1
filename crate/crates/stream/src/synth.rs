//! Seeded stand-in for broadband speed-test measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tuple::{StreamTuple, Timestamp, Value};

/// One tuple every `step` seconds in `[start, end)` with `download_speed`
/// and `upload_speed` in Mbit/s, following a daily cycle plus noise.
/// Values are multiples of 1/1024 so sums of them are exact.
pub fn neubot_series(seed: u64, start: Timestamp, end: Timestamp, step: i64) -> impl Iterator<Item = StreamTuple> {
    assert!(step > 0, "step must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let quantize = |v: f64| (v * 1024.0).round() / 1024.0;
    (0..)
        .map(move |k| start + k * step)
        .take_while(move |&ts| ts < end)
        .map(move |ts| {
            let phase = (ts.rem_euclid(86_400) as f64 / 86_400.0) * std::f64::consts::TAU;
            let load = 1.0 - 0.35 * (phase - 0.75 * std::f64::consts::PI).cos().max(0.0);
            let down = quantize((24.0 * load * rng.gen_range(0.6..1.4)).max(0.1));
            let up = quantize((3.0 * load * rng.gen_range(0.5..1.5)).max(0.05));
            StreamTuple::from_pairs(ts, [("download_speed", Value::Float(down)), ("upload_speed", Value::Float(up))])
        })
}
