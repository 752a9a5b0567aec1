use std::fmt;
use std::str::FromStr;

use crate::error::StreamError;
use crate::tuple::{StreamTuple, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregateKind {
    Min,
    Max,
    Mean,
    Count,
}

impl AggregateKind {
    pub const ALL: [AggregateKind; 4] = [AggregateKind::Min, AggregateKind::Max, AggregateKind::Mean, AggregateKind::Count];

    pub fn name(&self) -> &'static str {
        match self {
            AggregateKind::Min => "min",
            AggregateKind::Max => "max",
            AggregateKind::Mean => "mean",
            AggregateKind::Count => "count",
        }
    }
}

impl fmt::Display for AggregateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AggregateKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| s.to_string())
    }
}

/// Aggregates `attribute` over `tuples`. `Count` yields an `Int` and ignores
/// the attribute; the others yield a `Float` and fail on an empty input.
pub fn aggregate<'a>(
    tuples: impl IntoIterator<Item = &'a StreamTuple>,
    attribute: &str,
    kind: AggregateKind,
) -> Result<Value, StreamError> {
    if kind == AggregateKind::Count {
        return Ok(Value::Int(tuples.into_iter().count() as i64));
    }
    let mut n = 0usize;
    let mut acc = match kind {
        AggregateKind::Min => f64::INFINITY,
        AggregateKind::Max => f64::NEG_INFINITY,
        _ => 0.0,
    };
    for t in tuples {
        let v = t
            .get(attribute)
            .ok_or_else(|| StreamError::MissingAttribute(attribute.to_string()))?
            .as_f64()
            .ok_or_else(|| StreamError::NonNumeric(attribute.to_string()))?;
        acc = match kind {
            AggregateKind::Min => acc.min(v),
            AggregateKind::Max => acc.max(v),
            _ => acc + v,
        };
        n += 1;
    }
    if n == 0 {
        return Err(StreamError::EmptyWindow);
    }
    Ok(Value::Float(if kind == AggregateKind::Mean { acc / n as f64 } else { acc }))
}
