//! Tumbling, sliding and landmark windows.

use crate::error::StreamError;
use crate::tuple::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowSpec {
    /// Aligned intervals `[origin + k*width, origin + (k+1)*width)`.
    Tumbling { width: i64, origin: Timestamp },
    /// Trailing `[now - width, now]`, re-evaluated every `slide` seconds.
    Sliding { width: i64, slide: i64 },
    /// `[origin, now]`.
    Landmark { origin: Timestamp },
}

impl WindowSpec {
    pub fn tumbling(width: i64) -> Self {
        WindowSpec::Tumbling { width, origin: 0 }
    }

    pub fn validate(&self) -> Result<(), StreamError> {
        match *self {
            WindowSpec::Tumbling { width, .. } if width <= 0 => Err(StreamError::InvalidWindow("width must be positive".into())),
            WindowSpec::Sliding { width, slide } if width <= 0 || slide <= 0 => {
                Err(StreamError::InvalidWindow("width and slide must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A closed interval, or half-open when `end_inclusive` is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub start: Timestamp,
    pub end: Timestamp,
    pub end_inclusive: bool,
}

impl Bounds {
    pub fn contains(&self, t: Timestamp) -> bool {
        t >= self.start && if self.end_inclusive { t <= self.end } else { t < self.end }
    }

    /// Last timestamp inside the interval.
    pub fn last(&self) -> Timestamp {
        if self.end_inclusive { self.end } else { self.end - 1 }
    }
}

pub fn window_bounds(spec: &WindowSpec, now: Timestamp) -> Result<Bounds, StreamError> {
    spec.validate()?;
    Ok(match *spec {
        WindowSpec::Sliding { width, .. } => Bounds { start: now - width, end: now, end_inclusive: true },
        WindowSpec::Landmark { origin } => {
            if now < origin {
                return Err(StreamError::BeforeOrigin { origin, now });
            }
            Bounds { start: origin, end: now, end_inclusive: true }
        }
        WindowSpec::Tumbling { width, origin } => {
            let k = (now - origin).div_euclid(width) - 1;
            let start = origin + k * width;
            Bounds { start, end: start + width, end_inclusive: false }
        }
    })
}
