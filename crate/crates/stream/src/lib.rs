//! Windowed stream operators over timestamped tuples.
//!
//! Live tuples enter a [`BoundedBuffer`]; when it fills, the oldest tuples
//! spill into a file-backed [`HistoricStore`]. A [`ContinuousQuery`] parsed
//! from text like
//!
//! ```text
//! EVERY 60 seconds compute the max value of download_speed of the last 3 minutes
//! FROM store neubot and streaming live neubotspeed
//! ```
//!
//! is evaluated by merging an in-window range read of the store with the
//! buffered tuples and aggregating one attribute.

pub mod aggregate;
pub mod buffer;
pub mod error;
pub mod eval;
pub mod query;
pub mod store;
pub mod synth;
pub mod tuple;
pub mod window;

pub use aggregate::{aggregate, AggregateKind};
pub use buffer::BoundedBuffer;
pub use error::StreamError;
pub use eval::{evaluate, evaluate_window, merge_sources};
pub use query::{parse_query, BoundQuery, ContinuousQuery, QueryError, QueryWindow};
pub use store::{HistoricStore, StoreStats};
pub use synth::neubot_series;
pub use tuple::{StreamTuple, Timestamp, Value};
pub use window::{window_bounds, Bounds, WindowSpec};
