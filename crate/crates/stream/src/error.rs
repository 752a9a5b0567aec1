use std::path::PathBuf;

use thiserror::Error;

use crate::tuple::Timestamp;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error("no data in window")]
    EmptyWindow,
    #[error("attribute `{0}` is missing from a tuple")]
    MissingAttribute(String),
    #[error("attribute `{0}` is not numeric")]
    NonNumeric(String),
    #[error("timestamp {got} arrived after {last}")]
    OutOfOrder { last: Timestamp, got: Timestamp },
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("landmark origin {origin} is after now {now}")]
    BeforeOrigin { origin: Timestamp, now: Timestamp },
    #[error("invalid tuple: {0}")]
    InvalidTuple(String),
    #[error("buffer capacity must be at least 1")]
    ZeroCapacity,
    #[error("{}: byte {offset}: {reason}", path.display())]
    Corrupt { path: PathBuf, offset: u64, reason: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
