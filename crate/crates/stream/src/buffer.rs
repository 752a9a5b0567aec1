//! Bounded live buffer that spills its oldest tuples into a store.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use crate::error::StreamError;
use crate::store::HistoricStore;
use crate::tuple::{StreamTuple, Timestamp};

#[derive(Debug, Default)]
struct Contents {
    tuples: VecDeque<StreamTuple>,
    last: Option<Timestamp>,
}

/// Holds at most `capacity` tuples in time order. One producer pushes and
/// one reader inspects; both go through the same lock.
#[derive(Debug)]
pub struct BoundedBuffer {
    capacity: usize,
    contents: Mutex<Contents>,
    spill: Arc<HistoricStore>,
}

impl BoundedBuffer {
    pub fn new(capacity: usize, spill: Arc<HistoricStore>) -> Result<Self, StreamError> {
        if capacity == 0 {
            return Err(StreamError::ZeroCapacity);
        }
        Ok(Self { capacity, contents: Mutex::default(), spill })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.contents.lock().unwrap().tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn store(&self) -> &Arc<HistoricStore> {
        &self.spill
    }

    /// Appends `tuple`; when full, the oldest tuple is written to the store
    /// first and only then evicted. On error nothing changes.
    pub fn push(&self, tuple: StreamTuple) -> Result<(), StreamError> {
        let mut c = self.contents.lock().unwrap();
        if let Some(last) = c.last.filter(|&l| tuple.timestamp < l) {
            return Err(StreamError::OutOfOrder { last, got: tuple.timestamp });
        }
        if c.tuples.len() == self.capacity {
            self.spill.append(c.tuples.front().expect("capacity is positive"))?;
            c.tuples.pop_front();
        }
        c.last = Some(tuple.timestamp);
        c.tuples.push_back(tuple);
        Ok(())
    }

    /// Runs `f` on the buffered tuples, oldest first, with pushes held off.
    pub fn with_contents<R>(&self, f: impl FnOnce(&VecDeque<StreamTuple>) -> R) -> R {
        f(&self.contents.lock().unwrap().tuples)
    }

    pub fn snapshot(&self) -> Vec<StreamTuple> {
        self.with_contents(|t| t.iter().cloned().collect())
    }
}
