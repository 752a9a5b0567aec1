//! Append-only, time-ordered tuple log in a text file.
//!
//! Range reads binary-search byte offsets for the first line in range and
//! then decode forward, so tuples outside the range are never decoded.
//! Appends are serialized by a lock; every read opens its own handle, so
//! readers run concurrently with the appender. A trailing line without a
//! newline is an append in progress and is invisible to readers.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use crate::error::StreamError;
use crate::tuple::{peek_timestamp, StreamTuple, Timestamp};
use crate::window::Bounds;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StoreStats {
    /// Lines fully decoded into tuples by range reads.
    pub lines_decoded: u64,
    /// Timestamp-only peeks made while searching.
    pub probes: u64,
}

#[derive(Debug)]
struct Appender {
    file: File,
    last: Option<Timestamp>,
}

#[derive(Debug)]
pub struct HistoricStore {
    name: String,
    path: PathBuf,
    appender: Mutex<Appender>,
    decoded: AtomicU64,
    probes: AtomicU64,
}

impl HistoricStore {
    /// Creates an empty store, truncating any existing file.
    pub fn create(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self, StreamError> {
        let path = path.as_ref().to_path_buf();
        File::create(&path).map_err(|source| StreamError::Io { path: path.clone(), source })?;
        Self::attach(name.into(), path, None)
    }

    /// Opens an existing store, checking that its log is time-ordered.
    pub fn open(name: impl Into<String>, path: impl AsRef<Path>) -> Result<Self, StreamError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StreamError::Io { path: path.clone(), source };
        let mut reader = BufReader::new(File::open(&path).map_err(io)?);
        let mut line = Vec::new();
        let mut offset = 0u64;
        let mut last = None;
        loop {
            line.clear();
            let n = reader.read_until(b'\n', &mut line).map_err(io)?;
            if n == 0 {
                break;
            }
            let corrupt = |reason: String| StreamError::Corrupt { path: path.clone(), offset, reason };
            if line.last() != Some(&b'\n') {
                return Err(corrupt("unterminated final line".into()));
            }
            let ts = peek_timestamp(&line).ok_or_else(|| corrupt("bad timestamp".into()))?;
            if last.is_some_and(|l| ts < l) {
                return Err(corrupt(format!("timestamp {ts} follows {}", last.unwrap())));
            }
            last = Some(ts);
            offset += n as u64;
        }
        Self::attach(name.into(), path, last)
    }

    fn attach(name: String, path: PathBuf, last: Option<Timestamp>) -> Result<Self, StreamError> {
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|source| StreamError::Io { path: path.clone(), source })?;
        Ok(Self {
            name,
            path,
            appender: Mutex::new(Appender { file, last }),
            decoded: AtomicU64::new(0),
            probes: AtomicU64::new(0),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_timestamp(&self) -> Option<Timestamp> {
        self.appender.lock().unwrap().last
    }

    pub fn append(&self, tuple: &StreamTuple) -> Result<(), StreamError> {
        self.append_all(std::slice::from_ref(tuple))
    }

    /// Appends a batch with a single write; nothing is written if any tuple
    /// would break time order.
    pub fn append_all<'a>(&self, tuples: impl IntoIterator<Item = &'a StreamTuple>) -> Result<(), StreamError> {
        let mut guard = self.appender.lock().unwrap();
        let mut last = guard.last;
        let mut text = String::new();
        for t in tuples {
            if let Some(l) = last.filter(|&l| t.timestamp < l) {
                return Err(StreamError::OutOfOrder { last: l, got: t.timestamp });
            }
            last = Some(t.timestamp);
            text.push_str(&t.encode());
            text.push('\n');
        }
        guard
            .file
            .write_all(text.as_bytes())
            .and_then(|_| guard.file.flush())
            .map_err(|source| StreamError::Io { path: self.path.clone(), source })?;
        guard.last = last;
        Ok(())
    }

    pub fn stats(&self) -> StoreStats {
        StoreStats { lines_decoded: self.decoded.load(Ordering::Relaxed), probes: self.probes.load(Ordering::Relaxed) }
    }

    pub fn reset_stats(&self) {
        self.decoded.store(0, Ordering::Relaxed);
        self.probes.store(0, Ordering::Relaxed);
    }

    /// Tuples with `start <= timestamp <= end`, in log order.
    pub fn range(&self, start: Timestamp, end: Timestamp) -> Result<Vec<StreamTuple>, StreamError> {
        let mut reader = Reader::open(&self.path)?;
        if start > end || reader.len == 0 {
            return Ok(Vec::new());
        }
        // smallest byte position whose next line start holds a timestamp >= start
        let (mut lo, mut hi) = (0, reader.len);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            let s = reader.line_start_from(mid)?;
            self.probes.fetch_add(1, Ordering::Relaxed);
            if s == reader.len || reader.timestamp_at(s)? >= start {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let first = reader.line_start_from(lo)?;
        let mut out = Vec::new();
        reader.seek(first)?;
        let mut offset = first;
        let mut line = Vec::new();
        while offset < reader.len {
            line.clear();
            let n = reader.next_line(&mut line)?;
            let ts = peek_timestamp(&line).ok_or_else(|| reader.corrupt(offset, "bad timestamp"))?;
            if ts > end {
                break;
            }
            let text = std::str::from_utf8(&line[..line.len() - 1]).map_err(|_| reader.corrupt(offset, "not UTF-8"))?;
            out.push(StreamTuple::decode(text).map_err(|e| reader.corrupt(offset, &e))?);
            self.decoded.fetch_add(1, Ordering::Relaxed);
            offset += n;
        }
        Ok(out)
    }

    pub fn range_bounds(&self, bounds: &Bounds) -> Result<Vec<StreamTuple>, StreamError> {
        self.range(bounds.start, bounds.last())
    }

    /// Every tuple in the log.
    pub fn scan(&self) -> Result<Vec<StreamTuple>, StreamError> {
        self.range(Timestamp::MIN, Timestamp::MAX)
    }
}

struct Reader<'p> {
    path: &'p Path,
    inner: BufReader<File>,
    /// Bytes up to and including the last newline.
    len: u64,
}

impl<'p> Reader<'p> {
    fn open(path: &'p Path) -> Result<Self, StreamError> {
        let io = |source| StreamError::Io { path: path.to_path_buf(), source };
        let mut file = File::open(path).map_err(io)?;
        let mut len = file.metadata().map_err(io)?.len();
        // drop a trailing partial line
        let mut byte = [0u8; 1];
        while len > 0 {
            file.seek(SeekFrom::Start(len - 1)).map_err(io)?;
            file.read_exact(&mut byte).map_err(io)?;
            if byte[0] == b'\n' {
                break;
            }
            len -= 1;
        }
        Ok(Self { path, inner: BufReader::new(file), len })
    }

    fn io(&self, source: std::io::Error) -> StreamError {
        StreamError::Io { path: self.path.to_path_buf(), source }
    }

    fn corrupt(&self, offset: u64, reason: &str) -> StreamError {
        StreamError::Corrupt { path: self.path.to_path_buf(), offset, reason: reason.to_string() }
    }

    fn seek(&mut self, pos: u64) -> Result<(), StreamError> {
        self.inner.seek(SeekFrom::Start(pos)).map(|_| ()).map_err(|e| self.io(e))
    }

    fn next_line(&mut self, buf: &mut Vec<u8>) -> Result<u64, StreamError> {
        let n = self.inner.read_until(b'\n', buf).map_err(|e| self.io(e))?;
        Ok(n as u64)
    }

    /// First line start at or after `pos`, or `len`.
    fn line_start_from(&mut self, pos: u64) -> Result<u64, StreamError> {
        if pos == 0 {
            return Ok(0);
        }
        self.seek(pos - 1)?;
        let mut skipped = Vec::new();
        let n = self.next_line(&mut skipped)?;
        Ok((pos - 1 + n).min(self.len))
    }

    fn timestamp_at(&mut self, pos: u64) -> Result<Timestamp, StreamError> {
        self.seek(pos)?;
        let mut prefix = Vec::new();
        self.inner.read_until(b',', &mut prefix).map_err(|e| self.io(e))?;
        peek_timestamp(&prefix).ok_or_else(|| self.corrupt(pos, "bad timestamp"))
    }
}
