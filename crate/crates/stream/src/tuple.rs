//! Tuples and their one-line text encoding.
//!
//! A line is `timestamp,name=value;name=value`. Integers are bare digits,
//! floats always carry a `.`, an exponent or a special name (`1.0`, `1e300`,
//! `inf`, `NaN`), text is double-quoted and chars single-quoted, both with
//! backslash escapes.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::StreamError;

/// Seconds since the epoch.
pub type Timestamp = i64;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
    Char(char),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Text(_) | Value::Char(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamTuple {
    pub timestamp: Timestamp,
    pub attributes: BTreeMap<String, Value>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && !name.chars().any(|c| c.is_whitespace() || matches!(c, '=' | ';' | ',' | '"' | '\''))
}

impl StreamTuple {
    pub fn new(timestamp: Timestamp, attributes: BTreeMap<String, Value>) -> Result<Self, StreamError> {
        if let Some(bad) = attributes.keys().find(|k| !valid_name(k)) {
            return Err(StreamError::InvalidTuple(format!("bad attribute name {bad:?}")));
        }
        Ok(Self { timestamp, attributes })
    }

    /// Convenience constructor; panics on an invalid attribute name.
    pub fn from_pairs<'a>(timestamp: Timestamp, pairs: impl IntoIterator<Item = (&'a str, Value)>) -> Self {
        Self::new(timestamp, pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()).expect("valid attribute names")
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.attributes.get(name)
    }

    pub fn encode(&self) -> String {
        let mut out = self.timestamp.to_string();
        out.push(',');
        for (i, (k, v)) in self.attributes.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            out.push_str(k);
            out.push('=');
            encode_value(v, &mut out);
        }
        out
    }

    pub fn decode(line: &str) -> Result<Self, String> {
        let (ts, rest) = line.split_once(',').ok_or("missing `,` after timestamp")?;
        let timestamp = ts.parse().map_err(|_| format!("bad timestamp {ts:?}"))?;
        let mut attributes = BTreeMap::new();
        let mut chars = rest.char_indices().peekable();
        while chars.peek().is_some() {
            let start = chars.peek().unwrap().0;
            let eq = loop {
                match chars.next() {
                    Some((i, '=')) => break i,
                    Some(_) => {}
                    None => return Err("attribute without `=`".into()),
                }
            };
            let name = &rest[start..eq];
            if !valid_name(name) {
                return Err(format!("bad attribute name {name:?}"));
            }
            let value = decode_value(rest, &mut chars)?;
            match chars.next() {
                None | Some((_, ';')) => {}
                Some((_, c)) => return Err(format!("expected `;`, found {c:?}")),
            }
            if attributes.insert(name.to_string(), value).is_some() {
                return Err(format!("attribute {name:?} repeated"));
            }
        }
        Ok(Self { timestamp, attributes })
    }
}

/// Reads just the timestamp prefix of an encoded line.
pub(crate) fn peek_timestamp(line: &[u8]) -> Option<Timestamp> {
    let end = line.iter().position(|&b| b == b',')?;
    std::str::from_utf8(&line[..end]).ok()?.parse().ok()
}

fn encode_value(v: &Value, out: &mut String) {
    match v {
        Value::Int(i) => write!(out, "{i}").unwrap(),
        Value::Float(f) => write!(out, "{f:?}").unwrap(),
        Value::Text(s) => {
            out.push('"');
            for c in s.chars() {
                escape(c, '"', out);
            }
            out.push('"');
        }
        Value::Char(c) => {
            out.push('\'');
            escape(*c, '\'', out);
            out.push('\'');
        }
    }
}

fn escape(c: char, quote: char, out: &mut String) {
    match c {
        '\\' => out.push_str("\\\\"),
        '\n' => out.push_str("\\n"),
        '\r' => out.push_str("\\r"),
        c if c == quote => {
            out.push('\\');
            out.push(c);
        }
        c => out.push(c),
    }
}

type Chars<'a> = std::iter::Peekable<std::str::CharIndices<'a>>;

fn unescape(chars: &mut Chars<'_>) -> Result<char, String> {
    match chars.next() {
        Some((_, '\\')) => Ok('\\'),
        Some((_, 'n')) => Ok('\n'),
        Some((_, 'r')) => Ok('\r'),
        Some((_, c @ ('"' | '\''))) => Ok(c),
        other => Err(format!("bad escape {:?}", other.map(|(_, c)| c))),
    }
}

fn decode_value(src: &str, chars: &mut Chars<'_>) -> Result<Value, String> {
    match chars.peek().map(|&(_, c)| c) {
        Some('"') => {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some((_, '"')) => return Ok(Value::Text(s)),
                    Some((_, '\\')) => s.push(unescape(chars)?),
                    Some((_, c)) => s.push(c),
                    None => return Err("unterminated text".into()),
                }
            }
        }
        Some('\'') => {
            chars.next();
            let c = match chars.next() {
                Some((_, '\\')) => unescape(chars)?,
                Some((_, '\'')) | None => return Err("empty char".into()),
                Some((_, c)) => c,
            };
            match chars.next() {
                Some((_, '\'')) => Ok(Value::Char(c)),
                _ => Err("unterminated char".into()),
            }
        }
        Some(_) => {
            let start = chars.peek().unwrap().0;
            let mut end = src.len();
            while let Some(&(i, c)) = chars.peek() {
                if c == ';' {
                    end = i;
                    break;
                }
                chars.next();
            }
            let raw = &src[start..end];
            let is_int = raw.strip_prefix('-').unwrap_or(raw).bytes().all(|b| b.is_ascii_digit());
            if is_int {
                raw.parse().map(Value::Int).map_err(|_| format!("bad integer {raw:?}"))
            } else {
                raw.parse().map(Value::Float).map_err(|_| format!("bad number {raw:?}"))
            }
        }
        None => Err("missing value".into()),
    }
}
