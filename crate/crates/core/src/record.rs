// Copyright 2026 The medimr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Key/value records and their line codec.
//!
//! A record serializes as `key \t value \n`. Inside either field a tab,
//! newline or backslash is written as `\t`, `\n` or `\\`. Fields are raw
//! bytes; nothing here assumes UTF-8.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Record {
    pub key: Vec<u8>,
    pub value: Vec<u8>,
}

impl Record {
    pub fn new(key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) -> Self {
        Self {
            key: key.into(),
            value: value.into(),
        }
    }
}

fn escape_into(field: &[u8], out: &mut Vec<u8>) {
    for &b in field {
        match b {
            b'\t' => out.extend_from_slice(b"\\t"),
            b'\n' => out.extend_from_slice(b"\\n"),
            b'\\' => out.extend_from_slice(b"\\\\"),
            _ => out.push(b),
        }
    }
}

/// Encodes a record as one line, without the trailing newline.
pub fn encode_record(record: &Record) -> Vec<u8> {
    let mut out = Vec::with_capacity(record.key.len() + record.value.len() + 1);
    encode_record_into(record, &mut out);
    out
}

pub fn encode_record_into(record: &Record, out: &mut Vec<u8>) {
    escape_into(&record.key, out);
    out.push(b'\t');
    escape_into(&record.value, out);
}

fn unescape(field: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(field.len());
    let mut bytes = field.iter().copied();
    while let Some(b) = bytes.next() {
        if b != b'\\' {
            out.push(b);
            continue;
        }
        match bytes.next() {
            Some(b't') => out.push(b'\t'),
            Some(b'n') => out.push(b'\n'),
            Some(b'\\') => out.push(b'\\'),
            Some(other) => {
                return Err(Error::Decode(format!(
                    "invalid escape sequence \\{}",
                    char::from(other).escape_default()
                )))
            }
            None => return Err(Error::Decode("dangling backslash at end of field".into())),
        }
    }
    Ok(out)
}

/// Decodes one line (with or without its trailing newline).
///
/// The key ends at the first raw tab. A line without a tab is a key with an
/// empty value. Raw tabs after the first one are kept verbatim in the value.
pub fn decode_record(line: &[u8]) -> Result<Record> {
    let line = line.strip_suffix(b"\n").unwrap_or(line);
    match line.iter().position(|&b| b == b'\t') {
        Some(tab) => Ok(Record {
            key: unescape(&line[..tab])?,
            value: unescape(&line[tab + 1..])?,
        }),
        None => Ok(Record {
            key: unescape(line)?,
            value: Vec::new(),
        }),
    }
}

pub fn write_record<W: Write>(w: &mut W, record: &Record, buf: &mut Vec<u8>) -> std::io::Result<()> {
    buf.clear();
    encode_record_into(record, buf);
    buf.push(b'\n');
    w.write_all(buf)
}

/// Streams records out of a line-oriented reader.
pub struct RecordReader<R> {
    inner: R,
    line: Vec<u8>,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            line: Vec::new(),
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        self.line.clear();
        match self.inner.read_until(b'\n', &mut self.line) {
            Ok(0) => None,
            Ok(_) => Some(decode_record(&self.line)),
            Err(e) => Some(Err(Error::Decode(format!("read failed: {e}")))),
        }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over raw key bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Reducer index for `key`: `fnv1a64(key) mod reducers`. Zero reducers is
/// treated as one.
pub fn partition(key: &[u8], reducers: usize) -> usize {
    let r = reducers.max(1) as u64;
    (fnv1a64(key) % r) as usize
}
