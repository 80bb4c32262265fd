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

//! Line-oriented job inputs and split planning.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use crate::error::{Error, IoContext, Result};

/// How lines of an input file become records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    /// One entry per line; blank lines and `#` comment lines are skipped.
    Manifest,
    /// Every line is a record, verbatim.
    Lines,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputFile {
    pub path: PathBuf,
    pub format: InputFormat,
}

impl InputFile {
    pub fn manifest(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            format: InputFormat::Manifest,
        }
    }

    pub fn lines(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            format: InputFormat::Lines,
        }
    }
}

/// A contiguous run of records from one input file, processed by exactly one
/// map task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSplit {
    pub split_id: usize,
    /// Index of the input file in the job's input list.
    pub source_index: usize,
    pub source: PathBuf,
    pub format: InputFormat,
    /// `[start, end)` record indices within the source.
    pub record_range: (u64, u64),
    /// Byte span holding those records, used to seek straight to the split.
    pub byte_range: (u64, u64),
}

impl InputSplit {
    pub fn len(&self) -> u64 {
        self.record_range.1 - self.record_range.0
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads the split's records as raw lines (newline stripped).
    pub fn read_lines(&self) -> Result<Vec<Vec<u8>>> {
        let mut file = File::open(&self.source).at(&self.source)?;
        file.seek(SeekFrom::Start(self.byte_range.0)).at(&self.source)?;
        let reader = BufReader::new(file.take(self.byte_range.1 - self.byte_range.0));
        let mut out = Vec::with_capacity(self.len() as usize);
        for line in split_lines(reader) {
            let line = line.at(&self.source)?;
            if keep_line(self.format, &line) {
                out.push(line);
            }
        }
        if out.len() as u64 != self.len() {
            return Err(Error::input(format!(
                "split {} of {} expected {} records, found {}",
                self.split_id,
                self.source.display(),
                self.len(),
                out.len()
            )));
        }
        Ok(out)
    }

    /// One-line description stored under the job's `splits/` directory.
    pub fn describe(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            self.split_id,
            self.source.display(),
            self.record_range.0,
            self.record_range.1,
            self.byte_range.0,
            self.byte_range.1
        )
    }
}

fn keep_line(format: InputFormat, line: &[u8]) -> bool {
    match format {
        InputFormat::Lines => true,
        InputFormat::Manifest => {
            let trimmed = line.trim_ascii();
            !trimmed.is_empty() && !trimmed.starts_with(b"#")
        }
    }
}

fn split_lines<R: BufRead>(mut reader: R) -> impl Iterator<Item = std::io::Result<Vec<u8>>> {
    std::iter::from_fn(move || {
        let mut buf = Vec::new();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => None,
            Ok(_) => {
                if buf.last() == Some(&b'\n') {
                    buf.pop();
                }
                if buf.last() == Some(&b'\r') {
                    buf.pop();
                }
                Some(Ok(buf))
            }
            Err(e) => Some(Err(e)),
        }
    })
}

/// Reads every kept entry of a manifest, trimmed, as UTF-8 strings.
pub fn read_manifest(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).at(path)?;
    let mut out = Vec::new();
    for line in split_lines(BufReader::new(file)) {
        let line = line.at(path)?;
        if keep_line(InputFormat::Manifest, &line) {
            let s = String::from_utf8(line.trim_ascii().to_vec())
                .map_err(|_| Error::input(format!("{}: non UTF-8 manifest entry", path.display())))?;
            out.push(s);
        }
    }
    Ok(out)
}

/// Resolves a manifest entry: relative paths are taken from the manifest's
/// directory.
pub fn resolve_entry(manifest: &Path, entry: &str) -> PathBuf {
    let p = Path::new(entry.trim());
    if p.is_absolute() {
        return p.to_path_buf();
    }
    manifest.parent().map_or_else(|| p.to_path_buf(), |dir| dir.join(p))
}

/// Plans `ceil(n / split_size)` splits over one manifest.
pub fn plan_splits(manifest: &Path, split_size: usize) -> Result<Vec<InputSplit>> {
    plan_input(&[InputFile::manifest(manifest)], split_size)
}

/// Plans splits over several inputs. Splits never span two files; ids are
/// assigned in input order.
pub fn plan_input(inputs: &[InputFile], split_size: usize) -> Result<Vec<InputSplit>> {
    if split_size == 0 {
        return Err(Error::domain("split_size must be at least 1"));
    }
    let mut splits = Vec::new();
    for (source_index, input) in inputs.iter().enumerate() {
        let file = File::open(&input.path).at(&input.path)?;
        let mut reader = BufReader::new(file);
        let mut offset = 0u64;
        let mut record = 0u64;
        let mut current: Option<(u64, u64)> = None; // (first record, first byte)
        let mut last_end = 0u64;
        let mut buf = Vec::new();
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf).at(&input.path)? as u64;
            if n == 0 {
                break;
            }
            let mut content = &buf[..];
            if content.last() == Some(&b'\n') {
                content = &content[..content.len() - 1];
            }
            if content.last() == Some(&b'\r') {
                content = &content[..content.len() - 1];
            }
            if keep_line(input.format, content) {
                let (first, start_byte) = *current.get_or_insert((record, offset));
                record += 1;
                last_end = offset + n;
                if record - first == split_size as u64 {
                    splits.push(InputSplit {
                        split_id: splits.len(),
                        source_index,
                        source: input.path.clone(),
                        format: input.format,
                        record_range: (first, record),
                        byte_range: (start_byte, last_end),
                    });
                    current = None;
                }
            }
            offset += n;
        }
        if let Some((first, start_byte)) = current {
            splits.push(InputSplit {
                split_id: splits.len(),
                source_index,
                source: input.path.clone(),
                format: input.format,
                record_range: (first, record),
                byte_range: (start_byte, last_end),
            });
        }
    }
    Ok(splits)
}
