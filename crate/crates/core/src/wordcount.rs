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

//! Word count, the calibration job.
//!
//! Tokens are maximal runs of non-ASCII-whitespace bytes; there is no case
//! folding. Output is `word \t count`, sorted by word.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use crate::error::{Error, IoContext, Result};
use crate::job::{run_job, FailureInjection, JobResult, JobSpec};
use crate::scheduler::ExecMode;
use crate::split::InputFile;
use crate::task::{Emitter, MapFunction, MapInput, ReduceFunction};

pub fn tokens(line: &[u8]) -> impl Iterator<Item = &[u8]> {
    line.split(u8::is_ascii_whitespace).filter(|w| !w.is_empty())
}

pub fn wordcount_mapper(input: &MapInput<'_>, out: &mut Emitter<'_>) -> Result<()> {
    for w in tokens(input.line) {
        out.emit(w, "1");
    }
    Ok(())
}

pub fn sum_reducer(key: &[u8], values: &[Vec<u8>], out: &mut Emitter<'_>) -> Result<()> {
    let mut total = 0u64;
    for v in values {
        let n: u64 = std::str::from_utf8(v)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::input(format!("non-numeric count {:?}", String::from_utf8_lossy(v))))?;
        total += n;
    }
    out.emit(key, total.to_string());
    Ok(())
}

#[derive(Debug, Clone)]
pub struct WordCountConfig {
    pub inputs: Vec<PathBuf>,
    pub workspace: PathBuf,
    pub map_slots: usize,
    pub reducers: usize,
    /// Lines per map task.
    pub split_size: usize,
    pub failure_injection: Option<FailureInjection>,
    pub exec_mode: ExecMode,
}

impl WordCountConfig {
    pub fn new(inputs: Vec<PathBuf>, workspace: impl Into<PathBuf>) -> Self {
        Self {
            inputs,
            workspace: workspace.into(),
            map_slots: 1,
            reducers: 1,
            split_size: 2_000,
            failure_injection: None,
            exec_mode: ExecMode::default(),
        }
    }
}

/// Lists regular files of `path` (sorted), or `path` itself if it is a file.
pub fn collect_inputs(path: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(path).at(path)?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(path).at(path)? {
        let entry = entry.at(path)?;
        if entry.file_type().at(entry.path())?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

pub fn wordcount_job(cfg: &WordCountConfig, job_id: &str) -> Result<JobSpec> {
    let mut inputs = cfg.inputs.iter().map(InputFile::lines);
    let first = inputs
        .next()
        .ok_or_else(|| Error::input("word count needs at least one input file"))?;
    let mut spec = JobSpec::new(job_id, &cfg.workspace, first, MapFunction::native(wordcount_mapper))
        .reducer(ReduceFunction::native(sum_reducer))
        .split_size(cfg.split_size)
        .num_reducers(cfg.reducers.max(1))
        .map_slots(cfg.map_slots)
        .exec_mode(cfg.exec_mode)
        .failure_injection(cfg.failure_injection);
    for i in inputs {
        spec = spec.input(i);
    }
    Ok(spec)
}

/// Runs word count and writes the merged, sorted counts to `dest`.
pub fn run_wordcount(cfg: &WordCountConfig, dest: &Path) -> Result<JobResult> {
    let result = run_job(&wordcount_job(cfg, "wordcount")?)?;
    result.write_merged(dest)?;
    Ok(result)
}

/// Writes a seeded text corpus of roughly `bytes` bytes. Words come from a
/// Zipf-distributed lowercase vocabulary; no backslashes, tabs or `#`.
pub fn generate_corpus(path: &Path, bytes: usize, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<String> = (0..5_000)
        .map(|_| {
            let len = rng.random_range(2..10);
            (0..len).map(|_| char::from(b'a' + rng.random_range(0..26u8))).collect()
        })
        .collect();
    let zipf = Zipf::new(vocab.len() as f64, 1.1).map_err(|e| Error::domain(e.to_string()))?;
    let mut w = BufWriter::new(fs::File::create(path).at(path)?);
    let mut written = 0usize;
    while written < bytes {
        let words = rng.random_range(4..16);
        let mut line = String::new();
        for i in 0..words {
            if i > 0 {
                line.push(if rng.random_bool(0.9) { ' ' } else { '\t' });
            }
            let idx = zipf.sample(&mut rng) as usize - 1;
            line.push_str(&vocab[idx]);
        }
        line.push('\n');
        written += line.len();
        w.write_all(line.as_bytes()).at(path)?;
    }
    w.flush().at(path)
}
