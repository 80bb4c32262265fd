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

//! Single map and reduce task execution.
//!
//! Tasks write under a private `_tmp/` directory and rename the result into
//! place only after every file is flushed and synced, so a committed
//! directory is always complete.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, IoContext, Result};
use crate::record::{encode_record_into, partition, write_record, Record};
use crate::scheduler::{Directive, TaskHandle};
use crate::shuffle::{GroupedMerge, KeyGroup, PartitionFile};
use crate::split::InputSplit;
use crate::streaming::{spawn_streaming_task, StreamingContext, StreamingTaskSpec};

/// One input record as seen by a mapper.
#[derive(Debug, Clone, Copy)]
pub struct MapInput<'a> {
    /// Position of the record's file in the job's input list.
    pub source_index: usize,
    pub record_index: u64,
    pub line: &'a [u8],
}

/// Output collector plus the task's view of the scheduler.
pub struct Emitter<'a> {
    records: Vec<Record>,
    handle: Option<&'a TaskHandle>,
    stopped: bool,
}

impl<'a> Emitter<'a> {
    pub fn new(handle: Option<&'a TaskHandle>) -> Self {
        Self {
            records: Vec::new(),
            handle,
            stopped: false,
        }
    }

    pub fn emit(&mut self, key: impl Into<Vec<u8>>, value: impl Into<Vec<u8>>) {
        self.records.push(Record::new(key, value));
    }

    pub fn emit_record(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn task_id(&self) -> usize {
        self.handle.map_or(0, TaskHandle::task_id)
    }

    pub fn attempt(&self) -> u32 {
        self.handle.map_or(0, TaskHandle::attempt)
    }

    /// Seconds since the attempt started (0 outside the scheduler).
    pub fn elapsed(&self) -> f64 {
        self.handle.map_or(0.0, TaskHandle::elapsed)
    }

    /// Reports `unit` completed progress units, timed by the scheduler.
    pub fn progress(&mut self, unit: u32) -> Result<Directive> {
        let elapsed = self.elapsed();
        self.progress_at(unit, elapsed)
    }

    /// Reports progress with a caller-measured elapsed time.
    pub fn progress_at(&mut self, unit: u32, elapsed: f64) -> Result<Directive> {
        let directive = match self.handle {
            Some(h) => h.report_progress(unit, elapsed)?,
            None => Directive::Continue,
        };
        if directive == Directive::Stop {
            self.stopped = true;
        }
        Ok(directive)
    }

    pub fn is_cancelled(&self) -> bool {
        self.stopped || self.handle.is_some_and(TaskHandle::is_cancelled)
    }

    /// Marks the task as having honoured a stop request.
    pub fn mark_stopped(&mut self) {
        self.stopped = true;
    }

    pub fn stopped(&self) -> bool {
        self.stopped
    }

    pub fn set_result(&self, record: Record) {
        if let Some(h) = self.handle {
            h.set_result(record);
        }
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    fn drain(&mut self) -> std::vec::Drain<'_, Record> {
        self.records.drain(..)
    }
}

pub trait Mapper: Send + Sync {
    fn map(&self, input: &MapInput<'_>, out: &mut Emitter<'_>) -> Result<()>;
}

impl<F> Mapper for F
where
    F: Fn(&MapInput<'_>, &mut Emitter<'_>) -> Result<()> + Send + Sync,
{
    fn map(&self, input: &MapInput<'_>, out: &mut Emitter<'_>) -> Result<()> {
        self(input, out)
    }
}

/// Built-in reducers emit at most one record per key unless documented
/// otherwise.
pub trait Reducer: Send + Sync {
    fn reduce(&self, key: &[u8], values: &[Vec<u8>], out: &mut Emitter<'_>) -> Result<()>;
}

impl<F> Reducer for F
where
    F: Fn(&[u8], &[Vec<u8>], &mut Emitter<'_>) -> Result<()> + Send + Sync,
{
    fn reduce(&self, key: &[u8], values: &[Vec<u8>], out: &mut Emitter<'_>) -> Result<()> {
        self(key, values, out)
    }
}

#[derive(Clone)]
pub enum MapFunction {
    Native(Arc<dyn Mapper>),
    Streaming(StreamingTaskSpec),
}

impl MapFunction {
    pub fn native(mapper: impl Mapper + 'static) -> Self {
        MapFunction::Native(Arc::new(mapper))
    }
}

#[derive(Clone)]
pub enum ReduceFunction {
    Native(Arc<dyn Reducer>),
    Streaming(StreamingTaskSpec),
}

impl ReduceFunction {
    pub fn native(reducer: impl Reducer + 'static) -> Self {
        ReduceFunction::Native(Arc::new(reducer))
    }
}

/// Emits every input line as `(line, "")`.
pub fn identity_mapper(input: &MapInput<'_>, out: &mut Emitter<'_>) -> Result<()> {
    out.emit(input.line, Vec::new());
    Ok(())
}

/// Emits every value unchanged under its key. List-valued: one record per
/// input value.
pub fn identity_reducer(key: &[u8], values: &[Vec<u8>], out: &mut Emitter<'_>) -> Result<()> {
    for v in values {
        out.emit(key, v.clone());
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MapTaskOutput {
    pub files: Vec<PartitionFile>,
    pub killed: bool,
}

fn fresh_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).at(path)?;
    }
    fs::create_dir_all(path).at(path)
}

fn commit_dir(tmp: &Path, target: &Path) -> Result<()> {
    if target.exists() {
        fs::remove_dir_all(target).at(target)?;
    }
    fs::rename(tmp, target).at(target)
}

fn write_records_synced(path: &Path, records: &[Record]) -> Result<()> {
    let file = File::create(path).at(path)?;
    let mut w = BufWriter::new(file);
    let mut buf = Vec::new();
    for r in records {
        write_record(&mut w, r, &mut buf).at(path)?;
    }
    let file = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    file.sync_all().at(path)
}

/// Identifies a task attempt for scratch directories.
#[derive(Debug, Clone, Copy, Default)]
pub struct AttemptId {
    pub task_id: usize,
    pub attempt: u32,
}

impl AttemptId {
    pub fn of(handle: Option<&TaskHandle>, task_id: usize) -> Self {
        Self {
            task_id,
            attempt: handle.map_or(0, TaskHandle::attempt),
        }
    }
}

/// Runs one map task over `split`, partitioning into `max(reducers, 1)`
/// files under `<job_dir>/map-<task>/part-<r>`.
///
/// With `reducers == 0` output keeps emission order; otherwise each file is
/// stably sorted by key.
pub fn run_map_task(
    split: &InputSplit,
    mapper: &MapFunction,
    reducers: usize,
    job_dir: &Path,
    task_id: usize,
    handle: Option<&TaskHandle>,
) -> Result<MapTaskOutput> {
    let id = AttemptId::of(handle, task_id);
    let lines = split.read_lines().map_err(|e| Error::TaskFailed {
        task_id,
        reason: format!("unreadable split {}: {e}", split.split_id),
    })?;
    let parts = reducers.max(1);
    let mut buckets: Vec<Vec<Record>> = vec![Vec::new(); parts];
    let mut emitter = Emitter::new(handle);
    let mut killed = false;

    match mapper {
        MapFunction::Native(m) => {
            for (i, line) in lines.iter().enumerate() {
                let input = MapInput {
                    source_index: split.source_index,
                    record_index: split.record_range.0 + i as u64,
                    line,
                };
                m.map(&input, &mut emitter)?;
                for r in emitter.drain() {
                    buckets[partition(&r.key, reducers)].push(r);
                }
                if emitter.stopped() {
                    killed = true;
                    break;
                }
            }
        }
        MapFunction::Streaming(spec) => {
            let ctx = StreamingContext {
                task_id,
                partitions: reducers,
                cancel: handle.map(TaskHandle::cancel_flag),
                stderr_log: Some(job_dir.join(format!("_logs/map-{task_id}.a{}.stderr", id.attempt))),
            };
            fs::create_dir_all(job_dir.join("_logs")).at(job_dir)?;
            let report = spawn_streaming_task(spec, &ctx, lines, |r| {
                buckets[partition(&r.key, reducers)].push(r);
                Ok(())
            })?;
            killed = report.cancelled;
        }
    }

    if reducers > 0 {
        for b in &mut buckets {
            b.sort_by(|a, b| a.key.cmp(&b.key));
        }
    }

    let tmp = job_dir.join("_tmp").join(format!("map-{task_id}.a{}", id.attempt));
    fresh_dir(&tmp)?;
    for (r, bucket) in buckets.iter().enumerate() {
        write_records_synced(&tmp.join(format!("part-{r}")), bucket)?;
    }
    let target = job_dir.join(format!("map-{task_id}"));
    commit_dir(&tmp, &target)?;
    Ok(MapTaskOutput {
        files: buckets
            .iter()
            .enumerate()
            .map(|(r, b)| PartitionFile {
                map_task_id: task_id,
                partition_index: r,
                path: target.join(format!("part-{r}")),
                record_count: b.len() as u64,
            })
            .collect(),
        killed,
    })
}

/// Applies a native reducer to already grouped input, in order.
pub fn reduce_groups<I>(groups: I, reducer: &dyn Reducer, handle: Option<&TaskHandle>) -> Result<Vec<Record>>
where
    I: IntoIterator<Item = Result<KeyGroup>>,
{
    let mut emitter = Emitter::new(handle);
    for g in groups {
        let (key, values) = g?;
        reducer.reduce(&key, &values, &mut emitter)?;
    }
    Ok(emitter.into_records())
}

/// Merges `files` (all for `partition_index`), reduces every key group in
/// ascending key order and commits `<job_dir>/reduce-<r>/out`.
pub fn run_reduce_task(
    partition_index: usize,
    files: &[PartitionFile],
    reducer: &ReduceFunction,
    job_dir: &Path,
    task_id: usize,
    handle: Option<&TaskHandle>,
) -> Result<PathBuf> {
    let id = AttemptId::of(handle, task_id);
    let tmp = job_dir
        .join("_tmp")
        .join(format!("reduce-{partition_index}.a{}", id.attempt));
    fresh_dir(&tmp)?;
    let out_path = tmp.join("out");
    let file = File::create(&out_path).at(&out_path)?;
    let mut w = BufWriter::new(file);
    let mut buf = Vec::new();
    let groups = GroupedMerge::open(files)?;

    match reducer {
        ReduceFunction::Native(red) => {
            let mut emitter = Emitter::new(handle);
            for g in groups {
                let (key, values) = g?;
                red.reduce(&key, &values, &mut emitter)?;
                for r in emitter.drain() {
                    write_record(&mut w, &r, &mut buf).at(&out_path)?;
                }
            }
        }
        ReduceFunction::Streaming(spec) => {
            fs::create_dir_all(job_dir.join("_logs")).at(job_dir)?;
            let ctx = StreamingContext {
                task_id,
                partitions: 1,
                cancel: handle.map(TaskHandle::cancel_flag),
                stderr_log: Some(job_dir.join(format!("_logs/reduce-{partition_index}.a{}.stderr", id.attempt))),
            };
            // Groups are flattened to adjacent `key \t value` lines; the
            // child detects boundaries by key change.
            let mut merge_err = None;
            let lines = groups
                .map_while(|g| match g {
                    Ok(g) => Some(g),
                    Err(e) => {
                        merge_err = Some(e);
                        None
                    }
                })
                .flat_map(|(key, values)| {
                    values.into_iter().map(move |value| {
                        let mut line = Vec::new();
                        encode_record_into(
                            &Record {
                                key: key.clone(),
                                value,
                            },
                            &mut line,
                        );
                        line
                    })
                });
            let mut write_err = None;
            let writer = &mut w;
            spawn_streaming_task(spec, &ctx, lines, |r| {
                if write_err.is_none() {
                    if let Err(e) = write_record(writer, &r, &mut buf) {
                        write_err = Some(e);
                    }
                }
                Ok(())
            })?;
            if let Some(e) = merge_err {
                return Err(e);
            }
            if let Some(e) = write_err {
                return Err(Error::io(&out_path, e));
            }
        }
    }

    let file = w.into_inner().map_err(|e| Error::io(&out_path, e.into_error()))?;
    file.sync_all().at(&out_path)?;
    let target = job_dir.join(format!("reduce-{partition_index}"));
    commit_dir(&tmp, &target)?;
    Ok(target.join("out"))
}
