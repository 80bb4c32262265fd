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

//! Whole-job orchestration: plan splits, run map tasks, shuffle, reduce.
//!
//! Workspace layout for a job:
//!
//! ```text
//! <workspace>/<job_id>/splits/split-<id>
//!                     /map-<task>/part-<r>
//!                     /reduce-<r>/out
//!                     /_final/part-<r>
//!                     /events.log
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::error::{Error, IoContext, Result};
use crate::record::{fnv1a64, write_record, Record, RecordReader};
use crate::scheduler::{
    EventLog, ExecMode, Scheduler, TaskDescriptor, TaskKind, TaskOutcome, TaskState, TaskStatus, TerminationPolicy,
    TrackerNode, DEFAULT_MAX_ATTEMPTS,
};
use crate::shuffle::{GroupedMerge, PartitionFile};
use crate::split::{plan_input, InputFile, InputSplit};
use crate::task::{identity_reducer, run_map_task, run_reduce_task, MapFunction, ReduceFunction};

/// Deterministic map-task failure injection for recovery testing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FailureInjection {
    pub rate: f64,
    pub seed: u64,
}

impl FailureInjection {
    pub fn should_fail(&self, task_id: usize, attempt: u32) -> bool {
        let mut key = self.seed.to_le_bytes().to_vec();
        key.extend_from_slice(&(task_id as u64).to_le_bytes());
        key.extend_from_slice(&attempt.to_le_bytes());
        // Top 53 bits as a uniform draw in [0, 1).
        let u = (fnv1a64(&key).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64 / (1u64 << 53) as f64;
        u < self.rate
    }
}

#[derive(Clone)]
pub struct JobSpec {
    pub job_id: String,
    pub inputs: Vec<InputFile>,
    /// Records per split.
    pub split_size: usize,
    pub mapper: MapFunction,
    /// Defaults to the identity reducer when `num_reducers > 0`.
    pub reducer: Option<ReduceFunction>,
    /// Zero means map output is the final output.
    pub num_reducers: usize,
    pub nodes: Vec<TrackerNode>,
    pub kill_policy: Option<TerminationPolicy>,
    pub workspace: PathBuf,
    pub max_attempts: u32,
    pub exec_mode: ExecMode,
    pub failure_injection: Option<FailureInjection>,
}

impl JobSpec {
    /// A job on a single tracker node with one map slot and one reducer.
    pub fn new(
        job_id: impl Into<String>,
        workspace: impl Into<PathBuf>,
        input: InputFile,
        mapper: MapFunction,
    ) -> Self {
        Self {
            job_id: job_id.into(),
            inputs: vec![input],
            split_size: 1,
            mapper,
            reducer: None,
            num_reducers: 1,
            nodes: TrackerNode::uniform(1, 1),
            kill_policy: None,
            workspace: workspace.into(),
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            exec_mode: ExecMode::default(),
            failure_injection: None,
        }
    }

    pub fn input(mut self, input: InputFile) -> Self {
        self.inputs.push(input);
        self
    }

    pub fn split_size(mut self, n: usize) -> Self {
        self.split_size = n;
        self
    }

    pub fn reducer(mut self, reducer: ReduceFunction) -> Self {
        self.reducer = Some(reducer);
        self
    }

    pub fn num_reducers(mut self, r: usize) -> Self {
        self.num_reducers = r;
        self
    }

    /// One node with `slots` map slots.
    pub fn map_slots(mut self, slots: usize) -> Self {
        self.nodes = TrackerNode::uniform(1, slots);
        self
    }

    pub fn nodes(mut self, nodes: Vec<TrackerNode>) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn kill_policy(mut self, policy: Option<TerminationPolicy>) -> Self {
        self.kill_policy = policy;
        self
    }

    pub fn max_attempts(mut self, n: u32) -> Self {
        self.max_attempts = n;
        self
    }

    pub fn exec_mode(mut self, mode: ExecMode) -> Self {
        self.exec_mode = mode;
        self
    }

    pub fn failure_injection(mut self, injection: Option<FailureInjection>) -> Self {
        self.failure_injection = injection;
        self
    }

    pub fn job_dir(&self) -> PathBuf {
        self.workspace.join(&self.job_id)
    }

    pub fn map_slots_total(&self) -> usize {
        self.nodes.iter().map(|n| n.map_slots).sum()
    }
}

#[derive(Debug)]
pub struct JobResult {
    pub job_id: String,
    pub job_dir: PathBuf,
    /// Final output files, `_final/part-<r>`, in partition order.
    pub output_paths: Vec<PathBuf>,
    pub map_states: BTreeMap<usize, TaskState>,
    pub reduce_states: BTreeMap<usize, TaskState>,
    pub wall_time: Duration,
    pub log: EventLog,
}

impl JobResult {
    /// Map tasks that ended in the killed state.
    pub fn killed_tasks(&self) -> Vec<usize> {
        self.map_states
            .iter()
            .filter(|(_, s)| s.status == TaskStatus::Killed)
            .map(|(&id, _)| id)
            .collect()
    }

    /// All final records, concatenated in partition order.
    pub fn read_output(&self) -> Result<Vec<Record>> {
        let mut out = Vec::new();
        for p in &self.output_paths {
            let file = File::open(p).at(p)?;
            for r in RecordReader::new(BufReader::new(file)) {
                out.push(r?);
            }
        }
        Ok(out)
    }

    /// Writes one key-sorted file by merging the (individually sorted)
    /// reducer outputs. Only meaningful for jobs with reducers.
    pub fn write_merged(&self, dest: &Path) -> Result<()> {
        let parts: Vec<PartitionFile> = self
            .output_paths
            .iter()
            .enumerate()
            .map(|(i, p)| PartitionFile {
                map_task_id: i,
                partition_index: 0,
                path: p.clone(),
                record_count: 0,
            })
            .collect();
        let tmp = dest.with_extension("partial");
        let mut w = BufWriter::new(File::create(&tmp).at(&tmp)?);
        let mut buf = Vec::new();
        for g in GroupedMerge::open(&parts)? {
            let (key, values) = g?;
            for value in values {
                write_record(
                    &mut w,
                    &Record {
                        key: key.clone(),
                        value,
                    },
                    &mut buf,
                )
                .at(&tmp)?;
            }
        }
        w.flush().at(&tmp)?;
        drop(w);
        fs::rename(&tmp, dest).at(dest)
    }
}

fn write_splits(dir: &Path, splits: &[InputSplit]) -> Result<()> {
    fs::create_dir_all(dir).at(dir)?;
    for s in splits {
        let p = dir.join(format!("split-{}", s.split_id));
        fs::write(&p, s.describe()).at(&p)?;
    }
    Ok(())
}

fn job_failed(job_id: &str, err: Error) -> Error {
    Error::JobFailed {
        job_id: job_id.to_string(),
        reason: err.to_string(),
    }
}

/// Runs a job to completion. On failure the job directory is left in place
/// for diagnosis and no `_final/` directory is committed.
pub fn run_job(spec: &JobSpec) -> Result<JobResult> {
    let started = Instant::now();
    let job_dir = spec.job_dir();
    if job_dir.exists() {
        fs::remove_dir_all(&job_dir).at(&job_dir)?;
    }
    fs::create_dir_all(&job_dir).at(&job_dir)?;

    let splits = plan_input(&spec.inputs, spec.split_size)?;
    write_splits(&job_dir.join("splits"), &splits)?;

    let log = EventLog::with_file(&job_dir.join("events.log"))?;
    let scheduler = Scheduler::with_mode(spec.nodes.clone(), spec.exec_mode)?
        .with_max_attempts(spec.max_attempts)
        .with_policy(spec.kill_policy)
        .with_log(log.clone());

    let reducers = spec.num_reducers;
    let map_tasks = scheduler.descriptors(TaskKind::Map, splits.len());
    let map_report = scheduler
        .run_phase(map_tasks, |task, handle| {
            if let Some(inj) = &spec.failure_injection {
                if inj.should_fail(task.task_id, handle.attempt()) {
                    return Err(Error::TaskFailed {
                        task_id: task.task_id,
                        reason: "injected failure".into(),
                    });
                }
            }
            let out = run_map_task(
                &splits[task.payload],
                &spec.mapper,
                reducers,
                &job_dir,
                task.task_id,
                Some(handle),
            )?;
            Ok(if out.killed {
                TaskOutcome::Killed(out.files)
            } else {
                TaskOutcome::Completed(out.files)
            })
        })
        .map_err(|e| job_failed(&spec.job_id, e))?;

    let final_tmp = job_dir.join("_tmp").join("_final");
    if final_tmp.exists() {
        fs::remove_dir_all(&final_tmp).at(&final_tmp)?;
    }
    fs::create_dir_all(&final_tmp).at(&final_tmp)?;
    let mut reduce_states = BTreeMap::new();
    let part_count;

    if reducers == 0 {
        part_count = splits.len();
        for (task_id, files) in &map_report.outputs {
            let src = &files[0].path;
            fs::rename(src, final_tmp.join(format!("part-{task_id}"))).at(src)?;
        }
    } else {
        part_count = reducers;
        let mut by_partition: Vec<Vec<PartitionFile>> = vec![Vec::new(); reducers];
        for files in map_report.outputs.values() {
            for f in files {
                by_partition[f.partition_index].push(f.clone());
            }
        }
        let reducer = spec
            .reducer
            .clone()
            .unwrap_or_else(|| ReduceFunction::native(identity_reducer));
        let offset = splits.len();
        let reduce_tasks: Vec<TaskDescriptor> = (0..reducers)
            .map(|r| TaskDescriptor::new(offset + r, TaskKind::Reduce, r, spec.max_attempts))
            .collect();
        let reduce_report = scheduler
            .run_phase(reduce_tasks, |task, handle| {
                run_reduce_task(
                    task.payload,
                    &by_partition[task.payload],
                    &reducer,
                    &job_dir,
                    task.task_id,
                    Some(handle),
                )
                .map(TaskOutcome::Completed)
            })
            .map_err(|e| job_failed(&spec.job_id, e))?;
        for (task_id, path) in &reduce_report.outputs {
            let r = task_id - offset;
            fs::copy(path, final_tmp.join(format!("part-{r}"))).at(path)?;
        }
        reduce_states = reduce_report.states;
    }

    let final_dir = job_dir.join("_final");
    fs::rename(&final_tmp, &final_dir).at(&final_dir)?;
    let output_paths = (0..part_count).map(|i| final_dir.join(format!("part-{i}"))).collect();

    Ok(JobResult {
        job_id: spec.job_id.clone(),
        job_dir,
        output_paths,
        map_states: map_report.states,
        reduce_states,
        wall_time: started.elapsed(),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::{identity_mapper, Emitter, MapInput};

    fn corpus(dir: &Path, lines: &[&str]) -> PathBuf {
        let p = dir.join("corpus.txt");
        fs::write(&p, lines.join("\n") + "\n").unwrap();
        p
    }

    fn wc_map(input: &MapInput<'_>, out: &mut Emitter<'_>) -> Result<()> {
        for w in input.line.split(|b| b.is_ascii_whitespace()).filter(|w| !w.is_empty()) {
            out.emit(w, "1");
        }
        Ok(())
    }

    fn wc_reduce(key: &[u8], values: &[Vec<u8>], out: &mut Emitter<'_>) -> Result<()> {
        out.emit(key, values.len().to_string());
        Ok(())
    }

    fn wc_job(ws: &Path, input: &Path) -> JobSpec {
        JobSpec::new("wc", ws, InputFile::lines(input), MapFunction::native(wc_map))
            .reducer(ReduceFunction::native(wc_reduce))
            .split_size(2)
            .num_reducers(3)
    }

    fn sorted(mut v: Vec<Record>) -> Vec<Record> {
        v.sort();
        v
    }

    #[test]
    fn empty_input_succeeds_with_empty_output() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("empty.txt");
        fs::write(&input, "").unwrap();
        let res = run_job(&wc_job(dir.path(), &input)).unwrap();
        assert!(res.read_output().unwrap().is_empty());
        assert!(res.job_dir.join("_final").is_dir());
    }

    #[test]
    fn output_independent_of_slots() {
        let dir = tempfile::tempdir().unwrap();
        let input = corpus(dir.path(), &["the cat the", "a b c", "the end", "c c", "x"]);
        let one = run_job(&wc_job(dir.path(), &input).map_slots(1)).unwrap();
        let one = sorted(one.read_output().unwrap());
        let four = run_job(&wc_job(dir.path(), &input).map_slots(4)).unwrap();
        assert_eq!(sorted(four.read_output().unwrap()), one);
        assert!(one.contains(&Record::new("the", "3")));
    }

    #[test]
    fn zero_reducers_promote_map_output() {
        let dir = tempfile::tempdir().unwrap();
        let input = corpus(dir.path(), &["b", "a", "c"]);
        let spec = JobSpec::new(
            "r0",
            dir.path(),
            InputFile::lines(&input),
            MapFunction::native(identity_mapper),
        )
        .num_reducers(0)
        .split_size(2);
        let res = run_job(&spec).unwrap();
        assert_eq!(res.output_paths.len(), 2);
        let keys: Vec<Vec<u8>> = res.read_output().unwrap().into_iter().map(|r| r.key).collect();
        assert_eq!(keys, vec![b"b".to_vec(), b"a".to_vec(), b"c".to_vec()]);
        assert!(res.reduce_states.is_empty());
    }

    #[test]
    fn identity_reducer_conserves_values() {
        let dir = tempfile::tempdir().unwrap();
        let input = corpus(dir.path(), &["a b", "b c", "a a"]);
        let spec = JobSpec::new("id", dir.path(), InputFile::lines(&input), MapFunction::native(wc_map))
            .split_size(1)
            .num_reducers(2);
        let res = run_job(&spec).unwrap();
        let out = sorted(res.read_output().unwrap());
        let expected = sorted(
            ["a", "b", "b", "c", "a", "a"]
                .iter()
                .map(|w| Record::new(*w, "1"))
                .collect(),
        );
        assert_eq!(out, expected);
    }

    #[test]
    fn retry_after_first_failure_matches_clean_run() {
        let dir = tempfile::tempdir().unwrap();
        let input = corpus(dir.path(), &["x y", "y z"]);
        let flaky = |input: &MapInput<'_>, out: &mut Emitter<'_>| -> Result<()> {
            if out.attempt() == 0 {
                return Err(Error::input("transient"));
            }
            wc_map(input, out)
        };
        let spec = JobSpec::new(
            "flaky",
            dir.path(),
            InputFile::lines(&input),
            MapFunction::native(flaky),
        )
        .reducer(ReduceFunction::native(wc_reduce))
        .split_size(1)
        .nodes(TrackerNode::uniform(2, 1));
        let res = run_job(&spec).unwrap();
        let clean = run_job(&wc_job(dir.path(), &input)).unwrap();
        assert_eq!(sorted(res.read_output().unwrap()), sorted(clean.read_output().unwrap()));
        assert!(res.map_states.values().all(|s| s.attempts == 2));
    }

    #[test]
    fn always_failing_mapper_fails_job_after_max_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let input = corpus(dir.path(), &["x"]);
        let bad = |_: &MapInput<'_>, _: &mut Emitter<'_>| -> Result<()> { Err(Error::input("always")) };
        let spec = JobSpec::new("bad", dir.path(), InputFile::lines(&input), MapFunction::native(bad)).max_attempts(3);
        let err = run_job(&spec).unwrap_err();
        assert!(matches!(err, Error::JobFailed { .. }));
        let log = fs::read_to_string(dir.path().join("bad/events.log")).unwrap();
        assert_eq!(log.lines().filter(|l| l.contains("\tdispatch\t")).count(), 3);
        assert!(!dir.path().join("bad/_final").exists());
    }

    #[test]
    fn merged_output_is_globally_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let input = corpus(dir.path(), &["q w e r t y u i o p", "a s d f g h j k l"]);
        let res = run_job(&wc_job(dir.path(), &input)).unwrap();
        let dest = dir.path().join("merged.tsv");
        res.write_merged(&dest).unwrap();
        let text = fs::read_to_string(&dest).unwrap();
        let keys: Vec<&str> = text.lines().map(|l| l.split('\t').next().unwrap()).collect();
        let mut expect = keys.clone();
        expect.sort();
        assert_eq!(keys, expect);
        assert_eq!(keys.len(), 19);
    }

    #[test]
    fn injection_is_deterministic_and_near_rate() {
        let inj = FailureInjection { rate: 0.1, seed: 9 };
        let hits = (0..10_000).filter(|&t| inj.should_fail(t, 0)).count();
        assert!((800..1200).contains(&hits), "{hits}");
        assert_eq!(inj.should_fail(5, 1), inj.should_fail(5, 1));
    }
}
