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

//! Job-tracker / task-tracker scheduling.
//!
//! A [`Scheduler`] owns a set of logical [`TrackerNode`]s, each with a fixed
//! number of slots. [`Scheduler::run_phase`] dispatches a batch of tasks in
//! FIFO order of `task_id` onto free slots, retries failed attempts on a
//! different node, and applies the optional [`TerminationPolicy`] to progress
//! reports. All bookkeeping goes through one mutex-guarded table, so reports
//! and completions are serialized; directives are returned synchronously to
//! the reporting task.
//!
//! With the `parallel` feature, slots are backed by a rayon pool sized to the
//! total slot count. [`ExecMode::Sequential`] (the only mode without the
//! feature) runs every task inline on the calling thread, one at a time.

mod events;
mod termination;

pub use events::{Event, EventKind, EventLog};
pub use termination::{evaluate_termination, TerminationPolicy, Verdict, KILLED_SENTINEL};

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
#[cfg(feature = "parallel")]
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::record::Record;
use termination::ReferenceClock;

pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackerNode {
    pub node_id: String,
    pub map_slots: usize,
}

impl TrackerNode {
    pub fn new(node_id: impl Into<String>, map_slots: usize) -> Self {
        Self {
            node_id: node_id.into(),
            map_slots,
        }
    }

    /// `count` nodes named `node-0..` with `slots` slots each.
    pub fn uniform(count: usize, slots: usize) -> Vec<TrackerNode> {
        (0..count)
            .map(|i| TrackerNode::new(format!("node-{i}"), slots))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Map,
    Reduce,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDescriptor {
    pub task_id: usize,
    pub kind: TaskKind,
    /// Split id for map tasks, partition index for reduce tasks.
    pub payload: usize,
    pub attempt: u32,
    pub max_attempts: u32,
}

impl TaskDescriptor {
    pub fn new(task_id: usize, kind: TaskKind, payload: usize, max_attempts: u32) -> Self {
        Self {
            task_id,
            kind,
            payload,
            attempt: 0,
            max_attempts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskStatus {
    Pending,
    Running,
    Succeeded,
    Failed,
    Killed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskState {
    pub status: TaskStatus,
    /// `(progress_unit, elapsed_seconds)` of the current attempt.
    pub checkpoint_times: Vec<(u32, f64)>,
    pub result: Option<Record>,
    pub attempts: u32,
    pub node: Option<String>,
    pub last_error: Option<String>,
    /// Wall time of the final attempt, in seconds.
    pub runtime: f64,
}

impl TaskState {
    fn pending() -> Self {
        Self {
            status: TaskStatus::Pending,
            checkpoint_times: Vec::new(),
            result: None,
            attempts: 0,
            node: None,
            last_error: None,
            runtime: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Directive {
    Continue,
    Stop,
}

/// What a task body returns. `Killed` means it honoured a stop directive;
/// its payload is still committed (it carries the sentinel result).
#[derive(Debug)]
pub enum TaskOutcome<T> {
    Completed(T),
    Killed(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    #[cfg(feature = "parallel")]
    Parallel,
    Sequential,
}

impl Default for ExecMode {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return ExecMode::Parallel;
        #[cfg(not(feature = "parallel"))]
        return ExecMode::Sequential;
    }
}

#[derive(Debug)]
pub struct PhaseReport<T> {
    /// Payload of every succeeded or killed task, by task id.
    pub outputs: BTreeMap<usize, T>,
    pub states: BTreeMap<usize, TaskState>,
}

#[derive(Debug, Default)]
struct Table {
    states: HashMap<usize, TaskState>,
    running: HashMap<usize, RunningTask>,
    clock: ReferenceClock,
}

#[derive(Debug)]
struct RunningTask {
    attempt: u32,
    cancel: Arc<AtomicBool>,
}

struct Shared {
    table: Mutex<Table>,
    policy: Option<TerminationPolicy>,
    log: EventLog,
}

/// Given to a running task so it can report progress and observe kills.
pub struct TaskHandle {
    task_id: usize,
    attempt: u32,
    node_id: String,
    started: Instant,
    cancel: Arc<AtomicBool>,
    shared: Arc<Shared>,
}

impl TaskHandle {
    pub fn task_id(&self) -> usize {
        self.task_id
    }

    pub fn attempt(&self) -> u32 {
        self.attempt
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    /// Seconds since this attempt was dispatched.
    pub fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    /// True once a kill or a job abort has been requested for this attempt.
    pub fn is_cancelled(&self) -> bool {
        self.cancel.load(Ordering::SeqCst)
    }

    /// Shared flag mirrored by [`TaskHandle::is_cancelled`], for code that
    /// polls from another thread (e.g. a streaming child watchdog).
    pub fn cancel_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.cancel)
    }

    pub fn set_result(&self, record: Record) {
        let mut table = self.shared.table.lock().unwrap();
        if let Some(state) = table.states.get_mut(&self.task_id) {
            state.result = Some(record);
        }
    }

    /// Records that `progress_unit` units are complete after `elapsed`
    /// seconds and returns whether the task should keep going.
    pub fn report_progress(&self, progress_unit: u32, elapsed: f64) -> Result<Directive> {
        let shared = &*self.shared;
        let mut table = shared.table.lock().unwrap();
        match table.running.get(&self.task_id) {
            Some(r) if r.attempt == self.attempt => {}
            _ => {
                return Err(Error::Protocol(format!(
                    "progress report from unknown task {} attempt {}",
                    self.task_id, self.attempt
                )))
            }
        }
        let table = &mut *table;
        let state = table.states.get_mut(&self.task_id).expect("running task has a state");
        if let Some(&(last, _)) = state.checkpoint_times.last() {
            if progress_unit <= last {
                return Err(Error::Protocol(format!(
                    "task {} reported unit {progress_unit} after unit {last}",
                    self.task_id
                )));
            }
        }
        state.checkpoint_times.push((progress_unit, elapsed));
        shared.log.record(
            EventKind::Checkpoint,
            self.task_id,
            format!("unit={progress_unit} elapsed={elapsed:.6}"),
        );

        if self.cancel.load(Ordering::SeqCst) {
            return Ok(Directive::Stop);
        }
        let Some(policy) = shared.policy else {
            return Ok(Directive::Continue);
        };
        if progress_unit < policy.checkpoint_unit {
            return Ok(Directive::Continue);
        }
        // t_i is the elapsed time at the first report that reached the checkpoint.
        let first_past = state
            .checkpoint_times
            .iter()
            .position(|&(u, _)| u >= policy.checkpoint_unit)
            .expect("current report qualifies");
        let t_i = state.checkpoint_times[first_past].1;
        if first_past + 1 == state.checkpoint_times.len() {
            table.clock.observe(t_i);
        }
        let t_ref = table.clock.reference(&policy);
        match evaluate_termination(&policy, t_ref, t_i) {
            Verdict::Keep => Ok(Directive::Continue),
            Verdict::Kill => {
                self.cancel.store(true, Ordering::SeqCst);
                shared.log.record(
                    EventKind::Kill,
                    self.task_id,
                    format!(
                        "t_i={t_i:.6} t_ref={:.6} factor={}",
                        t_ref.unwrap_or(f64::NAN),
                        policy.kill_factor
                    ),
                );
                Ok(Directive::Stop)
            }
        }
    }
}

pub struct Scheduler {
    nodes: Vec<TrackerNode>,
    max_attempts: u32,
    policy: Option<TerminationPolicy>,
    mode: ExecMode,
    log: EventLog,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Scheduler {
    pub fn new(nodes: Vec<TrackerNode>) -> Result<Self> {
        Self::with_mode(nodes, ExecMode::default())
    }

    pub fn with_mode(nodes: Vec<TrackerNode>, mode: ExecMode) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::domain("scheduler needs at least one tracker node"));
        }
        if let Some(n) = nodes.iter().find(|n| n.map_slots == 0) {
            return Err(Error::domain(format!("node {} has zero slots", n.node_id)));
        }
        #[cfg(feature = "parallel")]
        let pool = match mode {
            ExecMode::Parallel => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(nodes.iter().map(|n| n.map_slots).sum())
                    .thread_name(|i| format!("medimr-slot-{i}"))
                    .build()
                    .map_err(|e| Error::domain(format!("cannot build slot pool: {e}")))?,
            ),
            ExecMode::Sequential => None,
        };
        Ok(Self {
            nodes,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            policy: None,
            mode,
            log: EventLog::new(),
            #[cfg(feature = "parallel")]
            pool,
        })
    }

    pub fn with_max_attempts(mut self, max_attempts: u32) -> Self {
        self.max_attempts = max_attempts.max(1);
        self
    }

    pub fn with_policy(mut self, policy: Option<TerminationPolicy>) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_log(mut self, log: EventLog) -> Self {
        self.log = log;
        self
    }

    pub fn nodes(&self) -> &[TrackerNode] {
        &self.nodes
    }

    pub fn total_slots(&self) -> usize {
        self.nodes.iter().map(|n| n.map_slots).sum()
    }

    pub fn max_attempts(&self) -> u32 {
        self.max_attempts
    }

    pub fn mode(&self) -> ExecMode {
        self.mode
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// Builds map-kind descriptors `0..count` with this scheduler's retry limit.
    pub fn descriptors(&self, kind: TaskKind, count: usize) -> Vec<TaskDescriptor> {
        (0..count)
            .map(|i| TaskDescriptor::new(i, kind, i, self.max_attempts))
            .collect()
    }

    /// Runs `tasks` to completion. Fails with [`Error::TaskFailed`] as soon
    /// as one task exhausts its attempts; running tasks are then cancelled
    /// and drained before returning.
    pub fn run_phase<T, F>(&self, tasks: Vec<TaskDescriptor>, exec: F) -> Result<PhaseReport<T>>
    where
        T: Send,
        F: Fn(&TaskDescriptor, &TaskHandle) -> Result<TaskOutcome<T>> + Sync,
    {
        let shared = Arc::new(Shared {
            table: Mutex::new(Table::default()),
            policy: self.policy,
            log: self.log.clone(),
        });
        let sequential = matches!(self.mode, ExecMode::Sequential);
        let mut dispatcher = Dispatcher::new(&self.nodes, tasks, &shared, sequential);
        #[cfg(feature = "parallel")]
        let (tx, rx) = mpsc::channel::<Completion<T>>();

        let run_one = |task: TaskDescriptor, node: usize, handle: TaskHandle| -> Completion<T> {
            let started = Instant::now();
            let result = catch_unwind(AssertUnwindSafe(|| exec(&task, &handle))).unwrap_or_else(|panic| {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "task panicked".into());
                Err(Error::TaskFailed {
                    task_id: task.task_id,
                    reason: msg,
                })
            });
            Completion {
                task,
                node,
                runtime: started.elapsed().as_secs_f64(),
                result,
            }
        };

        match self.mode {
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => {
                let pool = self.pool.as_ref().expect("parallel scheduler has a pool");
                pool.in_place_scope(|scope| loop {
                    while let Some((task, node, handle)) = dispatcher.next_dispatch() {
                        let tx = tx.clone();
                        let run_one = &run_one;
                        scope.spawn(move |_| {
                            let _ = tx.send(run_one(task, node, handle));
                        });
                    }
                    if dispatcher.finished() {
                        break;
                    }
                    let done = rx.recv().expect("completion channel stays open");
                    dispatcher.complete(done);
                });
            }
            ExecMode::Sequential => loop {
                if let Some((task, node, handle)) = dispatcher.next_dispatch() {
                    let done = run_one(task, node, handle);
                    dispatcher.complete(done);
                } else if dispatcher.finished() {
                    break;
                }
            },
        }
        dispatcher.into_report()
    }
}

struct Completion<T> {
    task: TaskDescriptor,
    node: usize,
    runtime: f64,
    result: Result<TaskOutcome<T>>,
}

struct Dispatcher<'a, T> {
    nodes: &'a [TrackerNode],
    shared: &'a Arc<Shared>,
    free: Vec<usize>,
    /// Pending tasks with the node their previous attempt failed on.
    pending: VecDeque<(TaskDescriptor, Option<usize>)>,
    running: usize,
    sequential: bool,
    outputs: BTreeMap<usize, T>,
    abort: Option<Error>,
}

impl<'a, T> Dispatcher<'a, T> {
    fn new(
        nodes: &'a [TrackerNode],
        mut tasks: Vec<TaskDescriptor>,
        shared: &'a Arc<Shared>,
        sequential: bool,
    ) -> Self {
        tasks.sort_by_key(|t| t.task_id);
        {
            let mut table = shared.table.lock().unwrap();
            for t in &tasks {
                table.states.insert(t.task_id, TaskState::pending());
            }
        }
        Self {
            nodes,
            shared,
            free: nodes.iter().map(|n| n.map_slots).collect(),
            pending: tasks.into_iter().map(|t| (t, None)).collect(),
            running: 0,
            sequential,
            outputs: BTreeMap::new(),
            abort: None,
        }
    }

    fn finished(&self) -> bool {
        self.running == 0 && (self.pending.is_empty() || self.abort.is_some())
    }

    fn pick_node(&self, avoid: Option<usize>) -> Option<usize> {
        let multi = self.nodes.len() > 1;
        (0..self.nodes.len())
            .filter(|&i| self.free[i] > 0 && !(multi && avoid == Some(i)))
            .max_by(|&a, &b| self.free[a].cmp(&self.free[b]).then(b.cmp(&a)))
    }

    fn next_dispatch(&mut self) -> Option<(TaskDescriptor, usize, TaskHandle)> {
        if self.abort.is_some() {
            return None;
        }
        if self.sequential && self.running > 0 {
            return None;
        }
        let (pos, node) = self
            .pending
            .iter()
            .enumerate()
            .find_map(|(pos, (_, avoid))| self.pick_node(*avoid).map(|n| (pos, n)))?;
        let (task, _) = self.pending.remove(pos).expect("position is in range");
        self.free[node] -= 1;
        self.running += 1;

        let cancel = Arc::new(AtomicBool::new(false));
        {
            let mut table = self.shared.table.lock().unwrap();
            let state = table.states.get_mut(&task.task_id).expect("task registered");
            state.status = TaskStatus::Running;
            state.attempts = task.attempt + 1;
            state.node = Some(self.nodes[node].node_id.clone());
            state.checkpoint_times.clear();
            table.running.insert(
                task.task_id,
                RunningTask {
                    attempt: task.attempt,
                    cancel: Arc::clone(&cancel),
                },
            );
        }
        self.shared.log.record(
            EventKind::Dispatch,
            task.task_id,
            format!("node={} attempt={}", self.nodes[node].node_id, task.attempt),
        );
        let handle = TaskHandle {
            task_id: task.task_id,
            attempt: task.attempt,
            node_id: self.nodes[node].node_id.clone(),
            started: Instant::now(),
            cancel,
            shared: Arc::clone(self.shared),
        };
        Some((task, node, handle))
    }

    fn complete(&mut self, done: Completion<T>) {
        let Completion {
            task,
            node,
            runtime,
            result,
        } = done;
        self.free[node] += 1;
        self.running -= 1;
        let node_id = &self.nodes[node].node_id;
        let log = &self.shared.log;
        let mut table = self.shared.table.lock().unwrap();
        table.running.remove(&task.task_id);
        let state = table.states.get_mut(&task.task_id).expect("task registered");
        state.runtime = runtime;
        match result {
            Ok(TaskOutcome::Completed(out)) => {
                state.status = TaskStatus::Succeeded;
                log.record(
                    EventKind::Succeed,
                    task.task_id,
                    format!("node={node_id} runtime={runtime:.6}"),
                );
                self.outputs.insert(task.task_id, out);
            }
            Ok(TaskOutcome::Killed(out)) => {
                state.status = TaskStatus::Killed;
                log.record(
                    EventKind::Killed,
                    task.task_id,
                    format!("node={node_id} runtime={runtime:.6}"),
                );
                self.outputs.insert(task.task_id, out);
            }
            Err(err) => {
                let reason = err.to_string();
                state.last_error = Some(reason.clone());
                log.record(
                    EventKind::Fail,
                    task.task_id,
                    format!(
                        "node={node_id} attempt={} reason={}",
                        task.attempt,
                        reason.replace(' ', "_")
                    ),
                );
                if self.abort.is_some() {
                    state.status = TaskStatus::Failed;
                    return;
                }
                if task.attempt + 1 < task.max_attempts {
                    state.status = TaskStatus::Pending;
                    let retry = TaskDescriptor {
                        attempt: task.attempt + 1,
                        ..task
                    };
                    log.record(
                        EventKind::Retry,
                        retry.task_id,
                        format!("attempt={} avoid={node_id}", retry.attempt),
                    );
                    let at = self
                        .pending
                        .iter()
                        .position(|(t, _)| t.task_id > retry.task_id)
                        .unwrap_or(self.pending.len());
                    self.pending.insert(at, (retry, Some(node)));
                } else {
                    state.status = TaskStatus::Failed;
                    log.record(EventKind::Abort, task.task_id, format!("attempts={}", task.attempt + 1));
                    for r in table.running.values() {
                        r.cancel.store(true, Ordering::SeqCst);
                    }
                    self.abort = Some(Error::TaskFailed {
                        task_id: task.task_id,
                        reason: format!("exhausted {} attempts, last error: {reason}", task.attempt + 1),
                    });
                }
            }
        }
    }

    fn into_report(self) -> Result<PhaseReport<T>> {
        if let Some(err) = self.abort {
            return Err(err);
        }
        let table = self.shared.table.lock().unwrap();
        Ok(PhaseReport {
            outputs: self.outputs,
            states: table.states.iter().map(|(&k, v)| (k, v.clone())).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;
    use std::time::Duration;

    fn sleep_ms(ms: u64) {
        std::thread::sleep(Duration::from_millis(ms));
    }

    fn max_concurrency_per_node(log: &EventLog) -> HashMap<String, usize> {
        let mut running: HashMap<String, usize> = HashMap::new();
        let mut peak: HashMap<String, usize> = HashMap::new();
        for ev in log.events() {
            let Some(node) = ev.field("node").map(str::to_string) else {
                continue;
            };
            match ev.kind {
                EventKind::Dispatch => {
                    let r = running.entry(node.clone()).or_default();
                    *r += 1;
                    let p = peak.entry(node).or_default();
                    *p = (*p).max(*r);
                }
                EventKind::Succeed | EventKind::Killed | EventKind::Fail => {
                    *running.get_mut(&node).unwrap() -= 1;
                }
                _ => {}
            }
        }
        peak
    }

    #[test]
    fn one_slot_runs_strictly_sequentially() {
        let sched = Scheduler::new(TrackerNode::uniform(1, 1)).unwrap();
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let report = sched
            .run_phase(sched.descriptors(TaskKind::Map, 10), |t, _| {
                let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                sleep_ms(2);
                live.fetch_sub(1, Ordering::SeqCst);
                Ok(TaskOutcome::Completed(t.task_id))
            })
            .unwrap();
        assert_eq!(peak.load(Ordering::SeqCst), 1);
        assert_eq!(report.outputs.len(), 10);
        let order: Vec<usize> = sched
            .log()
            .events()
            .iter()
            .filter(|e| e.kind == EventKind::Dispatch)
            .map(|e| e.task_id)
            .collect();
        assert_eq!(order, (0..10).collect::<Vec<_>>());
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn ten_tasks_on_forty_two_slots_all_start_together() {
        let sched = Scheduler::new(TrackerNode::uniform(1, 42)).unwrap();
        let barrier = std::sync::Barrier::new(10);
        sched
            .run_phase(sched.descriptors(TaskKind::Map, 10), |_, _| {
                // Deadlocks unless all ten are running at once.
                barrier.wait();
                Ok(TaskOutcome::Completed(()))
            })
            .unwrap();
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn makespan_close_to_work_over_slots() {
        let sched = Scheduler::new(TrackerNode::uniform(2, 2)).unwrap();
        let unit = 10u64;
        let started = Instant::now();
        sched
            .run_phase(sched.descriptors(TaskKind::Map, 100), |_, _| {
                sleep_ms(unit);
                Ok(TaskOutcome::Completed(()))
            })
            .unwrap();
        let makespan = started.elapsed().as_secs_f64();
        let bound = 100.0 / 4.0 * unit as f64 / 1000.0;
        assert!(makespan >= bound * 0.99, "{makespan}");
        assert!(makespan < bound * 1.6, "makespan {makespan} vs lower bound {bound}");
        for (node, peak) in max_concurrency_per_node(sched.log()) {
            assert!(peak <= 2, "{node} ran {peak} tasks at once");
        }
    }

    #[test]
    fn empty_phase_completes_immediately() {
        let sched = Scheduler::new(TrackerNode::uniform(1, 3)).unwrap();
        let report = sched.run_phase::<(), _>(Vec::new(), |_, _| unreachable!()).unwrap();
        assert!(report.outputs.is_empty());
    }

    #[test]
    fn failed_attempt_is_retried_on_another_node() {
        let sched = Scheduler::new(TrackerNode::uniform(3, 1)).unwrap();
        let report = sched
            .run_phase(sched.descriptors(TaskKind::Map, 4), |t, h| {
                if t.task_id == 2 && h.attempt() == 0 {
                    return Err(Error::TaskFailed {
                        task_id: t.task_id,
                        reason: "injected".into(),
                    });
                }
                Ok(TaskOutcome::Completed(h.node_id().to_string()))
            })
            .unwrap();
        let events = sched.log().events();
        let fail_node = events
            .iter()
            .find(|e| e.kind == EventKind::Fail)
            .and_then(|e| e.field("node").map(str::to_string))
            .unwrap();
        assert_ne!(report.outputs[&2], fail_node);
        assert_eq!(report.states[&2].attempts, 2);
        assert_eq!(sched.log().count(EventKind::Retry), 1);
    }

    #[test]
    fn always_failing_task_aborts_after_max_attempts() {
        let sched = Scheduler::new(TrackerNode::uniform(2, 2)).unwrap().with_max_attempts(3);
        let calls = AtomicUsize::new(0);
        let err = sched
            .run_phase(sched.descriptors(TaskKind::Map, 1), |t, _| -> Result<TaskOutcome<()>> {
                calls.fetch_add(1, Ordering::SeqCst);
                Err(Error::TaskFailed {
                    task_id: t.task_id,
                    reason: "always".into(),
                })
            })
            .unwrap_err();
        assert!(matches!(err, Error::TaskFailed { task_id: 0, .. }));
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert_eq!(sched.log().count(EventKind::Abort), 1);
    }

    #[test]
    fn panicking_task_counts_as_failure() {
        let sched = Scheduler::new(TrackerNode::uniform(1, 2)).unwrap();
        let report = sched
            .run_phase(sched.descriptors(TaskKind::Map, 2), |t, h| {
                if t.task_id == 1 && h.attempt() == 0 {
                    panic!("boom");
                }
                Ok(TaskOutcome::Completed(()))
            })
            .unwrap();
        assert_eq!(report.states[&1].attempts, 2);
    }

    #[test]
    fn first_reporter_sets_reference_and_continues() {
        let policy = TerminationPolicy::new(1.7).unwrap();
        let sched = Scheduler::new(TrackerNode::uniform(1, 1))
            .unwrap()
            .with_policy(Some(policy));
        let report = sched
            .run_phase(sched.descriptors(TaskKind::Map, 3), |t, h| {
                // Virtual elapsed times: task 0 is the reference, 1 is at 1.8x, 2 at 1.5x.
                let at_two = [10.0, 18.0, 15.0][t.task_id];
                assert_eq!(h.report_progress(1, at_two / 2.0)?, Directive::Continue);
                match h.report_progress(2, at_two)? {
                    Directive::Continue => Ok(TaskOutcome::Completed(t.task_id)),
                    Directive::Stop => Ok(TaskOutcome::Killed(t.task_id)),
                }
            })
            .unwrap();
        let statuses: Vec<TaskStatus> = (0..3).map(|i| report.states[&i].status).collect();
        assert_eq!(
            statuses,
            vec![TaskStatus::Succeeded, TaskStatus::Killed, TaskStatus::Succeeded]
        );
    }

    #[test]
    fn quorum_not_met_never_kills() {
        let policy = TerminationPolicy::new(1.1)
            .unwrap()
            .with_min_reference_count(10)
            .unwrap();
        let sched = Scheduler::new(TrackerNode::uniform(1, 1))
            .unwrap()
            .with_policy(Some(policy));
        let report = sched
            .run_phase(sched.descriptors(TaskKind::Map, 5), |t, h| {
                h.report_progress(2, 1.0 + 10.0 * t.task_id as f64)?;
                Ok(TaskOutcome::Completed(()))
            })
            .unwrap();
        assert!(report.states.values().all(|s| s.status == TaskStatus::Succeeded));
        assert_eq!(sched.log().count(EventKind::Kill), 0);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn late_faster_reference_stops_earlier_task_at_next_poll() {
        use std::sync::Barrier;
        let policy = TerminationPolicy::new(1.5).unwrap();
        let sched = Scheduler::new(TrackerNode::uniform(1, 2))
            .unwrap()
            .with_policy(Some(policy));
        let first = Barrier::new(2);
        let second = Barrier::new(2);
        let report = sched
            .run_phase(sched.descriptors(TaskKind::Map, 2), |t, h| {
                if t.task_id == 0 {
                    assert_eq!(h.report_progress(2, 10.0)?, Directive::Continue);
                    first.wait();
                    second.wait();
                    // t_ref dropped to 4 meanwhile; 10 >= 1.5 * 4.
                    assert_eq!(h.report_progress(3, 12.0)?, Directive::Stop);
                    Ok(TaskOutcome::Killed(()))
                } else {
                    first.wait();
                    assert_eq!(h.report_progress(2, 4.0)?, Directive::Continue);
                    second.wait();
                    Ok(TaskOutcome::Completed(()))
                }
            })
            .unwrap();
        assert_eq!(report.states[&0].status, TaskStatus::Killed);
        assert_eq!(report.states[&1].status, TaskStatus::Succeeded);
    }

    #[test]
    fn sequential_mode_matches_parallel_results() {
        let sched = Scheduler::with_mode(TrackerNode::uniform(2, 3), ExecMode::Sequential).unwrap();
        let report = sched
            .run_phase(sched.descriptors(TaskKind::Map, 7), |t, _| {
                Ok(TaskOutcome::Completed(t.task_id * 2))
            })
            .unwrap();
        let got: Vec<usize> = report.outputs.values().copied().collect();
        assert_eq!(got, vec![0, 2, 4, 6, 8, 10, 12]);
        let peak = max_concurrency_per_node(sched.log());
        assert!(peak.values().all(|&p| p == 1));
    }

    #[test]
    fn non_increasing_units_are_a_protocol_error() {
        let sched = Scheduler::new(TrackerNode::uniform(1, 1)).unwrap().with_max_attempts(1);
        let err = sched
            .run_phase(sched.descriptors(TaskKind::Map, 1), |_, h| {
                h.report_progress(2, 1.0)?;
                h.report_progress(2, 2.0)?;
                Ok(TaskOutcome::Completed(()))
            })
            .unwrap_err();
        assert!(err.to_string().contains("protocol"), "{err}");
    }

    #[test]
    fn zero_slot_node_rejected() {
        assert!(Scheduler::new(vec![TrackerNode::new("a", 0)]).is_err());
        assert!(Scheduler::new(Vec::new()).is_err());
    }
}
