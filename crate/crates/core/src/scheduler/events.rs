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

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::{IoContext, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Dispatch,
    Checkpoint,
    Succeed,
    Fail,
    Retry,
    Kill,
    Killed,
    Abort,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Dispatch => "dispatch",
            EventKind::Checkpoint => "checkpoint",
            EventKind::Succeed => "succeed",
            EventKind::Fail => "fail",
            EventKind::Retry => "retry",
            EventKind::Kill => "kill",
            EventKind::Killed => "killed",
            EventKind::Abort => "abort",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "dispatch" => EventKind::Dispatch,
            "checkpoint" => EventKind::Checkpoint,
            "succeed" => EventKind::Succeed,
            "fail" => EventKind::Fail,
            "retry" => EventKind::Retry,
            "kill" => EventKind::Kill,
            "killed" => EventKind::Killed,
            "abort" => EventKind::Abort,
            _ => return None,
        })
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub epoch_millis: u128,
    pub kind: EventKind,
    pub task_id: usize,
    /// Space-separated `name=value` pairs.
    pub detail: String,
}

impl Event {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.epoch_millis,
            self.kind,
            self.task_id,
            self.detail.replace(['\t', '\n'], " ")
        )
    }

    pub fn parse_line(line: &str) -> Option<Self> {
        let mut parts = line.splitn(4, '\t');
        Some(Event {
            epoch_millis: parts.next()?.parse().ok()?,
            kind: EventKind::parse(parts.next()?)?,
            task_id: parts.next()?.parse().ok()?,
            detail: parts.next().unwrap_or("").to_string(),
        })
    }

    /// Looks up `name=value` in the detail field.
    pub fn field(&self, name: &str) -> Option<&str> {
        self.detail
            .split(' ')
            .find_map(|kv| kv.strip_prefix(name)?.strip_prefix('='))
    }
}

/// Append-only scheduler log, kept in memory and optionally mirrored to a file.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    inner: Arc<Mutex<LogInner>>,
}

#[derive(Debug, Default)]
struct LogInner {
    events: Vec<Event>,
    sink: Option<File>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_file(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path).at(path)?;
        let log = Self::default();
        log.inner.lock().unwrap().sink = Some(file);
        Ok(log)
    }

    pub fn record(&self, kind: EventKind, task_id: usize, detail: impl Into<String>) {
        let epoch_millis = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        let event = Event {
            epoch_millis,
            kind,
            task_id,
            detail: detail.into(),
        };
        let mut inner = self.inner.lock().unwrap();
        if let Some(sink) = inner.sink.as_mut() {
            // Logging must not fail a job.
            let _ = writeln!(sink, "{}", event.to_line());
        }
        inner.events.push(event);
    }

    pub fn events(&self) -> Vec<Event> {
        self.inner.lock().unwrap().events.clone()
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.inner
            .lock()
            .unwrap()
            .events
            .iter()
            .filter(|e| e.kind == kind)
            .count()
    }
}
