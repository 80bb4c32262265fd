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

//! External executables as mappers and reducers.
//!
//! The child reads newline-terminated lines on stdin and writes records on
//! stdout using the record line codec. Stdin is fed from one thread while
//! stdout is drained on another, so a child that buffers all of its input
//! before writing cannot deadlock the bridge. Stderr goes to the task log
//! untouched. Any stdout byte counts as a heartbeat for `io_timeout`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::record::{decode_record, Record};

pub const DEFAULT_IO_TIMEOUT: Duration = Duration::from_secs(600);
const POLL: Duration = Duration::from_millis(20);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    Mapper,
    Reducer,
}

impl StreamRole {
    fn as_str(self) -> &'static str {
        match self {
            StreamRole::Mapper => "mapper",
            StreamRole::Reducer => "reducer",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamingTaskSpec {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub role: StreamRole,
    pub env: BTreeMap<String, String>,
    pub io_timeout: Duration,
}

impl StreamingTaskSpec {
    pub fn new(program: impl Into<PathBuf>, role: StreamRole) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
            role,
            env: BTreeMap::new(),
            io_timeout: DEFAULT_IO_TIMEOUT,
        }
    }

    pub fn arg(mut self, arg: impl Into<String>) -> Self {
        self.args.push(arg.into());
        self
    }

    pub fn args<I, S>(mut self, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.args.extend(args.into_iter().map(Into::into));
        self
    }

    pub fn env(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.env.insert(key.into(), value.into());
        self
    }

    pub fn io_timeout(mut self, timeout: Duration) -> Self {
        self.io_timeout = timeout;
        self
    }

    /// Checks that the program resolves to an executable file.
    pub fn validate(&self) -> Result<PathBuf> {
        resolve_executable(&self.program).ok_or_else(|| {
            Error::input(format!(
                "streaming executable {} not found or not runnable",
                self.program.display()
            ))
        })
    }
}

fn is_executable(path: &Path) -> bool {
    let Ok(meta) = path.metadata() else { return false };
    if !meta.is_file() {
        return false;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        meta.permissions().mode() & 0o111 != 0
    }
    #[cfg(not(unix))]
    true
}

pub fn resolve_executable(program: &Path) -> Option<PathBuf> {
    if program.components().count() > 1 {
        return is_executable(program).then(|| program.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(program))
        .find(|p| is_executable(p))
}

/// Identifies the task to the child via `MR_TASK_ID`, `MR_ROLE` and
/// `MR_PARTITIONS`.
#[derive(Debug, Clone, Default)]
pub struct StreamingContext {
    pub task_id: usize,
    pub partitions: usize,
    pub cancel: Option<Arc<AtomicBool>>,
    pub stderr_log: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamingReport {
    pub records_in: u64,
    pub records_out: u64,
    pub cancelled: bool,
}

enum Chunk {
    Line(Vec<u8>),
    Eof,
    Failed(io::Error),
}

fn kill_tree(child: &mut Child) {
    #[cfg(unix)]
    unsafe {
        // The child leads its own process group; take the whole group down.
        libc::kill(-(child.id() as i32), libc::SIGKILL);
    }
    let _ = child.kill();
}

/// Runs one streaming task. Every input item is written as one line; each
/// decoded stdout record is passed to `on_record` as it arrives.
pub fn spawn_streaming_task<I, F>(
    spec: &StreamingTaskSpec,
    ctx: &StreamingContext,
    input: I,
    mut on_record: F,
) -> Result<StreamingReport>
where
    I: IntoIterator<Item = Vec<u8>>,
    I::IntoIter: Send,
    F: FnMut(Record) -> Result<()>,
{
    let program = spec.validate()?;
    let fail = |reason: String| Error::TaskFailed {
        task_id: ctx.task_id,
        reason,
    };
    let mut cmd = Command::new(&program);
    cmd.args(&spec.args)
        .envs(&spec.env)
        .env("MR_TASK_ID", ctx.task_id.to_string())
        .env("MR_ROLE", spec.role.as_str())
        .env("MR_PARTITIONS", ctx.partitions.to_string())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    #[cfg(unix)]
    {
        use std::os::unix::process::CommandExt;
        cmd.process_group(0);
    }
    let mut child = cmd
        .spawn()
        .map_err(|e| fail(format!("spawn of {} failed: {e}", program.display())))?;

    let stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let stderr = child.stderr.take().expect("piped stderr");
    let last_activity = Arc::new(Mutex::new(Instant::now()));

    let mut stderr_sink: Box<dyn Write + Send> = match &ctx.stderr_log {
        Some(path) => Box::new(File::create(path).map_err(|e| Error::io(path, e))?),
        None => Box::new(io::sink()),
    };

    let outcome = thread::scope(|s| -> Result<StreamingReport> {
        let input = input.into_iter();
        let writer = s.spawn(move || -> io::Result<u64> {
            let mut stdin = io::BufWriter::new(stdin);
            let mut n = 0u64;
            for mut line in input {
                line.push(b'\n');
                match stdin.write_all(&line) {
                    Ok(()) => n += 1,
                    // Child exited or closed stdin early; its exit status decides.
                    Err(e) if e.kind() == io::ErrorKind::BrokenPipe => return Ok(n),
                    Err(e) => return Err(e),
                }
            }
            match stdin.flush() {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e),
                _ => Ok(n),
            }
        });
        s.spawn(move || {
            let mut stderr = stderr;
            let _ = io::copy(&mut stderr, &mut stderr_sink);
        });
        let (tx, rx) = mpsc::channel::<Chunk>();
        let activity = Arc::clone(&last_activity);
        s.spawn(move || {
            let mut reader = BufReader::new(stdout);
            let mut line = Vec::new();
            loop {
                let buf = match reader.fill_buf() {
                    Ok(buf) => buf,
                    Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                    Err(e) => {
                        let _ = tx.send(Chunk::Failed(e));
                        return;
                    }
                };
                if buf.is_empty() {
                    if !line.is_empty() {
                        let _ = tx.send(Chunk::Line(std::mem::take(&mut line)));
                    }
                    let _ = tx.send(Chunk::Eof);
                    return;
                }
                *activity.lock().unwrap() = Instant::now();
                let len = buf.len();
                let mut start = 0;
                for (i, &b) in buf.iter().enumerate() {
                    if b == b'\n' {
                        line.extend_from_slice(&buf[start..i]);
                        if tx.send(Chunk::Line(std::mem::take(&mut line))).is_err() {
                            return;
                        }
                        start = i + 1;
                    }
                }
                line.extend_from_slice(&buf[start..]);
                reader.consume(len);
            }
        });

        let mut records_out = 0u64;
        let mut cancelled = false;
        let result = loop {
            if ctx.cancel.as_ref().is_some_and(|c| c.load(Ordering::SeqCst)) {
                cancelled = true;
                kill_tree(&mut child);
                break Ok(());
            }
            match rx.recv_timeout(POLL) {
                Ok(Chunk::Line(line)) => {
                    let decoded = decode_record(&line).map_err(|e| fail(format!("bad output line {records_out}: {e}")));
                    if let Err(e) = decoded.and_then(&mut on_record) {
                        kill_tree(&mut child);
                        break Err(e);
                    }
                    records_out += 1;
                }
                Ok(Chunk::Eof) => break Ok(()),
                Ok(Chunk::Failed(e)) => {
                    kill_tree(&mut child);
                    break Err(fail(format!("reading child stdout: {e}")));
                }
                Err(RecvTimeoutError::Timeout) => {
                    if last_activity.lock().unwrap().elapsed() > spec.io_timeout {
                        kill_tree(&mut child);
                        break Err(fail(format!("no output for {:?}, child killed", spec.io_timeout)));
                    }
                }
                Err(RecvTimeoutError::Disconnected) => break Ok(()),
            }
        };
        let status = child.wait().map_err(|e| fail(format!("wait failed: {e}")));
        let records_in = writer.join().expect("stdin feeder panicked");
        result?;
        if cancelled {
            return Ok(StreamingReport {
                records_in: records_in.unwrap_or(0),
                records_out,
                cancelled: true,
            });
        }
        check_status(status?).map_err(fail)?;
        let records_in = records_in.map_err(|e| fail(format!("feeding child stdin: {e}")))?;
        Ok(StreamingReport {
            records_in,
            records_out,
            cancelled: false,
        })
    });
    outcome
}

fn check_status(status: ExitStatus) -> std::result::Result<(), String> {
    if status.success() {
        Ok(())
    } else {
        Err(format!("child exited with {status}"))
    }
}

/// Convenience wrapper collecting all output records.
pub fn run_streaming_collect<I>(spec: &StreamingTaskSpec, ctx: &StreamingContext, input: I) -> Result<Vec<Record>>
where
    I: IntoIterator<Item = Vec<u8>>,
    I::IntoIter: Send,
{
    let mut out = Vec::new();
    spawn_streaming_task(spec, ctx, input, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

/// Reads a file's lines for use as streaming input.
pub fn file_lines(path: &Path) -> Result<Vec<Vec<u8>>> {
    let mut data = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    Ok(data
        .split(|&b| b == b'\n')
        .filter(|l| !l.is_empty())
        .map(<[u8]>::to_vec)
        .collect())
}
