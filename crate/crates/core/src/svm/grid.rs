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

//! Exhaustive `(C, sigma)` search run as a MapReduce job.
//!
//! Each grid line becomes one map task that runs leave-one-patient-out
//! validation and reports completed folds as progress units, so the kill
//! factor can stop couples whose early folds are slow. Stopped couples keep
//! their place in the output with accuracy `-1`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, IoContext, Result};
use crate::job::{run_job, JobResult, JobSpec};
use crate::record::Record;
use crate::scheduler::{ExecMode, TerminationPolicy, TrackerNode, KILLED_SENTINEL};
use crate::split::InputFile;
use crate::svm::cv::lopo_cv;
use crate::svm::dataset::Dataset;
use crate::svm::smo::SolverParams;
use crate::task::{identity_reducer, Emitter, MapFunction, MapInput, ReduceFunction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamCouple {
    pub c: f64,
    pub sigma: f64,
    /// In `[0, 1]`, or `-1` for a killed couple.
    pub accuracy: f64,
    pub runtime: f64,
}

impl ParamCouple {
    pub fn is_killed(&self) -> bool {
        self.accuracy == KILLED_SENTINEL
    }

    /// `C \t sigma \t accuracy \t runtime_seconds`.
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}\t{:.6}", self.c, self.sigma, self.accuracy, self.runtime)
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::input(format!("bad grid result line {line:?}")))
        };
        if f.len() != 4 {
            return Err(Error::input(format!("bad grid result line {line:?}")));
        }
        Ok(Self {
            c: num(f[0])?,
            sigma: num(f[1])?,
            accuracy: num(f[2])?,
            runtime: num(f[3])?,
        })
    }
}

/// Axis values for the search. Every `(C, sigma)` pair is one task.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
}

impl Default for GridSpec {
    /// One value per decade: `C` in `1e-2 ..= 1e3`, `sigma` in `1e-1 ..= 1e2`.
    fn default() -> Self {
        Self {
            c_values: log_space(-2, 3, 1),
            sigma_values: log_space(-1, 2, 1),
        }
    }
}

impl GridSpec {
    /// Couples in row-major order (C outer).
    pub fn couples(&self) -> Vec<(f64, f64)> {
        self.c_values
            .iter()
            .flat_map(|&c| self.sigma_values.iter().map(move |&s| (c, s)))
            .collect()
    }
}

/// `10^e` for `e` from `lo` to `hi` in steps of `1/per_decade`.
pub fn log_space(lo: i32, hi: i32, per_decade: u32) -> Vec<f64> {
    let per = per_decade.max(1) as i32;
    (lo * per..=hi * per)
        .map(|k| {
            if k % per == 0 {
                // Parsing keeps whole decades exact (0.01 rather than 0.010000000000000002).
                format!("1e{}", k / per).parse().expect("valid float literal")
            } else {
                10f64.powf(k as f64 / per as f64)
            }
        })
        .collect()
}

pub fn write_grid_file(path: &Path, couples: &[(f64, f64)]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path).at(path)?);
    for (c, s) in couples {
        writeln!(w, "{c}\t{s}").at(path)?;
    }
    w.flush().at(path)
}

pub fn parse_couple(line: &str) -> Result<(f64, f64)> {
    let bad = || Error::input(format!("grid line {line:?} is not `C \\t sigma`"));
    let (c, s) = line.trim_end_matches('\r').split_once('\t').ok_or_else(bad)?;
    let c: f64 = c.trim().parse().map_err(|_| bad())?;
    let s: f64 = s.trim().parse().map_err(|_| bad())?;
    if !(c > 0.0 && c.is_finite() && s > 0.0 && s.is_finite()) {
        return Err(Error::domain(format!(
            "grid couple ({c}, {s}) must be positive and finite"
        )));
    }
    Ok((c, s))
}

pub fn read_grid_file(path: &Path) -> Result<Vec<(f64, f64)>> {
    fs::read_to_string(path)
        .at(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_couple)
        .collect()
}

/// Key whose bytewise order equals numeric `(C, sigma)` order for positive
/// values.
fn couple_key(c: f64, sigma: f64) -> String {
    format!("{:016x}{:016x}", c.to_bits(), sigma.to_bits())
}

#[derive(Debug, Clone)]
pub struct GridJobConfig {
    pub grid_file: PathBuf,
    pub dataset: PathBuf,
    pub workspace: PathBuf,
    pub map_slots: usize,
    pub kill_factor: Option<f64>,
    pub solver: SolverParams,
    pub exec_mode: ExecMode,
    pub job_id: String,
}

impl GridJobConfig {
    pub fn new(grid_file: impl Into<PathBuf>, dataset: impl Into<PathBuf>, workspace: impl Into<PathBuf>) -> Self {
        Self {
            grid_file: grid_file.into(),
            dataset: dataset.into(),
            workspace: workspace.into(),
            map_slots: 1,
            kill_factor: None,
            solver: SolverParams::default(),
            exec_mode: ExecMode::default(),
            job_id: "gridsvm".into(),
        }
    }
}

#[derive(Debug)]
pub struct GridOutcome {
    /// Sorted by `(C, sigma)`.
    pub couples: Vec<ParamCouple>,
    pub job: JobResult,
}

impl GridOutcome {
    pub fn best(&self) -> Option<&ParamCouple> {
        best_couple(&self.couples)
    }

    pub fn killed(&self) -> usize {
        self.couples.iter().filter(|c| c.is_killed()).count()
    }
}

/// Highest accuracy; ties go to the smaller C, then the smaller sigma.
pub fn best_couple(couples: &[ParamCouple]) -> Option<&ParamCouple> {
    couples.iter().reduce(|best, c| {
        let better =
            c.accuracy > best.accuracy || (c.accuracy == best.accuracy && (c.c, c.sigma) < (best.c, best.sigma));
        if better {
            c
        } else {
            best
        }
    })
}

/// Mapper body for one grid line.
fn grid_map(data: &Dataset, solver: &SolverParams, input: &MapInput<'_>, out: &mut Emitter<'_>) -> Result<()> {
    let started = Instant::now();
    let line = std::str::from_utf8(input.line).map_err(|_| Error::input("grid line is not UTF-8"))?;
    let (c, sigma) = parse_couple(line)?;
    let outcome = lopo_cv(data, c, sigma, solver, |fold| out.progress(fold))?;
    let couple = ParamCouple {
        c,
        sigma,
        accuracy: outcome.accuracy(),
        runtime: started.elapsed().as_secs_f64(),
    };
    let record = Record::new(couple_key(c, sigma), couple.to_line());
    if outcome.is_killed() {
        out.set_result(record.clone());
    }
    out.emit_record(record);
    Ok(())
}

pub fn grid_job(cfg: &GridJobConfig) -> Result<GridOutcome> {
    let data = Arc::new(Dataset::read(&cfg.dataset)?);
    let solver = cfg.solver;
    let policy = cfg.kill_factor.map(TerminationPolicy::new).transpose()?;
    let mapper = {
        let data = Arc::clone(&data);
        move |input: &MapInput<'_>, out: &mut Emitter<'_>| grid_map(&data, &solver, input, out)
    };
    let spec = JobSpec::new(
        cfg.job_id.clone(),
        &cfg.workspace,
        InputFile::manifest(&cfg.grid_file),
        MapFunction::native(mapper),
    )
    .reducer(ReduceFunction::native(identity_reducer))
    .num_reducers(1)
    .split_size(1)
    .nodes(vec![TrackerNode::new("node-0", cfg.map_slots.max(1))])
    .kill_policy(policy)
    .exec_mode(cfg.exec_mode);
    let job = run_job(&spec)?;
    let couples = job
        .read_output()?
        .iter()
        .map(|r| ParamCouple::parse_line(&String::from_utf8_lossy(&r.value)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridOutcome { couples, job })
}

/// Writes one couple per line, committed by rename.
pub fn write_grid_results(path: &Path, couples: &[ParamCouple]) -> Result<()> {
    let tmp = path.with_extension("partial");
    let mut w = BufWriter::new(fs::File::create(&tmp).at(&tmp)?);
    for c in couples {
        writeln!(w, "{}", c.to_line()).at(&tmp)?;
    }
    w.flush().at(&tmp)?;
    drop(w);
    fs::rename(&tmp, path).at(path)
}
