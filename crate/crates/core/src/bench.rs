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

//! Benchmark harness: runs a workload at several slot counts and reports
//! wall time per repetition.
//!
//! Report lines are `workload \t slots \t rep \t seconds`. After the raw
//! lines come four summary lines per slot count, with `min`, `median`,
//! `max` and `mean-task` in the `rep` column; `mean-task` is the average
//! map-task runtime across repetitions.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::bovw::{generate_images, run_index, vocabulary_from_manifest, IndexConfig, IndexMode, KMeansParams};
use crate::error::{Error, IoContext, Result};
use crate::job::JobResult;
use crate::riesz::{generate_volumes, texture_job, TextureJobConfig};
use crate::scheduler::ExecMode;
use crate::svm::{generate_svm_dataset, grid_job, write_grid_file, GridJobConfig, GridSpec, SyntheticSvmParams};
use crate::wordcount::{generate_corpus, run_wordcount, WordCountConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workload {
    WordCount,
    GridSvm,
    Bovw,
    Riesz3d,
}

impl Workload {
    pub fn as_str(self) -> &'static str {
        match self {
            Workload::WordCount => "wordcount",
            Workload::GridSvm => "gridsvm",
            Workload::Bovw => "bovw",
            Workload::Riesz3d => "riesz3d",
        }
    }
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Workload {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "wordcount" => Workload::WordCount,
            "gridsvm" => Workload::GridSvm,
            "bovw" => Workload::Bovw,
            "riesz3d" => Workload::Riesz3d,
            other => return Err(Error::input(format!("unknown workload {other:?}"))),
        })
    }
}

/// Input sizes of the generated fixtures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSize {
    pub corpus_bytes: usize,
    pub images: usize,
    pub image_size: usize,
    pub vocabulary: usize,
    pub volumes: usize,
    pub volume_side: usize,
    pub svm_patients: usize,
    pub svm_per_patient: usize,
}

impl Default for FixtureSize {
    fn default() -> Self {
        Self {
            corpus_bytes: 10 << 20,
            images: 500,
            image_size: 64,
            vocabulary: 100,
            volumes: 16,
            volume_side: 32,
            svm_patients: 6,
            svm_per_patient: 10,
        }
    }
}

/// Generated inputs for one workload, reusable across runs.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub workload: Workload,
    pub dir: PathBuf,
    inputs: FixtureInputs,
}

#[derive(Debug, Clone)]
enum FixtureInputs {
    WordCount {
        corpus: PathBuf,
    },
    GridSvm {
        grid: PathBuf,
        data: PathBuf,
    },
    Bovw {
        manifest: PathBuf,
        vocabulary: Arc<crate::bovw::VisualVocabulary>,
    },
    Riesz3d {
        manifest: PathBuf,
    },
}

fn write_manifest(path: &Path, entries: &[PathBuf]) -> Result<()> {
    let body: String = entries.iter().map(|p| format!("{}\n", p.display())).collect();
    fs::write(path, body).at(path)
}

impl Fixture {
    pub fn prepare(workload: Workload, dir: &Path, size: &FixtureSize, seed: u64) -> Result<Self> {
        fs::create_dir_all(dir).at(dir)?;
        let inputs = match workload {
            Workload::WordCount => {
                let corpus = dir.join("corpus.txt");
                generate_corpus(&corpus, size.corpus_bytes, seed)?;
                FixtureInputs::WordCount { corpus }
            }
            Workload::GridSvm => {
                let data = dir.join("svm.tsv");
                let params = SyntheticSvmParams {
                    patients: size.svm_patients,
                    per_patient: size.svm_per_patient,
                    ..SyntheticSvmParams::default()
                };
                generate_svm_dataset(&params, seed)?.write(&data)?;
                let grid = dir.join("grid.txt");
                write_grid_file(&grid, &GridSpec::default().couples())?;
                FixtureInputs::GridSvm { grid, data }
            }
            Workload::Bovw => {
                let images = generate_images(&dir.join("images"), size.images, size.image_size, seed)?;
                let manifest = dir.join("images.txt");
                write_manifest(&manifest, &images)?;
                let vocabulary = vocabulary_from_manifest(
                    &manifest,
                    size.vocabulary,
                    seed,
                    20_000,
                    &Default::default(),
                    &KMeansParams::default(),
                )?;
                FixtureInputs::Bovw {
                    manifest,
                    vocabulary: Arc::new(vocabulary),
                }
            }
            Workload::Riesz3d => {
                let side = size.volume_side;
                let vols = generate_volumes(&dir.join("volumes"), size.volumes, [side; 3], seed)?;
                let manifest = dir.join("volumes.txt");
                write_manifest(&manifest, &vols)?;
                FixtureInputs::Riesz3d { manifest }
            }
        };
        Ok(Self {
            workload,
            dir: dir.to_path_buf(),
            inputs,
        })
    }

    /// Runs the workload once with `slots` map slots; outputs go under
    /// `workspace`.
    pub fn run(&self, slots: usize, workspace: &Path, mode: ExecMode) -> Result<BenchRun> {
        let started = Instant::now();
        let output = workspace.join(format!("{}.out", self.workload));
        let jobs: Vec<JobResult> = match &self.inputs {
            FixtureInputs::WordCount { corpus } => {
                let mut cfg = WordCountConfig::new(vec![corpus.clone()], workspace);
                cfg.map_slots = slots;
                cfg.reducers = slots;
                cfg.exec_mode = mode;
                vec![run_wordcount(&cfg, &output)?]
            }
            FixtureInputs::GridSvm { grid, data } => {
                let mut cfg = GridJobConfig::new(grid, data, workspace);
                cfg.map_slots = slots;
                cfg.exec_mode = mode;
                let out = grid_job(&cfg)?;
                crate::svm::write_grid_results(&output, &out.couples)?;
                vec![out.job]
            }
            FixtureInputs::Bovw { manifest, vocabulary } => {
                let mut cfg = IndexConfig::new(
                    manifest,
                    Arc::clone(vocabulary),
                    workspace,
                    &output,
                    IndexMode::Monolithic,
                );
                cfg.map_slots = slots;
                cfg.images_per_task = 25;
                cfg.exec_mode = mode;
                run_index(&cfg)?.jobs
            }
            FixtureInputs::Riesz3d { manifest } => {
                let mut cfg = TextureJobConfig::new(manifest, workspace, &output);
                cfg.map_slots = slots;
                cfg.group_size = 1;
                cfg.exec_mode = mode;
                vec![texture_job(&cfg)?.job]
            }
        };
        let seconds = started.elapsed().as_secs_f64();
        Ok(BenchRun {
            seconds,
            mean_task_seconds: mean_task_runtime(&jobs),
            output,
        })
    }
}

/// Average runtime of the map tasks of `jobs`.
pub fn mean_task_runtime(jobs: &[JobResult]) -> f64 {
    let runtimes: Vec<f64> = jobs
        .iter()
        .flat_map(|j| j.map_states.values().map(|s| s.runtime))
        .collect();
    if runtimes.is_empty() {
        0.0
    } else {
        runtimes.iter().sum::<f64>() / runtimes.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRun {
    pub seconds: f64,
    pub mean_task_seconds: f64,
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSample {
    pub slots: usize,
    pub rep: usize,
    pub seconds: f64,
    pub mean_task_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub workload: String,
    pub samples: Vec<BenchSample>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

impl BenchReport {
    fn slot_counts(&self) -> Vec<usize> {
        let mut slots: Vec<usize> = Vec::new();
        for s in &self.samples {
            if !slots.contains(&s.slots) {
                slots.push(s.slots);
            }
        }
        slots
    }

    fn times(&self, slots: usize) -> Vec<f64> {
        let mut t: Vec<f64> = self
            .samples
            .iter()
            .filter(|s| s.slots == slots)
            .map(|s| s.seconds)
            .collect();
        t.sort_by(f64::total_cmp);
        t
    }

    pub fn median_seconds(&self, slots: usize) -> Option<f64> {
        let t = self.times(slots);
        (!t.is_empty()).then(|| median(&t))
    }

    /// Median time at `base` slots over median time at `slots`.
    pub fn speedup(&self, base: usize, slots: usize) -> Option<f64> {
        Some(self.median_seconds(base)? / self.median_seconds(slots)?)
    }

    pub fn lines(&self) -> Vec<String> {
        let w = &self.workload;
        let mut out: Vec<String> = self
            .samples
            .iter()
            .map(|s| format!("{w}\t{}\t{}\t{:.6}", s.slots, s.rep, s.seconds))
            .collect();
        for slots in self.slot_counts() {
            let t = self.times(slots);
            let per_task: Vec<f64> = self
                .samples
                .iter()
                .filter(|s| s.slots == slots)
                .map(|s| s.mean_task_seconds)
                .collect();
            let mean_task = per_task.iter().sum::<f64>() / per_task.len() as f64;
            out.push(format!("{w}\t{slots}\tmin\t{:.6}", t[0]));
            out.push(format!("{w}\t{slots}\tmedian\t{:.6}", median(&t)));
            out.push(format!("{w}\t{slots}\tmax\t{:.6}", t[t.len() - 1]));
            out.push(format!("{w}\t{slots}\tmean-task\t{mean_task:.6}"));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut body = self.lines().join("\n");
        body.push('\n');
        let tmp = path.with_extension("partial");
        fs::write(&tmp, body).at(&tmp)?;
        fs::rename(&tmp, path).at(path)
    }
}

/// Runs `fixture` `repetitions` times at each slot count, each run in a
/// fresh workspace under `workspace`.
pub fn run_bench(
    fixture: &Fixture,
    slot_list: &[usize],
    repetitions: usize,
    workspace: &Path,
    mode: ExecMode,
) -> Result<BenchReport> {
    if slot_list.is_empty() || slot_list.contains(&0) || repetitions == 0 {
        return Err(Error::domain(
            "bench needs positive slot counts and at least one repetition",
        ));
    }
    let mut samples = Vec::new();
    for &slots in slot_list {
        for rep in 0..repetitions {
            let ws = workspace.join(format!("s{slots}-r{rep}"));
            if ws.exists() {
                fs::remove_dir_all(&ws).at(&ws)?;
            }
            let run = fixture.run(slots, &ws, mode)?;
            samples.push(BenchSample {
                slots,
                rep,
                seconds: run.seconds,
                mean_task_seconds: run.mean_task_seconds,
            });
        }
    }
    Ok(BenchReport {
        workload: fixture.workload.to_string(),
        samples,
    })
}
