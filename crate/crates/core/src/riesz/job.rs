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

//! Sharded volume analysis: `group_size` volumes per map task, a single
//! reducer sorting by volume id.
//!
//! The mapper runs natively or as an external streaming worker. A worker
//! reads one volume path per stdin line and answers `volume_id \t e1,...,eM`
//! per line; parameters arrive through the `MR_RIESZ_*` environment
//! variables. Volumes that cannot be read or analyzed are listed in
//! `<output>.rejects` as `volume_id \t reason`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use crate::error::{Error, IoContext, Result};
use crate::job::{run_job, JobResult, JobSpec};
use crate::record::{decode_record, encode_record, Record};
use crate::riesz::analysis::{join_energies, Normalization, RieszAnalyzer};
use crate::riesz::volume::read_volume;
use crate::scheduler::ExecMode;
use crate::split::{plan_splits, resolve_entry, InputFile};
use crate::streaming::StreamingTaskSpec;
use crate::task::{identity_reducer, Emitter, MapFunction, MapInput, ReduceFunction};

pub const ENV_SCALES: &str = "MR_RIESZ_SCALES";
pub const ENV_ORDER: &str = "MR_RIESZ_ORDER";
pub const ENV_NORMALIZE: &str = "MR_RIESZ_NORMALIZE";
pub const ENV_BASE_DIR: &str = "MR_RIESZ_BASE_DIR";

const REJECT_MARK: u8 = b'!';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RieszParams {
    pub scales: u32,
    pub order: u32,
    pub normalization: Normalization,
}

impl Default for RieszParams {
    fn default() -> Self {
        Self {
            scales: 4,
            order: 4,
            normalization: Normalization::ZeroMean,
        }
    }
}

impl RieszParams {
    /// Reads the `MR_RIESZ_*` variables, falling back to `self` for unset ones.
    pub fn overridden_by_env(mut self) -> Result<Self> {
        let var = |name: &str| std::env::var(name).ok().filter(|v| !v.is_empty());
        if let Some(v) = var(ENV_SCALES) {
            self.scales = v.parse().map_err(|_| Error::input(format!("bad {ENV_SCALES}={v}")))?;
        }
        if let Some(v) = var(ENV_ORDER) {
            self.order = v.parse().map_err(|_| Error::input(format!("bad {ENV_ORDER}={v}")))?;
        }
        if let Some(v) = var(ENV_NORMALIZE) {
            self.normalization = v.parse()?;
        }
        Ok(self)
    }
}

/// Volume id of a manifest entry: its file stem.
pub fn volume_id(entry: &str) -> String {
    let p = Path::new(entry.trim());
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| entry.trim().to_string())
}

/// Analyzers shared by every task, one per volume shape.
#[derive(Default)]
pub struct AnalyzerCache {
    params: Option<RieszParams>,
    by_dims: Mutex<HashMap<[usize; 3], Arc<RieszAnalyzer>>>,
}

impl AnalyzerCache {
    pub fn new(params: RieszParams) -> Self {
        Self {
            params: Some(params),
            by_dims: Mutex::default(),
        }
    }

    fn get(&self, dims: [usize; 3]) -> Result<Arc<RieszAnalyzer>> {
        let p = self.params.unwrap_or_default();
        if let Some(a) = self.by_dims.lock().expect("analyzer cache poisoned").get(&dims) {
            return Ok(Arc::clone(a));
        }
        let a = Arc::new(RieszAnalyzer::new(dims, p.scales, p.order, p.normalization)?);
        self.by_dims
            .lock()
            .expect("analyzer cache poisoned")
            .entry(dims)
            .or_insert_with(|| Arc::clone(&a));
        Ok(a)
    }

    /// Analyzes the volume at `path`. Per-volume problems come back as a
    /// reject record rather than an error.
    pub fn record_for(&self, id: &str, path: &Path) -> Record {
        let result = read_volume(path).and_then(|v| self.get(v.dims)?.analyze(id, &v));
        match result {
            Ok(f) => Record::new(id, join_energies(&f.energies)),
            Err(e) => {
                let mut value = vec![REJECT_MARK];
                value.extend_from_slice(e.to_string().as_bytes());
                Record::new(id, value)
            }
        }
    }
}

/// Streaming worker loop: volume paths in, feature records out.
/// Relative paths resolve against `base_dir`.
pub fn run_riesz_worker<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    params: RieszParams,
    base_dir: &Path,
) -> Result<()> {
    let cache = AnalyzerCache::new(params);
    for line in input.split(b'\n') {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        let rec = decode_record(&line)?;
        let entry = String::from_utf8_lossy(&rec.key).into_owned();
        if entry.trim().is_empty() {
            continue;
        }
        let path = {
            let p = Path::new(entry.trim());
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base_dir.join(p)
            }
        };
        let mut out = encode_record(&cache.record_for(&volume_id(&entry), &path));
        out.push(b'\n');
        output.write_all(&out).map_err(|e| Error::io("<stdout>", e))?;
    }
    output.flush().map_err(|e| Error::io("<stdout>", e))
}

#[derive(Debug, Clone)]
pub struct TextureJobConfig {
    pub manifest: PathBuf,
    pub workspace: PathBuf,
    pub output: PathBuf,
    pub params: RieszParams,
    pub group_size: usize,
    pub map_slots: usize,
    /// Run the mapper as this external worker instead of natively.
    pub streaming: Option<StreamingTaskSpec>,
    pub exec_mode: ExecMode,
    pub job_id: String,
}

impl TextureJobConfig {
    pub fn new(manifest: impl Into<PathBuf>, workspace: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            workspace: workspace.into(),
            output: output.into(),
            params: RieszParams::default(),
            group_size: 10,
            map_slots: 1,
            streaming: None,
            exec_mode: ExecMode::default(),
            job_id: "riesz3d".into(),
        }
    }
}

#[derive(Debug)]
pub struct TextureJobOutcome {
    pub features_path: PathBuf,
    pub rejects_path: PathBuf,
    pub volumes: usize,
    pub rejected: usize,
    pub map_tasks: usize,
    pub job: JobResult,
}

/// Number of map tasks a manifest yields at `group_size` volumes per task.
pub fn plan_texture_tasks(manifest: &Path, group_size: usize) -> Result<usize> {
    Ok(plan_splits(manifest, group_size)?.len())
}

pub fn texture_job(cfg: &TextureJobConfig) -> Result<TextureJobOutcome> {
    let mapper = match &cfg.streaming {
        Some(spec) => {
            let base = cfg.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
            let base = fs::canonicalize(if base.as_os_str().is_empty() {
                Path::new(".")
            } else {
                &base
            })
            .at(&base)?;
            MapFunction::Streaming(
                spec.clone()
                    .env(ENV_SCALES, cfg.params.scales.to_string())
                    .env(ENV_ORDER, cfg.params.order.to_string())
                    .env(ENV_NORMALIZE, cfg.params.normalization.as_str())
                    .env(ENV_BASE_DIR, base.to_string_lossy()),
            )
        }
        None => {
            let cache = Arc::new(AnalyzerCache::new(cfg.params));
            let manifest = cfg.manifest.clone();
            MapFunction::native(move |input: &MapInput<'_>, out: &mut Emitter<'_>| -> Result<()> {
                let entry = String::from_utf8_lossy(input.line);
                let path = resolve_entry(&manifest, &entry);
                out.emit_record(cache.record_for(&volume_id(&entry), &path));
                Ok(())
            })
        }
    };
    let spec = JobSpec::new(
        cfg.job_id.clone(),
        &cfg.workspace,
        InputFile::manifest(&cfg.manifest),
        mapper,
    )
    .split_size(cfg.group_size.max(1))
    .map_slots(cfg.map_slots.max(1))
    .reducer(ReduceFunction::native(identity_reducer))
    .num_reducers(1)
    .exec_mode(cfg.exec_mode);
    let job = run_job(&spec)?;
    let map_tasks = job.map_states.len();

    let mut features = Vec::new();
    let mut rejects = Vec::new();
    for r in job.read_output()? {
        if r.value.first() == Some(&REJECT_MARK) {
            let reason = String::from_utf8_lossy(&r.value[1..]).replace(['\t', '\n'], " ");
            rejects.push(format!("{}\t{reason}\n", String::from_utf8_lossy(&r.key)));
        } else {
            let mut line = r.key.clone();
            line.push(b'\t');
            line.extend_from_slice(&r.value);
            line.push(b'\n');
            features.push(line);
        }
    }
    let rejects_path = {
        let mut name = cfg.output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".rejects");
        cfg.output.with_file_name(name)
    };
    write_committed(&cfg.output, features.iter().map(Vec::as_slice))?;
    write_committed(&rejects_path, rejects.iter().map(String::as_bytes))?;
    Ok(TextureJobOutcome {
        features_path: cfg.output.clone(),
        rejects_path,
        volumes: features.len(),
        rejected: rejects.len(),
        map_tasks,
        job,
    })
}

fn write_committed<'a>(path: &Path, lines: impl Iterator<Item = &'a [u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut w = BufWriter::new(fs::File::create(&tmp).at(&tmp)?);
    for l in lines {
        w.write_all(l).at(&tmp)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(&tmp, e.into_error()))?
        .sync_all()
        .at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

/// Parses a features file into `(volume_id, energies)` rows.
pub fn read_features(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    fs::read_to_string(path)
        .at(path)?
        .lines()
        .map(|l| {
            let (id, e) = l
                .split_once('\t')
                .ok_or_else(|| Error::input(format!("bad feature line {l:?}")))?;
            let e = e
                .split(',')
                .filter(|s| !s.is_empty())
                .map(|v| v.parse::<f64>().map_err(|_| Error::input(format!("bad energy {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            Ok((id.to_string(), e))
        })
        .collect()
}
