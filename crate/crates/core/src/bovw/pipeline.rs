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

//! Image indexing as MapReduce jobs.
//!
//! Monolithic mode extracts, quantizes and counts inside one mapper and keeps
//! nothing in between. Component mode runs a map-only extraction job, writes
//! every descriptor to a CSV (`image_id,x,y,scale,f1,...,fD`), then runs a
//! second job over that CSV plus the list of accepted images so that images
//! without descriptors still get an all-zero row. Both modes write the same
//! index: `image_id \t c1,...,ck`, sorted by image id.
//!
//! Image ids are file stems and must be unique within a manifest. Unreadable
//! images are listed in a rejects file (`image_id \t reason`) next to the
//! index and left out of it.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::bovw::descriptor::{extract_descriptors, DenseGridParams, Descriptor};
use crate::bovw::pgm::read_pgm;
use crate::bovw::vocab::{
    bovw_histogram, build_vocabulary, join_counts, quantize, subsample, KMeansParams, VisualVocabulary,
};
use crate::error::{Error, IoContext, Result};
use crate::job::{run_job, JobResult, JobSpec};
use crate::record::Record;
use crate::scheduler::ExecMode;
use crate::split::{read_manifest, resolve_entry, InputFile};
use crate::task::{identity_reducer, Emitter, MapFunction, MapInput, ReduceFunction};

const REJECT_MARK: char = '!';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMode {
    Component,
    Monolithic,
}

impl FromStr for IndexMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "component" => Ok(Self::Component),
            "monolithic" => Ok(Self::Monolithic),
            other => Err(Error::input(format!("unknown index mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IndexConfig {
    pub manifest: PathBuf,
    pub vocabulary: Arc<VisualVocabulary>,
    pub workspace: PathBuf,
    pub output: PathBuf,
    pub map_slots: usize,
    pub images_per_task: usize,
    pub mode: IndexMode,
    pub grid: DenseGridParams,
    pub exec_mode: ExecMode,
}

impl IndexConfig {
    pub fn new(
        manifest: impl Into<PathBuf>,
        vocabulary: Arc<VisualVocabulary>,
        workspace: impl Into<PathBuf>,
        output: impl Into<PathBuf>,
        mode: IndexMode,
    ) -> Self {
        Self {
            manifest: manifest.into(),
            vocabulary,
            workspace: workspace.into(),
            output: output.into(),
            map_slots: 1,
            images_per_task: 50,
            mode,
            grid: DenseGridParams::default(),
            exec_mode: ExecMode::default(),
        }
    }
}

#[derive(Debug)]
pub struct IndexOutcome {
    pub index_path: PathBuf,
    pub rejects_path: PathBuf,
    pub images_indexed: usize,
    pub rejected: usize,
    /// Component mode only.
    pub descriptor_csv: Option<PathBuf>,
    pub descriptor_rows: u64,
    pub jobs: Vec<JobResult>,
    pub wall_time: Duration,
}

/// Rejects file path for an index path: `<index>.rejects`.
pub fn rejects_path(index: &Path) -> PathBuf {
    let mut name = index.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".rejects");
    index.with_file_name(name)
}

/// File stem of a manifest entry.
pub fn image_id(entry: &str) -> Result<String> {
    let id = Path::new(entry.trim())
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::input(format!("cannot derive an image id from {entry:?}")))?;
    if id.contains([',', '\t', '\n']) || id.starts_with(REJECT_MARK) {
        return Err(Error::input(format!("image id {id:?} must not contain commas or tabs")));
    }
    Ok(id.to_string())
}

fn check_manifest(manifest: &Path) -> Result<usize> {
    let entries = read_manifest(manifest)?;
    let mut ids = entries.iter().map(|e| image_id(e)).collect::<Result<Vec<_>>>()?;
    ids.sort();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::input(format!(
            "image id {:?} appears twice in the manifest",
            w[0]
        )));
    }
    Ok(ids.len())
}

/// Reads and describes one manifest entry.
fn load_descriptors(manifest: &Path, line: &[u8], grid: &DenseGridParams) -> Result<(String, Result<Vec<Descriptor>>)> {
    let entry = std::str::from_utf8(line).map_err(|_| Error::input("manifest entry is not UTF-8"))?;
    let id = image_id(entry)?;
    let descs = read_pgm(&resolve_entry(manifest, entry)).and_then(|img| extract_descriptors(&id, &img, grid));
    Ok((id, descs))
}

fn reject(out: &mut Emitter<'_>, id: &str, err: &Error) {
    out.emit(id, format!("{REJECT_MARK}{err}"));
}

pub fn descriptor_csv_row(d: &Descriptor) -> String {
    let mut row = format!("{},{},{},{}", d.image_id, d.x, d.y, d.scale);
    for v in &d.vector {
        row.push(',');
        row.push_str(&v.to_string());
    }
    row
}

/// Parses a CSV row into `(image_id, features)`.
pub fn parse_descriptor_row(row: &str) -> Result<(String, Vec<f64>)> {
    let bad = || {
        Error::input(format!(
            "malformed descriptor row {:?}",
            row.chars().take(60).collect::<String>()
        ))
    };
    let mut fields = row.split(',');
    let id = fields.next().filter(|s| !s.is_empty()).ok_or_else(bad)?.to_string();
    for _ in 0..3 {
        fields.next().ok_or_else(bad)?.parse::<u32>().map_err(|_| bad())?;
    }
    let features = fields
        .map(|f| f.parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    Ok((id, features))
}

fn base_spec(cfg: &IndexConfig, job_id: &str, input: InputFile, mapper: MapFunction) -> JobSpec {
    JobSpec::new(job_id, &cfg.workspace, input, mapper)
        .split_size(cfg.images_per_task.max(1))
        .map_slots(cfg.map_slots.max(1))
        .exec_mode(cfg.exec_mode)
}

pub fn run_index(cfg: &IndexConfig) -> Result<IndexOutcome> {
    let started = Instant::now();
    check_manifest(&cfg.manifest)?;
    if cfg.grid.dim() != cfg.vocabulary.dim() {
        return Err(Error::domain(format!(
            "descriptor dimension {} does not match vocabulary dimension {}",
            cfg.grid.dim(),
            cfg.vocabulary.dim()
        )));
    }
    let (records, csv, rows, jobs) = match cfg.mode {
        IndexMode::Monolithic => {
            let job = monolithic_job(cfg)?;
            (job.read_output()?, None, 0, vec![job])
        }
        IndexMode::Component => component_jobs(cfg)?,
    };

    let index_path = cfg.output.clone();
    let rejects = rejects_path(&index_path);
    let mut index_lines = Vec::new();
    let mut reject_lines = Vec::new();
    for r in &records {
        let key = String::from_utf8_lossy(&r.key);
        let value = String::from_utf8_lossy(&r.value);
        match value.strip_prefix(REJECT_MARK) {
            Some(reason) => reject_lines.push(format!("{key}\t{}\n", reason.replace(['\t', '\n'], " "))),
            None => index_lines.push(format!("{key}\t{value}\n")),
        }
    }
    reject_lines.sort();
    write_committed(&index_path, &index_lines)?;
    write_committed(&rejects, &reject_lines)?;
    Ok(IndexOutcome {
        index_path,
        rejects_path: rejects,
        images_indexed: index_lines.len(),
        rejected: reject_lines.len(),
        descriptor_csv: csv,
        descriptor_rows: rows,
        jobs,
        wall_time: started.elapsed(),
    })
}

fn write_committed(path: &Path, lines: &[String]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).at(dir)?;
    }
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut w = BufWriter::new(fs::File::create(&tmp).at(&tmp)?);
    for l in lines {
        w.write_all(l.as_bytes()).at(&tmp)?;
    }
    w.into_inner()
        .map_err(|e| Error::io(&tmp, e.into_error()))?
        .sync_all()
        .at(&tmp)?;
    fs::rename(&tmp, path).at(path)
}

fn monolithic_job(cfg: &IndexConfig) -> Result<JobResult> {
    let vocab = Arc::clone(&cfg.vocabulary);
    let grid = cfg.grid.clone();
    let manifest = cfg.manifest.clone();
    let mapper = move |input: &MapInput<'_>, out: &mut Emitter<'_>| -> Result<()> {
        let (id, descs) = load_descriptors(&manifest, input.line, &grid)?;
        match descs {
            Ok(descs) => {
                let h = bovw_histogram(&id, descs.iter().map(|d| d.vector.as_slice()), &vocab)?;
                out.emit(id, join_counts(&h.counts));
            }
            Err(e) => reject(out, &id, &e),
        }
        Ok(())
    };
    let spec = base_spec(
        cfg,
        "bovw-monolithic",
        InputFile::manifest(&cfg.manifest),
        MapFunction::native(mapper),
    )
    .reducer(ReduceFunction::native(identity_reducer))
    .num_reducers(1);
    run_job(&spec)
}

type ComponentResult = (Vec<Record>, Option<PathBuf>, u64, Vec<JobResult>);

fn component_jobs(cfg: &IndexConfig) -> Result<ComponentResult> {
    // Stage 1: map-only extraction.
    let grid = cfg.grid.clone();
    let manifest = cfg.manifest.clone();
    let extract = move |input: &MapInput<'_>, out: &mut Emitter<'_>| -> Result<()> {
        let (id, descs) = load_descriptors(&manifest, input.line, &grid)?;
        match descs {
            Ok(descs) => {
                // Empty value marks an accepted image; rows follow.
                out.emit(id.as_str(), "");
                for d in &descs {
                    out.emit(id.as_str(), descriptor_csv_row(d));
                }
            }
            Err(e) => reject(out, &id, &e),
        }
        Ok(())
    };
    let stage1 = base_spec(
        cfg,
        "bovw-extract",
        InputFile::manifest(&cfg.manifest),
        MapFunction::native(extract),
    )
    .num_reducers(0);
    let extracted = run_job(&stage1)?;

    let csv_path = cfg.workspace.join("bovw-descriptors.csv");
    let accepted_path = cfg.workspace.join("bovw-accepted.txt");
    let mut csv = BufWriter::new(fs::File::create(&csv_path).at(&csv_path)?);
    let mut accepted = BufWriter::new(fs::File::create(&accepted_path).at(&accepted_path)?);
    let mut rejects = Vec::new();
    let mut rows = 0u64;
    for r in extracted.read_output()? {
        let id = String::from_utf8_lossy(&r.key);
        if r.value.is_empty() {
            writeln!(accepted, "{id}").at(&accepted_path)?;
        } else if r.value.first() == Some(&(REJECT_MARK as u8)) {
            rejects.push(r);
        } else {
            csv.write_all(&r.value).at(&csv_path)?;
            csv.write_all(b"\n").at(&csv_path)?;
            rows += 1;
        }
    }
    csv.into_inner()
        .map_err(|e| Error::io(&csv_path, e.into_error()))?
        .sync_all()
        .at(&csv_path)?;
    accepted.flush().at(&accepted_path)?;

    // Stage 2: quantize CSV rows; accepted ids guarantee one row per image.
    let vocab = Arc::clone(&cfg.vocabulary);
    let quantize_map = move |input: &MapInput<'_>, out: &mut Emitter<'_>| -> Result<()> {
        let line = std::str::from_utf8(input.line).map_err(|_| Error::input("descriptor row is not UTF-8"))?;
        if input.source_index == 0 {
            out.emit(line.trim(), "");
        } else {
            let (id, f) = parse_descriptor_row(line)?;
            out.emit(id, quantize(&f, &vocab)?.to_string());
        }
        Ok(())
    };
    let k = cfg.vocabulary.k();
    let count = move |key: &[u8], values: &[Vec<u8>], out: &mut Emitter<'_>| -> Result<()> {
        let mut counts = vec![0u64; k];
        for v in values.iter().filter(|v| !v.is_empty()) {
            let word: usize = std::str::from_utf8(v)
                .ok()
                .and_then(|s| s.parse().ok())
                .filter(|w| (1..=k).contains(w))
                .ok_or_else(|| Error::input("bad word index in shuffle"))?;
            counts[word - 1] += 1;
        }
        out.emit(key, join_counts(&counts));
        Ok(())
    };
    // Descriptor rows outnumber images; size CSV splits to about the same
    // number of images per task.
    let per_image = cfg.grid.grid_count(64, 64).max(1);
    let stage2 = base_spec(
        cfg,
        "bovw-quantize",
        InputFile::manifest(&accepted_path),
        MapFunction::native(quantize_map),
    )
    .input(InputFile::lines(&csv_path))
    .split_size(cfg.images_per_task.max(1) * per_image)
    .reducer(ReduceFunction::native(count))
    .num_reducers(1);
    let quantized = run_job(&stage2)?;
    let mut records = quantized.read_output()?;
    records.extend(rejects);
    records.sort_by(|a, b| a.key.cmp(&b.key));
    Ok((records, Some(csv_path), rows, vec![extracted, quantized]))
}

/// Builds a vocabulary from every readable image of a manifest: descriptors
/// are pooled, subsampled to at most `sample_limit` with `seed`, and
/// clustered with the same seed.
pub fn vocabulary_from_manifest(
    manifest: &Path,
    k: usize,
    seed: u64,
    sample_limit: usize,
    grid: &DenseGridParams,
    params: &KMeansParams,
) -> Result<VisualVocabulary> {
    let mut pool: Vec<Vec<f64>> = Vec::new();
    for entry in read_manifest(manifest)? {
        let id = image_id(&entry)?;
        if let Ok(img) = read_pgm(&resolve_entry(manifest, &entry)) {
            pool.extend(extract_descriptors(&id, &img, grid)?.into_iter().map(|d| d.vector));
        }
    }
    let sample = subsample(&pool, sample_limit, seed);
    let refs: Vec<&[f64]> = sample.iter().map(Vec::as_slice).collect();
    build_vocabulary(&refs, k, seed, params)
}
