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

//! `medimr` command-line driver.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use medimr::bench::{run_bench, Fixture, FixtureSize, Workload};
use medimr::bovw::{run_index, vocabulary_from_manifest, IndexConfig, IndexMode, KMeansParams, VisualVocabulary};
use medimr::job::FailureInjection;
use medimr::riesz::{self, Normalization, RieszParams, TextureJobConfig};
use medimr::scheduler::ExecMode;
use medimr::streaming::{StreamRole, StreamingTaskSpec};
use medimr::svm::{self, GridJobConfig, GridSpec, SyntheticSvmParams};
use medimr::wordcount::{collect_inputs, generate_corpus, run_wordcount, WordCountConfig};

#[derive(Parser, Debug)]
#[command(
    name = "medimr",
    version,
    about = "Single-host MapReduce engine with imaging workloads"
)]
struct Cli {
    /// Job workspace directory.
    #[arg(
        long,
        global = true,
        env = "MR_WORKSPACE",
        default_value = "mr-workspace",
        display_order = 100
    )]
    workspace: PathBuf,
    /// Seed for every random choice of this invocation.
    #[arg(long, global = true, default_value_t = 1, display_order = 101)]
    seed: u64,
    /// `key=value` file of flag defaults; flags given on the command line win.
    #[arg(long, global = true, display_order = 102)]
    config: Option<PathBuf>,
    /// Run every task on the calling thread.
    #[arg(long, global = true, display_order = 103)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count whitespace-separated words.
    Wordcount(WordcountArgs),
    /// SVM (C, sigma) grid search with leave-one-patient-out validation.
    Gridsvm(GridArgs),
    /// Bag-of-visual-words vocabulary and index.
    #[command(subcommand)]
    Bovw(BovwCommand),
    /// 3D Riesz texture energies of a volume manifest.
    Riesz3d(RieszArgs),
    /// Streaming worker for riesz3d: volume paths on stdin, features on stdout.
    Riesz3dWorker(WorkerArgs),
    /// Time a workload at several slot counts.
    Bench(BenchArgs),
    /// Generate synthetic inputs.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Args, Debug)]
struct WordcountArgs {
    /// Input text file or directory of files.
    #[arg(long)]
    input: PathBuf,
    /// Counts file, `word<TAB>count` sorted by word.
    #[arg(long)]
    output: PathBuf,
    /// Concurrent map tasks.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    map_slots: u64,
    /// Number of reduce tasks.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    reducers: u64,
    /// Lines per map task.
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    split_size: u64,
    /// Fraction of map attempts to fail on purpose.
    #[arg(long, default_value_t = 0.0)]
    fail_rate: f64,
}

#[derive(Args, Debug)]
struct GridArgs {
    /// Dataset file written by `gen svm`.
    #[arg(long)]
    data: PathBuf,
    /// Grid file, one `C<TAB>sigma` couple per line.
    #[arg(long)]
    grid: PathBuf,
    /// Results, `C<TAB>sigma<TAB>accuracy<TAB>runtime` per couple.
    #[arg(long)]
    output: PathBuf,
    /// Stop couples slower than this factor times the fastest; off when absent.
    #[arg(long)]
    kill_factor: Option<f64>,
    /// Concurrent map tasks.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    map_slots: u64,
    /// SMO stopping tolerance.
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
}

#[derive(Subcommand, Debug)]
enum BovwCommand {
    /// Cluster sampled descriptors into a visual vocabulary.
    Vocab(VocabArgs),
    /// Build the word-histogram index of an image manifest.
    Index(IndexArgs),
}

#[derive(Args, Debug)]
struct VocabArgs {
    /// Image manifest, one PGM path per line.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Number of visual words.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Descriptors sampled for clustering.
    #[arg(long, default_value_t = 20_000)]
    sample: usize,
    /// k-means iteration cap.
    #[arg(long, default_value_t = 100)]
    max_iterations: u32,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Component,
    Monolithic,
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Vocabulary file written by `bovw vocab`.
    #[arg(long)]
    vocab: PathBuf,
    /// Index file, `image_id<TAB>c1,...,ck` per image.
    #[arg(long)]
    output: PathBuf,
    /// Two jobs with materialized descriptors, or one fused job.
    #[arg(long, value_enum, default_value_t = ModeArg::Monolithic)]
    mode: ModeArg,
    /// Concurrent map tasks.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    map_slots: u64,
    /// Images per map task.
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    images_per_task: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormArg {
    None,
    ZeroMean,
    Standardize,
}

impl From<NormArg> for Normalization {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::None => Normalization::None,
            NormArg::ZeroMean => Normalization::ZeroMean,
            NormArg::Standardize => Normalization::Standardize,
        }
    }
}

#[derive(Args, Debug)]
struct RieszArgs {
    /// Volume manifest, one path per line.
    #[arg(long)]
    manifest: PathBuf,
    /// Features file, `volume_id<TAB>e1,...,eM` per volume.
    #[arg(long)]
    output: PathBuf,
    /// Wavelet scales.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    scales: u32,
    /// Riesz order.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    order: u32,
    /// Volumes per map task.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    group_size: u64,
    /// Concurrent map tasks.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    map_slots: u64,
    /// Intensity normalization applied before analysis.
    #[arg(long, value_enum, default_value_t = NormArg::ZeroMean)]
    normalize: NormArg,
    /// Run the mapper as an external worker; `self` uses this binary.
    #[arg(long)]
    streaming_exec: Option<String>,
}

#[derive(Args, Debug)]
struct WorkerArgs {
    /// Defaults to MR_RIESZ_SCALES, then 4.
    #[arg(long)]
    scales: Option<u32>,
    /// Defaults to MR_RIESZ_ORDER, then 4.
    #[arg(long)]
    order: Option<u32>,
    /// Defaults to MR_RIESZ_NORMALIZE, then zero-mean.
    #[arg(long, value_enum)]
    normalize: Option<NormArg>,
    /// Directory for relative paths; defaults to MR_RIESZ_BASE_DIR, then the
    /// current directory.
    #[arg(long)]
    base_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WorkloadArg {
    Wordcount,
    Gridsvm,
    Bovw,
    Riesz3d,
}

impl From<WorkloadArg> for Workload {
    fn from(w: WorkloadArg) -> Self {
        match w {
            WorkloadArg::Wordcount => Workload::WordCount,
            WorkloadArg::Gridsvm => Workload::GridSvm,
            WorkloadArg::Bovw => Workload::Bovw,
            WorkloadArg::Riesz3d => Workload::Riesz3d,
        }
    }
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Workload to time.
    #[arg(long, value_enum)]
    workload: WorkloadArg,
    /// Comma-separated slot counts.
    #[arg(long, value_delimiter = ',', default_value = "1,4")]
    slots: Vec<usize>,
    /// Repetitions per slot count.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    /// Report file, `workload<TAB>slots<TAB>rep<TAB>seconds` per run.
    #[arg(long)]
    output: PathBuf,
    /// Corpus size for wordcount.
    #[arg(long, default_value_t = 10 << 20)]
    corpus_bytes: usize,
    /// Image count for bovw.
    #[arg(long, default_value_t = 500)]
    images: usize,
    /// Volume count for riesz3d.
    #[arg(long, default_value_t = 16)]
    volumes: usize,
}

#[derive(Subcommand, Debug)]
enum GenCommand {
    /// Labelled feature vectors grouped by patient.
    Svm(GenSvmArgs),
    /// Grayscale PGM textures.
    Images(GenImagesArgs),
    /// Cubic float32 volumes.
    Volumes(GenVolumesArgs),
    /// Text corpus for wordcount.
    Corpus(GenCorpusArgs),
    /// Log-spaced (C, sigma) grid file.
    Grid(GenGridArgs),
}

#[derive(Args, Debug)]
struct GenSvmArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 10)]
    patients: usize,
    /// Instances per patient.
    #[arg(long, default_value_t = 20)]
    per_patient: usize,
    #[arg(long, default_value_t = 5)]
    classes: u32,
    /// Feature dimension.
    #[arg(long, default_value_t = 8)]
    dim: usize,
    /// Distance scale between class means.
    #[arg(long, default_value_t = 3.0)]
    separation: f64,
    /// Fraction of instances given a random label.
    #[arg(long, default_value_t = 0.0)]
    label_noise: f64,
}

#[derive(Args, Debug)]
struct GenImagesArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of images.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Side length in pixels.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Also write a manifest listing the files.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenVolumesArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of volumes.
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Side length in voxels.
    #[arg(long, default_value_t = 32)]
    dims: usize,
    /// Also write a manifest listing the files.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenCorpusArgs {
    #[arg(long)]
    output: PathBuf,
    /// Approximate corpus size.
    #[arg(long, default_value_t = 10 << 20)]
    bytes: usize,
}

#[derive(Args, Debug)]
struct GenGridArgs {
    #[arg(long)]
    output: PathBuf,
    /// Decades of C, as `lo:hi` exponents.
    #[arg(long, default_value = "-2:3")]
    c_decades: String,
    /// Decades of sigma, as `lo:hi` exponents.
    #[arg(long, default_value = "-1:2")]
    sigma_decades: String,
    /// Values per decade.
    #[arg(long, default_value_t = 1)]
    per_decade: u32,
}

fn exec_mode(cli: &Cli) -> ExecMode {
    if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::default()
    }
}

fn job_workspace(cli: &Cli, name: &str) -> PathBuf {
    cli.workspace.join(name)
}

fn fresh_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).with_context(|| format!("clearing {}", path.display()))?;
    }
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn write_manifest(path: &Path, files: &[PathBuf]) -> Result<()> {
    let body: String = files.iter().map(|p| format!("{}\n", p.display())).collect();
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn parse_decades(s: &str) -> Result<(i32, i32)> {
    let (lo, hi) = s.split_once(':').context("decades must look like lo:hi")?;
    let (lo, hi): (i32, i32) = (lo.trim().parse()?, hi.trim().parse()?);
    if lo > hi {
        bail!("decade range {s} is empty");
    }
    Ok((lo, hi))
}

fn cmd_wordcount(cli: &Cli, a: &WordcountArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.fail_rate) {
        bail!("--fail-rate must lie in [0, 1)");
    }
    let inputs = collect_inputs(&a.input).with_context(|| format!("input {}", a.input.display()))?;
    let mut cfg = WordCountConfig::new(inputs, job_workspace(cli, "wordcount"));
    cfg.map_slots = a.map_slots as usize;
    cfg.reducers = a.reducers as usize;
    cfg.split_size = a.split_size as usize;
    cfg.exec_mode = exec_mode(cli);
    cfg.failure_injection = (a.fail_rate > 0.0).then_some(FailureInjection {
        rate: a.fail_rate,
        seed: cli.seed,
    });
    fresh_dir(&cfg.workspace)?;
    run_wordcount(&cfg, &a.output)?;
    Ok(())
}

#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn cmd_gridsvm(cli: &Cli, a: &GridArgs) -> Result<()> {
    if a.kill_factor.is_some_and(|f| !(f > 1.0)) {
        bail!("--kill-factor must exceed 1");
    }
    if !(a.tolerance > 0.0) {
        bail!("--tolerance must be positive");
    }
    let mut cfg = GridJobConfig::new(&a.grid, &a.data, job_workspace(cli, "gridsvm"));
    cfg.map_slots = a.map_slots as usize;
    cfg.kill_factor = a.kill_factor;
    cfg.solver.tolerance = a.tolerance;
    cfg.exec_mode = exec_mode(cli);
    fresh_dir(&cfg.workspace)?;
    let out = svm::grid_job(&cfg)?;
    svm::write_grid_results(&a.output, &out.couples)?;
    if let Some(best) = out.best() {
        eprintln!(
            "best C={} sigma={} accuracy={:.4}; {} of {} couples killed",
            best.c,
            best.sigma,
            best.accuracy,
            out.killed(),
            out.couples.len()
        );
    }
    Ok(())
}

fn cmd_vocab(cli: &Cli, a: &VocabArgs) -> Result<()> {
    let params = KMeansParams {
        max_iterations: a.max_iterations,
        ..KMeansParams::default()
    };
    let vocab = vocabulary_from_manifest(&a.manifest, a.k, cli.seed, a.sample, &Default::default(), &params)?;
    vocab.write(&a.output)?;
    Ok(())
}

fn cmd_index(cli: &Cli, a: &IndexArgs) -> Result<()> {
    let vocab = VisualVocabulary::read(&a.vocab)?;
    let mode = match a.mode {
        ModeArg::Component => IndexMode::Component,
        ModeArg::Monolithic => IndexMode::Monolithic,
    };
    let mut cfg = IndexConfig::new(
        &a.manifest,
        Arc::new(vocab),
        job_workspace(cli, "bovw"),
        &a.output,
        mode,
    );
    cfg.map_slots = a.map_slots as usize;
    cfg.images_per_task = a.images_per_task as usize;
    cfg.exec_mode = exec_mode(cli);
    fresh_dir(&cfg.workspace)?;
    let out = run_index(&cfg)?;
    if out.rejected > 0 {
        eprintln!("{} images rejected; see {}", out.rejected, out.rejects_path.display());
    }
    Ok(())
}

fn cmd_riesz(cli: &Cli, a: &RieszArgs) -> Result<()> {
    let mut cfg = TextureJobConfig::new(&a.manifest, job_workspace(cli, "riesz3d"), &a.output);
    cfg.params = RieszParams {
        scales: a.scales,
        order: a.order,
        normalization: a.normalize.into(),
    };
    cfg.group_size = a.group_size as usize;
    cfg.map_slots = a.map_slots as usize;
    cfg.exec_mode = exec_mode(cli);
    cfg.streaming = match a.streaming_exec.as_deref() {
        None => None,
        Some("self") => {
            let me = std::env::current_exe().context("locating this executable")?;
            Some(StreamingTaskSpec::new(me, StreamRole::Mapper).arg("riesz3d-worker"))
        }
        Some(program) => Some(StreamingTaskSpec::new(program, StreamRole::Mapper)),
    };
    if let Some(spec) = &cfg.streaming {
        spec.validate()?;
    }
    fresh_dir(&cfg.workspace)?;
    let out = riesz::texture_job(&cfg)?;
    if out.rejected > 0 {
        eprintln!("{} volumes rejected; see {}", out.rejected, out.rejects_path.display());
    }
    Ok(())
}

fn cmd_worker(a: &WorkerArgs) -> Result<()> {
    let mut params = RieszParams::default().overridden_by_env()?;
    if let Some(s) = a.scales {
        params.scales = s;
    }
    if let Some(n) = a.order {
        params.order = n;
    }
    if let Some(n) = a.normalize {
        params.normalization = n.into();
    }
    let base = match &a.base_dir {
        Some(b) => b.clone(),
        None => std::env::var_os(riesz::job::ENV_BASE_DIR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".")),
    };
    let stdin = io::stdin().lock();
    let stdout = BufWriter::new(io::stdout().lock());
    riesz::run_riesz_worker(stdin, stdout, params, &base)?;
    Ok(())
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    if a.slots.is_empty() || a.slots.contains(&0) {
        bail!("--slots needs positive counts");
    }
    let size = FixtureSize {
        corpus_bytes: a.corpus_bytes,
        images: a.images,
        volumes: a.volumes,
        ..FixtureSize::default()
    };
    let root = job_workspace(cli, "bench");
    fresh_dir(&root)?;
    let workload: Workload = a.workload.into();
    let fixture = Fixture::prepare(workload, &root.join("fixture"), &size, cli.seed)?;
    let report = run_bench(&fixture, &a.slots, a.reps as usize, &root.join("runs"), exec_mode(cli))?;
    report.write(&a.output)?;
    if let (Some(&base), Some(&top)) = (a.slots.first(), a.slots.last()) {
        if base != top {
            if let Some(s) = report.speedup(base, top) {
                eprintln!("{workload}: median speedup {s:.2}x from {base} to {top} slots");
            }
        }
    }
    Ok(())
}

fn cmd_gen(cli: &Cli, g: &GenCommand) -> Result<()> {
    match g {
        GenCommand::Svm(a) => {
            let params = SyntheticSvmParams {
                patients: a.patients,
                per_patient: a.per_patient,
                classes: a.classes,
                dim: a.dim,
                separation: a.separation,
                label_noise: a.label_noise,
                ..SyntheticSvmParams::default()
            };
            svm::generate_svm_dataset(&params, cli.seed)?.write(&a.output)?;
        }
        GenCommand::Images(a) => {
            let files = medimr::bovw::generate_images(&a.out_dir, a.count, a.size, cli.seed)?;
            if let Some(m) = &a.manifest {
                write_manifest(m, &files)?;
            }
        }
        GenCommand::Volumes(a) => {
            let files = riesz::generate_volumes(&a.out_dir, a.count, [a.dims; 3], cli.seed)?;
            if let Some(m) = &a.manifest {
                write_manifest(m, &files)?;
            }
        }
        GenCommand::Corpus(a) => generate_corpus(&a.output, a.bytes, cli.seed)?,
        GenCommand::Grid(a) => {
            if a.per_decade == 0 {
                bail!("--per-decade must be at least 1");
            }
            let (clo, chi) = parse_decades(&a.c_decades)?;
            let (slo, shi) = parse_decades(&a.sigma_decades)?;
            let spec = GridSpec {
                c_values: svm::log_space(clo, chi, a.per_decade),
                sigma_values: svm::log_space(slo, shi, a.per_decade),
            };
            svm::write_grid_file(&a.output, &spec.couples())?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Wordcount(a) => cmd_wordcount(cli, a),
        Command::Gridsvm(a) => cmd_gridsvm(cli, a),
        Command::Bovw(BovwCommand::Vocab(a)) => cmd_vocab(cli, a),
        Command::Bovw(BovwCommand::Index(a)) => cmd_index(cli, a),
        Command::Riesz3d(a) => cmd_riesz(cli, a),
        Command::Riesz3dWorker(a) => cmd_worker(a),
        Command::Bench(a) => cmd_bench(cli, a),
        Command::Gen(g) => cmd_gen(cli, g),
    }
}

/// Parses a `key=value` config file. Blank lines and `#` comments are
/// skipped; keys may use `-` or `_`.
fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .with_context(|| format!("{}:{}: expected key=value", path.display(), i + 1))?;
        out.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(out)
}

/// Appends config entries as flags for every option the command line left
/// unset. Appended flags land in the innermost subcommand.
fn apply_config(argv: Vec<OsString>, matches: &ArgMatches, config: &BTreeMap<String, String>) -> Result<Vec<OsString>> {
    let mut cmd = Cli::command();
    cmd.build();
    let mut leaf = &cmd;
    let mut leaf_matches = matches;
    while let Some((name, sub)) = leaf_matches.subcommand() {
        leaf = leaf.find_subcommand(name).expect("matched subcommand exists");
        leaf_matches = sub;
    }
    let mut argv = argv;
    for (key, value) in config {
        if key == "config" {
            continue;
        }
        let Some(arg) = leaf.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            bail!("config key {key:?} is not a flag of this command");
        };
        let id = arg.get_id().as_str();
        if leaf_matches.value_source(id) == Some(ValueSource::CommandLine) {
            continue;
        }
        match arg.get_action() {
            ArgAction::SetTrue => {
                let on: bool = value
                    .parse()
                    .with_context(|| format!("config key {key:?} expects true or false"))?;
                if on {
                    argv.push(format!("--{key}").into());
                }
            }
            _ => {
                argv.push(format!("--{key}").into());
                argv.push(value.into());
            }
        }
    }
    Ok(argv)
}

fn parse_cli(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let matches = Cli::command().try_get_matches_from(&argv)?;
    let Some(path) = matches.get_one::<PathBuf>("config") else {
        return Cli::from_arg_matches(&matches);
    };
    let argv = read_config(path)
        .and_then(|config| apply_config(argv, &matches, &config))
        .map_err(|e| Cli::command().error(clap::error::ErrorKind::InvalidValue, format!("{e:#}")))?;
    let matches = Cli::command().try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

/// The error chain on one line, skipping causes already quoted by their
/// parent.
fn one_line(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if msg.contains(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg.replace('\n', " ")
}

fn main() -> ExitCode {
    let cli = match parse_cli(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return ExitCode::from(2);
            }
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("medimr: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("medimr: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
