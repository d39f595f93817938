//! `domainscope` subcommands: label, calibrate, evaluate and report.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 too many images
//! failed to label, 4 I/O error.

pub mod manifest;

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use domainscope_core::calibration::{
    agreement_report, collect_stats, fit_profile, load_manual_labels, metric_sample, REQUIRED_METRICS,
};
use domainscope_core::dataset::{load_dataset, load_detections, read_labels, write_atomic, write_labels};
use domainscope_core::eval::{build_report, eval_images, export_pr_curves, ApMode, StratifiedReport};
use domainscope_core::pipeline::JobOutput;
use domainscope_core::{run_job, CalibrationProfile, DatasetIndex, DomainLabelRecord, Error, LabelingJob};
use serde::Serialize;

pub use manifest::RunManifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA_QUALITY: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Smallest corpus `calibrate` accepts.
pub const MIN_CALIBRATION_IMAGES: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Core(Error::Io { .. }) => EXIT_IO,
            CliError::Core(Error::TooManyFailures { .. }) => EXIT_DATA_QUALITY,
            CliError::Core(_) => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "domainscope", version, about = "Underwater domain labels and stratified detection evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label every image of a COCO dataset.
    Label(LabelArgs),
    /// Fit a profile's normalization to a corpus.
    Calibrate(CalibrateArgs),
    /// Evaluate detections per domain condition.
    Evaluate(EvaluateArgs),
    /// Re-render a stored evaluation.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LabelArgs {
    /// COCO annotation file.
    #[arg(long)]
    pub annotations: PathBuf,
    /// Directory the annotation file names are relative to.
    #[arg(long)]
    pub images: PathBuf,
    /// Directory of `<image_id>.png` (16-bit) or `<image_id>.dmap` depth maps.
    #[arg(long)]
    pub depth: Option<PathBuf>,
    #[arg(long)]
    pub profile: PathBuf,
    /// Output JSON Lines file.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "DOMAINSCOPE_WORKERS")]
    pub workers: Option<usize>,
    /// Summary CSV; defaults to `<out>.summary.csv`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub depth: Option<PathBuf>,
    #[arg(long)]
    pub out_profile: PathBuf,
    /// JSON Lines of `{"image_id": .., "<category>": "<condition>", ..}`.
    #[arg(long)]
    pub manual_labels: Option<PathBuf>,
    #[arg(long, env = "DOMAINSCOPE_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApModeArg {
    AllPoints,
    #[value(name = "interp-101")]
    #[serde(rename = "interp-101")]
    Interp101,
}

impl From<ApModeArg> for ApMode {
    fn from(m: ApModeArg) -> Self {
        match m {
            ApModeArg::AllPoints => ApMode::AllPoints,
            ApModeArg::Interp101 => ApMode::Interp101,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// COCO result list: `[{"image_id", "category_id", "bbox", "score"}, ..]`.
    #[arg(long)]
    pub detections: PathBuf,
    /// Label file from `label`; may be repeated.
    #[arg(long, required = true)]
    pub labels: Vec<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Also write per-stratum, per-class PR curve CSVs.
    #[arg(long)]
    pub pr_curves: bool,
    /// Accept labels from differing profiles.
    #[arg(long)]
    pub force: bool,
    /// Require every label file to come from this profile.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "interp-101")]
    pub ap_mode: ApModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Csv,
    Markdown,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// rendered results to `out`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Label(a) => label(a, out),
        Command::Calibrate(a) => calibrate(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn flags(args: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(args).expect("flags serialize")
}

/// Runs `body`, then records its outcome in a manifest at `manifest_path`.
fn with_manifest(
    subcommand: &str,
    flags: serde_json::Value,
    manifest_path: Option<&Path>,
    body: impl FnOnce(&mut RunManifest) -> Result<(), CliError>,
) -> i32 {
    let mut manifest = RunManifest::start(subcommand, flags);
    let result = body(&mut manifest);
    let code = match &result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("domainscope {subcommand}: {e}");
            manifest.messages.push(e.to_string());
            e.exit_code()
        }
    };
    let Some(path) = manifest_path else { return code };
    match manifest.finish(code, path) {
        Ok(()) => code,
        Err(e) => {
            eprintln!("domainscope {subcommand}: cannot write manifest: {e}");
            if code == EXIT_OK {
                EXIT_IO
            } else {
                code
            }
        }
    }
}

/// `labels.jsonl` -> `labels.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| CliError::io(p, e)),
        _ => Ok(()),
    }
}

fn resolve_workers(requested: Option<usize>) -> Result<usize, CliError> {
    match requested {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(n) => Ok(n),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn label_dataset(
    dataset: DatasetIndex,
    depth: Option<&Path>,
    profile: CalibrationProfile,
    workers: usize,
    manifest: &mut RunManifest,
) -> Result<JobOutput, CliError> {
    let output = run_job(&LabelingJob {
        dataset,
        depth_root: depth.map(Path::to_path_buf),
        profile,
        worker_count: workers,
    })?;
    for f in &output.failures {
        let msg = format!("image {} ({}): {}", f.image_id, f.file_name, f.error);
        eprintln!("warning: {msg}");
        manifest.messages.push(msg);
    }
    Ok(output)
}

fn hash_inputs(manifest: &mut RunManifest, paths: &[Option<&Path>]) -> Result<(), CliError> {
    for p in paths.iter().flatten() {
        manifest.input(p)?;
    }
    Ok(())
}

pub fn label(mut args: LabelArgs, out: &mut dyn Write) -> i32 {
    let workers = resolve_workers(args.workers);
    if let Ok(n) = &workers {
        args.workers = Some(*n);
    }
    let summary_path = args.summary.clone().unwrap_or_else(|| sibling(&args.out, "summary.csv"));
    args.summary = Some(summary_path.clone());
    let manifest_path = sibling(&args.out, "manifest.json");
    let manifest_target = ensure_parent(&args.out).is_ok().then_some(manifest_path.as_path());
    with_manifest("label", flags(&args), manifest_target, |m| {
        let workers = workers?;
        let profile = CalibrationProfile::load(&args.profile)?;
        m.profile_id = Some(profile.profile_id());
        let dataset = load_dataset(&args.annotations, &args.images)?;
        hash_inputs(
            m,
            &[
                Some(&args.annotations),
                Some(&args.images),
                args.depth.as_deref(),
                Some(&args.profile),
            ],
        )?;
        let output = label_dataset(dataset, args.depth.as_deref(), profile, workers, m)?;
        write_labels(&output.records, &args.out)?;
        ensure_parent(&summary_path)?;
        write_atomic(&summary_path, output.summary.to_csv().as_bytes())?;
        m.output(&args.out)?;
        m.output(&summary_path)?;
        write!(out, "{}", output.summary.to_text()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        Ok(())
    })
}

pub fn calibrate(mut args: CalibrateArgs, out: &mut dyn Write) -> i32 {
    let workers = resolve_workers(args.workers);
    if let Ok(n) = &workers {
        args.workers = Some(*n);
    }
    let profile_path = args.out_profile.clone();
    let manifest_path = sibling(&profile_path, "manifest.json");
    let manifest_target = ensure_parent(&profile_path).is_ok().then_some(manifest_path.as_path());
    with_manifest("calibrate", flags(&args), manifest_target, |m| {
        let workers = workers?;
        let dataset = load_dataset(&args.annotations, &args.images)?;
        let n = dataset.images.len();
        if n < MIN_CALIBRATION_IMAGES {
            return Err(CliError::Usage(format!(
                "calibration needs at least {MIN_CALIBRATION_IMAGES} images, found {n}"
            )));
        }
        hash_inputs(
            m,
            &[
                Some(&args.annotations),
                Some(&args.images),
                args.depth.as_deref(),
                args.manual_labels.as_deref(),
            ],
        )?;
        // Raw metrics do not depend on normalization, so any valid profile
        // serves for the statistics pass.
        let base = CalibrationProfile::identity();
        let first = label_dataset(dataset.clone(), args.depth.as_deref(), base.clone(), workers, m)?;
        let samples: Vec<_> = first.records.iter().map(|r| metric_sample(&r.metrics)).collect();
        let stats = collect_stats(&samples, &REQUIRED_METRICS)?;
        let mut profile = fit_profile(&base, &stats);
        profile.note = format!("normalization fitted on {} labeled images", first.records.len());
        profile.validate()?;
        profile.save(&profile_path)?;
        m.profile_id = Some(profile.profile_id());
        m.output(&profile_path)?;

        let stats_path = sibling(&profile_path, "stats.json");
        let text = serde_json::to_string_pretty(&stats).expect("stats serialize");
        write_atomic(&stats_path, text.as_bytes())?;
        m.output(&stats_path)?;
        writeln!(out, "profile {} written to {}", profile.profile_id(), profile_path.display())
            .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;

        if let Some(manual_path) = &args.manual_labels {
            let manual = load_manual_labels(manual_path)?;
            let relabeled = label_dataset(dataset, args.depth.as_deref(), profile, workers, m)?;
            let agreement = agreement_report(&relabeled.records, &manual)?;
            let path = sibling(&profile_path, "agreement.json");
            let text = serde_json::to_string_pretty(&agreement).expect("agreement serializes");
            write_atomic(&path, text.as_bytes())?;
            m.output(&path)?;
            for c in &agreement.categories {
                let acc = c.accuracy.map_or_else(|| "n/a".to_string(), |a| format!("{a:.3}"));
                writeln!(out, "{:<13} {acc} over {} images", c.category.as_str(), c.total)
                    .map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            }
        }
        Ok(())
    })
}

fn load_label_files(paths: &[PathBuf], index: &DatasetIndex) -> Result<Vec<DomainLabelRecord>, CliError> {
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    let mut problems = Vec::new();
    for path in paths {
        for r in read_labels(path)? {
            if index.image(r.image_id).is_none() {
                problems.push(format!("{}: image {} is not in the annotations", path.display(), r.image_id));
            } else if !seen.insert(r.image_id) {
                problems.push(format!("{}: image {} labeled twice", path.display(), r.image_id));
            } else {
                records.push(r);
            }
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation {
            path: paths[0].clone(),
            problems,
        }
        .into());
    }
    records.sort_by_key(|r| r.image_id);
    Ok(records)
}

/// Distinct profile ids of the label records; refuses a mix (or a mismatch
/// with `expected`) unless forced.
fn check_profiles(
    records: &[DomainLabelRecord],
    expected: Option<&str>,
    force: bool,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    let ids: BTreeSet<&str> = records.iter().map(|r| r.profile_id.as_str()).collect();
    let mut problem = None;
    if ids.len() > 1 {
        problem = Some(format!(
            "labels come from {} profiles ({})",
            ids.len(),
            ids.iter().copied().collect::<Vec<_>>().join(", ")
        ));
    } else if let (Some(want), Some(got)) = (expected, ids.iter().next()) {
        if want != *got {
            problem = Some(format!("labels come from profile {got}, expected {want}"));
        }
    }
    manifest.profile_id = (!ids.is_empty()).then(|| ids.iter().copied().collect::<Vec<_>>().join(","));
    match problem {
        Some(p) if !force => Err(CliError::Usage(format!("{p}; pass --force to evaluate anyway"))),
        Some(p) => {
            eprintln!("warning: {p}");
            manifest.messages.push(p);
            Ok(())
        }
        None => Ok(()),
    }
}

pub fn evaluate(args: EvaluateArgs, out: &mut dyn Write) -> i32 {
    let dir = args.out_dir.clone();
    let ready = fs::create_dir_all(&dir);
    let manifest_path = dir.join("manifest.json");
    let manifest_target = ready.is_ok().then_some(manifest_path.as_path());
    with_manifest("evaluate", flags(&args), manifest_target, |m| {
        ready.map_err(|e| CliError::io(&dir, e))?;
        let image_root = args.annotations.parent().unwrap_or(Path::new("."));
        let index = load_dataset(&args.annotations, image_root)?;
        let detections = load_detections(&args.detections, &index)?;
        let records = load_label_files(&args.labels, &index)?;
        let expected = match &args.profile {
            Some(p) => Some(CalibrationProfile::load(p)?.profile_id()),
            None => None,
        };
        check_profiles(&records, expected.as_deref(), args.force, m)?;
        let mut inputs: Vec<Option<&Path>> = vec![Some(&args.annotations), Some(&args.detections)];
        inputs.extend(args.labels.iter().map(|p| Some(p.as_path())));
        inputs.push(args.profile.as_deref());
        hash_inputs(m, &inputs)?;

        let images = eval_images(&index, &detections);
        let evaluation = build_report(&records, &images, &index.categories, args.ap_mode.into());
        let report = &evaluation.report;
        let json = serde_json::to_string_pretty(report).expect("report serializes");
        let artifacts = [
            ("report.json", json),
            ("report.csv", report.to_csv()),
            ("report.txt", report.to_text()),
            ("report.md", report.to_markdown()),
        ];
        for (name, text) in &artifacts {
            let path = dir.join(name);
            write_atomic(&path, text.as_bytes())?;
            m.output(&path)?;
        }
        if args.pr_curves {
            let curve_dir = dir.join("pr_curves");
            export_pr_curves(&evaluation, &curve_dir)?;
            m.output(&curve_dir.join("manifest.json"))?;
        }
        write!(out, "{}", report.to_text()).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        Ok(())
    })
}

pub fn load_report(run_dir: &Path) -> Result<StratifiedReport, CliError> {
    let path = run_dir.join("report.json");
    if !path.is_file() {
        return Err(CliError::Usage(format!("{} holds no evaluation results", run_dir.display())));
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn report(args: ReportArgs, out: &mut dyn Write) -> i32 {
    let manifest_path = args.run_dir.join("report.manifest.json");
    let manifest_target = args.run_dir.is_dir().then_some(manifest_path.as_path());
    with_manifest("report", flags(&args), manifest_target, |m| {
        let report = load_report(&args.run_dir)?;
        m.input(&args.run_dir.join("report.json"))?;
        let eval_manifest = args.run_dir.join("manifest.json");
        if eval_manifest.is_file() {
            m.profile_id = RunManifest::load(&eval_manifest)?.profile_id;
        }
        let text = match args.format {
            Format::Text => report.to_text(),
            Format::Csv => report.to_csv(),
            Format::Markdown => report.to_markdown(),
        };
        write!(out, "{text}").map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
        Ok(())
    })
}
