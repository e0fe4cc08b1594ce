//! `fundus-forge` command-line interface.
//!
//! Exit codes: 0 success, 1 input or processing failure, 2 incomplete
//! evaluation (missing predictions), 64 usage or configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fundus_core::augment::{sample as sample_augmentation, AugmentationSample};
use fundus_core::folds::kfold;
use serde::Serialize;

use crate::cache::{prepare_cache, write_if_changed, CacheItem};
use crate::config::{Aggregation, CiSetting, ConfigError, FovMode, PipelineConfig, CONFIG_ENV};
use crate::datasets::{doctor, load_dataset, DatasetKind, Split};
use crate::eval::{evaluate_model, EvalOptions};
use crate::io::{encode_raster, mask_to_gray, read_mask, read_raster, Raster, RasterFormat, READABLE_EXTENSIONS};
use crate::overlay::overlay;
use crate::pfm::read_pfm;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "fundus-forge", version, about = "Retina fundus standardization, evaluation and dataset tooling")]
pub struct Cli {
    /// Pipeline config file (TOML).
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set clahe.clip_limit=3`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads for batch work; 0 uses every core. Outputs do not depend on it.
    #[arg(long, short = 'j', global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Standardize a photo, a directory of photos, or a whole dataset.
    Prep(PrepArgs),
    /// Score probability maps (PFM) against a dataset's test labels.
    Eval(EvalArgs),
    /// Draw a thresholded probability map over a photo.
    Overlay(OverlayArgs),
    /// Write a deterministic k-fold split of a dataset's training images.
    Split(SplitArgs),
    /// Write seeded augmentations of a standardized image.
    AugmentPreview(AugmentArgs),
    /// Check a dataset directory against its expected layout.
    Doctor(DoctorArgs),
    /// Inspect the effective configuration.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Debug, Args)]
struct PrepArgs {
    /// Photo, directory of photos, or dataset root with `--dataset`.
    input: PathBuf,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
    /// Treat the input as a dataset root (drive, stare, chase_db1) and standardize labels too.
    #[arg(long)]
    dataset: Option<DatasetKind>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Directory of `{id}.pfm` maps, or of `fold_*` subdirectories holding them.
    predictions: PathBuf,
    #[arg(long)]
    dataset_root: PathBuf,
    #[arg(long)]
    dataset: DatasetKind,
    /// Label set to score against (1stHO/2ndHO, or ah/vk for STARE).
    #[arg(long)]
    observer: Option<String>,
    #[arg(long)]
    threshold: Option<f32>,
    #[arg(long, value_enum)]
    fov: Option<FovArg>,
    #[arg(long, value_enum)]
    ci: Option<CiArg>,
    #[arg(long, value_enum)]
    aggregation: Option<AggregationArg>,
    /// Directory for the JSON and text reports.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum FovArg {
    Auto,
    Fov,
    Full,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum CiArg {
    Normal,
    StudentT,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum AggregationArg {
    PerImage,
    Pooled,
}

#[derive(Debug, Args)]
struct OverlayArgs {
    /// Photo; standardized first unless it already matches the map's size.
    photo: PathBuf,
    /// Probability map (PFM).
    map: PathBuf,
    /// Output PNG.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    threshold: Option<f32>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    dataset_root: PathBuf,
    #[arg(long)]
    dataset: DatasetKind,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    /// Standardized (square) gray image.
    image: PathBuf,
    /// Label drawn on the image, transformed with the same geometry.
    #[arg(long)]
    label: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of variants.
    #[arg(short, long, default_value_t = 8)]
    n: u64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DoctorArgs {
    root: PathBuf,
    #[arg(long)]
    dataset: DatasetKind,
}

#[derive(Debug, Subcommand)]
enum ConfigCommand {
    /// Print the effective configuration, defaults included.
    Show,
}

/// A failed command: exit code plus message for stderr.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl std::fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }

    fn general(message: impl std::fmt::Display) -> Self {
        Self::new(EXIT_FAILURE, message)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::new(EXIT_USAGE, e)
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().ansi().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let cfg = load_config(&cli)?;
    let jobs = cli.jobs;
    match cli.command {
        Command::Prep(a) => cmd_prep(a, &cfg, jobs, out, err),
        Command::Eval(a) => cmd_eval(a, &cfg, jobs, out),
        Command::Overlay(a) => cmd_overlay(a, &cfg, out),
        Command::Split(a) => cmd_split(a, &cfg, out),
        Command::AugmentPreview(a) => cmd_augment_preview(a, &cfg, out),
        Command::Doctor(a) => cmd_doctor(a, out),
        Command::Config(ConfigCommand::Show) => {
            write!(out, "{}", cfg.to_toml()).map_err(Failure::general)
        }
    }
}

fn photos_in(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::general(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .is_some_and(|x| READABLE_EXTENSIONS.contains(&x.to_string_lossy().to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::general(format!("{}: no readable images", dir.display())));
    }
    Ok(paths)
}

fn cmd_prep(a: PrepArgs, cfg: &PipelineConfig, jobs: usize, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let items: Vec<CacheItem> = match a.dataset {
        Some(kind) => load_dataset(&a.input, kind)
            .map_err(Failure::general)?
            .iter()
            .map(|s| CacheItem::from_sample(s, &a.input))
            .collect(),
        None if a.input.is_dir() => photos_in(&a.input)?.iter().map(|p| CacheItem::from_photo(p)).collect(),
        None => vec![CacheItem::from_photo(&a.input)],
    };
    let summary = prepare_cache(&items, &a.out, &cfg.standardize_params(), jobs).map_err(Failure::general)?;
    for (id, msg) in &summary.failures {
        let _ = writeln!(err, "error: {id}: {msg}");
    }
    let _ = writeln!(
        out,
        "prepared {}/{} image(s) into {}: {} file(s) written, {} unchanged",
        summary.entries.len(),
        items.len(),
        a.out.display(),
        summary.written.len(),
        summary.unchanged
    );
    if summary.is_success() {
        Ok(())
    } else {
        Err(Failure::general(format!("{} image(s) failed", summary.failures.len())))
    }
}

fn cmd_eval(a: EvalArgs, cfg: &PipelineConfig, jobs: usize, out: &mut dyn Write) -> CmdResult {
    let m = &cfg.metrics;
    let threshold = a.threshold.unwrap_or(m.threshold);
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Failure::new(EXIT_USAGE, "--threshold must lie strictly between 0 and 1"));
    }
    let opts = EvalOptions {
        pred_dir: a.predictions,
        dataset_root: a.dataset_root,
        dataset: a.dataset,
        observer: a.observer,
        threshold,
        fov: a.fov.map_or(m.fov, |f| match f {
            FovArg::Auto => FovMode::Auto,
            FovArg::Fov => FovMode::Fov,
            FovArg::Full => FovMode::Full,
        }),
        ci: a.ci.map_or(m.ci, |c| match c {
            CiArg::Normal => CiSetting::Normal,
            CiArg::StudentT => CiSetting::StudentT,
        }),
        aggregation: a.aggregation.map_or(m.aggregation, |g| match g {
            AggregationArg::PerImage => Aggregation::PerImage,
            AggregationArg::Pooled => Aggregation::Pooled,
        }),
        fold_seed: cfg.folds.seed,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(Failure::general)?;
    let report = pool.install(|| evaluate_model(&opts)).map_err(|e| {
        let code = if e.is_incomplete() { EXIT_INCOMPLETE } else { EXIT_FAILURE };
        Failure::new(code, e)
    })?;
    let table = report.to_table();
    let _ = write!(out, "{table}");
    if let Some(dir) = a.out {
        fs::create_dir_all(&dir).map_err(|e| Failure::general(format!("{}: {e}", dir.display())))?;
        let stem = format!("metrics_{}_{}", report.dataset, report.observer);
        for (ext, text) in [("json", report.to_json()), ("txt", table)] {
            let path = dir.join(format!("{stem}.{ext}"));
            write_if_changed(&path, text.as_bytes()).map_err(Failure::general)?;
        }
    }
    Ok(())
}

fn cmd_overlay(a: OverlayArgs, cfg: &PipelineConfig, out: &mut dyn Write) -> CmdResult {
    let photo = read_raster(&a.photo).map_err(Failure::general)?.into_rgb();
    let map = read_pfm(&a.map).map_err(Failure::general)?;
    let threshold = a.threshold.unwrap_or(cfg.metrics.threshold);
    let img = overlay(&photo, &map, threshold, &cfg.standardize_params())
        .map_err(|e| Failure::general(format!("{}: {e}", a.map.display())))?;
    let format = RasterFormat::from_path(&a.out).unwrap_or(RasterFormat::Png);
    let bytes = encode_raster(&Raster::Rgb(img), format).map_err(Failure::general)?;
    write_if_changed(&a.out, &bytes).map_err(Failure::general)?;
    let _ = writeln!(out, "wrote {}", a.out.display());
    Ok(())
}

/// Fold split as consumed by the trainer.
#[derive(Debug, Serialize)]
struct SplitFile {
    dataset: DatasetKind,
    k: usize,
    seed: u64,
    /// Sample id to fold index.
    assignment: std::collections::BTreeMap<String, usize>,
    folds: Vec<FoldEntry>,
}

#[derive(Debug, Serialize)]
struct FoldEntry {
    fold: usize,
    validation: Vec<String>,
    training: Vec<String>,
}

fn cmd_split(a: SplitArgs, cfg: &PipelineConfig, out: &mut dyn Write) -> CmdResult {
    let samples = load_dataset(&a.dataset_root, a.dataset).map_err(Failure::general)?;
    // Datasets without an official training split are split whole.
    let has_train = samples.iter().any(|s| s.split == Split::Train);
    let ids: Vec<&str> = samples
        .iter()
        .filter(|s| !has_train || s.split == Split::Train)
        .map(|s| s.id.as_str())
        .collect();
    let k = a.k.unwrap_or(cfg.folds.k);
    let seed = a.seed.unwrap_or(cfg.folds.seed);
    let split = kfold(&ids, k, seed).map_err(Failure::general)?;
    let owned = |v: Vec<&str>| v.into_iter().map(String::from).collect();
    let file = SplitFile {
        dataset: a.dataset,
        k,
        seed,
        folds: (0..k)
            .map(|f| FoldEntry {
                fold: f,
                validation: owned(split.validation(f)),
                training: owned(split.training(f)),
            })
            .collect(),
        assignment: split.assignment,
    };
    let mut json = serde_json::to_string_pretty(&file).expect("split serializes");
    json.push('\n');
    match a.out {
        Some(path) => {
            write_if_changed(&path, json.as_bytes()).map_err(Failure::general)?;
            let sizes: Vec<String> = file.folds.iter().map(|f| f.validation.len().to_string()).collect();
            let _ = writeln!(out, "wrote {} ({k} folds of {})", path.display(), sizes.join("/"));
        }
        None => {
            let _ = write!(out, "{json}");
        }
    }
    Ok(())
}

fn describe(s: &AugmentationSample) -> String {
    format!(
        "angle={:.4} flip={} brightness={:+.4} contrast={:.4}",
        s.angle, s.flip, s.brightness_delta, s.contrast_factor
    )
}

fn cmd_augment_preview(a: AugmentArgs, cfg: &PipelineConfig, out: &mut dyn Write) -> CmdResult {
    let image = read_raster(&a.image).map_err(Failure::general)?.into_gray();
    let label = a.label.as_deref().map(read_mask).transpose().map_err(Failure::general)?;
    let seed = a.seed.unwrap_or(cfg.augment.seed);
    let aug_cfg = cfg.augment_config();
    let stem = a.image.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
    if a.n > 0 {
        fs::create_dir_all(&a.out).map_err(|e| Failure::general(format!("{}: {e}", a.out.display())))?;
    }
    for i in 0..a.n {
        let s = sample_augmentation(seed, i, &aug_cfg);
        let name = format!("{stem}_aug{i:03}");
        let img = s.apply_image(&image).map_err(|e| Failure::general(format!("{}: {e}", a.image.display())))?;
        let mut files = vec![(format!("{name}.png"), Raster::Gray(img))];
        if let Some(label) = &label {
            let l = s.apply_geometry(label).map_err(|e| Failure::general(format!("{}: {e}", a.image.display())))?;
            if l.dims() != image.dims() {
                return Err(Failure::general("label and image sizes differ"));
            }
            files.push((format!("{name}_label.png"), Raster::Gray(mask_to_gray(&l))));
        }
        for (file, raster) in files {
            let bytes = encode_raster(&raster, RasterFormat::Png).map_err(Failure::general)?;
            write_if_changed(&a.out.join(file), &bytes).map_err(Failure::general)?;
        }
        let _ = writeln!(out, "{name} seed={seed} index={i} {}", describe(&s));
    }
    Ok(())
}

fn cmd_doctor(a: DoctorArgs, out: &mut dyn Write) -> CmdResult {
    let report = doctor(&a.root, a.dataset);
    let _ = writeln!(
        out,
        "{} layout at {}: {}/{} files found",
        a.dataset,
        a.root.display(),
        report.found,
        report.expected
    );
    if report.is_ok() {
        let _ = writeln!(out, "ok");
        return Ok(());
    }
    let _ = writeln!(out, "missing:");
    for p in &report.missing {
        let _ = writeln!(out, "  {}", p.display());
    }
    if !report.unconverted.is_empty() {
        let _ = writeln!(out, "found in distribution format, convert to PNG keeping the file stem:");
        for p in &report.unconverted {
            let _ = writeln!(out, "  {}", p.display());
        }
    }
    Err(Failure::general(format!("{} file(s) missing", report.missing.len())))
}
