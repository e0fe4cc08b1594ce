//! Scoring probability maps against dataset labels.
//!
//! A prediction directory holds one `{id}.pfm` per test image. When it
//! contains `fold_*` subdirectories, each is scored as one fold's model and
//! the fold means are aggregated; otherwise the directory is a single fold.
//! Maps may be at the label's native size or at the standardized square
//! size, in which case labels and masks are standardized to match.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fundus_core::locator::{locate_retina, retina_mask};
use fundus_core::metrics::{aggregate, auc, auc_from_pairs, binarize, confusion, AggregateScore, ConfusionCounts, MetricsError, ScoreSet};
use fundus_core::raster::{BinaryMask, ProbabilityMap};
use fundus_core::standardizer::{standardize_label, Geometry, StandardizeError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Aggregation, CiSetting, FovMode};
use crate::datasets::{load_dataset, DatasetError, DatasetKind, Sample, Split};
use crate::io::{read_mask, read_raster, IoError};
use crate::pfm::{read_pfm, PfmError};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub pred_dir: PathBuf,
    pub dataset_root: PathBuf,
    pub dataset: DatasetKind,
    /// Defaults to the dataset's first observer.
    pub observer: Option<String>,
    pub threshold: f32,
    pub fov: FovMode,
    pub ci: CiSetting,
    pub aggregation: Aggregation,
    /// Seed of the fold split the models were trained on, echoed into the report.
    pub fold_seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{dataset} has no observer {observer:?} (available: {})", available.join(", "))]
    UnknownObserver {
        dataset: DatasetKind,
        observer: String,
        available: Vec<String>,
    },
    #[error("{} missing prediction(s):\n{}", .0.len(), .0.iter().map(|p| format!("  {}", p.display())).collect::<Vec<_>>().join("\n"))]
    MissingPredictions(Vec<PathBuf>),
    #[error("{}: cannot list predictions: {source}", path.display())]
    ListDir {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Pfm(#[from] PfmError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{}: prediction is {actual:?}, expected {native:?} or a standardized square", path.display())]
    ShapeMismatch {
        path: PathBuf,
        native: (usize, usize),
        actual: (usize, usize),
    },
    #[error("{id}: {source}")]
    Standardize {
        id: String,
        #[source]
        source: StandardizeError,
    },
    #[error("{id}: {source}")]
    Metrics {
        id: String,
        #[source]
        source: MetricsError,
    },
}

impl EvalError {
    /// Whether the evaluation failed only because predictions are missing.
    pub fn is_incomplete(&self) -> bool {
        matches!(self, EvalError::MissingPredictions(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub dice: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
}

impl From<ScoreSet> for Scores {
    fn from(s: ScoreSet) -> Self {
        Self {
            dice: s.dice,
            sensitivity: s.sensitivity,
            specificity: s.specificity,
            auc: s.auc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl From<ConfusionCounts> for Counts {
    fn from(c: ConfusionCounts) -> Self {
        Self {
            tp: c.tp,
            fp: c.fp,
            tn: c.tn,
            fn_: c.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub id: String,
    pub scores: Scores,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub name: String,
    pub scores: Scores,
    pub images: Vec<ImageReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub mean: f64,
    pub ci95: f64,
    pub n: usize,
}

impl From<AggregateScore> for Cell {
    fn from(a: AggregateScore) -> Self {
        Self {
            mean: a.mean,
            ci95: a.ci95,
            n: a.n,
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        AggregateScore {
            mean: self.mean,
            ci95: self.ci95,
            n: self.n,
        }
        .fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub dice: Cell,
    pub sensitivity: Cell,
    pub specificity: Cell,
    pub auc: Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FovSource {
    Dataset,
    Synthesized,
    FullFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: DatasetKind,
    pub observer: String,
    pub split: Split,
    pub threshold: f32,
    pub fov_mode: FovMode,
    pub fov_source: FovSource,
    pub ci: CiSetting,
    pub aggregation: Aggregation,
    pub fold_seed: u64,
    pub folds: Vec<FoldReport>,
    pub summary: Summary,
    pub version: String,
}

pub const TABLE_HEADER: [&str; 4] = ["Dice / F1", "Sensitivity", "Specificity", "AUC"];

impl MetricsReport {
    /// Row label, e.g. `DRIVE (1stHO)`.
    pub fn row_label(&self) -> String {
        format!("{} ({})", self.dataset, self.observer)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Aligned text table with one row, followed by the evaluation settings.
    pub fn to_table(&self) -> String {
        render_table(std::slice::from_ref(self))
    }
}

/// Aligned text table with one row per report.
pub fn render_table(reports: &[MetricsReport]) -> String {
    let label_width = reports.iter().map(|r| r.row_label().len()).max().unwrap_or(0).max(8) + 2;
    let mut out = format!("{:label_width$}", "");
    for h in TABLE_HEADER {
        let _ = write!(out, "{h:<15}");
    }
    let mut out = out.trim_end().to_string();
    out.push('\n');
    for r in reports {
        let s = &r.summary;
        let mut line = format!("{:label_width$}", r.row_label());
        for cell in [s.dice, s.sensitivity, s.specificity, s.auc] {
            let _ = write!(line, "{:<15}", cell.to_string());
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    for r in reports {
        let _ = writeln!(
            out,
            "\n{}: {} fold(s), {} image(s) per fold, threshold {}, fov {:?} ({:?}), ci {:?}, {:?} aggregation, fold seed {}",
            r.row_label(),
            r.folds.len(),
            r.folds.first().map_or(0, |f| f.images.len()),
            r.threshold,
            r.fov_mode,
            r.fov_source,
            r.ci,
            r.aggregation,
            r.fold_seed,
        );
    }
    out
}

/// Lists the fold directories of a prediction directory, or the directory itself.
pub fn fold_dirs(pred_dir: &Path) -> Result<Vec<(String, PathBuf)>, EvalError> {
    let entries = fs::read_dir(pred_dir).map_err(|source| EvalError::ListDir {
        path: pred_dir.to_path_buf(),
        source,
    })?;
    let mut folds: Vec<(String, PathBuf)> = entries
        .filter_map(Result::ok)
        .filter(|e| e.path().is_dir())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.starts_with("fold_").then(|| (name, e.path()))
        })
        .collect();
    // Numeric order so fold_10 follows fold_9.
    folds.sort_by_key(|(name, _)| (name[5..].parse::<u64>().unwrap_or(u64::MAX), name.clone()));
    if folds.is_empty() {
        folds.push((".".to_string(), pred_dir.to_path_buf()));
    }
    Ok(folds)
}

/// Label and mask for one sample at the prediction's resolution.
struct Target {
    label: BinaryMask,
    fov: Option<BinaryMask>,
}

fn load_target(sample: &Sample, observer: &str, fov_mode: FovMode, pred_path: &Path, pred_dims: (usize, usize)) -> Result<Target, EvalError> {
    let label = read_mask(&sample.labels[observer])?;
    let native = label.dims();
    let needs_photo = pred_dims != native || (fov_mode == FovMode::Fov && sample.fov.is_none());
    let photo = if needs_photo {
        Some(read_raster(&sample.image)?.into_rgb())
    } else {
        None
    };
    let fov = match (fov_mode, &sample.fov) {
        (FovMode::Full, _) => None,
        (_, Some(path)) => Some(read_mask(path)?),
        (FovMode::Auto, None) => None,
        (FovMode::Fov, None) => Some(retina_mask(photo.as_ref().expect("photo loaded above"))),
    };
    if pred_dims == native {
        return Ok(Target { label, fov });
    }
    let (w, h) = pred_dims;
    if w != h {
        return Err(EvalError::ShapeMismatch {
            path: pred_path.to_path_buf(),
            native,
            actual: pred_dims,
        });
    }
    let photo = photo.expect("photo loaded above");
    let std_err = |source| EvalError::Standardize {
        id: sample.id.clone(),
        source,
    };
    let bbox = locate_retina(&photo).map_err(|e| std_err(e.into()))?;
    let geometry = Geometry {
        bbox,
        source_width: photo.width(),
        source_height: photo.height(),
        size: w,
    };
    let label = standardize_label(&label, &geometry).map_err(std_err)?;
    let fov = fov.map(|m| standardize_label(&m, &geometry)).transpose().map_err(std_err)?;
    Ok(Target { label, fov })
}

struct Scored {
    report: ImageReport,
    /// Pixels inside the evaluated region, kept only for pooled aggregation.
    pairs: Vec<(f32, bool)>,
}

fn score_image(
    sample: &Sample,
    pred_path: &Path,
    opts: &EvalOptions,
    observer: &str,
) -> Result<Scored, EvalError> {
    let pred = read_pfm(pred_path)?;
    let target = load_target(sample, observer, opts.fov, pred_path, pred.dims())?;
    let metrics_err = |source| EvalError::Metrics {
        id: sample.id.clone(),
        source,
    };
    let hard = binarize(&pred, opts.threshold).map_err(metrics_err)?;
    let counts = confusion(&target.label, &hard, target.fov.as_ref()).map_err(metrics_err)?;
    let pooled = opts.aggregation == Aggregation::Pooled;
    let (auc_value, pairs) = if pooled {
        (f64::NAN, region_pairs(&pred, &target))
    } else {
        (auc(&target.label, &pred, target.fov.as_ref()).map_err(metrics_err)?, Vec::new())
    };
    let scores = ScoreSet::from_counts(&counts, auc_value);
    Ok(Scored {
        report: ImageReport {
            id: sample.id.clone(),
            scores: scores.into(),
            counts: counts.into(),
        },
        pairs,
    })
}

fn region_pairs(pred: &ProbabilityMap, target: &Target) -> Vec<(f32, bool)> {
    let labels = target.label.data();
    pred.data()
        .iter()
        .zip(labels)
        .enumerate()
        .filter(|(i, _)| target.fov.as_ref().is_none_or(|m| m.data()[*i]))
        .map(|(_, (&p, &y))| (p, y))
        .collect()
}

fn mean_scores(images: &[ImageReport]) -> Scores {
    let n = images.len() as f64;
    let sum = |f: fn(&Scores) -> f64| images.iter().map(|i| f(&i.scores)).sum::<f64>() / n;
    Scores {
        dice: sum(|s| s.dice),
        sensitivity: sum(|s| s.sensitivity),
        specificity: sum(|s| s.specificity),
        auc: sum(|s| s.auc),
    }
}

/// Scores the dataset's test split. Runs on the current rayon pool.
pub fn evaluate_model(opts: &EvalOptions) -> Result<MetricsReport, EvalError> {
    let observers = opts.dataset.observers();
    let observer = opts.observer.clone().unwrap_or_else(|| observers[0].to_string());
    if !observers.contains(&observer.as_str()) {
        return Err(EvalError::UnknownObserver {
            dataset: opts.dataset,
            observer,
            available: observers.iter().map(|s| s.to_string()).collect(),
        });
    }
    let samples: Vec<Sample> = load_dataset(&opts.dataset_root, opts.dataset)?
        .into_iter()
        .filter(|s| s.split == Split::Test)
        .collect();
    let folds = fold_dirs(&opts.pred_dir)?;

    let missing: Vec<PathBuf> = folds
        .iter()
        .flat_map(|(_, dir)| samples.iter().map(move |s| dir.join(format!("{}.pfm", s.id))))
        .filter(|p| !p.is_file())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }

    let mut fold_reports = Vec::with_capacity(folds.len());
    for (name, dir) in &folds {
        let scored: Vec<Scored> = samples
            .par_iter()
            .map(|s| score_image(s, &dir.join(format!("{}.pfm", s.id)), opts, &observer))
            .collect::<Result<_, _>>()?;
        let scores = match opts.aggregation {
            Aggregation::PerImage => {
                let images: Vec<ImageReport> = scored.iter().map(|s| s.report.clone()).collect();
                mean_scores(&images)
            }
            Aggregation::Pooled => {
                let counts: ConfusionCounts = scored
                    .iter()
                    .map(|s| {
                        let c = s.report.counts;
                        ConfusionCounts {
                            tp: c.tp,
                            fp: c.fp,
                            tn: c.tn,
                            fn_: c.fn_,
                        }
                    })
                    .sum();
                let pairs: Vec<(f32, bool)> = scored.iter().flat_map(|s| s.pairs.iter().copied()).collect();
                let auc = auc_from_pairs(pairs).map_err(|source| EvalError::Metrics {
                    id: format!("fold {name}"),
                    source,
                })?;
                ScoreSet::from_counts(&counts, auc).into()
            }
        };
        fold_reports.push(FoldReport {
            name: name.clone(),
            scores,
            images: scored.into_iter().map(|s| s.report).collect(),
        });
    }

    let ci = opts.ci.into();
    let cell = |f: fn(&Scores) -> f64| -> Cell {
        let values: Vec<f64> = fold_reports.iter().map(|r| f(&r.scores)).collect();
        aggregate(&values, ci).expect("at least one fold").into()
    };
    let summary = Summary {
        dice: cell(|s| s.dice),
        sensitivity: cell(|s| s.sensitivity),
        specificity: cell(|s| s.specificity),
        auc: cell(|s| s.auc),
    };
    let fov_source = match (opts.fov, opts.dataset.has_fov_masks()) {
        (FovMode::Full, _) | (FovMode::Auto, false) => FovSource::FullFrame,
        (_, true) => FovSource::Dataset,
        (FovMode::Fov, false) => FovSource::Synthesized,
    };
    Ok(MetricsReport {
        dataset: opts.dataset,
        observer,
        split: Split::Test,
        threshold: opts.threshold,
        fov_mode: opts.fov,
        fov_source,
        ci: opts.ci,
        aggregation: opts.aggregation,
        fold_seed: opts.fold_seed,
        folds: fold_reports,
        summary,
        version: crate::provenance::VERSION.to_string(),
    })
}
