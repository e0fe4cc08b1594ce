//! Standardized image cache with a JSON-lines manifest.
//!
//! Each sample produces `{id}.png` (standardized gray photo), `{id}.json`
//! (provenance sidecar), one `{id}_{observer}.png` per label and
//! `{id}_fov.png` when the dataset ships field-of-view masks. Files are only
//! rewritten when their bytes change, and a sample whose inputs and outputs
//! match the previous manifest is skipped entirely.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fundus_core::standardizer::{standardize, standardize_label, Geometry, StandardizeParams};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datasets::{DatasetKind, Sample, Split};
use crate::io::{encode_raster, mask_to_gray, read_mask, read_raster, IoError, Raster, RasterFormat};
use crate::provenance::Provenance;

pub const MANIFEST_NAME: &str = "manifest.jsonl";

/// One photo to standardize, with optional labels drawn on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheItem {
    pub id: String,
    pub dataset: Option<DatasetKind>,
    pub split: Option<Split>,
    pub image: PathBuf,
    pub labels: BTreeMap<String, PathBuf>,
    pub fov: Option<PathBuf>,
    /// Recorded as the provenance `source`.
    pub source: String,
}

impl CacheItem {
    /// A bare photo; the id is the file stem.
    pub fn from_photo(path: &Path) -> Self {
        let id = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        Self {
            id,
            dataset: None,
            split: None,
            image: path.to_path_buf(),
            labels: BTreeMap::new(),
            fov: None,
            source: path.to_string_lossy().into_owned(),
        }
    }

    /// A dataset sample; paths in the manifest are relative to `root`.
    pub fn from_sample(sample: &Sample, root: &Path) -> Self {
        Self {
            id: sample.id.clone(),
            dataset: Some(sample.dataset),
            split: Some(sample.split),
            image: sample.image.clone(),
            labels: sample.labels.clone(),
            fov: sample.fov.clone(),
            source: portable(sample.image.strip_prefix(root).unwrap_or(&sample.image)),
        }
    }
}

fn portable(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub clip_limit: Option<f64>,
    pub tiles: [usize; 2],
    pub size: usize,
    pub clahe_before_resize: bool,
}

impl From<&StandardizeParams> for ParamsRecord {
    fn from(p: &StandardizeParams) -> Self {
        Self {
            clip_limit: p.clahe.clip_limit.is_finite().then_some(p.clahe.clip_limit as f64),
            tiles: [p.clahe.tiles_x, p.clahe.tiles_y],
            size: p.size,
            clahe_before_resize: p.clahe_before_resize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hashes {
    pub image: String,
    pub provenance: String,
    pub labels: BTreeMap<String, String>,
    pub fov: Option<String>,
    /// Hash over every input file, used to skip unchanged samples.
    pub inputs: String,
}

/// One manifest line. Paths are relative to the cache directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub dataset: Option<DatasetKind>,
    pub split: Option<Split>,
    pub source: String,
    pub image: String,
    pub provenance: String,
    pub labels: BTreeMap<String, String>,
    pub fov: Option<String>,
    pub sha256: Hashes,
    pub params: ParamsRecord,
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{}: {source}", path.display())]
    Standardize {
        path: PathBuf,
        #[source]
        source: fundus_core::standardizer::StandardizeError,
    },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CacheSummary {
    pub entries: Vec<ManifestEntry>,
    /// Files whose bytes changed (or were created).
    pub written: Vec<PathBuf>,
    pub unchanged: usize,
    /// Failed sample ids with their diagnostics.
    pub failures: Vec<(String, String)>,
}

impl CacheSummary {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` unless the file already holds exactly them.
/// Returns whether anything was written.
pub fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<bool, IoError> {
    if fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(false);
    }
    let tmp = path.with_extension("tmp~");
    fs::write(&tmp, bytes).map_err(|e| IoError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| IoError::io(path, e))?;
    Ok(true)
}

struct Rendered {
    files: Vec<(String, Vec<u8>)>,
    entry: ManifestEntry,
}

fn inputs_hash(item: &CacheItem) -> Result<String, IoError> {
    let mut h = Sha256::new();
    let paths = std::iter::once(&item.image).chain(item.labels.values()).chain(item.fov.as_ref());
    for p in paths {
        let bytes = fs::read(p).map_err(|e| IoError::io(p, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn png(raster: Raster, path: &Path) -> Result<Vec<u8>, CacheError> {
    encode_raster(&raster, RasterFormat::Png).map_err(|e| match e {
        IoError::Encode { detail, .. } => IoError::Encode {
            path: path.to_path_buf(),
            detail,
        },
        other => other,
    }.into())
}

fn render(item: &CacheItem, params: &StandardizeParams, inputs: String) -> Result<Rendered, CacheError> {
    let photo = read_raster(&item.image)?.into_rgb();
    let std = standardize(&photo, params).map_err(|source| CacheError::Standardize {
        path: item.image.clone(),
        source,
    })?;
    let mut files = Vec::new();
    let image_name = format!("{}.png", item.id);
    let image_bytes = png(Raster::Gray(std.image.clone()), &item.image)?;
    let prov = Provenance::new(&item.source, &std).to_json().into_bytes();
    let prov_name = format!("{}.json", item.id);

    let mut hashes = Hashes {
        image: sha256_hex(&image_bytes),
        provenance: sha256_hex(&prov),
        labels: BTreeMap::new(),
        fov: None,
        inputs,
    };
    let mut labels = BTreeMap::new();
    let send = |path: &Path, geometry: &Geometry| -> Result<Vec<u8>, CacheError> {
        let mask = read_mask(path)?;
        let out = standardize_label(&mask, geometry).map_err(|source| CacheError::Standardize {
            path: path.to_path_buf(),
            source,
        })?;
        png(Raster::Gray(mask_to_gray(&out)), path)
    };
    for (obs, path) in &item.labels {
        let bytes = send(path, &std.geometry)?;
        let name = format!("{}_{obs}.png", item.id);
        hashes.labels.insert(obs.clone(), sha256_hex(&bytes));
        labels.insert(obs.clone(), name.clone());
        files.push((name, bytes));
    }
    let fov = match &item.fov {
        Some(path) => {
            let bytes = send(path, &std.geometry)?;
            let name = format!("{}_fov.png", item.id);
            hashes.fov = Some(sha256_hex(&bytes));
            files.push((name.clone(), bytes));
            Some(name)
        }
        None => None,
    };
    files.push((image_name.clone(), image_bytes));
    files.push((prov_name.clone(), prov));
    Ok(Rendered {
        files,
        entry: ManifestEntry {
            id: item.id.clone(),
            dataset: item.dataset,
            split: item.split,
            source: item.source.clone(),
            image: image_name,
            provenance: prov_name,
            labels,
            fov,
            sha256: hashes,
            params: params.into(),
        },
    })
}

/// Whether the previous entry already describes this item and its outputs are intact.
fn still_valid(prev: &ManifestEntry, item: &CacheItem, params: &ParamsRecord, inputs: &str, out_dir: &Path) -> bool {
    if prev.sha256.inputs != inputs
        || &prev.params != params
        || prev.source != item.source
        || prev.dataset != item.dataset
        || prev.split != item.split
        || prev.labels.keys().ne(item.labels.keys())
        || prev.fov.is_some() != item.fov.is_some()
    {
        return false;
    }
    let check = |name: &str, hash: &str| fs::read(out_dir.join(name)).is_ok_and(|b| sha256_hex(&b) == hash);
    check(&prev.image, &prev.sha256.image)
        && check(&prev.provenance, &prev.sha256.provenance)
        && prev.labels.iter().all(|(obs, name)| prev.sha256.labels.get(obs).is_some_and(|h| check(name, h)))
        && match (&prev.fov, &prev.sha256.fov) {
            (Some(name), Some(h)) => check(name, h),
            (None, None) => true,
            _ => false,
        }
}

/// Reads an existing manifest; unreadable or malformed lines are ignored.
pub fn read_manifest(out_dir: &Path) -> Vec<ManifestEntry> {
    fs::read_to_string(out_dir.join(MANIFEST_NAME))
        .map(|text| text.lines().filter_map(|l| serde_json::from_str(l).ok()).collect())
        .unwrap_or_default()
}

enum Outcome {
    Kept(ManifestEntry, usize),
    Rendered(Rendered),
}

/// Standardizes every item into `out_dir` using `jobs` worker threads
/// (0 = one per core). Failures are collected per item; the manifest lists
/// the successful ones in id order.
pub fn prepare_cache(
    items: &[CacheItem],
    out_dir: &Path,
    params: &StandardizeParams,
    jobs: usize,
) -> Result<CacheSummary, CacheError> {
    let mut seen = std::collections::BTreeSet::new();
    for item in items {
        if !seen.insert(item.id.as_str()) {
            return Err(CacheError::DuplicateId(item.id.clone()));
        }
    }
    fs::create_dir_all(out_dir).map_err(|e| IoError::io(out_dir, e))?;
    let previous: BTreeMap<String, ManifestEntry> =
        read_manifest(out_dir).into_iter().map(|e| (e.id.clone(), e)).collect();
    let record = ParamsRecord::from(params);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CacheError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<Outcome, CacheError>> = pool.install(|| {
        items
            .par_iter()
            .map(|item| {
                let inputs = inputs_hash(item)?;
                if let Some(prev) = previous.get(&item.id) {
                    if still_valid(prev, item, &record, &inputs, out_dir) {
                        let files = 2 + prev.labels.len() + usize::from(prev.fov.is_some());
                        return Ok(Outcome::Kept(prev.clone(), files));
                    }
                }
                render(item, params, inputs).map(Outcome::Rendered)
            })
            .collect()
    });

    let mut summary = CacheSummary::default();
    for (item, outcome) in items.iter().zip(outcomes) {
        let result = outcome.and_then(|o| match o {
            Outcome::Kept(entry, files) => {
                summary.unchanged += files;
                Ok(entry)
            }
            Outcome::Rendered(r) => {
                for (name, bytes) in &r.files {
                    let path = out_dir.join(name);
                    if write_if_changed(&path, bytes)? {
                        summary.written.push(path);
                    } else {
                        summary.unchanged += 1;
                    }
                }
                Ok(r.entry)
            }
        });
        match result {
            Ok(entry) => summary.entries.push(entry),
            Err(e) => summary.failures.push((item.id.clone(), e.to_string())),
        }
    }
    summary.entries.sort_by(|a, b| a.id.cmp(&b.id));

    let mut manifest = String::new();
    for e in &summary.entries {
        manifest.push_str(&serde_json::to_string(e).expect("manifest entries serialize"));
        manifest.push('\n');
    }
    let path = out_dir.join(MANIFEST_NAME);
    if write_if_changed(&path, manifest.as_bytes())? {
        summary.written.push(path);
    }
    Ok(summary)
}
