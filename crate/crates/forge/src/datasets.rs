//! DRIVE, STARE and CHASE_DB1 directory layouts.
//!
//! Layouts are expected after converting the distributed GIF/TIFF/PPM files
//! to any readable raster format (PNG recommended), keeping file stems:
//!
//! ```text
//! DRIVE/
//!   training/images/21_training.png     .. 40_training.png
//!   training/1st_manual/21_manual1.png
//!   training/mask/21_training_mask.png
//!   test/images/01_test.png             .. 20_test.png
//!   test/1st_manual/01_manual1.png
//!   test/2nd_manual/01_manual2.png
//!   test/mask/01_test_mask.png
//! STARE/
//!   stare-images/im0001.png
//!   labels-ah/im0001.ah.png
//!   labels-vk/im0001.vk.png
//! CHASE_DB1/
//!   Image_01L.png  Image_01L_1stHO.png  Image_01L_2ndHO.png  .. Image_14R*
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::io::READABLE_EXTENSIONS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DatasetKind {
    #[serde(rename = "DRIVE")]
    Drive,
    #[serde(rename = "STARE")]
    Stare,
    #[serde(rename = "CHASE_DB1")]
    ChaseDb1,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown dataset {0:?} (expected drive, stare or chase_db1)")]
pub struct UnknownKind(pub String);

impl FromStr for DatasetKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "drive" => Ok(Self::Drive),
            "stare" => Ok(Self::Stare),
            "chase_db1" | "chasedb1" | "chase" => Ok(Self::ChaseDb1),
            _ => Err(UnknownKind(s.to_string())),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Drive => "DRIVE",
            Self::Stare => "STARE",
            Self::ChaseDb1 => "CHASE_DB1",
        })
    }
}

impl DatasetKind {
    pub const ALL: [Self; 3] = [Self::Drive, Self::Stare, Self::ChaseDb1];

    /// Observer names in the order they are listed in reports; the first is the default.
    pub fn observers(self) -> &'static [&'static str] {
        match self {
            Self::Drive | Self::ChaseDb1 => &["1stHO", "2ndHO"],
            Self::Stare => &["ah", "vk"],
        }
    }

    pub fn has_fov_masks(self) -> bool {
        self == Self::Drive
    }

    /// Canonical sample ids and their splits.
    pub fn expected_ids(self) -> Vec<(String, Split)> {
        match self {
            Self::Drive => (1..=40)
                .map(|n| (format!("{n:02}"), if n <= 20 { Split::Test } else { Split::Train }))
                .collect(),
            Self::Stare => STARE_IDS.iter().map(|id| (id.to_string(), Split::Test)).collect(),
            Self::ChaseDb1 => (1..=14)
                .flat_map(|n| ["L", "R"].map(|eye| (format!("Image_{n:02}{eye}"), Split::Test)))
                .collect(),
        }
    }
}

/// The twenty STARE images with vessel annotations.
const STARE_IDS: [&str; 20] = [
    "im0001", "im0002", "im0003", "im0004", "im0005", "im0044", "im0077", "im0081", "im0082", "im0139", "im0162",
    "im0163", "im0235", "im0236", "im0239", "im0240", "im0255", "im0291", "im0319", "im0324",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub dataset: DatasetKind,
    pub split: Split,
    pub image: PathBuf,
    /// Observer name to label path.
    pub labels: BTreeMap<String, PathBuf>,
    pub fov: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error(transparent)]
    UnknownKind(#[from] UnknownKind),
    #[error("{} does not match the {kind} layout; missing:\n{}", root.display(), list(missing))]
    LayoutMismatch {
        root: PathBuf,
        kind: DatasetKind,
        missing: Vec<PathBuf>,
    },
}

fn list(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| format!("  {}", p.display())).collect::<Vec<_>>().join("\n")
}

/// One expected file: a stem relative to the root, resolved against any readable extension.
#[derive(Debug, Clone)]
struct Slot {
    stem: PathBuf,
}

impl Slot {
    fn new(stem: impl Into<PathBuf>) -> Self {
        Self { stem: stem.into() }
    }

    fn resolve(&self, root: &Path) -> Option<PathBuf> {
        let base = root.join(&self.stem);
        let name = base.file_name()?.to_string_lossy().into_owned();
        READABLE_EXTENSIONS
            .iter()
            .flat_map(|ext| [ext.to_string(), ext.to_ascii_uppercase()])
            .map(|ext| base.with_file_name(format!("{name}.{ext}")))
            .find(|p| p.is_file())
    }

    /// Files that exist under the stem but need converting first.
    fn unconverted(&self, root: &Path) -> Option<PathBuf> {
        let base = root.join(&self.stem);
        let name = base.file_name()?.to_string_lossy().into_owned();
        ["tif", "tiff", "gif", "ppm.gz", "TIF", "GIF"]
            .iter()
            .map(|ext| base.with_file_name(format!("{name}.{ext}")))
            .find(|p| p.is_file())
    }

    fn display(&self) -> PathBuf {
        let mut p = self.stem.clone().into_os_string();
        p.push(".png");
        p.into()
    }
}

struct SampleSlots {
    id: String,
    split: Split,
    image: Slot,
    labels: Vec<(&'static str, Slot)>,
    fov: Option<Slot>,
}

fn layout(kind: DatasetKind) -> Vec<SampleSlots> {
    kind.expected_ids()
        .into_iter()
        .map(|(id, split)| match kind {
            DatasetKind::Drive => {
                let (dir, suffix) = match split {
                    Split::Train => ("training", "training"),
                    Split::Test => ("test", "test"),
                };
                let mut labels = vec![("1stHO", Slot::new(format!("{dir}/1st_manual/{id}_manual1")))];
                if split == Split::Test {
                    labels.push(("2ndHO", Slot::new(format!("{dir}/2nd_manual/{id}_manual2"))));
                }
                SampleSlots {
                    image: Slot::new(format!("{dir}/images/{id}_{suffix}")),
                    fov: Some(Slot::new(format!("{dir}/mask/{id}_{suffix}_mask"))),
                    labels,
                    id,
                    split,
                }
            }
            DatasetKind::Stare => SampleSlots {
                image: Slot::new(format!("stare-images/{id}")),
                labels: vec![
                    ("ah", Slot::new(format!("labels-ah/{id}.ah"))),
                    ("vk", Slot::new(format!("labels-vk/{id}.vk"))),
                ],
                fov: None,
                id,
                split,
            },
            DatasetKind::ChaseDb1 => SampleSlots {
                image: Slot::new(&id),
                labels: vec![
                    ("1stHO", Slot::new(format!("{id}_1stHO"))),
                    ("2ndHO", Slot::new(format!("{id}_2ndHO"))),
                ],
                fov: None,
                id,
                split,
            },
        })
        .collect()
}

/// Report of a layout check.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DoctorReport {
    pub found: usize,
    pub expected: usize,
    /// Missing files, relative to the root, shown with a `.png` extension.
    pub missing: Vec<PathBuf>,
    /// Files present in a distribution format that must be converted first.
    pub unconverted: Vec<PathBuf>,
}

impl DoctorReport {
    pub fn is_ok(&self) -> bool {
        self.missing.is_empty()
    }
}

/// Checks a tree against the layout for `kind` without reading any pixels.
pub fn doctor(root: &Path, kind: DatasetKind) -> DoctorReport {
    let mut report = DoctorReport::default();
    for s in layout(kind) {
        let slots = std::iter::once(&s.image)
            .chain(s.labels.iter().map(|(_, l)| l))
            .chain(s.fov.as_ref());
        for slot in slots {
            report.expected += 1;
            if slot.resolve(root).is_some() {
                report.found += 1;
            } else {
                report.missing.push(slot.display());
                if let Some(raw) = slot.unconverted(root) {
                    report.unconverted.push(raw.strip_prefix(root).unwrap_or(&raw).to_path_buf());
                }
            }
        }
    }
    report
}

/// Resolves every sample of `kind` under `root`, sorted by id.
pub fn load_dataset(root: &Path, kind: DatasetKind) -> Result<Vec<Sample>, DatasetError> {
    let mut samples = Vec::new();
    let mut missing = Vec::new();
    for s in layout(kind) {
        let mut resolve = |slot: &Slot| {
            let found = slot.resolve(root);
            if found.is_none() {
                missing.push(slot.display());
            }
            found
        };
        let image = resolve(&s.image);
        let labels: BTreeMap<String, PathBuf> = s
            .labels
            .iter()
            .filter_map(|(obs, slot)| resolve(slot).map(|p| (obs.to_string(), p)))
            .collect();
        let fov = s.fov.as_ref().map(&mut resolve);
        if let Some(image) = image {
            samples.push(Sample {
                id: s.id,
                dataset: kind,
                split: s.split,
                image,
                labels,
                fov: fov.flatten(),
            });
        }
    }
    if !missing.is_empty() {
        return Err(DatasetError::LayoutMismatch {
            root: root.to_path_buf(),
            kind,
            missing,
        });
    }
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(samples)
}
