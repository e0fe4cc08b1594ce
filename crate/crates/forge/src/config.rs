//! Pipeline configuration file (TOML).
//!
//! Every key has a default; a file only needs the keys it changes. Unknown
//! keys are rejected. Individual values can be overridden with
//! `--set section.key=value`.

use std::fs;
use std::path::Path;

use fundus_core::augment::AugmentConfig;
use fundus_core::metrics::CiMode;
use fundus_core::standardizer::{ClaheParams, StandardizeParams};
use serde::{Deserialize, Serialize};

/// Environment variable naming a default config file.
pub const CONFIG_ENV: &str = "FUNDUS_FORGE_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Read {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("override {0:?} is not of the form key=value")]
    BadOverride(String),
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {detail}")]
    BadValue { key: String, detail: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub clahe: ClaheSection,
    pub resize: ResizeSection,
    pub augment: AugmentSection,
    pub metrics: MetricsSection,
    pub folds: FoldsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClaheSection {
    pub clip_limit: f64,
    pub tiles: [usize; 2],
    pub before_resize: bool,
}

impl Default for ClaheSection {
    fn default() -> Self {
        Self {
            clip_limit: 2.0,
            tiles: [8, 8],
            before_resize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResizeSection {
    pub size: usize,
}

impl Default for ResizeSection {
    fn default() -> Self {
        Self {
            size: fundus_core::standardizer::STANDARD_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub seed: u64,
    pub rotation: bool,
    pub flip: bool,
    pub flip_probability: f64,
    pub brightness: bool,
    pub brightness_range: [f64; 2],
    pub contrast: bool,
    pub contrast_range: [f64; 2],
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentConfig::default();
        Self {
            seed: 0,
            rotation: d.rotation,
            flip: d.flip,
            flip_probability: d.flip_probability,
            brightness: d.brightness,
            // Written out so the file shows 0.8 rather than its f32 widening.
            brightness_range: [-25.0, 25.0],
            contrast: d.contrast,
            contrast_range: [0.8, 1.25],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FovMode {
    /// The dataset's own field-of-view masks when it ships them, else the full frame.
    #[default]
    Auto,
    /// Always restrict to a field of view, synthesizing one where the dataset has none.
    Fov,
    /// Every pixel counts.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CiSetting {
    #[default]
    Normal,
    StudentT,
}

impl From<CiSetting> for CiMode {
    fn from(c: CiSetting) -> Self {
        match c {
            CiSetting::Normal => CiMode::Normal,
            CiSetting::StudentT => CiMode::StudentT,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Score each image, average within a fold.
    #[default]
    PerImage,
    /// Pool every pixel of a fold before scoring.
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub threshold: f32,
    pub fov: FovMode,
    pub ci: CiSetting,
    pub aggregation: Aggregation,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            fov: FovMode::Auto,
            ci: CiSetting::Normal,
            aggregation: Aggregation::PerImage,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoldsSection {
    pub k: usize,
    pub seed: u64,
}

impl Default for FoldsSection {
    fn default() -> Self {
        Self {
            k: fundus_core::folds::DEFAULT_FOLDS,
            seed: fundus_core::folds::DEFAULT_SEED,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("validated config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        let c = &self.clahe;
        if c.clip_limit.is_nan() || c.clip_limit <= 0.0 {
            return bad("clahe.clip_limit must be positive (inf disables clipping)");
        }
        if c.tiles.contains(&0) {
            return bad("clahe.tiles must be at least [1, 1]");
        }
        if self.resize.size == 0 {
            return bad("resize.size must be positive");
        }
        let a = &self.augment;
        if !(0.0..=1.0).contains(&a.flip_probability) {
            return bad("augment.flip_probability must lie in [0, 1]");
        }
        if a.brightness_range[0] > a.brightness_range[1] {
            return bad("augment.brightness_range must be ordered");
        }
        if !(a.contrast_range[0] > 0.0 && a.contrast_range[0] <= a.contrast_range[1]) {
            return bad("augment.contrast_range must be positive and ordered");
        }
        let t = self.metrics.threshold;
        if !(t > 0.0 && t < 1.0) {
            return bad("metrics.threshold must lie strictly between 0 and 1");
        }
        if self.folds.k == 0 {
            return bad("folds.k must be positive");
        }
        // TOML integers are signed 64-bit.
        if a.seed > i64::MAX as u64 || self.folds.seed > i64::MAX as u64 {
            return bad("seeds must fit in a signed 64-bit integer");
        }
        Ok(())
    }

    /// Applies one `section.key=value` override. The value is read as a TOML
    /// literal, falling back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::BadOverride(assignment.to_string()))?;
        let key = key.trim();
        let raw = raw.trim();
        let mut value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));

        let mut tree = toml::Value::try_from(&*self).expect("config serializes");
        let mut node = &mut tree;
        for part in key.split('.') {
            node = node
                .as_table_mut()
                .and_then(|t| t.get_mut(part))
                .ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        }
        if node.is_table() {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        if let (toml::Value::Float(_), toml::Value::Integer(i)) = (&*node, &value) {
            value = toml::Value::Float(*i as f64);
        }
        *node = value;
        let updated: Self = tree.try_into().map_err(|e: toml::de::Error| ConfigError::BadValue {
            key: key.to_string(),
            detail: e.message().to_string(),
        })?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn standardize_params(&self) -> StandardizeParams {
        StandardizeParams {
            clahe: ClaheParams {
                clip_limit: self.clahe.clip_limit as f32,
                tiles_x: self.clahe.tiles[0],
                tiles_y: self.clahe.tiles[1],
            },
            size: self.resize.size,
            clahe_before_resize: self.clahe.before_resize,
        }
    }

    pub fn augment_config(&self) -> AugmentConfig {
        let a = &self.augment;
        AugmentConfig {
            rotation: a.rotation,
            flip: a.flip,
            flip_probability: a.flip_probability,
            brightness: a.brightness,
            brightness_range: (a.brightness_range[0] as f32, a.brightness_range[1] as f32),
            contrast: a.contrast,
            contrast_range: (a.contrast_range[0] as f32, a.contrast_range[1] as f32),
        }
    }
}
