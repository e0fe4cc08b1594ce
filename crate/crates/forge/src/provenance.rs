//! JSON sidecar written next to every standardized PNG.

use fundus_core::standardizer::StandardizedImage;
use serde::{Deserialize, Serialize};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BboxRecord {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResizeRecord {
    pub width: usize,
    pub height: usize,
    pub method: ResizeMethod,
    /// Whether CLAHE ran on the cropped square before resizing.
    pub after_clahe: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeMethod {
    Bilinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub source: String,
    pub bbox: BboxRecord,
    /// `None` when clipping was disabled.
    pub clip_limit: Option<f64>,
    pub tiles: [usize; 2],
    pub resize: ResizeRecord,
    pub version: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ProvenanceError {
    #[error("invalid provenance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid provenance: {0}")]
    Invalid(&'static str),
}

impl Provenance {
    pub fn new(source: impl Into<String>, std: &StandardizedImage) -> Self {
        let b = std.geometry.bbox;
        let clip = std.params.clahe.clip_limit;
        Self {
            source: source.into(),
            bbox: BboxRecord {
                x0: b.x0,
                y0: b.y0,
                width: b.width,
                height: b.height,
            },
            clip_limit: clip.is_finite().then_some(clip as f64),
            tiles: [std.params.clahe.tiles_x, std.params.clahe.tiles_y],
            resize: ResizeRecord {
                width: std.image.width(),
                height: std.image.height(),
                method: ResizeMethod::Bilinear,
                after_clahe: std.params.clahe_before_resize,
            },
            version: VERSION.to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    /// Parses and checks a sidecar against the schema.
    pub fn from_json(text: &str) -> Result<Self, ProvenanceError> {
        let p: Self = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProvenanceError> {
        use ProvenanceError::Invalid;
        if self.source.is_empty() {
            return Err(Invalid("empty source"));
        }
        if self.bbox.width == 0 || self.bbox.height == 0 {
            return Err(Invalid("empty bounding box"));
        }
        if self.clip_limit.is_some_and(|c| !(c > 0.0 && c.is_finite())) {
            return Err(Invalid("clip_limit must be positive"));
        }
        if self.tiles.contains(&0) {
            return Err(Invalid("tile grid must be at least 1x1"));
        }
        if self.resize.width == 0 || self.resize.width != self.resize.height {
            return Err(Invalid("resize must be a non-empty square"));
        }
        if self.version.is_empty() {
            return Err(Invalid("empty version"));
        }
        Ok(())
    }
}
