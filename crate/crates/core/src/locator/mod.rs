//! Retina localisation in a raw fundus photo.
//!
//! The photo is turned to grayscale, thresholded at a third of its mean
//! intensity, cleaned with a 25x25 median filter and a morphological opening
//! (two erosions then two dilations), and the retina is taken to be the
//! bounding box of the largest remaining blob.

mod components;
mod morphology;

pub use components::largest_component_bbox;
pub use morphology::{dilate, erode, median_blur};

use crate::raster::{to_grayscale, BinaryMask, GrayImage, RasterImage};

pub const MEDIAN_KERNEL: usize = 25;
pub const MORPH_ITERATIONS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LocateError {
    #[error("median kernel size must be odd, got {0}")]
    EvenKernel(usize),
    #[error("median kernel size must be at least 3, got {0}")]
    KernelTooSmall(usize),
    #[error("mask has no foreground pixels")]
    EmptyMask,
    #[error("no retina found in photo")]
    NoRetinaFound,
}

/// Axis-aligned box in pixel coordinates; `(x0, y0)` is the inclusive top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl BoundingBox {
    /// Exclusive right edge.
    pub fn x1(&self) -> usize {
        self.x0 + self.width
    }

    /// Exclusive bottom edge.
    pub fn y1(&self) -> usize {
        self.y0 + self.height
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.width >= 1 && self.height >= 1 && self.x1() <= width && self.y1() <= height
    }

    /// The same box after a left-right flip of an image `image_width` wide.
    pub fn mirrored(&self, image_width: usize) -> Self {
        Self {
            x0: image_width - self.x1(),
            ..*self
        }
    }
}

/// Foreground iff the pixel is strictly brighter than a third of the image mean.
pub fn threshold_mean_third(gray: &GrayImage) -> BinaryMask {
    // g > sum / (3 n)  <=>  3 n g > sum, exact in integers.
    let sum: u64 = gray.data().iter().map(|&v| v as u64).sum();
    let scale = 3 * gray.len() as u64;
    gray.map(|&v| scale * v as u64 > sum)
}

/// Cleaned retina mask: threshold, median blur, opening.
///
/// This is the stage just before the bounding box is read off; it also serves
/// as a synthetic field-of-view mask for datasets that ship none.
pub fn retina_mask(photo: &RasterImage) -> BinaryMask {
    let gray = to_grayscale(photo);
    let mask = threshold_mean_third(&gray);
    let mask = median_blur(&mask, MEDIAN_KERNEL).expect("kernel constant is odd");
    let mask = erode(&mask, MORPH_ITERATIONS);
    dilate(&mask, MORPH_ITERATIONS)
}

pub fn locate_retina(photo: &RasterImage) -> Result<BoundingBox, LocateError> {
    largest_component_bbox(&retina_mask(photo)).map_err(|e| match e {
        LocateError::EmptyMask => LocateError::NoRetinaFound,
        other => other,
    })
}
