//! Reproducible on-the-fly augmentation: rotation by any angle, left-right
//! flip, brightness offset and contrast stretch.
//!
//! Parameters are a pure function of `(seed, index)` so any data loader, in
//! any language, can regenerate the exact draw for a given sample. Geometric
//! parameters apply to an image and its label alike; photometric ones only
//! ever touch the image.

use crate::raster::{BinaryMask, GrayImage, Grid};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AugmentError {
    #[error("rotation needs a square image, got {width}x{height}")]
    NonSquare { width: usize, height: usize },
    #[error("image is {image:?} but its mask is {mask:?}")]
    ShapeMismatch {
        image: (usize, usize),
        mask: (usize, usize),
    },
}

/// Which transforms are drawn and from what ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub rotation: bool,
    pub flip: bool,
    pub flip_probability: f64,
    pub brightness: bool,
    /// Inclusive-exclusive range of additive offsets on the 8-bit scale.
    pub brightness_range: (f32, f32),
    pub contrast: bool,
    /// Contrast factors are drawn log-uniformly from this range.
    pub contrast_range: (f32, f32),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation: true,
            flip: true,
            flip_probability: 0.5,
            brightness: true,
            brightness_range: (-25.0, 25.0),
            contrast: true,
            contrast_range: (0.8, 1.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentationSample {
    /// Counter-clockwise rotation in degrees, in `[0, 360)`.
    pub angle: f32,
    pub flip: bool,
    pub brightness_delta: f32,
    pub contrast_factor: f32,
}

impl AugmentationSample {
    pub const IDENTITY: Self = Self {
        angle: 0.0,
        flip: false,
        brightness_delta: 0.0,
        contrast_factor: 1.0,
    };

    /// Flip, then rotate, then brightness, then contrast.
    pub fn apply_image(&self, img: &GrayImage) -> Result<GrayImage, AugmentError> {
        let mut out = self.apply_geometry(img)?;
        out = adjust_brightness(&out, self.brightness_delta);
        Ok(adjust_contrast(&out, self.contrast_factor))
    }

    /// Geometric part only, for labels and masks.
    pub fn apply_geometry<I: Rotate>(&self, img: &I) -> Result<I, AugmentError> {
        let flipped;
        let src = if self.flip {
            flipped = img.flip_lr();
            &flipped
        } else {
            img
        };
        src.rotated(self.angle)
    }

    /// Augments an image and its label with the same geometry.
    pub fn apply_pair(&self, img: &GrayImage, mask: &BinaryMask) -> Result<(GrayImage, BinaryMask), AugmentError> {
        if img.dims() != mask.dims() {
            return Err(AugmentError::ShapeMismatch {
                image: img.dims(),
                mask: mask.dims(),
            });
        }
        Ok((self.apply_image(img)?, self.apply_geometry(mask)?))
    }
}

/// Draws the augmentation for sample `index` under `seed`.
///
/// Four values are always consumed in the same order (angle, flip, brightness,
/// contrast) so that disabling one transform leaves the others unchanged.
pub fn sample(seed: u64, index: u64, config: &AugmentConfig) -> AugmentationSample {
    let mut rng = SplitMix64::stream(seed, index);
    let u_angle = rng.next_f64();
    let u_flip = rng.next_f64();
    let u_bright = rng.next_f64();
    let u_contrast = rng.next_f64();

    let lerp = |(lo, hi): (f32, f32), u: f64| lo as f64 + (hi as f64 - lo as f64) * u;
    let angle = if config.rotation {
        // Guard against rounding up to exactly 360 in f32.
        let a = (360.0 * u_angle) as f32;
        if a >= 360.0 {
            0.0
        } else {
            a
        }
    } else {
        0.0
    };
    let contrast_factor = if config.contrast {
        let (lo, hi) = config.contrast_range;
        libm::exp(lerp((libm::logf(lo), libm::logf(hi)), u_contrast)) as f32
    } else {
        1.0
    };
    AugmentationSample {
        angle,
        flip: config.flip && u_flip < config.flip_probability,
        brightness_delta: if config.brightness {
            lerp(config.brightness_range, u_bright) as f32
        } else {
            0.0
        },
        contrast_factor,
    }
}

pub fn flip_lr<T: Copy>(img: &Grid<T>) -> Grid<T> {
    let w = img.width();
    Grid::from_fn(w, img.height(), |x, y| img[(w - 1 - x, y)]).expect("shape preserved")
}

/// Images that can be flipped and rotated about their centre.
pub trait Rotate: Sized {
    fn flip_lr(&self) -> Self;
    /// Counter-clockwise rotation; samples falling outside the source are 0.
    fn rotated(&self, angle: f32) -> Result<Self, AugmentError>;
}

impl Rotate for GrayImage {
    fn flip_lr(&self) -> Self {
        flip_lr(self)
    }

    fn rotated(&self, angle: f32) -> Result<Self, AugmentError> {
        rotate_with(self, angle, |img, sx, sy| {
            let x0 = libm::floor(sx);
            let y0 = libm::floor(sy);
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let at = |x: isize, y: isize| -> f64 {
                if x < 0 || y < 0 {
                    return 0.0;
                }
                img.get(x as usize, y as usize).map_or(0.0, |&v| v as f64)
            };
            let top = (1.0 - fx) * at(x0, y0) + fx * at(x0 + 1, y0);
            let bot = (1.0 - fx) * at(x0, y0 + 1) + fx * at(x0 + 1, y0 + 1);
            libm::floor((1.0 - fy) * top + fy * bot + 0.5).clamp(0.0, 255.0) as u8
        })
    }
}

impl Rotate for BinaryMask {
    fn flip_lr(&self) -> Self {
        flip_lr(self)
    }

    fn rotated(&self, angle: f32) -> Result<Self, AugmentError> {
        rotate_with(self, angle, |img, sx, sy| {
            let x = libm::floor(sx + 0.5);
            let y = libm::floor(sy + 0.5);
            if x < 0.0 || y < 0.0 {
                return false;
            }
            img.get(x as usize, y as usize).copied().unwrap_or(false)
        })
    }
}

pub fn rotate<I: Rotate>(img: &I, angle: f32) -> Result<I, AugmentError> {
    img.rotated(angle)
}

fn rotate_with<T: Copy>(
    img: &Grid<T>,
    angle: f32,
    sample: impl Fn(&Grid<T>, f64, f64) -> T,
) -> Result<Grid<T>, AugmentError> {
    let (w, h) = img.dims();
    if w != h {
        return Err(AugmentError::NonSquare { width: w, height: h });
    }
    let mut angle = libm::fmod(angle as f64, 360.0);
    if angle < 0.0 {
        angle += 360.0;
    }
    let n = w - 1;
    // Quarter turns are exact permutations.
    let quarter = match angle {
        0.0 => Some(0),
        90.0 => Some(1),
        180.0 => Some(2),
        270.0 => Some(3),
        _ => None,
    };
    if let Some(q) = quarter {
        // Counter-clockwise on screen (y down): output (x, y) reads source
        // (n - y, x) for a quarter turn.
        return Ok(Grid::from_fn(w, h, |x, y| match q {
            0 => img[(x, y)],
            1 => img[(n - y, x)],
            2 => img[(n - x, n - y)],
            _ => img[(y, n - x)],
        })
        .expect("shape preserved"));
    }

    let theta = angle.to_radians();
    let (s, c) = (libm::sin(theta), libm::cos(theta));
    let centre = n as f64 / 2.0;
    Ok(Grid::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 - centre, y as f64 - centre);
        // Inverse of the counter-clockwise screen rotation.
        let sx = c * dx - s * dy + centre;
        let sy = s * dx + c * dy + centre;
        sample(img, sx, sy)
    })
    .expect("shape preserved"))
}

#[inline]
fn round_u8(v: f64) -> u8 {
    libm::floor(v + 0.5).clamp(0.0, 255.0) as u8
}

pub fn adjust_brightness(img: &GrayImage, delta: f32) -> GrayImage {
    if delta == 0.0 {
        return img.clone();
    }
    img.map(|&v| round_u8(v as f64 + delta as f64))
}

/// Scales distances from the image mean by `factor`.
pub fn adjust_contrast(img: &GrayImage, factor: f32) -> GrayImage {
    if factor == 1.0 {
        return img.clone();
    }
    let mean = img.data().iter().map(|&v| v as f64).sum::<f64>() / img.len() as f64;
    img.map(|&v| round_u8(mean + factor as f64 * (v as f64 - mean)))
}
