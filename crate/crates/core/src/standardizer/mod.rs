//! Canonical network input: the located retina centred on a black square,
//! converted to grayscale, contrast equalized with CLAHE and resampled to a
//! fixed resolution.

mod clahe;
mod resize;

pub use clahe::{clahe, clahe_mappings, ClaheMappings, ClaheParams};
pub use resize::{resize_bilinear, resize_nearest};

use crate::locator::{locate_retina, BoundingBox, LocateError};
use crate::raster::{to_grayscale, BinaryMask, GrayImage, Grid, RasterImage};

/// Side length of a standardized image.
pub const STANDARD_SIZE: usize = 1024;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StandardizeError {
    #[error("bounding box {bbox:?} does not fit in a {width}x{height} image")]
    BboxOutOfBounds {
        bbox: BoundingBox,
        width: usize,
        height: usize,
    },
    #[error("CLAHE clip limit must be positive, got {0}")]
    InvalidClipLimit(f32),
    #[error("CLAHE tile grid must be at least 1x1, got {tiles_x}x{tiles_y}")]
    InvalidTileGrid { tiles_x: usize, tiles_y: usize },
    #[error("{width}x{height} image is smaller than the {tiles_x}x{tiles_y} tile grid")]
    ImageSmallerThanGrid {
        width: usize,
        height: usize,
        tiles_x: usize,
        tiles_y: usize,
    },
    #[error("output size must be at least 1x1")]
    ZeroOutputSize,
    #[error("expected a {expected:?} image, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error(transparent)]
    Locate(#[from] LocateError),
}

/// Where the cropped box lands inside the padded square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SquareLayout {
    pub side: usize,
    pub pad_left: usize,
    pub pad_top: usize,
}

impl SquareLayout {
    /// Padding splits evenly; an odd remainder goes to the bottom/right.
    pub fn for_box(bbox: &BoundingBox) -> Self {
        let side = bbox.width.max(bbox.height);
        Self {
            side,
            pad_left: (side - bbox.width) / 2,
            pad_top: (side - bbox.height) / 2,
        }
    }
}

/// Crops `bbox` out of `img` and pads the short side with `T::default()` to a square.
pub fn crop_pad_square<T: Copy + Default>(img: &Grid<T>, bbox: &BoundingBox) -> Result<Grid<T>, StandardizeError> {
    if !bbox.fits_within(img.width(), img.height()) {
        return Err(StandardizeError::BboxOutOfBounds {
            bbox: *bbox,
            width: img.width(),
            height: img.height(),
        });
    }
    let layout = SquareLayout::for_box(bbox);
    let out = Grid::from_fn(layout.side, layout.side, |x, y| {
        let inside_x = x >= layout.pad_left && x < layout.pad_left + bbox.width;
        let inside_y = y >= layout.pad_top && y < layout.pad_top + bbox.height;
        if inside_x && inside_y {
            img[(bbox.x0 + x - layout.pad_left, bbox.y0 + y - layout.pad_top)]
        } else {
            T::default()
        }
    })
    .expect("box has non-zero size");
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardizeParams {
    pub clahe: ClaheParams,
    /// Output side length.
    pub size: usize,
    /// Equalize the cropped square before resizing (default) instead of after.
    pub clahe_before_resize: bool,
}

impl Default for StandardizeParams {
    fn default() -> Self {
        Self {
            clahe: ClaheParams::default(),
            size: STANDARD_SIZE,
            clahe_before_resize: true,
        }
    }
}

/// How a source photo maps into standardized space. Labels and field-of-view
/// masks of the same photo must go through the same geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub bbox: BoundingBox,
    pub source_width: usize,
    pub source_height: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedImage {
    pub image: GrayImage,
    pub geometry: Geometry,
    pub params: StandardizeParams,
}

pub fn standardize(photo: &RasterImage, params: &StandardizeParams) -> Result<StandardizedImage, StandardizeError> {
    let bbox = locate_retina(photo)?;
    standardize_with_box(photo, bbox, params)
}

/// [`standardize`] with an already located retina.
pub fn standardize_with_box(
    photo: &RasterImage,
    bbox: BoundingBox,
    params: &StandardizeParams,
) -> Result<StandardizedImage, StandardizeError> {
    params.clahe.validate()?;
    if params.size == 0 {
        return Err(StandardizeError::ZeroOutputSize);
    }
    let square = to_grayscale(&crop_pad_square(photo, &bbox)?);
    let image = if params.clahe_before_resize {
        let equalized = clahe(&square, &params.clahe)?;
        resize_bilinear(&equalized, params.size, params.size)?
    } else {
        let resized = resize_bilinear(&square, params.size, params.size)?;
        clahe(&resized, &params.clahe)?
    };
    Ok(StandardizedImage {
        image,
        geometry: Geometry {
            bbox,
            source_width: photo.width(),
            source_height: photo.height(),
            size: params.size,
        },
        params: *params,
    })
}

/// Sends a label (or field-of-view mask) drawn on the source photo through the
/// same crop, pad and resize as the photo. Nearest sampling keeps it binary.
pub fn standardize_label(label: &BinaryMask, geometry: &Geometry) -> Result<BinaryMask, StandardizeError> {
    let expected = (geometry.source_width, geometry.source_height);
    if label.dims() != expected {
        return Err(StandardizeError::ShapeMismatch {
            expected,
            actual: label.dims(),
        });
    }
    let square = crop_pad_square(label, &geometry.bbox)?;
    resize_nearest(&square, geometry.size, geometry.size)
}
