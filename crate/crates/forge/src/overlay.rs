//! Vessel maps drawn over photos.

use fundus_core::metrics::{binarize, MetricsError};
use fundus_core::raster::{gray_to_rgb, BinaryMask, ProbabilityMap, RasterImage};
use fundus_core::standardizer::{standardize, StandardizeError, StandardizeParams};

pub const TINT: [u8; 3] = [255, 0, 0];

#[derive(Debug, thiserror::Error)]
pub enum OverlayError {
    #[error("map is {map:?} but the photo is {photo:?}")]
    ShapeMismatch { photo: (usize, usize), map: (usize, usize) },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Standardize(#[from] StandardizeError),
}

/// Blends `TINT` half-and-half into every masked pixel, rounding up.
pub fn tint(photo: &RasterImage, mask: &BinaryMask) -> Result<RasterImage, OverlayError> {
    if !photo.same_shape(mask) {
        return Err(OverlayError::ShapeMismatch {
            photo: photo.dims(),
            map: mask.dims(),
        });
    }
    let mut out = photo.clone();
    for (px, &m) in out.data_mut().iter_mut().zip(mask.data()) {
        if m {
            for (c, t) in px.iter_mut().zip(TINT) {
                *c = (*c as u16 + t as u16).div_ceil(2) as u8;
            }
        }
    }
    Ok(out)
}

/// Overlays a thresholded map on a photo. A photo whose size differs from
/// the map is standardized first, with the output size taken from the map.
pub fn overlay(
    photo: &RasterImage,
    map: &ProbabilityMap,
    threshold: f32,
    params: &StandardizeParams,
) -> Result<RasterImage, OverlayError> {
    let mask = binarize(map, threshold)?;
    let base = if photo.dims() == map.dims() {
        photo.clone()
    } else {
        if map.width() != map.height() {
            return Err(OverlayError::ShapeMismatch {
                photo: photo.dims(),
                map: map.dims(),
            });
        }
        let params = StandardizeParams {
            size: map.width(),
            ..*params
        };
        gray_to_rgb(&standardize(photo, &params)?.image)
    };
    tint(&base, &mask)
}
