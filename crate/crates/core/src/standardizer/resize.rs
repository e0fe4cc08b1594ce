//! Resampling with half-pixel centres: destination pixel `d` samples the
//! source at `(d + 0.5) * in / out - 0.5`.

use alloc::vec::Vec;

use super::StandardizeError;
use crate::raster::{GrayImage, Grid};

fn check_size(out_w: usize, out_h: usize) -> Result<(), StandardizeError> {
    if out_w == 0 || out_h == 0 {
        Err(StandardizeError::ZeroOutputSize)
    } else {
        Ok(())
    }
}

fn linear_taps(out_len: usize, in_len: usize) -> Vec<(usize, usize, f64)> {
    let scale = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
            let i0 = libm::floor(s) as usize;
            let i1 = (i0 + 1).min(in_len - 1);
            (i0, i1, s - i0 as f64)
        })
        .collect()
}

pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage, StandardizeError> {
    check_size(out_w, out_h)?;
    let cols = linear_taps(out_w, img.width());
    let rows = linear_taps(out_h, img.height());
    let out = Grid::from_fn(out_w, out_h, |x, y| {
        let (x0, x1, fx) = cols[x];
        let (y0, y1, fy) = rows[y];
        let top = (1.0 - fx) * img[(x0, y0)] as f64 + fx * img[(x1, y0)] as f64;
        let bot = (1.0 - fx) * img[(x0, y1)] as f64 + fx * img[(x1, y1)] as f64;
        libm::floor((1.0 - fy) * top + fy * bot + 0.5).clamp(0.0, 255.0) as u8
    })
    .expect("non-zero size checked");
    Ok(out)
}

fn nearest_taps(out_len: usize, in_len: usize) -> Vec<usize> {
    // floor((d + 0.5) * in / out), exact in integers.
    (0..out_len).map(|d| (2 * d + 1) * in_len / (2 * out_len)).collect()
}

/// Nearest-neighbour resampling; keeps masks and labels binary.
pub fn resize_nearest<T: Copy>(img: &Grid<T>, out_w: usize, out_h: usize) -> Result<Grid<T>, StandardizeError> {
    check_size(out_w, out_h)?;
    let cols = nearest_taps(out_w, img.width());
    let rows = nearest_taps(out_h, img.height());
    Ok(Grid::from_fn(out_w, out_h, |x, y| img[(cols[x], rows[y])]).expect("non-zero size checked"))
}
