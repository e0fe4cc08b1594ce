//! Contrast-limited adaptive histogram equalization.
//!
//! The image is padded (reflect-101) up to a whole number of equally sized
//! tiles. Each tile gets a 256-bin histogram clipped at
//! `clip_limit * tile_area / 256` with the excess spread uniformly, and its
//! cumulative histogram becomes a lookup table onto `[0, 255]`. Output pixels
//! blend the tables of the four nearest tile centres bilinearly; outside the
//! outermost centres the edge tables are used unchanged.

use alloc::vec;
use alloc::vec::Vec;

use super::StandardizeError;
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaheParams {
    /// Histogram clip level as a multiple of the mean bin count. `f32::INFINITY` disables clipping.
    pub clip_limit: f32,
    pub tiles_x: usize,
    pub tiles_y: usize,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            clip_limit: 2.0,
            tiles_x: 8,
            tiles_y: 8,
        }
    }
}

impl ClaheParams {
    pub fn validate(&self) -> Result<(), StandardizeError> {
        if self.clip_limit.is_nan() || self.clip_limit <= 0.0 {
            return Err(StandardizeError::InvalidClipLimit(self.clip_limit));
        }
        if self.tiles_x == 0 || self.tiles_y == 0 {
            return Err(StandardizeError::InvalidTileGrid {
                tiles_x: self.tiles_x,
                tiles_y: self.tiles_y,
            });
        }
        Ok(())
    }
}

/// Per-tile lookup tables, row-major over the tile grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaheMappings {
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub tile_width: usize,
    pub tile_height: usize,
    luts: Vec<[u8; 256]>,
}

impl ClaheMappings {
    pub fn lut(&self, tx: usize, ty: usize) -> &[u8; 256] {
        &self.luts[ty * self.tiles_x + tx]
    }

    pub fn luts(&self) -> &[[u8; 256]] {
        &self.luts
    }
}

#[inline]
fn reflect101(i: usize, len: usize) -> usize {
    if i < len {
        i
    } else {
        2 * len - 2 - i
    }
}

/// Histogram clipped at `limit` with the excess redistributed.
pub(crate) fn clip_histogram(hist: &mut [u32; 256], limit: u32) {
    let mut excess: u32 = 0;
    for bin in hist.iter_mut() {
        if *bin > limit {
            excess += *bin - limit;
            *bin = limit;
        }
    }
    let batch = excess / 256;
    let mut residual = excess % 256;
    for bin in hist.iter_mut() {
        *bin += batch;
    }
    if residual > 0 {
        let step = (256 / residual as usize).max(1);
        let mut i = 0;
        while i < 256 && residual > 0 {
            hist[i] += 1;
            residual -= 1;
            i += step;
        }
    }
}

/// Cumulative histogram scaled onto `[0, 255]`, rounded half up.
pub(crate) fn equalization_lut(hist: &[u32; 256], total: u64) -> [u8; 256] {
    let mut lut = [0u8; 256];
    let mut cdf: u64 = 0;
    for (v, &count) in hist.iter().enumerate() {
        cdf += count as u64;
        lut[v] = ((cdf * 255 * 2 + total) / (2 * total)).min(255) as u8;
    }
    lut
}

pub fn clahe_mappings(gray: &GrayImage, params: &ClaheParams) -> Result<ClaheMappings, StandardizeError> {
    params.validate()?;
    let (w, h) = gray.dims();
    if w < params.tiles_x || h < params.tiles_y {
        return Err(StandardizeError::ImageSmallerThanGrid {
            width: w,
            height: h,
            tiles_x: params.tiles_x,
            tiles_y: params.tiles_y,
        });
    }
    let tile_width = w.div_ceil(params.tiles_x);
    let tile_height = h.div_ceil(params.tiles_y);
    let area = (tile_width * tile_height) as u64;

    let limit = if params.clip_limit.is_finite() {
        let l = libm::floor(params.clip_limit as f64 * area as f64 / 256.0);
        Some(l.clamp(1.0, u32::MAX as f64) as u32)
    } else {
        None
    };

    let data = gray.data();
    let mut luts = Vec::with_capacity(params.tiles_x * params.tiles_y);
    for ty in 0..params.tiles_y {
        for tx in 0..params.tiles_x {
            let mut hist = [0u32; 256];
            for py in ty * tile_height..(ty + 1) * tile_height {
                let row = &data[reflect101(py, h) * w..][..w];
                for px in tx * tile_width..(tx + 1) * tile_width {
                    hist[row[reflect101(px, w)] as usize] += 1;
                }
            }
            if let Some(limit) = limit {
                clip_histogram(&mut hist, limit);
            }
            luts.push(equalization_lut(&hist, area));
        }
    }
    Ok(ClaheMappings {
        tiles_x: params.tiles_x,
        tiles_y: params.tiles_y,
        tile_width,
        tile_height,
        luts,
    })
}

// For each output coordinate: (lower tile, upper tile, weight of the upper tile).
fn blend_table(len: usize, tile: usize, tiles: usize) -> Vec<(usize, usize, f64)> {
    (0..len)
        .map(|i| {
            let t = (i as f64 + 0.5) / tile as f64 - 0.5;
            let lo = libm::floor(t);
            let frac = t - lo;
            let lo = lo as isize;
            let a = lo.clamp(0, tiles as isize - 1) as usize;
            let b = (lo + 1).clamp(0, tiles as isize - 1) as usize;
            (a, b, frac)
        })
        .collect()
}

pub fn clahe(gray: &GrayImage, params: &ClaheParams) -> Result<GrayImage, StandardizeError> {
    let maps = clahe_mappings(gray, params)?;
    let (w, h) = gray.dims();
    let cols = blend_table(w, maps.tile_width, maps.tiles_x);
    let rows = blend_table(h, maps.tile_height, maps.tiles_y);
    let src = gray.data();
    let mut out = vec![0u8; w * h];
    for (y, &(ty0, ty1, fy)) in rows.iter().enumerate() {
        for (x, &(tx0, tx1, fx)) in cols.iter().enumerate() {
            let v = src[y * w + x] as usize;
            let top = (1.0 - fx) * maps.lut(tx0, ty0)[v] as f64 + fx * maps.lut(tx1, ty0)[v] as f64;
            let bot = (1.0 - fx) * maps.lut(tx0, ty1)[v] as f64 + fx * maps.lut(tx1, ty1)[v] as f64;
            let blended = (1.0 - fy) * top + fy * bot;
            out[y * w + x] = libm::floor(blended + 0.5).clamp(0.0, 255.0) as u8;
        }
    }
    Ok(GrayImage::from_vec(w, h, out).expect("shape preserved"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Grid;
    use proptest::prelude::*;

    fn unclipped(tiles: usize) -> ClaheParams {
        ClaheParams {
            clip_limit: f32::INFINITY,
            tiles_x: tiles,
            tiles_y: tiles,
        }
    }

    // Global histogram equalization written directly from the definition.
    fn global_he(gray: &GrayImage) -> GrayImage {
        let n = gray.len() as f64;
        gray.map(|&v| {
            let at_or_below = gray.data().iter().filter(|&&u| u <= v).count() as f64;
            libm::floor(255.0 * at_or_below / n + 0.5) as u8
        })
    }

    #[test]
    fn two_valued_image_is_globally_equalized() {
        // 25% at 50, 75% at 200 -> 50 maps to round(63.75) = 64, 200 to 255.
        let g = Grid::from_fn(8, 8, |x, y| if (x + 8 * y) % 4 == 0 { 50 } else { 200 }).unwrap();
        let out = clahe(&g, &unclipped(1)).unwrap();
        assert_eq!(out, global_he(&g));
        assert_eq!(out[(0, 0)], 64);
        assert_eq!(out[(1, 0)], 255);
    }

    #[test]
    fn constant_image_stays_constant() {
        for (w, h) in [(64, 64), (67, 53), (9, 8)] {
            let g = GrayImage::filled(w, h, 77).unwrap();
            let out = clahe(&g, &ClaheParams::default()).unwrap();
            let first = out.data()[0];
            assert!(out.data().iter().all(|&v| v == first), "{w}x{h}");
        }
    }

    #[test]
    fn small_image_is_rejected() {
        let g = GrayImage::filled(7, 20, 1).unwrap();
        assert!(matches!(
            clahe(&g, &ClaheParams::default()),
            Err(StandardizeError::ImageSmallerThanGrid { .. })
        ));
    }

    #[test]
    fn bad_params_are_rejected() {
        let g = GrayImage::filled(16, 16, 1).unwrap();
        let p = ClaheParams { clip_limit: 0.0, ..Default::default() };
        assert!(matches!(clahe(&g, &p), Err(StandardizeError::InvalidClipLimit(_))));
        let p = ClaheParams { tiles_x: 0, ..Default::default() };
        assert!(matches!(clahe(&g, &p), Err(StandardizeError::InvalidTileGrid { .. })));
    }

    #[test]
    fn clipping_conserves_mass() {
        let mut hist = [0u32; 256];
        hist[10] = 1000;
        hist[200] = 37;
        clip_histogram(&mut hist, 20);
        assert_eq!(hist.iter().sum::<u32>(), 1037);
        // 997 excess: 3 per bin plus 229 residual increments.
        assert!(hist.iter().all(|&c| c <= 24));
    }

    proptest! {
        #[test]
        fn tables_are_monotone_and_output_in_shape(
            (w, h, data) in (8usize..48, 8usize..48).prop_flat_map(|(w, h)|
                (Just(w), Just(h), proptest::collection::vec(any::<u8>(), w * h))),
            clip in 0.5f32..6.0,
        ) {
            let g = GrayImage::from_vec(w, h, data).unwrap();
            let p = ClaheParams { clip_limit: clip, tiles_x: 4, tiles_y: 3 };
            let maps = clahe_mappings(&g, &p).unwrap();
            for lut in maps.luts() {
                prop_assert!(lut.windows(2).all(|p| p[0] <= p[1]));
            }
            let out = clahe(&g, &p).unwrap();
            prop_assert_eq!(out.dims(), g.dims());
        }

        #[test]
        fn single_tile_unclipped_is_global_he(
            (w, h, data) in (1usize..24, 1usize..24).prop_flat_map(|(w, h)|
                (Just(w), Just(h), proptest::collection::vec(any::<u8>(), w * h))),
        ) {
            let g = GrayImage::from_vec(w, h, data).unwrap();
            prop_assert_eq!(clahe(&g, &unclipped(1)).unwrap(), global_he(&g));
        }
    }
}
