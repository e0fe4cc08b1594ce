use alloc::vec;
use alloc::vec::Vec;

use super::{BoundingBox, LocateError};
use crate::raster::BinaryMask;

/// Tight box around the largest 8-connected foreground component.
///
/// Components are discovered in row-major order of their first pixel; on an
/// area tie the one discovered first wins.
pub fn largest_component_bbox(mask: &BinaryMask) -> Result<BoundingBox, LocateError> {
    let (w, h) = mask.dims();
    let src = mask.data();
    let mut seen = vec![false; w * h];
    let mut stack: Vec<usize> = Vec::new();
    let mut best: Option<(usize, BoundingBox)> = None;

    for start in 0..w * h {
        if !src[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut min_x, mut min_y) = (start % w, start / w);
        let (mut max_x, mut max_y) = (min_x, min_y);
        let mut area = 0usize;

        while let Some(idx) = stack.pop() {
            area += 1;
            let (x, y) = (idx % w, idx / w);
            min_x = min_x.min(x);
            max_x = max_x.max(x);
            min_y = min_y.min(y);
            max_y = max_y.max(y);
            let (x_lo, x_hi) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (y_lo, y_hi) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for ny in y_lo..=y_hi {
                for nx in x_lo..=x_hi {
                    let n = ny * w + nx;
                    if src[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                }
            }
        }

        if best.as_ref().is_none_or(|(a, _)| area > *a) {
            let bbox = BoundingBox {
                x0: min_x,
                y0: min_y,
                width: max_x - min_x + 1,
                height: max_y - min_y + 1,
            };
            best = Some((area, bbox));
        }
    }

    best.map(|(_, b)| b).ok_or(LocateError::EmptyMask)
}
