//! Binary filters on masks: windowed majority (median) and 3x3 erosion/dilation.
//!
//! All three are separable. The median uses running box counts, so its cost is
//! independent of the kernel size.

use alloc::vec;
use alloc::vec::Vec;

use super::LocateError;
use crate::raster::BinaryMask;

/// Median filter on a binary mask with edge replication.
///
/// For a binary signal the median of an odd window is its majority value, so a
/// pixel becomes foreground iff more than half of the `ksize x ksize` window is
/// foreground.
pub fn median_blur(mask: &BinaryMask, ksize: usize) -> Result<BinaryMask, LocateError> {
    if ksize.is_multiple_of(2) {
        return Err(LocateError::EvenKernel(ksize));
    }
    if ksize < 3 {
        return Err(LocateError::KernelTooSmall(ksize));
    }
    let (w, h) = mask.dims();
    let r = ksize / 2;
    let src = mask.data();

    // Horizontal running counts with clamped (replicated) columns.
    let mut horiz: Vec<u32> = vec![0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let at = |x: isize| row[x.clamp(0, w as isize - 1) as usize] as u32;
        let mut acc: u32 = (-(r as isize)..=r as isize).map(at).sum();
        let out = &mut horiz[y * w..(y + 1) * w];
        out[0] = acc;
        for (x, slot) in out.iter_mut().enumerate().skip(1) {
            let xi = x as isize;
            acc = acc + at(xi + r as isize) - at(xi - 1 - r as isize);
            *slot = acc;
        }
    }

    // Vertical running counts over the horizontal counts, one column band at a time.
    let majority = (ksize * ksize / 2) as u32;
    let mut out = vec![false; w * h];
    let mut acc: Vec<u32> = vec![0; w];
    let row_at = |y: isize| y.clamp(0, h as isize - 1) as usize * w;
    for dy in -(r as isize)..=r as isize {
        let base = row_at(dy);
        for x in 0..w {
            acc[x] += horiz[base + x];
        }
    }
    for y in 0..h {
        if y > 0 {
            let yi = y as isize;
            let add = row_at(yi + r as isize);
            let sub = row_at(yi - 1 - r as isize);
            for x in 0..w {
                acc[x] = acc[x] + horiz[add + x] - horiz[sub + x];
            }
        }
        for x in 0..w {
            out[y * w + x] = acc[x] > majority;
        }
    }
    Ok(BinaryMask::from_vec(w, h, out).expect("shape preserved"))
}

/// Erosion by a 3x3 square; pixels outside the image count as foreground.
pub fn erode(mask: &BinaryMask, iterations: usize) -> BinaryMask {
    let mut cur = mask.clone();
    for _ in 0..iterations {
        cur = pass3x3(&cur, true);
    }
    cur
}

/// Dilation by a 3x3 square; pixels outside the image count as background.
pub fn dilate(mask: &BinaryMask, iterations: usize) -> BinaryMask {
    let mut cur = mask.clone();
    for _ in 0..iterations {
        cur = pass3x3(&cur, false);
    }
    cur
}

// `all == true` is erosion (AND over in-bounds neighbours), otherwise dilation (OR).
fn pass3x3(mask: &BinaryMask, all: bool) -> BinaryMask {
    let (w, h) = mask.dims();
    let src = mask.data();
    let combine = |a: bool, b: bool| if all { a && b } else { a || b };

    let mut horiz = vec![false; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut v = row[x];
            if x > 0 {
                v = combine(v, row[x - 1]);
            }
            if x + 1 < w {
                v = combine(v, row[x + 1]);
            }
            horiz[y * w + x] = v;
        }
    }
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut v = horiz[y * w + x];
            if y > 0 {
                v = combine(v, horiz[(y - 1) * w + x]);
            }
            if y + 1 < h {
                v = combine(v, horiz[(y + 1) * w + x]);
            }
            out[y * w + x] = v;
        }
    }
    BinaryMask::from_vec(w, h, out).expect("shape preserved")
}
