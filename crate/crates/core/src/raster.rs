//! Pixel grids and color conversion.

use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RasterError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    ZeroSize { width: usize, height: usize },
    #[error("buffer holds {actual} samples but {width}x{height} needs {expected}")]
    LengthMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("probability at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("probability {value} at index {index} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f32 },
}

/// Row-major pixel grid. Width and height are always at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Interleaved 8-bit RGB photo.
pub type RasterImage = Grid<[u8; 3]>;
/// Single channel 8-bit image.
pub type GrayImage = Grid<u8>;
/// Foreground/background mask; `true` is foreground.
pub type BinaryMask = Grid<bool>;

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroSize { width, height });
        }
        let expected = width * height;
        if data.len() != expected {
            return Err(RasterError::LengthMismatch {
                width,
                height,
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::ZeroSize { width, height });
        }
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; grids cannot be empty.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<&T> {
        if x < self.width && y < self.height {
            Some(&self.data[y * self.width + x])
        } else {
            None
        }
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.dims() == other.dims()
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Result<Self, RasterError> {
        Self::from_vec(width, height, alloc::vec![value; width * height])
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (x, y): (usize, usize)) -> &T {
        debug_assert!(x < self.width && y < self.height);
        &self.data[y * self.width + x]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, (x, y): (usize, usize)) -> &mut T {
        debug_assert!(x < self.width && y < self.height);
        &mut self.data[y * self.width + x]
    }
}

impl Grid<bool> {
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn invert(&self) -> Self {
        self.map(|&v| !v)
    }
}

/// Per-pixel vessel probabilities, every value finite and within `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap(Grid<f32>);

impl ProbabilityMap {
    pub fn new(grid: Grid<f32>) -> Result<Self, RasterError> {
        for (index, &value) in grid.data().iter().enumerate() {
            if !value.is_finite() {
                return Err(RasterError::NonFinite { index });
            }
            if !(0.0..=1.0).contains(&value) {
                return Err(RasterError::OutOfRange { index, value });
            }
        }
        Ok(Self(grid))
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self, RasterError> {
        Self::new(Grid::from_vec(width, height, data)?)
    }

    /// Hard mask as a map of exact 0.0 / 1.0 probabilities.
    pub fn from_mask(mask: &BinaryMask) -> Self {
        Self(mask.map(|&v| if v { 1.0 } else { 0.0 }))
    }

    pub fn grid(&self) -> &Grid<f32> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f32> {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn data(&self) -> &[f32] {
        self.0.data()
    }
}

/// BT.601 luma with round-half-up, computed in exact integer arithmetic.
#[inline]
pub fn luma([r, g, b]: [u8; 3]) -> u8 {
    let weighted = 299 * r as u32 + 587 * g as u32 + 114 * b as u32;
    ((weighted + 500) / 1000) as u8
}

pub fn to_grayscale(img: &RasterImage) -> GrayImage {
    img.map(|&px| luma(px))
}

/// Replicates a single channel into three identical channels.
pub fn gray_to_rgb(img: &GrayImage) -> RasterImage {
    img.map(|&v| [v, v, v])
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn grayscale_of_white_and_black() {
        let white = Grid::filled(3, 2, [255u8; 3]).unwrap();
        assert!(to_grayscale(&white).data().iter().all(|&v| v == 255));
        let black = Grid::filled(3, 2, [0u8; 3]).unwrap();
        assert!(to_grayscale(&black).data().iter().all(|&v| v == 0));
    }

    #[test]
    fn grayscale_of_pure_red() {
        // 0.299 * 255 = 76.245
        assert_eq!(luma([255, 0, 0]), 76);
        assert_eq!(luma([0, 255, 0]), 150); // 149.685
        assert_eq!(luma([0, 0, 255]), 29); // 29.07
    }

    #[test]
    fn grayscale_rounds_half_up() {
        // 0.299*1 + 0.587*1 + 0.114*0 = 0.886 -> 1 ; 0.5 exactly needs weighted = 500
        assert_eq!(luma([1, 1, 0]), 1);
        // 0.114 * 5 = 0.57 -> 1, 0.114 * 4 = 0.456 -> 0
        assert_eq!(luma([0, 0, 5]), 1);
        assert_eq!(luma([0, 0, 4]), 0);
    }

    #[test]
    fn grayscale_fixes_channel_constant_pixels() {
        for v in 0..=255u8 {
            assert_eq!(luma([v, v, v]), v);
        }
    }

    #[test]
    fn grid_rejects_bad_shapes() {
        assert_eq!(
            Grid::<u8>::from_vec(0, 3, vec![]),
            Err(RasterError::ZeroSize {
                width: 0,
                height: 3
            })
        );
        assert!(matches!(
            Grid::from_vec(2, 2, vec![0u8; 3]),
            Err(RasterError::LengthMismatch { expected: 4, .. })
        ));
    }

    #[test]
    fn probability_map_validation() {
        assert!(ProbabilityMap::from_vec(2, 1, vec![0.0, 1.0]).is_ok());
        assert_eq!(
            ProbabilityMap::from_vec(2, 1, vec![0.0, f32::NAN]),
            Err(RasterError::NonFinite { index: 1 })
        );
        assert!(matches!(
            ProbabilityMap::from_vec(1, 1, vec![1.5]),
            Err(RasterError::OutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            ProbabilityMap::from_vec(1, 1, vec![f32::INFINITY]),
            Err(RasterError::NonFinite { .. })
        ));
    }

    #[test]
    fn indexing_is_row_major() {
        let g = Grid::from_fn(3, 2, |x, y| (10 * y + x) as u8).unwrap();
        assert_eq!(g[(2, 1)], 12);
        assert_eq!(g.row(1), &[10, 11, 12]);
        assert_eq!(g.get(3, 0), None);
    }
}
