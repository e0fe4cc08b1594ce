//! Raster file IO.
//!
//! Reads PNG, PPM/PGM, BMP and JPEG; writes PNG, PPM and PGM. Sources with 16
//! bits per sample keep their high byte. Alpha channels are dropped.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use fundus_core::raster::{to_grayscale, BinaryMask, GrayImage, Grid, RasterError, RasterImage};
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageError};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: unsupported image format", path.display())]
    Unsupported { path: PathBuf },
    #[error("{}: corrupt file: {detail}", path.display())]
    Corrupt { path: PathBuf, detail: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{format:?} cannot hold a {channels}-channel image")]
    FormatMismatch { format: RasterFormat, channels: usize },
    #[error("{}: {source}", path.display())]
    InvalidPixels {
        path: PathBuf,
        #[source]
        source: RasterError,
    },
    #[error("{}: encoding failed: {detail}", path.display())]
    Encode { path: PathBuf, detail: String },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A decoded raster: color photos stay RGB, single-channel files stay gray.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Raster {
    Rgb(RasterImage),
    Gray(GrayImage),
}

impl Raster {
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Raster::Rgb(img) => img.dims(),
            Raster::Gray(img) => img.dims(),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Raster::Rgb(_) => 3,
            Raster::Gray(_) => 1,
        }
    }

    pub fn into_rgb(self) -> RasterImage {
        match self {
            Raster::Rgb(img) => img,
            Raster::Gray(img) => fundus_core::raster::gray_to_rgb(&img),
        }
    }

    pub fn into_gray(self) -> GrayImage {
        match self {
            Raster::Rgb(img) => to_grayscale(&img),
            Raster::Gray(img) => img,
        }
    }
}

impl From<GrayImage> for Raster {
    fn from(img: GrayImage) -> Self {
        Raster::Gray(img)
    }
}

impl From<RasterImage> for Raster {
    fn from(img: RasterImage) -> Self {
        Raster::Rgb(img)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RasterFormat {
    Png,
    Ppm,
    Pgm,
}

impl RasterFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(Self::Png),
            "ppm" => Some(Self::Ppm),
            "pgm" => Some(Self::Pgm),
            _ => None,
        }
    }
}

/// Extensions `read_raster` understands, lowercase.
pub const READABLE_EXTENSIONS: &[&str] = &["png", "ppm", "pgm", "pnm", "bmp", "jpg", "jpeg"];

fn classify(path: &Path, err: ImageError) -> IoError {
    let path = path.to_path_buf();
    match err {
        ImageError::Unsupported(_) => IoError::Unsupported { path },
        ImageError::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => IoError::Corrupt {
            path,
            detail: e.to_string(),
        },
        ImageError::IoError(source) => IoError::Io { path, source },
        other => IoError::Corrupt {
            path,
            detail: other.to_string(),
        },
    }
}

pub fn decode_raster(bytes: &[u8], path: &Path) -> Result<Raster, IoError> {
    let reader = image::ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| IoError::io(path, e))?;
    if reader.format().is_none() {
        return Err(IoError::Unsupported {
            path: path.to_path_buf(),
        });
    }
    let decoded = reader.decode().map_err(|e| classify(path, e))?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let grid_err = |source| IoError::InvalidPixels {
        path: path.to_path_buf(),
        source,
    };

    let rgb_from = |samples: Vec<u8>, stride: usize| -> Result<Raster, IoError> {
        let px = samples.chunks_exact(stride).map(|c| [c[0], c[1], c[2]]).collect();
        Grid::from_vec(w, h, px).map(Raster::Rgb).map_err(grid_err)
    };
    let gray_from = |samples: Vec<u8>, stride: usize| -> Result<Raster, IoError> {
        let px = samples.chunks_exact(stride).map(|c| c[0]).collect();
        Grid::from_vec(w, h, px).map(Raster::Gray).map_err(grid_err)
    };
    let high_bytes = |samples: &[u16]| samples.iter().map(|&v| (v >> 8) as u8).collect::<Vec<u8>>();

    match decoded {
        DynamicImage::ImageLuma8(img) => gray_from(img.into_raw(), 1),
        DynamicImage::ImageLumaA8(img) => gray_from(img.into_raw(), 2),
        DynamicImage::ImageRgb8(img) => rgb_from(img.into_raw(), 3),
        DynamicImage::ImageRgba8(img) => rgb_from(img.into_raw(), 4),
        DynamicImage::ImageLuma16(img) => gray_from(high_bytes(img.as_raw()), 1),
        DynamicImage::ImageLumaA16(img) => gray_from(high_bytes(img.as_raw()), 2),
        DynamicImage::ImageRgb16(img) => rgb_from(high_bytes(img.as_raw()), 3),
        DynamicImage::ImageRgba16(img) => rgb_from(high_bytes(img.as_raw()), 4),
        other => rgb_from(other.to_rgb8().into_raw(), 3),
    }
}

pub fn read_raster(path: &Path) -> Result<Raster, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_raster(&bytes, path)
}

/// Encodes to bytes; the same bytes `write_raster` puts on disk.
pub fn encode_raster(img: &Raster, format: RasterFormat) -> Result<Vec<u8>, IoError> {
    let (w, h) = img.dims();
    let (samples, color): (Vec<u8>, ExtendedColorType) = match img {
        Raster::Rgb(rgb) => (rgb.data().iter().flatten().copied().collect(), ExtendedColorType::Rgb8),
        Raster::Gray(gray) => (gray.data().to_vec(), ExtendedColorType::L8),
    };
    let mismatch = || IoError::FormatMismatch {
        format,
        channels: img.channels(),
    };
    let mut out = Vec::new();
    let result = match format {
        RasterFormat::Png => PngEncoder::new(&mut out).write_image(&samples, w as u32, h as u32, color),
        RasterFormat::Ppm => {
            if img.channels() != 3 {
                return Err(mismatch());
            }
            PnmEncoder::new(&mut out)
                .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
                .write_image(&samples, w as u32, h as u32, color)
        }
        RasterFormat::Pgm => {
            if img.channels() != 1 {
                return Err(mismatch());
            }
            PnmEncoder::new(&mut out)
                .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
                .write_image(&samples, w as u32, h as u32, color)
        }
    };
    result.map_err(|e| IoError::Encode {
        path: PathBuf::new(),
        detail: e.to_string(),
    })?;
    Ok(out)
}

pub fn write_raster(img: &Raster, path: &Path, format: RasterFormat) -> Result<(), IoError> {
    let bytes = encode_raster(img, format).map_err(|e| match e {
        IoError::Encode { detail, .. } => IoError::Encode {
            path: path.to_path_buf(),
            detail,
        },
        other => other,
    })?;
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

/// Masks are stored as 0 / 255 so they are visible in ordinary viewers.
pub fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    mask.map(|&v| if v { 255 } else { 0 })
}

/// Anything above mid-gray is foreground. Color labels go through luma first.
pub fn gray_to_mask(gray: &GrayImage) -> BinaryMask {
    gray.map(|&v| v > 127)
}

pub fn read_mask(path: &Path) -> Result<BinaryMask, IoError> {
    Ok(gray_to_mask(&read_raster(path)?.into_gray()))
}

pub fn write_mask(mask: &BinaryMask, path: &Path, format: RasterFormat) -> Result<(), IoError> {
    write_raster(&Raster::Gray(mask_to_gray(mask)), path, format)
}
