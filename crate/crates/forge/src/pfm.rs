//! Portable FloatMap (grayscale `Pf`) for probability maps.
//!
//! Written as `Pf\n{w} {h}\n-1.0\n` followed by little-endian `f32` rows,
//! bottom row first. Both byte orders are accepted on read.

use std::fs;
use std::path::{Path, PathBuf};

use fundus_core::raster::{Grid, ProbabilityMap, RasterError};

#[derive(Debug, thiserror::Error)]
pub enum PfmError {
    #[error("{}: not a grayscale PFM (magic {magic:?})", path.display())]
    BadMagic { path: PathBuf, magic: String },
    #[error("{}: malformed header: {detail}", path.display())]
    BadHeader { path: PathBuf, detail: String },
    #[error("{}: header says {width}x{height} ({expected} bytes) but payload has {actual} bytes", path.display())]
    ShapeMismatch {
        path: PathBuf,
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("{}: value at index {index} is not finite", path.display())]
    NonFinite { path: PathBuf, index: usize },
    #[error("{}: {source}", path.display())]
    InvalidMap {
        path: PathBuf,
        #[source]
        source: RasterError,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub fn encode_pfm(map: &ProbabilityMap) -> Vec<u8> {
    let (w, h) = map.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for &v in map.grid().row(y) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(map: &ProbabilityMap, path: &Path) -> Result<(), PfmError> {
    fs::write(path, encode_pfm(map)).map_err(|source| PfmError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_pfm(path: &Path) -> Result<ProbabilityMap, PfmError> {
    let bytes = fs::read(path).map_err(|source| PfmError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pfm(&bytes, path)
}

// Header: four whitespace separated tokens, then exactly one whitespace byte.
fn header_tokens(bytes: &[u8]) -> Option<([&[u8]; 4], usize)> {
    let mut tokens: [&[u8]; 4] = [&[]; 4];
    let mut pos = 0;
    for slot in tokens.iter_mut() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        *slot = &bytes[start..pos];
    }
    (pos < bytes.len()).then_some((tokens, pos + 1))
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<ProbabilityMap, PfmError> {
    let path_buf = || path.to_path_buf();
    let bad_header = |detail: &str| PfmError::BadHeader {
        path: path_buf(),
        detail: detail.to_string(),
    };
    if !bytes.starts_with(b"Pf") || bytes.get(2).is_some_and(|b| !b.is_ascii_whitespace()) {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(PfmError::BadMagic { path: path_buf(), magic });
    }
    let (tokens, payload_start) = header_tokens(bytes).ok_or_else(|| bad_header("truncated header"))?;
    let parse = |t: &[u8]| std::str::from_utf8(t).ok().map(str::to_owned);
    let width: usize = parse(tokens[1])
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad_header("bad width"))?;
    let height: usize = parse(tokens[2])
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad_header("bad height"))?;
    let scale: f32 = parse(tokens[3])
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad_header("bad scale"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(bad_header("scale must be a non-zero number"));
    }
    if width == 0 || height == 0 {
        return Err(bad_header("zero dimension"));
    }
    let little_endian = scale < 0.0;

    let payload = &bytes[payload_start..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| bad_header("dimensions overflow"))?;
    if payload.len() != expected {
        return Err(PfmError::ShapeMismatch {
            path: path_buf(),
            width,
            height,
            expected,
            actual: payload.len(),
        });
    }

    let mut data = vec![0f32; width * height];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (file_row, x) = (i / width, i % width);
        let y = height - 1 - file_row;
        let index = y * width + x;
        if !v.is_finite() {
            return Err(PfmError::NonFinite { path: path_buf(), index });
        }
        data[index] = v;
    }
    let grid = Grid::from_vec(width, height, data).expect("dimensions checked");
    ProbabilityMap::new(grid).map_err(|source| PfmError::InvalidMap { path: path_buf(), source })
}
