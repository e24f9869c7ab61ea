//! On-disk formats for cubes and mosaics.
//!
//! Both are raw little-endian `f32` blobs (band-major for cubes) with a JSON
//! sidecar next to them: `scene.raw` pairs with `scene.json`. A mosaic
//! sidecar additionally carries the filter pattern descriptor.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mosaic::{HyperCube, MosaicImage, MosaicPattern};
use crate::scalar::Scalar;

const LAYOUT: &str = "band-major";
const DTYPE: &str = "f32le";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeSidecar {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub wavelengths_nm: Vec<f64>,
    pub layout: String,
    pub dtype: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MosaicSidecar {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub layout: String,
    pub dtype: String,
    pub rows: usize,
    pub cols: usize,
    pub band_at: Vec<Vec<usize>>,
    pub wavelengths_nm: Vec<f64>,
    pub phase: [usize; 2],
}

/// Sidecar path for a raw data file: the same stem with a `.json` extension.
pub fn sidecar_path(data_path: &Path) -> PathBuf {
    data_path.with_extension("json")
}

fn check_format(layout: &str, dtype: &str) -> Result<()> {
    if layout != LAYOUT || dtype != DTYPE {
        return Err(Error::Format(format!("unsupported layout/dtype {layout}/{dtype}")));
    }
    Ok(())
}

pub fn write_raw_f32<T: Scalar>(path: &Path, values: &[T]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&(v.f64() as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_raw_f32<T: Scalar>(path: &Path, expected: usize) -> Result<Vec<T>> {
    let bytes = fs::read(path)?;
    if bytes.len() != expected * 4 {
        return Err(Error::Format(format!(
            "{}: {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected * 4
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect())
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_cube<T: Scalar>(path: &Path, cube: &HyperCube<T>) -> Result<()> {
    write_raw_f32(path, cube.data())?;
    let side = CubeSidecar {
        width: cube.width(),
        height: cube.height(),
        bands: cube.bands(),
        wavelengths_nm: cube.wavelengths_nm().to_vec(),
        layout: LAYOUT.into(),
        dtype: DTYPE.into(),
    };
    write_json(&sidecar_path(path), &side)
}

pub fn read_cube<T: Scalar>(path: &Path) -> Result<HyperCube<T>> {
    let side: CubeSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    check_format(&side.layout, &side.dtype)?;
    let data = read_raw_f32(path, side.bands * side.width * side.height)?;
    HyperCube::new(side.bands, side.width, side.height, data, side.wavelengths_nm)
}

pub fn write_mosaic<T: Scalar>(path: &Path, mi: &MosaicImage<T>) -> Result<()> {
    write_raw_f32(path, mi.data())?;
    let p = mi.pattern();
    let side = MosaicSidecar {
        width: mi.width(),
        height: mi.height(),
        bands: 1,
        layout: LAYOUT.into(),
        dtype: DTYPE.into(),
        rows: p.side(),
        cols: p.side(),
        band_at: p.grid().to_vec(),
        wavelengths_nm: p.wavelengths_nm().to_vec(),
        phase: [mi.phase().0, mi.phase().1],
    };
    write_json(&sidecar_path(path), &side)
}

pub fn read_mosaic<T: Scalar>(path: &Path) -> Result<MosaicImage<T>> {
    let side: MosaicSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    check_format(&side.layout, &side.dtype)?;
    if side.bands != 1 {
        return Err(Error::Format(format!("mosaic sidecar declares {} bands", side.bands)));
    }
    if side.rows != side.cols {
        return Err(Error::InvalidPattern(format!("non-square pattern {}x{}", side.rows, side.cols)));
    }
    let pattern = MosaicPattern::new(side.band_at, side.wavelengths_nm)?;
    let data = read_raw_f32(path, side.width * side.height)?;
    MosaicImage::with_phase(side.width, side.height, data, pattern, (side.phase[0], side.phase[1]))
}

/// Reads a binary (P5) PGM and scales samples by `1 / maxval`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut header = Vec::new();
    // magic, width, height, maxval; comments start with '#'
    while header.len() < 4 {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(Error::Format("truncated PGM header".into()));
        }
        let content = line.split('#').next().unwrap_or("");
        header.extend(content.split_whitespace().map(str::to_owned));
    }
    if header[0] != "P5" {
        return Err(Error::Format(format!("unsupported PGM magic {}", header[0])));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PGM field {s}")));
    let (w, h, maxval) = (parse(&header[1])?, parse(&header[2])?, parse(&header[3])?);
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("bad PGM maxval {maxval}")));
    }
    let bps = if maxval > 255 { 2 } else { 1 };
    let mut raw = vec![0u8; w * h * bps];
    reader.read_exact(&mut raw).map_err(|_| Error::Format("truncated PGM data".into()))?;
    let scale = 1.0 / maxval as f64;
    let values = if bps == 2 {
        raw.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale).collect()
    } else {
        raw.iter().map(|&b| b as f64 * scale).collect()
    };
    Ok((w, h, values))
}

/// Writes a 16-bit binary PGM (maxval 65535); samples are clamped to [0, 1].
pub fn write_pgm16(path: &Path, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::ShapeMismatch("PGM plane size".into()));
    }
    let mut out = Vec::with_capacity(values.len() * 2 + 32);
    write!(out, "P5\n{width} {height}\n65535\n")?;
    for &v in values {
        let q = (v.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Imports a PGM as a mosaic with the given pattern at phase (0, 0).
pub fn import_pgm_mosaic<T: Scalar>(path: &Path, pattern: MosaicPattern) -> Result<MosaicImage<T>> {
    let (w, h, values) = read_pgm(path)?;
    MosaicImage::new(w, h, values.into_iter().map(T::of).collect(), pattern)
}
