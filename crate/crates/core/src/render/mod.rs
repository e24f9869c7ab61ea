//! Display rendering of hypercubes: CIE XYZ under D65 to 8-bit sRGB, PNG
//! output and single-band 16-bit PGM export.

mod cie;

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_pgm16;
use crate::mosaic::HyperCube;
use crate::scalar::Scalar;

use cie::{CMF_D65, TABLE_START_NM, TABLE_STEP_NM};

pub const MIN_WAVELENGTH_NM: f64 = 360.0;
pub const MAX_WAVELENGTH_NM: f64 = 830.0;

/// D65 white point in XYZ with `Y = 1`.
pub const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

const XYZ_TO_SRGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// Interleaved `R, G, B` bytes, row-major.
    pub data: Vec<u8>,
}

/// `[x_bar, y_bar, z_bar, d65]` linearly interpolated at `nm`.
fn table_at(nm: f64) -> Result<[f64; 4]> {
    if !(MIN_WAVELENGTH_NM..=MAX_WAVELENGTH_NM).contains(&nm) {
        return Err(Error::WavelengthOutOfRange(nm));
    }
    let pos = (nm - TABLE_START_NM) / TABLE_STEP_NM;
    let i = (pos.floor() as usize).min(CMF_D65.len() - 2);
    let t = pos - i as f64;
    let (a, b) = (CMF_D65[i], CMF_D65[i + 1]);
    Ok(std::array::from_fn(|k| a[k] + t * (b[k] - a[k])))
}

/// Trapezoidal integration widths for a (possibly non-uniform) band grid.
fn band_widths(wl: &[f64]) -> Vec<f64> {
    let n = wl.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|b| {
            let lo = if b == 0 { wl[0] } else { 0.5 * (wl[b - 1] + wl[b]) };
            let hi = if b + 1 == n { wl[n - 1] } else { 0.5 * (wl[b] + wl[b + 1]) };
            hi - lo
        })
        .collect()
}

/// Per-band XYZ weights, scaled so that unit reflectance maps to [`D65_WHITE`].
pub fn xyz_weights(wavelengths_nm: &[f64]) -> Result<Vec<[f64; 3]>> {
    let widths = band_widths(wavelengths_nm);
    let mut w = Vec::with_capacity(wavelengths_nm.len());
    for (&nm, &dl) in wavelengths_nm.iter().zip(&widths) {
        let [x, y, z, d65] = table_at(nm)?;
        w.push([x * d65 * dl, y * d65 * dl, z * d65 * dl]);
    }
    for c in 0..3 {
        let total: f64 = w.iter().map(|v| v[c]).sum();
        if total > 0.0 {
            w.iter_mut().for_each(|v| v[c] *= D65_WHITE[c] / total);
        }
    }
    Ok(w)
}

/// Linear sRGB per pixel, clipped to `[0, 1]`, before the transfer curve.
pub fn linear_rgb<T: Scalar>(cube: &HyperCube<T>) -> Result<Vec<[f64; 3]>> {
    let w = xyz_weights(cube.wavelengths_nm())?;
    let n = cube.width() * cube.height();
    let mut xyz = vec![[0.0f64; 3]; n];
    for (b, wb) in w.iter().enumerate() {
        for (acc, v) in xyz.iter_mut().zip(cube.band(b)) {
            let r = v.f64();
            for c in 0..3 {
                acc[c] += r * wb[c];
            }
        }
    }
    Ok(xyz
        .into_iter()
        .map(|p| std::array::from_fn(|c| XYZ_TO_SRGB[c].iter().zip(&p).map(|(m, v)| m * v).sum::<f64>().clamp(0.0, 1.0)))
        .collect())
}

fn srgb_encode(v: f64) -> f64 {
    if v <= 0.0031308 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

pub fn cube_to_rgb<T: Scalar>(cube: &HyperCube<T>) -> Result<RgbImage> {
    let data = linear_rgb(cube)?
        .into_iter()
        .flat_map(|p| p.map(|v| (srgb_encode(v) * 255.0).round() as u8))
        .collect();
    Ok(RgbImage { width: cube.width(), height: cube.height(), data })
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Format(format!("png: {e}"))
}

pub fn write_png(img: &RgbImage, path: &Path) -> Result<()> {
    if img.data.len() != img.width * img.height * 3 {
        return Err(Error::ShapeMismatch("RGB buffer size".into()));
    }
    let file = BufWriter::new(fs::File::create(path)?);
    let mut enc = png::Encoder::new(file, img.width as u32, img.height as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(png_err)?;
    writer.write_image_data(&img.data).map_err(png_err)?;
    writer.finish().map_err(png_err)
}

/// Reads an 8-bit RGB PNG.
pub fn read_png(path: &Path) -> Result<RgbImage> {
    let file = std::io::BufReader::new(fs::File::open(path)?);
    let mut reader = png::Decoder::new(file).read_info().map_err(png_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Format("png: image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!("png: expected 8-bit RGB, got {:?} {:?}", info.color_type, info.bit_depth)));
    }
    buf.truncate(info.buffer_size());
    Ok(RgbImage { width: info.width as usize, height: info.height as usize, data: buf })
}

/// Writes one band as a 16-bit PGM, values clamped to `[0, 1]`.
pub fn write_band_pgm<T: Scalar>(cube: &HyperCube<T>, band: usize, path: &Path) -> Result<()> {
    if band >= cube.bands() {
        return Err(Error::BandCountMismatch { expected: cube.bands(), found: band + 1 });
    }
    let plane: Vec<f64> = cube.band(band).iter().map(|v| v.f64()).collect();
    write_pgm16(path, cube.width(), cube.height(), &plane)
}
