//! Image quality metrics: PSNR, SSIM and regional spectral signatures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mosaic::HyperCube;
use crate::scalar::Scalar;

/// Reported PSNR when the two images are identical.
pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;

fn same_len<T>(a: &[T], b: &[T]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("{} vs {} samples", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

fn same_cube<T: Scalar>(a: &HyperCube<T>, b: &HyperCube<T>) -> Result<()> {
    if (a.bands(), a.width(), a.height()) != (b.bands(), b.width(), b.height()) {
        return Err(Error::ShapeMismatch(format!(
            "cube {}x{}x{} vs {}x{}x{}",
            a.bands(),
            a.height(),
            a.width(),
            b.bands(),
            b.height(),
            b.width()
        )));
    }
    Ok(())
}

pub fn mse<T: Scalar>(pred: &[T], truth: &[T]) -> Result<f64> {
    same_len(pred, truth)?;
    Ok(pred.iter().zip(truth).map(|(p, t)| (p.f64() - t.f64()).powi(2)).sum::<f64>() / pred.len() as f64)
}

/// `10·log10(max²/MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr<T: Scalar>(pred: &[T], truth: &[T], max_val: f64) -> Result<f64> {
    if max_val.is_nan() || max_val <= 0.0 {
        return Err(Error::InvalidConfig(format!("PSNR peak value must be positive, got {max_val}")));
    }
    let m = mse(pred, truth)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (max_val * max_val / m).log10()).min(PSNR_CAP_DB))
}

pub fn psnr_bands<T: Scalar>(pred: &HyperCube<T>, truth: &HyperCube<T>, max_val: f64) -> Result<Vec<f64>> {
    same_cube(pred, truth)?;
    (0..pred.bands()).map(|b| psnr(pred.band(b), truth.band(b), max_val)).collect()
}

/// Mean of the per-band PSNR values.
pub fn psnr_cube<T: Scalar>(pred: &HyperCube<T>, truth: &HyperCube<T>, max_val: f64) -> Result<f64> {
    Ok(mean(&psnr_bands(pred, truth, max_val)?))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ssim_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW).map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable 'valid' filtering: output is `(w-10) x (h-10)`.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let src = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&src[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for (i, kv) in k.iter().enumerate() {
            let src = &rows[(y + i) * ow..(y + i + 1) * ow];
            for (o, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    out
}

/// Mean local SSIM over all positions where the 11x11 Gaussian window fits.
pub fn ssim<T: Scalar>(pred: &[T], truth: &[T], width: usize, height: usize, max_val: f64) -> Result<f64> {
    same_len(pred, truth)?;
    if pred.len() != width * height {
        return Err(Error::ShapeMismatch(format!("{} samples for {width}x{height}", pred.len())));
    }
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::ImageTooSmall { width, height, window: SSIM_WINDOW });
    }
    let c1 = (0.01 * max_val).powi(2);
    let c2 = (0.03 * max_val).powi(2);
    let k = ssim_window();
    let x: Vec<f64> = pred.iter().map(|v| v.f64()).collect();
    let y: Vec<f64> = truth.iter().map(|v| v.f64()).collect();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let mx = filter_valid(&x, width, height, &k);
    let my = filter_valid(&y, width, height, &k);
    let sxx = filter_valid(&prod(&x, &x), width, height, &k);
    let syy = filter_valid(&prod(&y, &y), width, height, &k);
    let sxy = filter_valid(&prod(&x, &y), width, height, &k);
    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cxy = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

pub fn ssim_bands<T: Scalar>(pred: &HyperCube<T>, truth: &HyperCube<T>, max_val: f64) -> Result<Vec<f64>> {
    same_cube(pred, truth)?;
    (0..pred.bands()).map(|b| ssim(pred.band(b), truth.band(b), pred.width(), pred.height(), max_val)).collect()
}

pub fn ssim_cube<T: Scalar>(pred: &HyperCube<T>, truth: &HyperCube<T>, max_val: f64) -> Result<f64> {
    Ok(mean(&ssim_bands(pred, truth, max_val)?))
}

/// Per-band mean over the pixels where `mask` is set, paired with wavelengths.
pub fn spectral_signature<T: Scalar>(cube: &HyperCube<T>, mask: &[bool]) -> Result<Vec<(f64, f64)>> {
    if mask.len() != cube.width() * cube.height() {
        return Err(Error::ShapeMismatch(format!(
            "mask of {} pixels for a {}x{} cube",
            mask.len(),
            cube.width(),
            cube.height()
        )));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok((0..cube.bands())
        .map(|b| {
            let sum: f64 = cube.band(b).iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v.f64()).sum();
            (cube.wavelengths_nm()[b], sum / count as f64)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub id: String,
    pub psnr_bands: Vec<f64>,
    pub ssim_bands: Vec<f64>,
    pub psnr: f64,
    pub ssim: f64,
}

impl ImageMetrics {
    pub fn compute<T: Scalar>(id: &str, pred: &HyperCube<T>, truth: &HyperCube<T>, max_val: f64) -> Result<Self> {
        let psnr_bands = psnr_bands(pred, truth, max_val)?;
        let ssim_bands = ssim_bands(pred, truth, max_val)?;
        Ok(Self { id: id.to_owned(), psnr: mean(&psnr_bands), ssim: mean(&ssim_bands), psnr_bands, ssim_bands })
    }
}

/// Per-image, per-band and corpus-mean quality figures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub max_val: f64,
    pub images: Vec<ImageMetrics>,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    /// Corpus mean of each band's PSNR.
    pub band_mean_psnr: Vec<f64>,
    pub band_mean_ssim: Vec<f64>,
}

impl MetricsReport {
    pub fn from_images(method: &str, max_val: f64, images: Vec<ImageMetrics>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = images.len() as f64;
        let bands = images[0].psnr_bands.len();
        let band_mean = |f: fn(&ImageMetrics) -> &[f64]| -> Vec<f64> {
            (0..bands).map(|b| images.iter().map(|m| f(m)[b]).sum::<f64>() / n).collect()
        };
        Ok(Self {
            method: method.to_owned(),
            max_val,
            mean_psnr: images.iter().map(|m| m.psnr).sum::<f64>() / n,
            mean_ssim: images.iter().map(|m| m.ssim).sum::<f64>() / n,
            band_mean_psnr: band_mean(|m| &m.psnr_bands),
            band_mean_ssim: band_mean(|m| &m.ssim_bands),
            images,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
