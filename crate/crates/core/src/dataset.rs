//! Ground-truth production and training corpora.
//!
//! Full-resolution cubes come from three places: composition of sixteen
//! one-pixel-shifted captures, spectral resampling of external cubes onto the
//! sensor's band grid, and a procedural scene generator. [`build_corpus`] cuts
//! any of them into aligned (mosaic, cube) patch pairs.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calibration::gaussian_smooth;
use crate::error::{Error, Result};
use crate::io::{read_cube, read_mosaic, write_cube, write_mosaic};
use crate::mosaic::{cube_to_mosaic, extract_patch, validate_wavelengths, HyperCube, MosaicImage, MosaicPattern, SamplingMode};
use crate::scalar::Scalar;

/// Ground-truth smoothing applied to non-flat sources.
pub const GT_SIGMA: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftCapture<T> {
    pub dx: usize,
    pub dy: usize,
    pub image: MosaicImage<T>,
}

/// One capture per sensor shift `(dx, dy)` over the pattern cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftCaptureSet<T> {
    captures: Vec<ShiftCapture<T>>,
}

/// Boustrophedon order over the cell: left to right, then right to left.
pub fn meander_order(side: usize) -> Vec<(usize, usize)> {
    (0..side)
        .flat_map(|dy| {
            let row: Vec<_> = (0..side).map(|dx| (dx, dy)).collect();
            if dy % 2 == 0 { row } else { row.into_iter().rev().collect() }
        })
        .collect()
}

impl<T: Scalar> ShiftCaptureSet<T> {
    pub fn new(captures: Vec<ShiftCapture<T>>) -> Result<Self> {
        let first = captures.first().ok_or_else(|| Error::IncompleteSet("no captures".into()))?;
        let pattern = first.image.pattern().clone();
        let n = pattern.side();
        let mut seen = BTreeSet::new();
        for c in &captures {
            if c.image.width() != first.image.width()
                || c.image.height() != first.image.height()
                || c.image.pattern() != &pattern
                || c.image.phase() != (0, 0)
            {
                return Err(Error::ShapeMismatch("shift captures differ in size, pattern or phase".into()));
            }
            if c.dx >= n || c.dy >= n {
                return Err(Error::IncompleteSet(format!("shift ({}, {}) outside the {n}x{n} cell", c.dx, c.dy)));
            }
            if !seen.insert((c.dx, c.dy)) {
                return Err(Error::IncompleteSet(format!("duplicate shift ({}, {})", c.dx, c.dy)));
            }
        }
        if seen.len() != n * n {
            let missing: Vec<_> =
                meander_order(n).into_iter().filter(|s| !seen.contains(s)).collect();
            return Err(Error::IncompleteSet(format!("missing shifts {missing:?}")));
        }
        Ok(Self { captures })
    }

    pub fn captures(&self) -> &[ShiftCapture<T>] {
        &self.captures
    }

    pub fn pattern(&self) -> &MosaicPattern {
        self.captures[0].image.pattern()
    }

    pub fn get(&self, dx: usize, dy: usize) -> &MosaicImage<T> {
        &self.captures.iter().find(|c| (c.dx, c.dy) == (dx, dy)).expect("set is complete").image
    }
}

/// Samples the scene under a shifted sensor: the capture with shift `(dx, dy)`
/// sees scene pixel `p` at sensor pixel `p + (dx, dy)`. A non-zero `epsilon`
/// makes each one-pixel step `1 + epsilon` pixels (bilinear resampling);
/// reads beyond the scene replicate its edge.
pub fn simulate_shift_set<T: Scalar>(
    cube: &HyperCube<T>,
    pattern: &MosaicPattern,
    epsilon: f64,
) -> Result<ShiftCaptureSet<T>> {
    if cube.bands() != pattern.bands() {
        return Err(Error::BandCountMismatch { expected: pattern.bands(), found: cube.bands() });
    }
    let n = pattern.side();
    let (w, h) = (cube.width(), cube.height());
    let sample = |b: usize, sx: f64, sy: f64| -> T {
        let clamp = |v: f64, len: usize| v.clamp(0.0, (len - 1) as f64);
        let (sx, sy) = (clamp(sx, w), clamp(sy, h));
        let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
        let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
        if fx == 0.0 && fy == 0.0 {
            return cube.get(b, x0, y0);
        }
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let v = |x, y| cube.get(b, x, y).f64();
        T::of((1.0 - fy) * ((1.0 - fx) * v(x0, y0) + fx * v(x1, y0)) + fy * ((1.0 - fx) * v(x0, y1) + fx * v(x1, y1)))
    };
    let captures = meander_order(n)
        .into_iter()
        .map(|(dx, dy)| {
            let (ox, oy) = (dx as f64 * (1.0 + epsilon), dy as f64 * (1.0 + epsilon));
            let image = MosaicImage::from_fn(w, h, pattern.clone(), |x, y| {
                sample(pattern.band_at(y % n, x % n), x as f64 - ox, y as f64 - oy)
            })?;
            Ok(ShiftCapture { dx, dy, image })
        })
        .collect::<Result<_>>()?;
    ShiftCaptureSet::new(captures)
}

/// Full-resolution cube from a complete shift set. Band `b` of scene pixel
/// `p` is read from the one capture whose shift lands `p` on a `b` filter.
/// The result is cropped by `side - 1` pixels on the right and bottom, where
/// some reads would fall off the sensor.
pub fn compose_shifted<T: Scalar>(set: &ShiftCaptureSet<T>) -> Result<HyperCube<T>> {
    let pattern = set.pattern();
    let n = pattern.side();
    let first = &set.captures[0].image;
    let (w, h) = (first.width(), first.height());
    if w < n || h < n {
        return Err(Error::ShapeMismatch(format!("{w}x{h} captures are smaller than the {n}x{n} cell")));
    }
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    // shift_for[b][(py%n)*n + px%n]
    let mut shift_for = vec![vec![(0, 0); n * n]; pattern.bands()];
    for py in 0..n {
        for px in 0..n {
            for dy in 0..n {
                for dx in 0..n {
                    let b = pattern.band_at((py + dy) % n, (px + dx) % n);
                    shift_for[b][py * n + px] = (dx, dy);
                }
            }
        }
    }
    HyperCube::from_fn(ow, oh, pattern.wavelengths_nm().to_vec(), |b, x, y| {
        let (dx, dy) = shift_for[b][(y % n) * n + x % n];
        set.get(dx, dy).get(x + dx, y + dy)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptedCube<T> {
    pub cube: HyperCube<T>,
    /// Targets outside the source range, filled by holding the edge band.
    pub extrapolated_nm: Vec<f64>,
}

/// Per-pixel linear interpolation along the spectral axis onto `targets`.
pub fn adapt_external_cube<T: Scalar>(cube: &HyperCube<T>, targets: &[f64]) -> Result<AdaptedCube<T>> {
    let src = cube.wavelengths_nm();
    validate_wavelengths(src)?;
    if src.is_empty() || targets.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut extrapolated_nm = Vec::new();
    // (lower band, upper band, weight of upper)
    let taps: Vec<(usize, usize, f64)> = targets
        .iter()
        .map(|&t| {
            if t <= src[0] || t >= src[src.len() - 1] {
                if t < src[0] || t > src[src.len() - 1] {
                    extrapolated_nm.push(t);
                }
                let edge = if t <= src[0] { 0 } else { src.len() - 1 };
                return (edge, edge, 0.0);
            }
            let hi = src.partition_point(|&s| s <= t);
            let lo = hi - 1;
            if src[lo] == t {
                (lo, lo, 0.0)
            } else {
                (lo, hi, (t - src[lo]) / (src[hi] - src[lo]))
            }
        })
        .collect();
    let plane = cube.width() * cube.height();
    let mut data = Vec::with_capacity(plane * targets.len());
    for &(lo, hi, t) in &taps {
        let (a, b) = (cube.band(lo), cube.band(hi));
        if t == 0.0 {
            data.extend_from_slice(a);
        } else {
            data.extend(a.iter().zip(b).map(|(&x, &y)| T::of(x.f64() + t * (y.f64() - x.f64()))));
        }
    }
    let cube = HyperCube::new(targets.len(), cube.width(), cube.height(), data, targets.to_vec())?;
    Ok(AdaptedCube { cube, extrapolated_nm })
}

/// Procedural scene parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub materials: usize,
    pub shapes: usize,
    /// Optical blur applied to every band, in pixels; 0 disables it.
    pub blur_sigma: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self { width: 256, height: 256, materials: 6, shapes: 24, blur_sigma: 0.6 }
    }
}

/// Smooth reflectance spectrum: a tilted baseline plus a few Gaussian bumps,
/// kept inside `[0.02, 0.95]`.
pub fn random_spectrum(rng: &mut impl Rng, wavelengths_nm: &[f64]) -> Vec<f64> {
    let base = rng.random_range(0.05..0.5);
    let tilt = rng.random_range(-0.15..0.15);
    let bumps: Vec<(f64, f64, f64)> = (0..rng.random_range(1..=3))
        .map(|_| (rng.random_range(-0.3..0.5), rng.random_range(430.0..680.0), rng.random_range(15.0..60.0)))
        .collect();
    wavelengths_nm
        .iter()
        .map(|&l| {
            let mut r = base + tilt * (l - 550.0) / 100.0;
            for &(a, c, s) in &bumps {
                r += a * (-(l - c).powi(2) / (2.0 * s * s)).exp();
            }
            r.clamp(0.02, 0.95)
        })
        .collect()
}

enum Shape {
    Disc { cx: f64, cy: f64, r: f64 },
    Rect { x0: f64, y0: f64, x1: f64, y1: f64 },
    Stripes { angle: f64, period: f64, duty: f64, x0: f64, y0: f64, x1: f64, y1: f64 },
    Checker { period: f64, x0: f64, y0: f64, x1: f64, y1: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Disc { cx, cy, r } => (x - cx).powi(2) + (y - cy).powi(2) <= r * r,
            Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
            Shape::Stripes { angle, period, duty, x0, y0, x1, y1 } => {
                let t = x * angle.cos() + y * angle.sin();
                x >= x0 && x < x1 && y >= y0 && y < y1 && (t / period).rem_euclid(1.0) < duty
            }
            Shape::Checker { period, x0, y0, x1, y1 } => {
                x >= x0
                    && x < x1
                    && y >= y0
                    && y < y1
                    && ((((x - x0) / period).floor() + ((y - y0) / period).floor()) as i64).rem_euclid(2) == 0
            }
        }
    }
}

/// Procedural reflectance scene: random smooth-spectrum materials painted as
/// discs, rectangles, stripes and checkers, modulated by low-frequency
/// illumination and fine texture shared by all bands.
pub fn synthetic_scene<T: Scalar>(seed: u64, cfg: &SceneConfig, wavelengths_nm: &[f64]) -> Result<HyperCube<T>> {
    if cfg.width == 0 || cfg.height == 0 || cfg.materials == 0 {
        return Err(Error::InvalidConfig("scene needs a non-zero size and at least one material".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (cfg.width as f64, cfg.height as f64);
    let spectra: Vec<Vec<f64>> = (0..cfg.materials).map(|_| random_spectrum(&mut rng, wavelengths_nm)).collect();
    let shapes: Vec<(Shape, usize)> = (0..cfg.shapes)
        .map(|_| {
            let m = rng.random_range(0..cfg.materials);
            let (cx, cy) = (rng.random_range(0.0..w), rng.random_range(0.0..h));
            let size = rng.random_range(4.0..0.35 * w.min(h).max(8.0));
            let shape = match rng.random_range(0..10) {
                0..=3 => Shape::Disc { cx, cy, r: size / 2.0 },
                4..=6 => Shape::Rect { x0: cx, y0: cy, x1: cx + size, y1: cy + rng.random_range(2.0..size) },
                7 => Shape::Stripes {
                    angle: rng.random_range(0.0..std::f64::consts::PI),
                    period: rng.random_range(5.0..24.0),
                    duty: rng.random_range(0.2..0.6),
                    x0: cx,
                    y0: cy,
                    x1: cx + size,
                    y1: cy + size,
                },
                _ => Shape::Checker { period: rng.random_range(3.0..14.0), x0: cx, y0: cy, x1: cx + size, y1: cy + size },
            };
            (shape, m)
        })
        .collect();
    let background = rng.random_range(0..cfg.materials);
    let light = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let waves: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            (a.cos(), a.sin(), rng.random_range(2.5..12.0), rng.random_range(0.02..0.08))
        })
        .collect();
    let (wi, hi) = (cfg.width, cfg.height);
    let mut label = vec![background; wi * hi];
    let mut shade = vec![0.0; wi * hi];
    for y in 0..hi {
        for x in 0..wi {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            for (s, m) in &shapes {
                if s.contains(fx, fy) {
                    label[y * wi + x] = *m;
                }
            }
            let mut s = 0.8 + light.0 * (fx / w - 0.5) + light.1 * (fy / h - 0.5);
            for &(c, sn, period, amp) in &waves {
                s += amp * ((fx * c + fy * sn) * std::f64::consts::TAU / period).sin();
            }
            shade[y * wi + x] = s.clamp(0.2, 1.2);
        }
    }
    let cube = HyperCube::from_fn(wi, hi, wavelengths_nm.to_vec(), |b, x, y| {
        let i = y * wi + x;
        T::of((spectra[label[i]][b] * shade[i]).clamp(0.0, 1.0))
    })?;
    if cfg.blur_sigma > 0.0 {
        gaussian_smooth(&cube, cfg.blur_sigma)
    } else {
        Ok(cube)
    }
}

/// Two materials meeting at a vertical edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeScene<T> {
    pub cube: HyperCube<T>,
    /// First column of the right-hand material.
    pub edge_x: usize,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

pub fn edge_scene<T: Scalar>(seed: u64, width: usize, height: usize, wavelengths_nm: &[f64]) -> Result<EdgeScene<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = random_spectrum(&mut rng, wavelengths_nm);
    let mut right = random_spectrum(&mut rng, wavelengths_nm);
    // keep the two materials clearly distinct
    let diff: f64 = left.iter().zip(&right).map(|(a, b)| (a - b).abs()).sum::<f64>() / left.len() as f64;
    if diff < 0.1 {
        right.iter_mut().zip(&left).for_each(|(r, l)| *r = (1.0 - l).clamp(0.02, 0.95));
    }
    let edge_x = width / 2 + 1;
    let cube = HyperCube::from_fn(width, height, wavelengths_nm.to_vec(), |b, x, _| {
        T::of(if x < edge_x { left[b] } else { right[b] })
    })?;
    Ok(EdgeScene { cube, edge_x, left, right })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Captured,
    Synthetic,
}

/// A full-resolution ground-truth cube offered to [`build_corpus`].
#[derive(Clone, Debug, PartialEq)]
pub struct Source<T> {
    pub id: String,
    pub cube: HyperCube<T>,
    /// Flat scenes keep their ground truth unsmoothed.
    pub flat: bool,
    pub kind: SourceKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub patch_size: usize,
    pub train_patches: usize,
    pub test_patches: usize,
    /// Fraction of each source's height reserved (at the bottom) for test
    /// patches; at least one patch high.
    pub test_area_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { patch_size: 100, train_patches: 1000, test_patches: 75, test_area_fraction: 0.25, seed: 42 }
    }
}

/// Aligned mosaic / ground-truth patch pair.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair<T> {
    pub id: String,
    pub source_id: String,
    pub split: Split,
    pub offset: (usize, usize),
    pub kind: SourceKind,
    pub mosaic: MosaicImage<T>,
    pub truth: HyperCube<T>,
    /// RMS difference between the mosaic and a re-simulation from the final
    /// ground truth; non-zero only where ground-truth-only corrections apply.
    pub divergence_rms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchCorpus<T> {
    pub config: CorpusConfig,
    pub pairs: Vec<PatchPair<T>>,
}

impl<T: Scalar> PatchCorpus<T> {
    pub fn split(&self, split: Split) -> Vec<&PatchPair<T>> {
        self.pairs.iter().filter(|p| p.split == split).collect()
    }

    pub fn owned_split(&self, split: Split) -> Vec<PatchPair<T>> {
        self.pairs.iter().filter(|p| p.split == split).cloned().collect()
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.split(Split::Train).len(), self.split(Split::Test).len())
    }
}

fn share(total: usize, parts: usize, i: usize) -> usize {
    total / parts + usize::from(i < total % parts)
}

fn aligned_offset(rng: &mut impl Rng, lo: usize, hi_incl: usize, cell: usize) -> usize {
    let first = lo.div_ceil(cell);
    let last = hi_incl / cell;
    rng.random_range(first..=last) * cell
}

/// Cuts every source into aligned patch pairs. Test patches come from a strip
/// at the bottom of each source and train patches from the area above it, so
/// the two splits never share pixels.
pub fn build_corpus<T: Scalar>(
    sources: &[Source<T>],
    pattern: &MosaicPattern,
    cfg: &CorpusConfig,
) -> Result<PatchCorpus<T>> {
    if sources.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (p, n) = (cfg.patch_size, pattern.side());
    if p == 0 || p % n != 0 {
        return Err(Error::InvalidConfig(format!("patch size {p} must be a positive multiple of {n}")));
    }
    if !(0.0..1.0).contains(&cfg.test_area_fraction) {
        return Err(Error::InvalidConfig("test_area_fraction must lie in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairs = Vec::with_capacity(cfg.train_patches + cfg.test_patches);
    for (si, src) in sources.iter().enumerate() {
        let cube = &src.cube;
        let (w, h) = (cube.width(), cube.height());
        if w < p || h < p {
            return Err(Error::SourceTooSmall { width: w, height: h, patch: p });
        }
        let n_train = share(cfg.train_patches, sources.len(), si);
        let n_test = share(cfg.test_patches, sources.len(), si);
        let strip = if n_test == 0 {
            0
        } else {
            (((h as f64 * cfg.test_area_fraction).ceil() as usize).max(p)).div_ceil(n) * n
        };
        let train_h = (h.saturating_sub(strip)) / n * n;
        if (n_train > 0 && train_h < p) || (n_test > 0 && h - train_h < p) {
            return Err(Error::InsufficientArea(format!(
                "source {} ({w}x{h}) cannot hold separate {p}px train and test regions",
                src.id
            )));
        }
        let mosaic = cube_to_mosaic(cube, pattern, SamplingMode::Simulate)?;
        let truth_full = if src.flat { cube.clone() } else { gaussian_smooth(cube, GT_SIGMA)? };
        let wmax = w - p;
        let cut = |split: Split, x0: usize, y0: usize, k: usize| -> Result<PatchPair<T>> {
            let mi = extract_patch(&mosaic, x0, y0, p, p)?;
            let truth = truth_full.crop(x0, y0, p, p)?;
            let divergence_rms = if src.flat {
                0.0
            } else {
                let resim = cube_to_mosaic(&truth, pattern, SamplingMode::Simulate)?;
                let sq: f64 = resim.data().iter().zip(mi.data()).map(|(a, b)| (a.f64() - b.f64()).powi(2)).sum();
                (sq / (p * p) as f64).sqrt()
            };
            let tag = if split == Split::Train { "train" } else { "test" };
            Ok(PatchPair {
                id: format!("{}-{tag}-{k:04}", src.id),
                source_id: src.id.clone(),
                split,
                offset: (x0, y0),
                kind: src.kind,
                mosaic: mi,
                truth,
                divergence_rms,
            })
        };
        for k in 0..n_train {
            let x0 = aligned_offset(&mut rng, 0, wmax, n);
            let y0 = aligned_offset(&mut rng, 0, train_h - p, n);
            pairs.push(cut(Split::Train, x0, y0, k)?);
        }
        for k in 0..n_test {
            let x0 = aligned_offset(&mut rng, 0, wmax, n);
            let y0 = aligned_offset(&mut rng, train_h, h - p, n);
            pairs.push(cut(Split::Test, x0, y0, k)?);
        }
    }
    Ok(PatchCorpus { config: cfg.clone(), pairs })
}

/// Shuffles pair indices with a dedicated seeded generator.
pub fn shuffled_indices(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub mosaic_path: PathBuf,
    pub cube_path: PathBuf,
    pub split: Split,
    pub source_id: String,
    pub offset: (usize, usize),
    pub kind: SourceKind,
    pub divergence_rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config: CorpusConfig,
    pub train_count: usize,
    pub test_count: usize,
    pub pairs: Vec<ManifestEntry>,
}

/// Writes every pair as raw files plus `manifest.json`; paths in the manifest
/// are relative to `dir`.
pub fn write_corpus<T: Scalar>(corpus: &PatchCorpus<T>, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(corpus.pairs.len());
    for p in &corpus.pairs {
        let mosaic_path = PathBuf::from(format!("{}.mosaic.raw", p.id));
        let cube_path = PathBuf::from(format!("{}.cube.raw", p.id));
        write_mosaic(&dir.join(&mosaic_path), &p.mosaic)?;
        write_cube(&dir.join(&cube_path), &p.truth)?;
        entries.push(ManifestEntry {
            id: p.id.clone(),
            mosaic_path,
            cube_path,
            split: p.split,
            source_id: p.source_id.clone(),
            offset: p.offset,
            kind: p.kind,
            divergence_rms: p.divergence_rms,
        });
    }
    let (train_count, test_count) = corpus.counts();
    let manifest = CorpusManifest { config: corpus.config.clone(), train_count, test_count, pairs: entries };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

pub fn read_corpus<T: Scalar>(manifest_path: &Path) -> Result<PatchCorpus<T>> {
    let manifest: CorpusManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let pairs = manifest
        .pairs
        .into_iter()
        .map(|e| {
            Ok(PatchPair {
                mosaic: read_mosaic(&dir.join(&e.mosaic_path))?,
                truth: read_cube(&dir.join(&e.cube_path))?,
                id: e.id,
                source_id: e.source_id,
                split: e.split,
                offset: e.offset,
                kind: e.kind,
                divergence_rms: e.divergence_rms,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PatchCorpus { config: manifest.config, pairs })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftEntry {
    pub dx: usize,
    pub dy: usize,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftManifest {
    pub captures: Vec<ShiftEntry>,
}

pub fn write_shift_set<T: Scalar>(set: &ShiftCaptureSet<T>, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let captures = set
        .captures()
        .iter()
        .map(|c| {
            let path = PathBuf::from(format!("shift_{}_{}.raw", c.dx, c.dy));
            write_mosaic(&dir.join(&path), &c.image)?;
            Ok(ShiftEntry { dx: c.dx, dy: c.dy, path })
        })
        .collect::<Result<_>>()?;
    let path = dir.join("shifts.json");
    fs::write(&path, serde_json::to_string_pretty(&ShiftManifest { captures })?)?;
    Ok(path)
}

pub fn read_shift_set<T: Scalar>(manifest_path: &Path) -> Result<ShiftCaptureSet<T>> {
    let m: ShiftManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    ShiftCaptureSet::new(
        m.captures
            .into_iter()
            .map(|e| Ok(ShiftCapture { dx: e.dx, dy: e.dy, image: read_mosaic(&dir.join(&e.path))? }))
            .collect::<Result<_>>()?,
    )
}
