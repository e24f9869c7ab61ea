//! Mosaic and hypercube data model, and the exact index maps between the
//! single-plane mosaic and the band-stacked cube.
//!
//! Coordinates are `(x, y)` = (column, row) throughout. A mosaic pixel at
//! `(x, y)` carries band `band_at[(y + phase.0) % n][(x + phase.1) % n]`,
//! where `n` is the pattern side. Cubes are stored band-major `[L][H][W]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower/upper wavelength bounds accepted for a filter band, in nm.
pub const WAVELENGTH_RANGE_NM: (f64, f64) = (350.0, 1100.0);

/// Default sensor range for the 4x4 visible snapshot sensor.
pub const DEFAULT_RANGE_NM: (f64, f64) = (463.0, 638.0);

/// Square filter-array layout with per-band centre wavelengths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PatternRepr", into = "PatternRepr")]
pub struct MosaicPattern {
    side: usize,
    band_at: Vec<Vec<usize>>,
    wavelengths_nm: Vec<f64>,
    position: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct PatternRepr {
    rows: usize,
    cols: usize,
    band_at: Vec<Vec<usize>>,
    wavelengths_nm: Vec<f64>,
}

impl TryFrom<PatternRepr> for MosaicPattern {
    type Error = Error;

    fn try_from(r: PatternRepr) -> Result<Self> {
        if r.rows != r.cols {
            return Err(Error::InvalidPattern(format!("non-square pattern {}x{}", r.rows, r.cols)));
        }
        if r.band_at.len() != r.rows || r.band_at.iter().any(|row| row.len() != r.cols) {
            return Err(Error::InvalidPattern("band_at does not match rows/cols".into()));
        }
        MosaicPattern::new(r.band_at, r.wavelengths_nm)
    }
}

impl From<MosaicPattern> for PatternRepr {
    fn from(p: MosaicPattern) -> Self {
        PatternRepr { rows: p.side, cols: p.side, band_at: p.band_at, wavelengths_nm: p.wavelengths_nm }
    }
}

impl MosaicPattern {
    pub fn new(band_at: Vec<Vec<usize>>, wavelengths_nm: Vec<f64>) -> Result<Self> {
        let side = band_at.len();
        if side == 0 || band_at.iter().any(|row| row.len() != side) {
            return Err(Error::InvalidPattern("band_at must be a non-empty square grid".into()));
        }
        let bands = side * side;
        let mut position = vec![(usize::MAX, usize::MAX); bands];
        for (r, row) in band_at.iter().enumerate() {
            for (c, &b) in row.iter().enumerate() {
                if b >= bands || position[b].0 != usize::MAX {
                    return Err(Error::InvalidPattern(format!(
                        "band_at must be a permutation of 0..{bands}"
                    )));
                }
                position[b] = (r, c);
            }
        }
        if wavelengths_nm.len() != bands {
            return Err(Error::BandCountMismatch { expected: bands, found: wavelengths_nm.len() });
        }
        validate_wavelengths(&wavelengths_nm)?;
        let (lo, hi) = WAVELENGTH_RANGE_NM;
        if wavelengths_nm.iter().any(|&w| !(lo..=hi).contains(&w)) {
            return Err(Error::InvalidPattern(format!("wavelengths must lie within [{lo}, {hi}] nm")));
        }
        Ok(Self { side, band_at, wavelengths_nm, position })
    }

    /// Row-major layout: band `z` at `(row, col) = (z / side, z % side)`.
    pub fn canonical(side: usize, wavelengths_nm: Vec<f64>) -> Result<Self> {
        let band_at = (0..side).map(|r| (0..side).map(|c| r * side + c).collect()).collect();
        Self::new(band_at, wavelengths_nm)
    }

    /// Canonical 4x4 layout with 16 wavelengths evenly spaced over 463..638 nm.
    pub fn default_4x4() -> Self {
        Self::canonical(4, linspace(DEFAULT_RANGE_NM.0, DEFAULT_RANGE_NM.1, 16))
            .expect("default pattern is valid")
    }

    /// Pattern side length (`sqrt(L)`).
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn bands(&self) -> usize {
        self.side * self.side
    }

    pub fn band_at(&self, row: usize, col: usize) -> usize {
        self.band_at[row][col]
    }

    pub fn grid(&self) -> &[Vec<usize>] {
        &self.band_at
    }

    /// `(row, col)` of the cell carrying `band`.
    pub fn position_of(&self, band: usize) -> (usize, usize) {
        self.position[band]
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }
}

impl Default for MosaicPattern {
    fn default() -> Self {
        Self::default_4x4()
    }
}

pub(crate) fn validate_wavelengths(w: &[f64]) -> Result<()> {
    if w.iter().any(|v| !v.is_finite()) || w.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::NonMonotonicWavelengths);
    }
    Ok(())
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Single-plane raw sensor view.
#[derive(Clone, Debug, PartialEq)]
pub struct MosaicImage<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
    pattern: MosaicPattern,
    /// `(row_offset, col_offset)` of the pattern at pixel (0, 0).
    phase: (usize, usize),
}

impl<T: Scalar> MosaicImage<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>, pattern: MosaicPattern) -> Result<Self> {
        Self::with_phase(width, height, data, pattern, (0, 0))
    }

    pub fn with_phase(
        width: usize,
        height: usize,
        data: Vec<T>,
        pattern: MosaicPattern,
        phase: (usize, usize),
    ) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "mosaic data has {} values, expected {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("mosaic image".into()));
        }
        let n = pattern.side();
        Ok(Self { width, height, data, pattern, phase: (phase.0 % n, phase.1 % n) })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        pattern: MosaicPattern,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data, pattern)
    }

    pub fn filled(width: usize, height: usize, pattern: MosaicPattern, value: T) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], pattern)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn pattern(&self) -> &MosaicPattern {
        &self.pattern
    }

    pub fn phase(&self) -> (usize, usize) {
        self.phase
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Band index sampled at pixel `(x, y)`.
    pub fn band_at_pixel(&self, x: usize, y: usize) -> usize {
        let n = self.pattern.side();
        self.pattern.band_at((y + self.phase.0) % n, (x + self.phase.1) % n)
    }

    /// Applies `f` to every pixel value, keeping geometry and pattern.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::with_phase(
            self.width,
            self.height,
            self.data.iter().map(|&v| f(v)).collect(),
            self.pattern.clone(),
            self.phase,
        )
    }

    pub(crate) fn replace_data(&self, data: Vec<T>) -> Result<Self> {
        Self::with_phase(self.width, self.height, data, self.pattern.clone(), self.phase)
    }

    pub fn cast<U: Scalar>(&self) -> MosaicImage<U> {
        MosaicImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
            pattern: self.pattern.clone(),
            phase: self.phase,
        }
    }

    fn check_divisible(&self) -> Result<usize> {
        let n = self.pattern.side();
        if self.width % n != 0 || self.height % n != 0 || self.width == 0 || self.height == 0 {
            return Err(Error::DimensionNotDivisible { width: self.width, height: self.height, cell: n });
        }
        Ok(n)
    }

    pub(crate) fn require_aligned(&self) -> Result<usize> {
        let n = self.check_divisible()?;
        if self.phase != (0, 0) {
            return Err(Error::PhaseMismatch(self.phase.0, self.phase.1));
        }
        Ok(n)
    }
}

/// Dense `[L][H][W]` reflectance volume.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperCube<T> {
    bands: usize,
    width: usize,
    height: usize,
    data: Vec<T>,
    wavelengths_nm: Vec<f64>,
}

impl<T: Scalar> HyperCube<T> {
    pub fn new(
        bands: usize,
        width: usize,
        height: usize,
        data: Vec<T>,
        wavelengths_nm: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != bands * width * height {
            return Err(Error::ShapeMismatch(format!(
                "cube data has {} values, expected {bands}x{height}x{width}",
                data.len()
            )));
        }
        if wavelengths_nm.len() != bands {
            return Err(Error::BandCountMismatch { expected: bands, found: wavelengths_nm.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hypercube".into()));
        }
        Ok(Self { bands, width, height, data, wavelengths_nm })
    }

    pub fn zeros(bands: usize, width: usize, height: usize, wavelengths_nm: Vec<f64>) -> Result<Self> {
        Self::new(bands, width, height, vec![T::zero(); bands * width * height], wavelengths_nm)
    }

    /// Builds a cube from `f(band, x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        wavelengths_nm: Vec<f64>,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let bands = wavelengths_nm.len();
        let mut data = Vec::with_capacity(bands * width * height);
        for b in 0..bands {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(b, x, y));
                }
            }
        }
        Self::new(bands, width, height, data, wavelengths_nm)
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn wavelengths_nm(&self) -> &[f64] {
        &self.wavelengths_nm
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, band: usize, x: usize, y: usize) -> T {
        self.data[(band * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, band: usize, x: usize, y: usize, v: T) {
        self.data[(band * self.height + y) * self.width + x] = v;
    }

    pub fn band(&self, band: usize) -> &[T] {
        let plane = self.width * self.height;
        &self.data[band * plane..(band + 1) * plane]
    }

    pub fn band_mut(&mut self, band: usize) -> &mut [T] {
        let plane = self.width * self.height;
        &mut self.data[band * plane..(band + 1) * plane]
    }

    pub fn spectrum(&self, x: usize, y: usize) -> Vec<T> {
        (0..self.bands).map(|b| self.get(b, x, y)).collect()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        self.replace_data(self.data.iter().map(|&v| f(v)).collect())
    }

    pub(crate) fn replace_data(&self, data: Vec<T>) -> Result<Self> {
        Self::new(self.bands, self.width, self.height, data, self.wavelengths_nm.clone())
    }

    pub fn cast<U: Scalar>(&self) -> HyperCube<U> {
        HyperCube {
            bands: self.bands,
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
            wavelengths_nm: self.wavelengths_nm.clone(),
        }
    }

    /// Spatial crop of all bands.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        if x0 + w > self.width || y0 + h > self.height {
            return Err(Error::OutOfBounds { x0, y0, w, h, width: self.width, height: self.height });
        }
        let mut data = Vec::with_capacity(self.bands * w * h);
        for b in 0..self.bands {
            let plane = self.band(b);
            for y in y0..y0 + h {
                data.extend_from_slice(&plane[y * self.width + x0..y * self.width + x0 + w]);
            }
        }
        Self::new(self.bands, w, h, data, self.wavelengths_nm.clone())
    }
}

/// How [`cube_to_mosaic`] interprets the cube's spatial grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingMode {
    /// Cube is at full sensor resolution; each pixel keeps only the band its
    /// filter passes.
    Simulate,
    /// Cube is the `[L, H/n, W/n]` result of [`m2c_resample`]; the output is
    /// its exact inverse.
    Inverse,
}

/// Rearranges a mosaic into a `[L, H/n, W/n]` cube, `C(x, y, z) = MI(u, v)`
/// with `(v mod n, u mod n)` the cell holding band `z`. For the canonical
/// layout this is `u = x*n + z mod n`, `v = y*n + z div n`.
pub fn m2c_resample<T: Scalar>(mi: &MosaicImage<T>) -> Result<HyperCube<T>> {
    let n = mi.require_aligned()?;
    let pattern = mi.pattern();
    let (w, h) = (mi.width() / n, mi.height() / n);
    let mut data = Vec::with_capacity(mi.data().len());
    for z in 0..pattern.bands() {
        let (row, col) = pattern.position_of(z);
        for y in 0..h {
            let v = y * n + row;
            let src = &mi.data()[v * mi.width()..(v + 1) * mi.width()];
            data.extend((0..w).map(|x| src[x * n + col]));
        }
    }
    HyperCube::new(pattern.bands(), w, h, data, pattern.wavelengths_nm().to_vec())
}

pub fn cube_to_mosaic<T: Scalar>(
    cube: &HyperCube<T>,
    pattern: &MosaicPattern,
    mode: SamplingMode,
) -> Result<MosaicImage<T>> {
    if cube.bands() != pattern.bands() {
        return Err(Error::BandCountMismatch { expected: pattern.bands(), found: cube.bands() });
    }
    let n = pattern.side();
    match mode {
        SamplingMode::Simulate => MosaicImage::from_fn(cube.width(), cube.height(), pattern.clone(), |x, y| {
            cube.get(pattern.band_at(y % n, x % n), x, y)
        }),
        SamplingMode::Inverse => {
            MosaicImage::from_fn(cube.width() * n, cube.height() * n, pattern.clone(), |u, v| {
                cube.get(pattern.band_at(v % n, u % n), u / n, v / n)
            })
        }
    }
}

/// Copies a pattern-aligned window; the result always has phase (0, 0).
pub fn extract_patch<T: Scalar>(
    mi: &MosaicImage<T>,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
) -> Result<MosaicImage<T>> {
    let n = mi.pattern().side();
    let (pr, pc) = mi.phase();
    if (x0 + pc) % n != 0 || (y0 + pr) % n != 0 || w % n != 0 || h % n != 0 || w == 0 || h == 0 {
        return Err(Error::MisalignedPatch { x0, y0, w, h, cell: n });
    }
    if x0 + w > mi.width() || y0 + h > mi.height() {
        return Err(Error::OutOfBounds { x0, y0, w, h, width: mi.width(), height: mi.height() });
    }
    let mut data = Vec::with_capacity(w * h);
    for y in y0..y0 + h {
        data.extend_from_slice(&mi.data()[y * mi.width() + x0..y * mi.width() + x0 + w]);
    }
    MosaicImage::new(w, h, data, mi.pattern().clone())
}

/// Pixel-wise mean of co-registered frames.
pub fn average_frames<T: Scalar>(frames: &[MosaicImage<T>]) -> Result<MosaicImage<T>> {
    let first = frames.first().ok_or(Error::EmptyInput)?;
    for f in &frames[1..] {
        if f.width() != first.width()
            || f.height() != first.height()
            || f.pattern() != first.pattern()
            || f.phase() != first.phase()
        {
            return Err(Error::ShapeMismatch("frames differ in geometry or pattern".into()));
        }
    }
    let mut acc = vec![0.0f64; first.data().len()];
    for f in frames {
        for (a, v) in acc.iter_mut().zip(f.data()) {
            *a += v.f64();
        }
    }
    let count = frames.len() as f64;
    first.replace_data(acc.into_iter().map(|a| T::of(a / count)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pat() -> MosaicPattern {
        MosaicPattern::default_4x4()
    }

    fn ramp(w: usize, h: usize) -> MosaicImage<f32> {
        MosaicImage::from_fn(w, h, pat(), |x, y| (y * w + x) as f32).unwrap()
    }

    #[test]
    fn default_pattern_layout() {
        let p = pat();
        assert_eq!(p.side(), 4);
        assert_eq!(p.band_at(1, 1), 5);
        assert_eq!(p.position_of(5), (1, 1));
        assert_eq!(p.wavelengths_nm()[0], 463.0);
        assert_eq!(p.wavelengths_nm()[15], 638.0);
    }

    #[test]
    fn rejects_bad_patterns() {
        let w = linspace(463.0, 638.0, 4);
        assert!(MosaicPattern::new(vec![vec![0, 0], vec![1, 2]], w.clone()).is_err());
        assert!(MosaicPattern::new(vec![vec![0, 1, 2], vec![3]], w.clone()).is_err());
        let mut rev = w.clone();
        rev.reverse();
        assert!(matches!(
            MosaicPattern::new(vec![vec![0, 1], vec![2, 3]], rev),
            Err(Error::NonMonotonicWavelengths)
        ));
        assert!(MosaicPattern::new(vec![vec![0, 1], vec![2, 3]], vec![300.0, 400.0, 500.0, 600.0]).is_err());
    }

    #[test]
    fn pattern_json_round_trip() {
        let json = serde_json::to_string(&pat()).unwrap();
        assert!(json.contains("\"rows\":4"));
        let back: MosaicPattern = serde_json::from_str(&json).unwrap();
        assert_eq!(back, pat());
    }

    #[test]
    fn m2c_corner_and_band_five() {
        let mi = ramp(8, 8);
        let c = m2c_resample(&mi).unwrap();
        assert_eq!((c.bands(), c.width(), c.height()), (16, 2, 2));
        assert_eq!(c.get(0, 0, 0), mi.get(0, 0));
        assert_eq!(c.get(5, 0, 0), mi.get(1, 1));
        // band 6 at cell (row 1, col 2); voxel (x=1, y=1) reads u=4+2, v=4+1
        assert_eq!(c.get(6, 1, 1), mi.get(6, 5));
    }

    #[test]
    fn m2c_errors() {
        let mi = ramp(10, 8);
        assert!(matches!(m2c_resample(&mi), Err(Error::DimensionNotDivisible { .. })));
        let shifted = MosaicImage::with_phase(8, 8, vec![0.0f32; 64], pat(), (1, 0)).unwrap();
        assert!(matches!(m2c_resample(&shifted), Err(Error::PhaseMismatch(1, 0))));
    }

    #[test]
    fn round_trip_100x100_exhaustive() {
        let mi = MosaicImage::from_fn(100, 100, pat(), |x, y| ((x * 7919 + y * 104729) % 1000) as f32 / 999.0)
            .unwrap();
        let cube = m2c_resample(&mi).unwrap();
        assert_eq!((cube.bands(), cube.height(), cube.width()), (16, 25, 25));
        // every voxel reads the pixel the closed-form index map names
        for z in 0..16 {
            for y in 0..25 {
                for x in 0..25 {
                    assert_eq!(cube.get(z, x, y), mi.get(x * 4 + z % 4, y * 4 + z / 4));
                }
            }
        }
        let back = cube_to_mosaic(&cube, &pat(), SamplingMode::Inverse).unwrap();
        assert_eq!(back.data(), mi.data());
    }

    #[test]
    fn simulate_keeps_filter_band() {
        let wl = pat().wavelengths_nm().to_vec();
        let cube = HyperCube::<f32>::from_fn(8, 8, wl.clone(), |b, _, _| b as f32 / 16.0).unwrap();
        let mi = cube_to_mosaic(&cube, &pat(), SamplingMode::Simulate).unwrap();
        assert_eq!(mi.get(1, 1), 5.0 / 16.0);
        assert_eq!(mi.get(5, 4), 1.0 / 16.0);
        let flat = HyperCube::<f32>::from_fn(8, 8, wl, |_, _, _| 0.7).unwrap();
        let mi = cube_to_mosaic(&flat, &pat(), SamplingMode::Simulate).unwrap();
        assert!(mi.data().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn band_count_mismatch() {
        let cube = HyperCube::<f32>::zeros(3, 4, 4, vec![500.0, 510.0, 520.0]).unwrap();
        assert!(matches!(
            cube_to_mosaic(&cube, &pat(), SamplingMode::Simulate),
            Err(Error::BandCountMismatch { expected: 16, found: 3 })
        ));
    }

    #[test]
    fn patch_extraction() {
        let big = MosaicImage::<f32>::filled(2048, 1024, pat(), 0.25).unwrap();
        let p = extract_patch(&big, 4, 8, 100, 100).unwrap();
        assert_eq!((p.width(), p.height(), p.phase()), (100, 100, (0, 0)));
        assert!(p.data().iter().all(|&v| v == 0.25));
        assert!(matches!(extract_patch(&big, 2, 8, 100, 100), Err(Error::MisalignedPatch { .. })));
        assert!(matches!(extract_patch(&big, 2000, 0, 100, 100), Err(Error::OutOfBounds { .. })));
        let mi = ramp(16, 16);
        let p = extract_patch(&mi, 4, 8, 8, 8).unwrap();
        assert_eq!(p.get(0, 0), mi.get(4, 8));
        assert_eq!(p.get(7, 7), mi.get(11, 15));
    }

    #[test]
    fn averaging() {
        let a = MosaicImage::<f64>::filled(4, 4, pat(), 0.2).unwrap();
        let b = MosaicImage::<f64>::filled(4, 4, pat(), 0.4).unwrap();
        assert_eq!(average_frames(std::slice::from_ref(&a)).unwrap(), a);
        let m = average_frames(&[a.clone(), b]).unwrap();
        assert!(m.data().iter().all(|&v| (v - 0.3).abs() < 1e-12));
        assert!(matches!(average_frames::<f64>(&[]), Err(Error::EmptyInput)));
        let c = MosaicImage::<f64>::filled(8, 4, pat(), 0.2).unwrap();
        assert!(matches!(average_frames(&[a, c]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn averaging_reduces_noise_variance() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let variance_of_mean = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let frames: Vec<_> = (0..n)
                .map(|_| MosaicImage::from_fn(64, 64, pat(), |_, _| 0.5 + noise.sample(rng)).unwrap())
                .collect();
            let m = average_frames(&frames).unwrap();
            let mean = m.data().iter().sum::<f64>() / m.data().len() as f64;
            m.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m.data().len() - 1) as f64
        };
        let v1 = variance_of_mean(1, &mut rng);
        for n in [4usize, 16] {
            let vn = variance_of_mean(n, &mut rng);
            let ratio = vn * n as f64 / v1;
            assert!((ratio - 1.0).abs() < 0.2, "n={n}: ratio {ratio}");
        }
    }

    proptest! {
        #[test]
        fn inverse_then_resample_is_identity(seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cube = HyperCube::<f32>::from_fn(25, 25, pat().wavelengths_nm().to_vec(), |_, _, _| rng.random())
                .unwrap();
            let mi = cube_to_mosaic(&cube, &pat(), SamplingMode::Inverse).unwrap();
            prop_assert_eq!(m2c_resample(&mi).unwrap(), cube);
        }

        #[test]
        fn resample_conserves_pixels(w in 1usize..8, h in 1usize..8, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mi = MosaicImage::<f32>::from_fn(w * 4, h * 4, pat(), |_, _| rng.random()).unwrap();
            let cube = m2c_resample(&mi).unwrap();
            let mut a: Vec<f32> = mi.data().to_vec();
            let mut b: Vec<f32> = cube.data().to_vec();
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn patch_commutes_with_resample(px in 0usize..4, py in 0usize..4, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mi = MosaicImage::<f32>::from_fn(32, 32, pat(), |_, _| rng.random()).unwrap();
            let (x0, y0) = (px * 4, py * 4);
            let patch = extract_patch(&mi, x0, y0, 16, 16).unwrap();
            let lhs = m2c_resample(&patch).unwrap();
            let rhs = m2c_resample(&mi).unwrap().crop(x0 / 4, y0 / 4, 4, 4).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn per_cell_constant_gives_flat_bands() {
        let mi = MosaicImage::<f32>::from_fn(16, 12, pat(), |x, y| ((y % 4) * 4 + x % 4) as f32).unwrap();
        let c = m2c_resample(&mi).unwrap();
        for z in 0..16 {
            assert!(c.band(z).iter().all(|&v| v == z as f32));
        }
    }
}
