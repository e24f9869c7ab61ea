//! Radiometric preprocessing: white/dark reference correction, linear
//! crosstalk unmixing and Gaussian smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mosaic::{HyperCube, MosaicImage};
use crate::scalar::Scalar;

/// Condition number above which a crosstalk matrix is considered suspect.
pub const CONDITION_WARN: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhiteCorrectOptions {
    /// Minimum usable `white - dark` span.
    pub epsilon: f64,
    /// Upper clamp; values above 1 keep specular overshoot.
    pub clip_max: f64,
}

impl Default for WhiteCorrectOptions {
    fn default() -> Self {
        Self { epsilon: 1e-6, clip_max: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WhiteCorrected<T> {
    pub image: MosaicImage<T>,
    /// Pixels where `white - dark <= epsilon`; these are set to 0.
    pub degenerate_pixels: usize,
}

/// `(raw - dark) / (white - dark)`, clamped to `[0, clip_max]`.
pub fn white_correct<T: Scalar>(
    raw: &MosaicImage<T>,
    white: &MosaicImage<T>,
    dark: Option<&MosaicImage<T>>,
    opts: WhiteCorrectOptions,
) -> Result<WhiteCorrected<T>> {
    let same = |o: &MosaicImage<T>| {
        o.width() == raw.width() && o.height() == raw.height() && o.pattern() == raw.pattern() && o.phase() == raw.phase()
    };
    if !same(white) || dark.is_some_and(|d| !same(d)) {
        return Err(Error::ShapeMismatch("white/dark references differ from the raw frame".into()));
    }
    let mut degenerate = 0;
    let out = (0..raw.data().len())
        .map(|i| {
            let d = dark.map_or(0.0, |d| d.data()[i].f64());
            let span = white.data()[i].f64() - d;
            if span <= opts.epsilon {
                degenerate += 1;
                return T::zero();
            }
            T::of(((raw.data()[i].f64() - d) / span).clamp(0.0, opts.clip_max))
        })
        .collect();
    Ok(WhiteCorrected { image: raw.replace_data(out)?, degenerate_pixels: degenerate })
}

/// Spatially invariant linear band mixing: `observed = mixing * true`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct CrosstalkMatrix {
    mixing: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    size: usize,
    mixing: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for CrosstalkMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        if r.mixing.len() != r.size {
            return Err(Error::ShapeMismatch(format!("declared size {} but {} rows", r.size, r.mixing.len())));
        }
        CrosstalkMatrix::new(r.mixing)
    }
}

impl From<CrosstalkMatrix> for MatrixRepr {
    fn from(m: CrosstalkMatrix) -> Self {
        MatrixRepr { size: m.mixing.len(), mixing: m.mixing }
    }
}

impl CrosstalkMatrix {
    pub fn new(mixing: Vec<Vec<f64>>) -> Result<Self> {
        let n = mixing.len();
        if n == 0 || mixing.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch("crosstalk matrix must be square".into()));
        }
        if mixing.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("crosstalk matrix".into()));
        }
        if (0..n).any(|i| mixing[i][i] <= 0.0) {
            return Err(Error::InvalidConfig("crosstalk diagonal must be positive".into()));
        }
        Ok(Self { mixing })
    }

    pub fn identity(n: usize) -> Self {
        let mixing = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        Self { mixing }
    }

    pub fn size(&self) -> usize {
        self.mixing.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.mixing
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.size();
        let mut a = self.mixing.clone();
        let mut inv = Self::identity(n).mixing;
        let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .expect("non-empty range");
            if a[pivot][col].abs() <= scale * 1e-14 {
                return Err(Error::SingularMatrix);
            }
            a.swap(col, pivot);
            inv.swap(col, pivot);
            let p = a[col][col];
            for j in 0..n {
                a[col][j] /= p;
                inv[col][j] /= p;
            }
            for i in 0..n {
                if i != col {
                    let f = a[i][col];
                    if f != 0.0 {
                        for j in 0..n {
                            a[i][j] -= f * a[col][j];
                            inv[i][j] -= f * inv[col][j];
                        }
                    }
                }
            }
        }
        Ok(inv)
    }

    /// 1-norm condition number `|M|_1 * |M^-1|_1`.
    pub fn condition_number(&self) -> Result<f64> {
        let norm1 = |m: &[Vec<f64>]| {
            (0..m.len()).map(|j| m.iter().map(|r| r[j].abs()).sum::<f64>()).fold(0.0, f64::max)
        };
        Ok(norm1(&self.mixing) * norm1(&self.inverse()?))
    }
}

fn mix_pixels<T: Scalar>(cube: &HyperCube<T>, m: &[Vec<f64>], clamp_zero: bool) -> Result<HyperCube<T>> {
    if cube.bands() != m.len() {
        return Err(Error::BandCountMismatch { expected: m.len(), found: cube.bands() });
    }
    let (l, plane) = (cube.bands(), cube.width() * cube.height());
    let mut out = vec![T::zero(); cube.data().len()];
    let mut s = vec![0.0f64; l];
    for p in 0..plane {
        for (b, v) in s.iter_mut().enumerate() {
            *v = cube.data()[b * plane + p].f64();
        }
        for (i, row) in m.iter().enumerate() {
            let mut acc: f64 = row.iter().zip(&s).map(|(a, v)| a * v).sum();
            if clamp_zero && acc < 0.0 {
                acc = 0.0;
            }
            out[i * plane + p] = T::of(acc);
        }
    }
    cube.replace_data(out)
}

/// Forward model: mixes every pixel spectrum with `m`.
pub fn apply_mixing<T: Scalar>(cube: &HyperCube<T>, m: &CrosstalkMatrix) -> Result<HyperCube<T>> {
    mix_pixels(cube, m.rows(), false)
}

/// Unmixes every pixel spectrum with `m^-1`, clipping negative results to 0.
pub fn crosstalk_correct<T: Scalar>(cube: &HyperCube<T>, m: &CrosstalkMatrix) -> Result<HyperCube<T>> {
    if cube.bands() != m.size() {
        return Err(Error::BandCountMismatch { expected: m.size(), found: cube.bands() });
    }
    mix_pixels(cube, &m.inverse()?, true)
}

/// A stack of equally sized planes that can be filtered plane by plane.
pub trait Planes<T: Scalar>: Sized {
    /// `(width, height, plane_count)`.
    fn plane_dims(&self) -> (usize, usize, usize);
    fn plane_data(&self) -> &[T];
    fn with_plane_data(&self, data: Vec<T>) -> Result<Self>;
}

impl<T: Scalar> Planes<T> for MosaicImage<T> {
    fn plane_dims(&self) -> (usize, usize, usize) {
        (self.width(), self.height(), 1)
    }
    fn plane_data(&self) -> &[T] {
        self.data()
    }
    fn with_plane_data(&self, data: Vec<T>) -> Result<Self> {
        self.replace_data(data)
    }
}

impl<T: Scalar> Planes<T> for HyperCube<T> {
    fn plane_dims(&self) -> (usize, usize, usize) {
        (self.width(), self.height(), self.bands())
    }
    fn plane_data(&self) -> &[T] {
        self.data()
    }
    fn with_plane_data(&self, data: Vec<T>) -> Result<Self> {
        self.replace_data(data)
    }
}

/// Normalised 1-D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let r = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / total).collect())
}

/// Separable Gaussian blur of each plane with edge replication.
pub fn gaussian_smooth<T: Scalar, P: Planes<T>>(img: &P, sigma: f64) -> Result<P> {
    let taps = gaussian_kernel(sigma)?;
    let (w, h, count) = img.plane_dims();
    let mut out = Vec::with_capacity(img.plane_data().len());
    for plane in img.plane_data().chunks_exact((w * h).max(1)).take(count) {
        out.extend(smooth_plane(plane, w, h, &taps).into_iter().map(T::of));
    }
    img.with_plane_data(out)
}

pub(crate) fn smooth_plane<T: Scalar>(plane: &[T], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0f64; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            tmp[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * row[clamp(x as isize + k as isize - r, w)].f64())
                .sum();
        }
    }
    let mut out = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * tmp[clamp(y as isize + k as isize - r, h) * w + x])
                .sum();
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mosaic::MosaicPattern;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn pat() -> MosaicPattern {
        MosaicPattern::default_4x4()
    }

    fn img(v: f64) -> MosaicImage<f64> {
        MosaicImage::filled(8, 8, pat(), v).unwrap()
    }

    #[test]
    fn white_correction_arithmetic() {
        let o = WhiteCorrectOptions::default();
        let r = white_correct(&img(0.5), &img(1.0), None, o).unwrap();
        assert!(r.image.data().iter().all(|&v| v == 0.5));
        let r = white_correct(&img(0.6), &img(0.8), Some(&img(0.2)), o).unwrap();
        assert!(r.image.data().iter().all(|&v| (v - 0.4 / 0.6).abs() < 1e-6));
        let r = white_correct(&img(0.2), &img(0.8), Some(&img(0.2)), o).unwrap();
        assert!(r.image.data().iter().all(|&v| v == 0.0));
        let w = img(0.9);
        let r = white_correct(&w, &w, None, o).unwrap();
        assert!(r.image.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn white_correction_clips_and_flags() {
        let o = WhiteCorrectOptions::default();
        let r = white_correct(&img(3.0), &img(1.0), None, o).unwrap();
        assert!(r.image.data().iter().all(|&v| v == 2.0));
        let mut white = vec![1.0; 64];
        white[3] = 0.0;
        white[9] = 1e-9;
        let white = MosaicImage::new(8, 8, white, pat()).unwrap();
        let r = white_correct(&img(0.5), &white, None, o).unwrap();
        assert_eq!(r.degenerate_pixels, 2);
        assert_eq!(r.image.data()[3], 0.0);
        let bad = MosaicImage::filled(4, 8, pat(), 1.0).unwrap();
        assert!(matches!(white_correct(&img(0.5), &bad, None, o), Err(Error::ShapeMismatch(_))));
    }

    fn random_cube(seed: u64) -> HyperCube<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        HyperCube::from_fn(6, 5, pat().wavelengths_nm().to_vec(), |_, _, _| rng.random_range(0.05..1.0)).unwrap()
    }

    fn random_mixing(seed: u64) -> CrosstalkMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = (0..16)
            .map(|i| (0..16).map(|j| if i == j { 1.0 } else { rng.random_range(0.0..0.03) }).collect())
            .collect();
        CrosstalkMatrix::new(m).unwrap()
    }

    #[test]
    fn identity_and_scaled_unmixing() {
        let cube = random_cube(1);
        assert_eq!(crosstalk_correct(&cube, &CrosstalkMatrix::identity(16)).unwrap(), cube);
        let two = CrosstalkMatrix::new(
            (0..16).map(|i| (0..16).map(|j| if i == j { 2.0 } else { 0.0 }).collect()).collect(),
        )
        .unwrap();
        let flat = HyperCube::<f64>::from_fn(2, 2, pat().wavelengths_nm().to_vec(), |_, _, _| 0.4).unwrap();
        let out = crosstalk_correct(&flat, &two).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.2).abs() < 1e-12));
    }

    #[test]
    fn unmixing_inverts_forward_model() {
        for seed in 0..5 {
            let cube = random_cube(seed);
            let m = random_mixing(seed + 100);
            assert!(m.condition_number().unwrap() < 1e3);
            let mixed = apply_mixing(&cube, &m).unwrap();
            let back = crosstalk_correct(&mixed, &m).unwrap();
            for (a, b) in back.data().iter().zip(cube.data()) {
                assert!((a - b).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn unmixing_clips_negative() {
        let m = CrosstalkMatrix::new(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        // (0.1, 1.0) unmixes to a negative first component
        let cube = HyperCube::<f64>::new(2, 1, 1, vec![0.1, 1.0], vec![500.0, 600.0]).unwrap();
        let out = crosstalk_correct(&cube, &m).unwrap();
        assert_eq!(out.data()[0], 0.0);
        assert!(out.data()[1] > 0.0);
    }

    #[test]
    fn singular_and_malformed_matrices() {
        let m = CrosstalkMatrix::new(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(m.inverse(), Err(Error::SingularMatrix)));
        assert!(CrosstalkMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 1.0]]).is_err());
        let json = r#"{"size":3,"mixing":[[1,0],[0,1]]}"#;
        assert!(serde_json::from_str::<CrosstalkMatrix>(json).is_err());
        let m: CrosstalkMatrix = serde_json::from_str(r#"{"size":2,"mixing":[[1,0.1],[0,1]]}"#).unwrap();
        assert_eq!(m.size(), 2);
        let cube = random_cube(0);
        assert!(matches!(crosstalk_correct(&cube, &m), Err(Error::BandCountMismatch { .. })));
    }

    #[test]
    fn smoothing_constant_and_impulse() {
        let c = img(0.37);
        let s = gaussian_smooth(&c, 1.5).unwrap();
        assert!(s.data().iter().all(|&v| (v - 0.37).abs() < 1e-6));

        let mut data = vec![0.0; 31 * 31];
        data[15 * 31 + 15] = 1.0;
        let imp = MosaicImage::new(31, 31, data, pat()).unwrap();
        let s = gaussian_smooth(&imp, 1.5).unwrap();
        // independent 2-D evaluation of the normalised Gaussian at its peak
        let r = (3.0f64 * 1.5).ceil() as i64;
        let norm: f64 = (-r..=r)
            .flat_map(|i| (-r..=r).map(move |j| (-((i * i + j * j) as f64) / (2.0 * 1.5 * 1.5)).exp()))
            .sum();
        assert!((s.get(15, 15) - 1.0 / norm).abs() < 1e-9);
        assert!((s.data().iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!(matches!(gaussian_smooth(&imp, 0.0), Err(Error::NonPositiveSigma(_))));
        assert!(matches!(gaussian_smooth(&imp, -1.0), Err(Error::NonPositiveSigma(_))));
    }

    #[test]
    fn smoothing_preserves_mean_with_constant_margin() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cube = HyperCube::<f64>::from_fn(40, 40, vec![500.0, 600.0], |_, x, y| {
            if (10..30).contains(&x) && (10..30).contains(&y) { rng.random() } else { 0.5 }
        })
        .unwrap();
        let s = gaussian_smooth(&cube, 1.5).unwrap();
        for b in 0..2 {
            let m0 = cube.band(b).iter().sum::<f64>() / 1600.0;
            let m1 = s.band(b).iter().sum::<f64>() / 1600.0;
            assert!((m0 - m1).abs() < 1e-4);
        }
    }

    fn total_variation(d: &[f64], w: usize, h: usize) -> f64 {
        let mut tv = 0.0;
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    tv += (d[y * w + x + 1] - d[y * w + x]).abs();
                }
                if y + 1 < h {
                    tv += (d[(y + 1) * w + x] - d[y * w + x]).abs();
                }
            }
        }
        tv
    }

    proptest! {
        #[test]
        fn smoothing_reduces_total_variation(seed in 0u64..10_000, sigma in 0.5f64..3.0) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let im = MosaicImage::<f64>::from_fn(16, 16, pat(), |_, _| rng.random()).unwrap();
            let s = gaussian_smooth(&im, sigma).unwrap();
            prop_assert!(total_variation(s.data(), 16, 16) <= total_variation(im.data(), 16, 16));
        }
    }
}
