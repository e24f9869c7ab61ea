//! Baseline demosaicers working band by band on the sparse sample lattice.
//!
//! Band `b` is sampled on a lattice with stride `n` (the pattern side) and
//! origin at its pattern cell `(row, col)`. Lattice coordinates of a pixel
//! are `t = (x - col) / n`, `s = (y - row) / n`. Borders replicate the
//! outermost lattice samples.
//!
//! The intensity-difference variant estimates a full-resolution intensity
//! image with a uniform `n x n` box average (window offsets `-(n/2 - 1)` to
//! `n/2`), bilinearly interpolates the per-band residual `mosaic - intensity`
//! and adds it back, clamping at zero.

use crate::error::Result;
use crate::mosaic::{HyperCube, MosaicImage};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassicalMethod {
    Bilinear,
    Bicubic,
    IntensityDifference,
}

pub fn demosaic<T: Scalar>(mi: &MosaicImage<T>, method: ClassicalMethod) -> Result<HyperCube<T>> {
    match method {
        ClassicalMethod::Bilinear => demosaic_bilinear(mi),
        ClassicalMethod::Bicubic => demosaic_bicubic(mi).map(|(c, _)| c),
        ClassicalMethod::IntensityDifference => demosaic_intensity_difference(mi),
    }
}

/// Samples of one band as a dense `rows x cols` lattice.
struct Lattice {
    rows: usize,
    cols: usize,
    row0: usize,
    col0: usize,
    stride: usize,
    values: Vec<f64>,
}

impl Lattice {
    fn of_band<T: Scalar>(mi: &MosaicImage<T>, band: usize, value: impl Fn(usize, usize) -> f64) -> Self {
        let n = mi.pattern().side();
        let (row0, col0) = mi.pattern().position_of(band);
        let (rows, cols) = (mi.height() / n, mi.width() / n);
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(value(col0 + j * n, row0 + i * n));
            }
        }
        Lattice { rows, cols, row0, col0, stride: n, values }
    }
}

/// Per output pixel: two lattice indices and the weight of the second.
fn linear_taps(len: usize, origin: usize, stride: usize, count: usize) -> Vec<(usize, usize, f64)> {
    (0..len)
        .map(|p| {
            let t = (p as f64 - origin as f64) / stride as f64;
            let t = t.clamp(0.0, (count - 1) as f64);
            let i0 = (t.floor() as usize).min(count.saturating_sub(2));
            let i1 = (i0 + 1).min(count - 1);
            (i0, i1, t - i0 as f64)
        })
        .collect()
}

fn bilinear_lattice(lat: &Lattice, width: usize, height: usize) -> Vec<f64> {
    let tx = linear_taps(width, lat.col0, lat.stride, lat.cols);
    let ty = linear_taps(height, lat.row0, lat.stride, lat.rows);
    let v = |i: usize, j: usize| lat.values[i * lat.cols + j];
    let mut out = Vec::with_capacity(width * height);
    for &(i0, i1, fy) in &ty {
        for &(j0, j1, fx) in &tx {
            let top = v(i0, j0) * (1.0 - fx) + v(i0, j1) * fx;
            let bottom = v(i1, j0) * (1.0 - fx) + v(i1, j1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// Catmull-Rom segment through `p1..p2` at `f` in [0, 1).
#[inline]
fn catmull_rom(p: [f64; 4], f: f64) -> f64 {
    let [p0, p1, p2, p3] = p;
    0.5 * (2.0 * p1
        + (p2 - p0) * f
        + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f * f
        + (3.0 * (p1 - p2) + p3 - p0) * f * f * f)
}

fn cubic_taps(len: usize, origin: usize, stride: usize, count: usize) -> Vec<([usize; 4], f64)> {
    let last = count as isize - 1;
    (0..len)
        .map(|p| {
            let t = (p as f64 - origin as f64) / stride as f64;
            let i = t.floor() as isize;
            let idx = [i - 1, i, i + 1, i + 2].map(|k| k.clamp(0, last) as usize);
            (idx, t - i as f64)
        })
        .collect()
}

fn bicubic_lattice(lat: &Lattice, width: usize, height: usize) -> Vec<f64> {
    let tx = cubic_taps(width, lat.col0, lat.stride, lat.cols);
    let ty = cubic_taps(height, lat.row0, lat.stride, lat.rows);
    // rows first: each lattice row to full width
    let mut wide = vec![0.0; lat.rows * width];
    for i in 0..lat.rows {
        let row = &lat.values[i * lat.cols..(i + 1) * lat.cols];
        for (x, (idx, f)) in tx.iter().enumerate() {
            wide[i * width + x] = catmull_rom(idx.map(|k| row[k]), *f);
        }
    }
    let mut out = vec![0.0; width * height];
    for (y, (idx, f)) in ty.iter().enumerate() {
        for x in 0..width {
            out[y * width + x] = catmull_rom(idx.map(|k| wide[k * width + x]), *f);
        }
    }
    out
}

fn assemble<T: Scalar>(mi: &MosaicImage<T>, planes: Vec<Vec<f64>>) -> Result<HyperCube<T>> {
    let data = planes.into_iter().flatten().map(T::of).collect();
    HyperCube::new(
        mi.pattern().bands(),
        mi.width(),
        mi.height(),
        data,
        mi.pattern().wavelengths_nm().to_vec(),
    )
}

pub fn demosaic_bilinear<T: Scalar>(mi: &MosaicImage<T>) -> Result<HyperCube<T>> {
    mi.require_aligned()?;
    let planes = (0..mi.pattern().bands())
        .map(|b| {
            let lat = Lattice::of_band(mi, b, |x, y| mi.get(x, y).f64());
            bilinear_lattice(&lat, mi.width(), mi.height())
        })
        .collect();
    assemble(mi, planes)
}

/// Catmull-Rom (`a = -0.5`) per band. Returns the cube and the number of
/// undershooting values that were clamped to zero.
pub fn demosaic_bicubic<T: Scalar>(mi: &MosaicImage<T>) -> Result<(HyperCube<T>, usize)> {
    mi.require_aligned()?;
    let mut clamped = 0;
    let planes = (0..mi.pattern().bands())
        .map(|b| {
            let lat = Lattice::of_band(mi, b, |x, y| mi.get(x, y).f64());
            let mut plane = bicubic_lattice(&lat, mi.width(), mi.height());
            for v in plane.iter_mut().filter(|v| **v < 0.0) {
                *v = 0.0;
                clamped += 1;
            }
            plane
        })
        .collect();
    Ok((assemble(mi, planes)?, clamped))
}

/// Box-filtered intensity estimate with edge replication.
pub fn box_intensity<T: Scalar>(mi: &MosaicImage<T>) -> Vec<f64> {
    let n = mi.pattern().side() as isize;
    let (lo, hi) = (-(n / 2 - 1), n / 2);
    let (w, h) = (mi.width() as isize, mi.height() as isize);
    let norm = 1.0 / (n * n) as f64;
    let mut out = Vec::with_capacity(mi.data().len());
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in lo..=hi {
                let yy = (y + dy).clamp(0, h - 1) as usize;
                for dx in lo..=hi {
                    acc += mi.get((x + dx).clamp(0, w - 1) as usize, yy).f64();
                }
            }
            out.push(acc * norm);
        }
    }
    out
}

pub fn demosaic_intensity_difference<T: Scalar>(mi: &MosaicImage<T>) -> Result<HyperCube<T>> {
    mi.require_aligned()?;
    let intensity = box_intensity(mi);
    let w = mi.width();
    let planes = (0..mi.pattern().bands())
        .map(|b| {
            let lat = Lattice::of_band(mi, b, |x, y| mi.get(x, y).f64() - intensity[y * w + x]);
            bilinear_lattice(&lat, w, mi.height())
                .into_iter()
                .zip(&intensity)
                .map(|(d, i)| (i + d).max(0.0))
                .collect()
        })
        .collect();
    assemble(mi, planes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::mosaic::MosaicPattern;
    use rand::{Rng, SeedableRng};

    fn pat() -> MosaicPattern {
        MosaicPattern::default_4x4()
    }

    fn random_mosaic(seed: u64, w: usize, h: usize) -> MosaicImage<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        MosaicImage::from_fn(w, h, pat(), |_, _| rng.random()).unwrap()
    }

    /// Sample positions `(x, y)` of band `b` and their values.
    fn samples(mi: &MosaicImage<f64>, b: usize) -> Vec<(f64, f64, f64)> {
        let mut out = vec![];
        for y in 0..mi.height() {
            for x in 0..mi.width() {
                if mi.band_at_pixel(x, y) == b {
                    out.push((x as f64, y as f64, mi.get(x, y)));
                }
            }
        }
        out
    }

    /// Tent-weighted average over every sample of the band, after clamping
    /// the query into the sample hull.
    fn bilinear_oracle(mi: &MosaicImage<f64>, b: usize, x: usize, y: usize, vals: &dyn Fn(f64, f64, f64) -> f64) -> f64 {
        let s = samples(mi, b);
        let (xmin, xmax) = s.iter().fold((f64::MAX, f64::MIN), |(a, c), p| (a.min(p.0), c.max(p.0)));
        let (ymin, ymax) = s.iter().fold((f64::MAX, f64::MIN), |(a, c), p| (a.min(p.1), c.max(p.1)));
        let qx = (x as f64).clamp(xmin, xmax);
        let qy = (y as f64).clamp(ymin, ymax);
        let (mut num, mut den) = (0.0, 0.0);
        for &(sx, sy, v) in &s {
            let w = (1.0 - (qx - sx).abs() / 4.0).max(0.0) * (1.0 - (qy - sy).abs() / 4.0).max(0.0);
            num += w * vals(sx, sy, v);
            den += w;
        }
        num / den
    }

    fn keys(d: f64) -> f64 {
        let a = -0.5;
        let d = d.abs();
        if d <= 1.0 {
            (a + 2.0) * d.powi(3) - (a + 3.0) * d * d + 1.0
        } else if d < 2.0 {
            a * d.powi(3) - 5.0 * a * d * d + 8.0 * a * d - 4.0 * a
        } else {
            0.0
        }
    }

    /// Direct 2-D kernel sum over the lattice padded by replicated samples.
    fn bicubic_oracle(mi: &MosaicImage<f64>, b: usize, x: usize, y: usize) -> f64 {
        let (r0, c0) = pat().position_of(b);
        let (rows, cols) = (mi.height() / 4, mi.width() / 4) ;
        let t = (x as f64 - c0 as f64) / 4.0;
        let s = (y as f64 - r0 as f64) / 4.0;
        let mut acc = 0.0;
        for i in -3..rows as isize + 3 {
            for j in -3..cols as isize + 3 {
                let ii = i.clamp(0, rows as isize - 1) as usize;
                let jj = j.clamp(0, cols as isize - 1) as usize;
                let v = mi.get(c0 + jj * 4, r0 + ii * 4);
                acc += keys(t - j as f64) * keys(s - i as f64) * v;
            }
        }
        acc.max(0.0)
    }

    #[test]
    fn constant_scene_is_exact_for_all_methods() {
        let mi = MosaicImage::<f64>::filled(16, 12, pat(), 0.42).unwrap();
        for m in [ClassicalMethod::Bilinear, ClassicalMethod::Bicubic, ClassicalMethod::IntensityDifference] {
            let c = demosaic(&mi, m).unwrap();
            assert_eq!((c.bands(), c.width(), c.height()), (16, 16, 12));
            assert!(c.data().iter().all(|v| (v - 0.42).abs() < 1e-12), "{m:?}");
        }
    }

    #[test]
    fn bilinear_matches_tent_oracle() {
        let mi = random_mosaic(11, 16, 16);
        let c = demosaic_bilinear(&mi).unwrap();
        for b in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    let o = bilinear_oracle(&mi, b, x, y, &|_, _, v| v);
                    assert!((c.get(b, x, y) - o).abs() < 1e-6, "b={b} x={x} y={y}");
                }
            }
        }
    }

    #[test]
    fn bicubic_matches_kernel_oracle() {
        let mi = random_mosaic(12, 16, 16);
        let (c, _) = demosaic_bicubic(&mi).unwrap();
        for b in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    assert!((c.get(b, x, y) - bicubic_oracle(&mi, b, x, y)).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn intensity_difference_matches_stepwise_oracle() {
        let mi = random_mosaic(13, 16, 16);
        let c = demosaic_intensity_difference(&mi).unwrap();
        // step 1: 4x4 box average, window x-1..=x+2, clamped indices
        let at = |x: i64, y: i64| mi.get(x.clamp(0, 15) as usize, y.clamp(0, 15) as usize);
        let mut intensity = [[0.0; 16]; 16];
        for (y, row) in intensity.iter_mut().enumerate() {
            for (x, v) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                for dy in -1..=2 {
                    for dx in -1..=2 {
                        s += at(x as i64 + dx, y as i64 + dy);
                    }
                }
                *v = s / 16.0;
            }
        }
        for b in 0..16 {
            for y in 0..16 {
                for x in 0..16 {
                    // steps 2-4: residual at samples, tent interpolation, add back
                    let d = bilinear_oracle(&mi, b, x, y, &|sx, sy, v| v - intensity[sy as usize][sx as usize]);
                    let expect = (intensity[y][x] + d).max(0.0);
                    assert!((c.get(b, x, y) - expect).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn affine_ramp_reproduced_in_interior() {
        let mi = MosaicImage::<f64>::from_fn(32, 32, pat(), |x, y| 0.01 * x as f64 + 0.02 * y as f64 + 0.1).unwrap();
        let bl = demosaic_bilinear(&mi).unwrap();
        let (bc, _) = demosaic_bicubic(&mi).unwrap();
        for b in 0..16 {
            let (r0, c0) = pat().position_of(b);
            for y in 0..32 {
                for x in 0..32 {
                    let f = 0.01 * x as f64 + 0.02 * y as f64 + 0.1;
                    let inside = x >= c0 && x <= c0 + 28 && y >= r0 && y <= r0 + 28;
                    if inside {
                        assert!((bl.get(b, x, y) - f).abs() < 1e-9);
                    }
                    // cubic needs one extra lattice sample on each side
                    if x >= c0 + 4 && x <= c0 + 24 && y >= r0 + 4 && y <= r0 + 24 {
                        assert!((bc.get(b, x, y) - f).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn identical_bands_survive_intensity_difference() {
        let f = |x: usize, y: usize| 0.2 + 0.005 * x as f64 + 0.003 * y as f64;
        let mi = MosaicImage::<f64>::from_fn(32, 32, pat(), f).unwrap();
        let c = demosaic_intensity_difference(&mi).unwrap();
        for b in 0..16 {
            let (r0, c0) = pat().position_of(b);
            for y in (r0 + 1).max(4)..=r0 + 24 {
                for x in (c0 + 1).max(4)..=c0 + 24 {
                    assert!((c.get(b, x, y) - f(x, y)).abs() < 1e-9, "b={b} ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn samples_are_preserved() {
        let mi = random_mosaic(5, 24, 20);
        let bl = demosaic_bilinear(&mi).unwrap();
        let (bc, _) = demosaic_bicubic(&mi).unwrap();
        for y in 0..20 {
            for x in 0..24 {
                let b = mi.band_at_pixel(x, y);
                assert!((bl.get(b, x, y) - mi.get(x, y)).abs() < 1e-6);
                assert!((bc.get(b, x, y) - mi.get(x, y)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn outputs_nonnegative_and_undershoot_counted() {
        let mi = MosaicImage::<f64>::from_fn(32, 32, pat(), |x, _| if x < 16 { 0.0 } else { 1.0 }).unwrap();
        let (bc, clamped) = demosaic_bicubic(&mi).unwrap();
        assert!(clamped > 0);
        assert!(bc.data().iter().all(|&v| v >= 0.0));
        for m in [ClassicalMethod::Bilinear, ClassicalMethod::IntensityDifference] {
            assert!(demosaic(&mi, m).unwrap().data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn rejects_indivisible() {
        let mi = MosaicImage::<f32>::filled(18, 16, pat(), 0.1).unwrap();
        assert!(matches!(demosaic_bilinear(&mi), Err(Error::DimensionNotDivisible { .. })));
        assert!(matches!(demosaic_bicubic(&mi), Err(Error::DimensionNotDivisible { .. })));
        assert!(matches!(demosaic_intensity_difference(&mi), Err(Error::DimensionNotDivisible { .. })));
    }
}
