//! The parallel-path demosaicing network.
//!
//! ```text
//!   mosaic [N,1,H,W] ─┬─ conv 4x4/4 (learned M2C) ─────────────────────┐
//!                     └─ index M2C ─ 4 x resblock ──────────────────────┤ concat [N,32,H/4,W/4]
//!                                                                       │
//!        ReLU(deconv 8x8/2) [N,F,H/2,W/2] ─ ReLU(deconv 8x8/2) [N,16,H,W]
//! ```
//!
//! A resblock computes `ReLU(x + conv2(ReLU(conv1(x))))` with 3x3, stride 1,
//! padding 1 convolutions. Both transposed convolutions use padding 3, the
//! unique value giving an exact 2x upsampling for an 8x8 kernel at stride 2.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mosaic::{m2c_resample, HyperCube, MosaicImage, MosaicPattern};
use crate::scalar::Scalar;
use crate::tensor::{
    self, concat_backward, concat_channels, conv2d_forward, deconv2d_backward, deconv2d_forward, relu_backward,
    relu_in_place, ConvSpec, DeconvSpec, Tensor,
};

pub const RESBLOCKS: usize = 4;
pub const FILTER_COUNTS: [usize; 2] = [32, 128];
pub const DEFAULT_FILTER_COUNT: usize = 128;

const CHECKPOINT_MAGIC: &[u8; 8] = b"HSDMCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub epochs: usize,
    #[serde(default)]
    pub note: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub pattern: MosaicPattern,
    pub filter_count: usize,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResBlock<T> {
    pub conv1: ConvSpec<T>,
    pub conv2: ConvSpec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub m2c: ConvSpec<T>,
    pub res: Vec<ResBlock<T>>,
    pub deconv1: DeconvSpec<T>,
    pub deconv2: DeconvSpec<T>,
    pub meta: ModelMeta,
}

/// Name and shape of one parameter block, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

fn check_filter_count(f: usize) -> Result<()> {
    if FILTER_COUNTS.contains(&f) {
        Ok(())
    } else {
        Err(Error::InvalidFilterCount(f))
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Zero-initialised network for a 4x4 pattern.
    pub fn zeros(pattern: MosaicPattern, filter_count: usize) -> Result<Self> {
        check_filter_count(filter_count)?;
        if pattern.side() != 4 {
            return Err(Error::InvalidPattern(format!(
                "the network supports 4x4 patterns only, got {0}x{0}",
                pattern.side()
            )));
        }
        let (l, n) = (pattern.bands(), pattern.side());
        let res = (0..RESBLOCKS)
            .map(|_| {
                Ok(ResBlock { conv1: ConvSpec::new(l, l, (3, 3), 1, 1)?, conv2: ConvSpec::new(l, l, (3, 3), 1, 1)? })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            m2c: ConvSpec::new(1, l, (n, n), n, 0)?,
            res,
            deconv1: DeconvSpec::new(2 * l, filter_count, (8, 8), 2, 3)?,
            deconv2: DeconvSpec::new(filter_count, l, (8, 8), 2, 3)?,
            meta: ModelMeta { pattern, filter_count, provenance: Provenance::default() },
        })
    }

    pub fn filter_count(&self) -> usize {
        self.meta.filter_count
    }

    pub fn pattern(&self) -> &MosaicPattern {
        &self.meta.pattern
    }

    /// Parameter names and shapes in declaration order.
    pub fn layout(&self) -> Vec<ParamInfo> {
        let conv = |name: &str, c: &ConvSpec<T>| {
            [
                ParamInfo {
                    name: format!("{name}.weight"),
                    shape: vec![c.out_channels, c.in_channels, c.kernel.0, c.kernel.1],
                },
                ParamInfo { name: format!("{name}.bias"), shape: vec![c.out_channels] },
            ]
        };
        let deconv = |name: &str, c: &DeconvSpec<T>| {
            [
                ParamInfo {
                    name: format!("{name}.weight"),
                    shape: vec![c.in_channels, c.out_channels, c.kernel.0, c.kernel.1],
                },
                ParamInfo { name: format!("{name}.bias"), shape: vec![c.out_channels] },
            ]
        };
        let mut out = conv("m2c", &self.m2c).to_vec();
        for (i, b) in self.res.iter().enumerate() {
            out.extend(conv(&format!("res{i}.conv1"), &b.conv1));
            out.extend(conv(&format!("res{i}.conv2"), &b.conv2));
        }
        out.extend(deconv("deconv1", &self.deconv1));
        out.extend(deconv("deconv2", &self.deconv2));
        out
    }

    pub fn blocks(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = vec![&self.m2c.weight, &self.m2c.bias];
        for b in &self.res {
            v.extend([&b.conv1.weight[..], &b.conv1.bias, &b.conv2.weight, &b.conv2.bias]);
        }
        v.extend([&self.deconv1.weight[..], &self.deconv1.bias, &self.deconv2.weight, &self.deconv2.bias]);
        v
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut v = vec![&mut self.m2c.weight, &mut self.m2c.bias];
        for b in &mut self.res {
            v.extend([&mut b.conv1.weight, &mut b.conv1.bias, &mut b.conv2.weight, &mut b.conv2.bias]);
        }
        v.extend([&mut self.deconv1.weight, &mut self.deconv1.bias, &mut self.deconv2.weight, &mut self.deconv2.bias]);
        v
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    /// All parameters concatenated in declaration order.
    pub fn flatten(&self) -> Vec<T> {
        self.blocks().concat()
    }

    pub fn set_flat(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.parameter_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} parameters",
                flat.len(),
                self.parameter_count()
            )));
        }
        let mut off = 0;
        for b in self.blocks_mut() {
            let n = b.len();
            b.copy_from_slice(&flat[off..off + n]);
            off += n;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut out = ModelParams::<U>::zeros(self.meta.pattern.clone(), self.meta.filter_count)
            .expect("shape already validated");
        out.set_flat(&self.flatten().iter().map(|v| U::of(v.f64())).collect::<Vec<_>>())
            .expect("same layout");
        out.meta = self.meta.clone();
        out
    }

    fn validate(&self) -> Result<()> {
        let reference = Self::zeros(self.meta.pattern.clone(), self.meta.filter_count)?;
        if reference.layout() != self.layout() {
            return Err(Error::ShapeMismatch("parameter layout differs from the architecture".into()));
        }
        self.m2c.validate()?;
        for b in &self.res {
            b.conv1.validate()?;
            b.conv2.validate()?;
        }
        self.deconv1.validate()?;
        self.deconv2.validate()
    }
}

/// Uniform fan-in initialisation: weights `U(-a, a)` with `a = 1/sqrt(fan_in)`,
/// biases zero, drawn layer by layer in declaration order.
pub fn init_params<T: Scalar>(seed: u64, filter_count: usize, pattern: MosaicPattern) -> Result<ModelParams<T>> {
    let mut p = ModelParams::<T>::zeros(pattern, filter_count)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |w: &mut [T], fan_in: usize| {
        let a = 1.0 / (fan_in as f64).sqrt();
        w.iter_mut().for_each(|v| *v = T::of(rng.random_range(-a..a)));
    };
    let fan = p.m2c.fan_in();
    fill(&mut p.m2c.weight, fan);
    for b in &mut p.res {
        let (f1, f2) = (b.conv1.fan_in(), b.conv2.fan_in());
        fill(&mut b.conv1.weight, f1);
        fill(&mut b.conv2.weight, f2);
    }
    let (f1, f2) = (p.deconv1.fan_in(), p.deconv2.fan_in());
    fill(&mut p.deconv1.weight, f1);
    fill(&mut p.deconv2.weight, f2);
    p.meta.provenance.seed = seed;
    Ok(p)
}

/// Every intermediate activation of one forward pass, kept for backward.
pub struct ForwardTrace<T> {
    pub input: Tensor<T>,
    /// Learned mosaic-to-cube conv output.
    pub learned_m2c: Tensor<T>,
    /// Input of each resblock; entry 0 is the index-resampled cube.
    pub block_inputs: Vec<Tensor<T>>,
    /// `ReLU(conv1(x))` inside each resblock.
    pub block_hidden: Vec<Tensor<T>>,
    pub block_output: Tensor<T>,
    pub features: Tensor<T>,
    pub upsampled: Tensor<T>,
    pub output: Tensor<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    /// `(stage, shape)` pairs in execution order.
    pub fn shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![
            ("input", self.input.shape().to_vec()),
            ("learned_m2c", self.learned_m2c.shape().to_vec()),
            ("index_m2c", self.block_inputs[0].shape().to_vec()),
            ("resblocks", self.block_output.shape().to_vec()),
            ("features", self.features.shape().to_vec()),
            ("deconv1", self.upsampled.shape().to_vec()),
            ("deconv2", self.output.shape().to_vec()),
        ]
    }
}

/// Gradients of every parameter block, in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads<T> {
    pub blocks: Vec<Vec<T>>,
}

impl<T: Scalar> ParamGrads<T> {
    pub fn zeros_like(p: &ModelParams<T>) -> Self {
        Self { blocks: p.blocks().iter().map(|b| vec![T::zero(); b.len()]).collect() }
    }

    pub fn flatten(&self) -> Vec<T> {
        self.blocks.concat()
    }

    /// Euclidean norm accumulated in `f64`.
    pub fn global_norm(&self) -> f64 {
        self.blocks.iter().flatten().map(|v| v.f64() * v.f64()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        let s = T::of(s);
        self.blocks.iter_mut().flatten().for_each(|v| *v *= s);
    }
}

/// Index-map mosaic-to-cube of every sample in `[N, 1, H, W]`.
pub fn m2c_batch<T: Scalar>(x: &Tensor<T>, pattern: &MosaicPattern) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if c != 1 {
        return Err(Error::ShapeMismatch(format!("mosaic batch must have 1 channel, got {c}")));
    }
    let side = pattern.side();
    if h % side != 0 || w % side != 0 || h == 0 || w == 0 {
        return Err(Error::DimensionNotDivisible { width: w, height: h, cell: side });
    }
    let mut out = Vec::with_capacity(x.numel());
    for sample in x.data().chunks_exact(h * w) {
        let mi = MosaicImage::new(w, h, sample.to_vec(), pattern.clone())?;
        out.extend(m2c_resample(&mi)?.into_data());
    }
    Tensor::new(vec![n, pattern.bands(), h / side, w / side], out)
}

fn check_input<T: Scalar>(x: &Tensor<T>) -> Result<()> {
    let (_, c, h, w) = x.dims4()?;
    if c != 1 {
        return Err(Error::ShapeMismatch(format!("network input must have 1 channel, got {c}")));
    }
    if h % 4 != 0 || w % 4 != 0 || h == 0 || w == 0 {
        return Err(Error::DimensionNotDivisible { width: w, height: h, cell: 4 });
    }
    x.check_finite("network input")
}

impl<T: Scalar> ModelParams<T> {
    /// Forward pass keeping every activation.
    pub fn forward_traced(&self, x: &Tensor<T>) -> Result<ForwardTrace<T>> {
        check_input(x)?;
        let x = if x.shape().len() == 3 {
            let (n, c, h, w) = x.dims4()?;
            Tensor::new(vec![n, c, h, w], x.data().to_vec())?
        } else {
            x.clone()
        };
        let learned_m2c = conv2d_forward(&x, &self.m2c)?;
        let mut block_inputs = vec![m2c_batch(&x, &self.meta.pattern)?];
        let mut block_hidden = Vec::with_capacity(self.res.len());
        for b in &self.res {
            let input = block_inputs.last().expect("seeded");
            let mut hidden = conv2d_forward(input, &b.conv1)?;
            relu_in_place(&mut hidden);
            let mut out = conv2d_forward(&hidden, &b.conv2)?;
            out.data_mut().iter_mut().zip(input.data()).for_each(|(o, &i)| *o += i);
            relu_in_place(&mut out);
            block_hidden.push(hidden);
            block_inputs.push(out);
        }
        let block_output = block_inputs.pop().expect("four blocks");
        let features = concat_channels(&learned_m2c, &block_output)?;
        let mut upsampled = deconv2d_forward(&features, &self.deconv1)?;
        relu_in_place(&mut upsampled);
        let mut output = deconv2d_forward(&upsampled, &self.deconv2)?;
        relu_in_place(&mut output);
        output.check_finite("network output")?;
        Ok(ForwardTrace { input: x, learned_m2c, block_inputs, block_hidden, block_output, features, upsampled, output })
    }

    /// `[N, 1, H, W] -> [N, 16, H, W]`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_traced(x)?.output)
    }

    /// Parameter gradients given `dL/d output`.
    pub fn backward(&self, trace: &ForwardTrace<T>, grad_output: &Tensor<T>) -> Result<ParamGrads<T>> {
        if grad_output.shape() != trace.output.shape() {
            return Err(Error::ShapeMismatch("grad_output differs from the network output".into()));
        }
        let g = relu_backward(grad_output, &trace.output)?;
        let d2 = deconv2d_backward(&g, &trace.upsampled, &self.deconv2)?;
        let g = relu_backward(&d2.grad_x, &trace.upsampled)?;
        let d1 = deconv2d_backward(&g, &trace.features, &self.deconv1)?;
        let (g_learned, mut g) = concat_backward(&d1.grad_x, self.m2c.out_channels)?;

        let mut res_grads = Vec::with_capacity(self.res.len());
        for (k, b) in self.res.iter().enumerate().rev() {
            let out = if k + 1 == self.res.len() { &trace.block_output } else { &trace.block_inputs[k + 1] };
            let g_pre = relu_backward(&g, out)?;
            let c2 = tensor::conv2d_backward(&g_pre, &trace.block_hidden[k], &b.conv2)?;
            let g_hidden = relu_backward(&c2.grad_x, &trace.block_hidden[k])?;
            let c1 = tensor::conv2d_backward(&g_hidden, &trace.block_inputs[k], &b.conv1)?;
            g = tensor::add(&g_pre, &c1.grad_x)?;
            res_grads.push([c1.grad_w, c1.grad_b, c2.grad_w, c2.grad_b]);
        }
        let (_, m2c_w, m2c_b) =
            tensor::conv2d_backward_impl(&g_learned, &trace.input, &self.m2c, false)?;

        let mut blocks = vec![m2c_w, m2c_b];
        for r in res_grads.into_iter().rev() {
            blocks.extend(r);
        }
        blocks.extend([d1.grad_w, d1.grad_b, d2.grad_w, d2.grad_b]);
        let grads = ParamGrads { blocks };
        let layout = self.layout();
        for (b, info) in grads.blocks.iter().zip(&layout) {
            if let Some(i) = b.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("{}[{i}]", info.name)));
            }
        }
        Ok(grads)
    }

    /// Demosaics a whole mosaic of any 4-aligned size, processing it in
    /// overlapping tiles so memory stays bounded.
    pub fn demosaic(&self, mi: &MosaicImage<T>) -> Result<HyperCube<T>> {
        mi.require_aligned()?;
        if mi.pattern() != self.pattern() {
            return Err(Error::InvalidPattern("mosaic pattern differs from the network's".into()));
        }
        let (w, h, l) = (mi.width(), mi.height(), self.pattern().bands());
        let mut out = HyperCube::zeros(l, w, h, self.pattern().wavelengths_nm().to_vec())?;
        for (y0, y1, cy0, cy1) in tiles(h) {
            for (x0, x1, cx0, cx1) in tiles(w) {
                let (tw, th) = (x1 - x0, y1 - y0);
                let mut data = Vec::with_capacity(tw * th);
                for y in y0..y1 {
                    data.extend_from_slice(&mi.data()[y * w + x0..y * w + x1]);
                }
                let pred = self.forward(&Tensor::new(vec![1, 1, th, tw], data)?)?;
                for b in 0..l {
                    let plane = &pred.data()[b * tw * th..(b + 1) * tw * th];
                    for y in cy0..cy1 {
                        for x in cx0..cx1 {
                            out.set(b, x, y, plane[(y - y0) * tw + (x - x0)]);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

const TILE_CORE: usize = 256;
/// Exceeds the network's receptive radius (11 pattern cells).
const TILE_HALO: usize = 48;

/// `(start, end, core_start, core_end)` per tile along one axis.
fn tiles(len: usize) -> Vec<(usize, usize, usize, usize)> {
    if len <= TILE_CORE + 2 * TILE_HALO {
        return vec![(0, len, 0, len)];
    }
    (0..len)
        .step_by(TILE_CORE)
        .map(|c0| {
            let c1 = (c0 + TILE_CORE).min(len);
            (c0.saturating_sub(TILE_HALO), (c1 + TILE_HALO).min(len), c0, c1)
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    format_version: u32,
    meta: ModelMeta,
    parameters: Vec<ParamInfo>,
    parameter_count: usize,
}

/// Versioned binary checkpoint: magic, `u32` version, `u64` metadata length,
/// metadata JSON, then every parameter block as little-endian `f32`.
pub fn checkpoint_bytes<T: Scalar>(params: &ModelParams<T>) -> Result<Vec<u8>> {
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_VERSION,
        meta: params.meta.clone(),
        parameters: params.layout(),
        parameter_count: params.parameter_count(),
    };
    let json = serde_json::to_vec(&meta)?;
    let mut out = Vec::with_capacity(24 + json.len() + 4 * params.parameter_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in params.blocks().into_iter().flatten() {
        out.extend_from_slice(&(v.f64() as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn save_checkpoint<T: Scalar>(params: &ModelParams<T>, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_bytes(params)?)?;
    Ok(())
}

pub fn parse_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<ModelParams<T>> {
    let corrupt = |m: &str| Error::CorruptCheckpoint(m.to_owned());
    if bytes.len() < 20 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(corrupt("missing magic header"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch(format!("format version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let json_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let json = bytes.get(20..20usize.saturating_add(json_len)).ok_or_else(|| corrupt("truncated metadata"))?;
    let meta: CheckpointMeta =
        serde_json::from_slice(json).map_err(|e| Error::CorruptCheckpoint(format!("metadata: {e}")))?;
    let mut params = ModelParams::<T>::zeros(meta.meta.pattern.clone(), meta.meta.filter_count)?;
    if params.layout() != meta.parameters || params.parameter_count() != meta.parameter_count {
        return Err(Error::CorruptCheckpoint("parameter layout does not match the architecture".into()));
    }
    let body = &bytes[20 + json_len..];
    if body.len() != 4 * meta.parameter_count {
        return Err(corrupt(&format!("{} parameter bytes, expected {}", body.len(), 4 * meta.parameter_count)));
    }
    let flat: Vec<T> = body
        .chunks_exact(4)
        .map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(corrupt("non-finite parameter"));
    }
    params.set_flat(&flat)?;
    params.meta = meta.meta;
    params.validate()?;
    Ok(params)
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<ModelParams<T>> {
    parse_checkpoint(&fs::read(path)?)
}

/// Loads a checkpoint and requires a specific first-deconv filter count.
pub fn load_checkpoint_expecting<T: Scalar>(path: &Path, filter_count: usize) -> Result<ModelParams<T>> {
    let p = load_checkpoint::<T>(path)?;
    if p.filter_count() != filter_count {
        return Err(Error::VersionMismatch(format!(
            "checkpoint has {} filters, expected {filter_count}",
            p.filter_count()
        )));
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, relative_error};
    use crate::tensor::mse_loss;
    use rand::seq::index::sample;

    fn pat() -> MosaicPattern {
        MosaicPattern::default_4x4()
    }

    fn random_input(seed: u64, n: usize, h: usize, w: usize) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(vec![n, 1, h, w], |_| rng.random()).unwrap()
    }

    #[test]
    fn parameter_counts() {
        let p = ModelParams::<f32>::zeros(pat(), 128).unwrap();
        assert_eq!(p.parameter_count(), 272 + 8 * 2320 + (32 * 128 * 64 + 128) + (128 * 16 * 64 + 16));
        let p = ModelParams::<f32>::zeros(pat(), 32).unwrap();
        assert_eq!(p.parameter_count(), 117_184);
        assert_eq!(p.layout().len(), 2 + 16 + 4);
        assert_eq!(p.layout()[0].name, "m2c.weight");
        assert!(matches!(ModelParams::<f32>::zeros(pat(), 64), Err(Error::InvalidFilterCount(64))));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = init_params::<f32>(5, 32, pat()).unwrap();
        let b = init_params::<f32>(5, 32, pat()).unwrap();
        let c = init_params::<f32>(6, 32, pat()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.flatten(), c.flatten());
        assert_eq!(a.m2c.fan_in(), 16);
        assert!(a.m2c.weight.iter().all(|w| w.abs() <= 0.25));
        // the draw actually spans the interval
        assert!(a.m2c.weight.iter().any(|w| w.abs() > 0.2));
        for (w, fan) in [(&a.res[0].conv1.weight, 144usize), (&a.deconv1.weight, 32 * 64), (&a.deconv2.weight, 32 * 64)] {
            let bound = 1.0 / (fan as f32).sqrt();
            assert!(w.iter().all(|v| v.abs() <= bound));
        }
        assert!(a.blocks().iter().skip(1).step_by(2).all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn shapes_through_the_network() {
        let p = init_params::<f32>(1, 128, pat()).unwrap();
        let x = random_input(1, 1, 100, 100).cast::<f32>();
        let t = p.forward_traced(&x).unwrap();
        let shapes = t.shapes();
        assert_eq!(shapes[1].1, vec![1, 16, 25, 25]);
        assert_eq!(shapes[2].1, vec![1, 16, 25, 25]);
        assert_eq!(shapes[4].1, vec![1, 32, 25, 25]);
        assert_eq!(shapes[5].1, vec![1, 128, 50, 50]);
        assert_eq!(shapes[6].1, vec![1, 16, 100, 100]);
        let bad = Tensor::<f32>::zeros(vec![1, 1, 10, 12]);
        assert!(matches!(p.forward(&bad), Err(Error::DimensionNotDivisible { .. })));
    }

    #[test]
    fn zero_input_zero_output() {
        let p = init_params::<f32>(2, 32, pat()).unwrap();
        let y = p.forward(&Tensor::zeros(vec![2, 1, 16, 16])).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_nonnegative_and_shape_contract() {
        let p = init_params::<f32>(3, 32, pat()).unwrap();
        for (h, w) in [(4, 4), (8, 20), (36, 16), (64, 64)] {
            let y = p.forward(&random_input(h as u64, 1, h, w).cast()).unwrap();
            assert_eq!(y.shape(), &[1, 16, h, w]);
            assert!(y.data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn index_path_alone_carries_signal() {
        let mut p = init_params::<f64>(4, 32, pat()).unwrap();
        p.m2c.weight.iter_mut().for_each(|w| *w = 0.0);
        let a = p.forward(&random_input(1, 1, 16, 16)).unwrap();
        let b = p.forward(&random_input(2, 1, 16, 16)).unwrap();
        assert!(a.data().iter().any(|&v| v > 0.0));
        assert_ne!(a.data(), b.data());
    }

    #[test]
    fn whole_network_gradient_check() {
        // Bias steps move many ReLU pre-activations at once, so a small step
        // keeps the difference quotient off the kinks.
        for seed in 0..20 {
            let mut p = init_params::<f64>(seed, 32, pat()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 50);
            for b in p.blocks_mut().into_iter().skip(1).step_by(2) {
                b.iter_mut().for_each(|v| *v = rng.random_range(0.0..0.05));
            }
            let x = random_input(seed, 1, 16, 16);
            let target = Tensor::from_fn(vec![1, 16, 16, 16], |_| rng.random_range(0.0..0.2)).unwrap();
            let trace = p.forward_traced(&x).unwrap();
            let g = p.backward(&trace, &tensor::mse_backward(&trace.output, &target).unwrap()).unwrap();
            let analytic = g.flatten();
            let flat = p.flatten();
            let idx: Vec<usize> = sample(&mut rng, flat.len(), 120).into_vec();
            let sub: Vec<f64> = idx.iter().map(|&i| flat[i]).collect();
            let numeric = central_difference(&sub, 1e-5, |v| {
                let mut q = p.clone();
                let mut f = flat.clone();
                for (&i, &val) in idx.iter().zip(v) {
                    f[i] = val;
                }
                q.set_flat(&f).unwrap();
                mse_loss(&q.forward(&x).unwrap(), &target).unwrap()
            });
            let a: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
            let err = relative_error(&a, &numeric);
            assert!(err < 5e-3, "seed {seed}: relative error {err}");
        }
    }

    #[test]
    fn checkpoint_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut p = init_params::<f32>(9, 32, pat()).unwrap();
        p.meta.provenance.epochs = 12;
        save_checkpoint(&p, &path).unwrap();
        let back = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!(back, p);
        assert_eq!(checkpoint_bytes(&back).unwrap(), fs::read(&path).unwrap());

        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(load_checkpoint::<f32>(&path), Err(Error::CorruptCheckpoint(_))));
        fs::write(&path, &bytes[..30]).unwrap();
        assert!(matches!(load_checkpoint::<f32>(&path), Err(Error::CorruptCheckpoint(_))));
        fs::write(&path, b"garbage").unwrap();
        assert!(matches!(load_checkpoint::<f32>(&path), Err(Error::CorruptCheckpoint(_))));
        let mut v2 = bytes.clone();
        v2[8] = 2;
        fs::write(&path, &v2).unwrap();
        assert!(matches!(load_checkpoint::<f32>(&path), Err(Error::VersionMismatch(_))));

        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint_expecting::<f32>(&path, 128), Err(Error::VersionMismatch(_))));
        assert!(load_checkpoint_expecting::<f32>(&path, 32).is_ok());
    }

    #[test]
    fn tiled_demosaic_matches_single_pass() {
        let p = init_params::<f64>(11, 32, pat()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mi = MosaicImage::from_fn(360, 40, pat(), |_, _| rng.random()).unwrap();
        assert!(tiles(360).len() > 1);
        let tiled = p.demosaic(&mi).unwrap();
        let whole = p.forward(&Tensor::new(vec![1, 1, 40, 360], mi.data().to_vec()).unwrap()).unwrap();
        for (a, b) in tiled.data().iter().zip(whole.data()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
