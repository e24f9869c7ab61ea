use crate::error::{Error, Result};
use crate::scalar::{gemm, Scalar};

use super::Tensor;

/// Output length of a strided convolution, `floor((n + 2p - k) / s) + 1`.
pub fn conv_out_len(n: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    (n + 2 * padding).checked_sub(kernel).map(|span| span / stride + 1)
}

/// Output length of a transposed convolution, `(n - 1) s - 2p + k`.
pub fn deconv_out_len(n: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    if n == 0 {
        return None;
    }
    ((n - 1) * stride + kernel).checked_sub(2 * padding).filter(|&v| v > 0)
}

/// Convolution layer: weights `[out, in, kh, kw]`, bias `[out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvSpec<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

/// Transposed convolution layer: weights `[in, out, kh, kw]`, bias `[out]`.
///
/// The weight layout makes this layer the exact adjoint (input gradient) of
/// a [`ConvSpec`] mapping `out -> in` channels with the same weights.
#[derive(Clone, Debug, PartialEq)]
pub struct DeconvSpec<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

fn check_geometry(kernel: (usize, usize), stride: usize, chans: (usize, usize)) -> Result<()> {
    if kernel.0 == 0 || kernel.1 == 0 || stride == 0 || chans.0 == 0 || chans.1 == 0 {
        return Err(Error::InvalidConfig("kernel, stride and channel counts must be >= 1".into()));
    }
    Ok(())
}

macro_rules! layer_common {
    ($name:ident) => {
        impl<T: Scalar> $name<T> {
            /// Zero-initialised layer.
            pub fn new(
                in_channels: usize,
                out_channels: usize,
                kernel: (usize, usize),
                stride: usize,
                padding: usize,
            ) -> Result<Self> {
                check_geometry(kernel, stride, (in_channels, out_channels))?;
                Ok(Self {
                    in_channels,
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    weight: vec![T::zero(); in_channels * out_channels * kernel.0 * kernel.1],
                    bias: vec![T::zero(); out_channels],
                })
            }

            pub fn validate(&self) -> Result<()> {
                check_geometry(self.kernel, self.stride, (self.in_channels, self.out_channels))?;
                let wlen = self.in_channels * self.out_channels * self.kernel.0 * self.kernel.1;
                if self.weight.len() != wlen || self.bias.len() != self.out_channels {
                    return Err(Error::ShapeMismatch(format!(
                        "{} weights {} / bias {} do not match geometry",
                        stringify!($name),
                        self.weight.len(),
                        self.bias.len()
                    )));
                }
                Ok(())
            }

            /// Receptive field of one output channel, `in * kh * kw`.
            pub fn fan_in(&self) -> usize {
                self.in_channels * self.kernel.0 * self.kernel.1
            }

            pub fn parameter_count(&self) -> usize {
                self.weight.len() + self.bias.len()
            }
        }
    };
}

layer_common!(ConvSpec);
layer_common!(DeconvSpec);

impl<T: Scalar> ConvSpec<T> {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        match (
            conv_out_len(h, self.kernel.0, self.stride, self.padding),
            conv_out_len(w, self.kernel.1, self.stride, self.padding),
        ) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::ShapeMismatch(format!("input {h}x{w} smaller than kernel {:?}", self.kernel))),
        }
    }
}

impl<T: Scalar> DeconvSpec<T> {
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        match (
            deconv_out_len(h, self.kernel.0, self.stride, self.padding),
            deconv_out_len(w, self.kernel.1, self.stride, self.padding),
        ) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(Error::ShapeMismatch(format!("transposed conv of {h}x{w} has no positive output"))),
        }
    }
}

/// Sliding-window geometry shared by the lowering helpers.
#[derive(Clone, Copy)]
struct Window {
    channels: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad: usize,
    oh: usize,
    ow: usize,
}

impl Window {
    fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    /// Valid output range `lo..hi` along one axis for kernel tap `k`.
    fn span(&self, k: usize, n: usize, on: usize) -> (usize, usize) {
        // o*s + k - p in [0, n)
        let lo = self.pad.saturating_sub(k).div_ceil(self.stride);
        let hi = if n + self.pad > k { ((n + self.pad - k - 1) / self.stride + 1).min(on) } else { 0 };
        (lo.min(hi), hi)
    }
}

/// Lowers `img [C, H, W]` into `col [C*kh*kw, oh*ow]`.
fn im2col<T: Scalar>(img: &[T], g: Window, col: &mut [T]) {
    let ncols = g.cols();
    for c in 0..g.channels {
        let plane = &img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            let (ylo, yhi) = g.span(ky, g.h, g.oh);
            for kx in 0..g.kw {
                let (xlo, xhi) = g.span(kx, g.w, g.ow);
                let row = &mut col[((c * g.kh + ky) * g.kw + kx) * ncols..][..ncols];
                row.iter_mut().for_each(|v| *v = T::zero());
                for oy in ylo..yhi {
                    let iy = oy * g.stride + ky - g.pad;
                    let src = &plane[iy * g.w..(iy + 1) * g.w];
                    let dst = &mut row[oy * g.ow..(oy + 1) * g.ow];
                    if xlo >= xhi {
                        continue;
                    }
                    if g.stride == 1 {
                        let ix0 = xlo + kx - g.pad;
                        dst[xlo..xhi].copy_from_slice(&src[ix0..ix0 + (xhi - xlo)]);
                    } else {
                        for ox in xlo..xhi {
                            dst[ox] = src[ox * g.stride + kx - g.pad];
                        }
                    }
                }
            }
        }
    }
}

/// Scatters `col [C*kh*kw, oh*ow]` back onto `img [C, H, W]`, accumulating.
fn col2im<T: Scalar>(col: &[T], g: Window, img: &mut [T]) {
    let ncols = g.cols();
    for c in 0..g.channels {
        let plane = &mut img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ky in 0..g.kh {
            let (ylo, yhi) = g.span(ky, g.h, g.oh);
            for kx in 0..g.kw {
                let (xlo, xhi) = g.span(kx, g.w, g.ow);
                let row = &col[((c * g.kh + ky) * g.kw + kx) * ncols..][..ncols];
                for oy in ylo..yhi {
                    let iy = oy * g.stride + ky - g.pad;
                    let dst = &mut plane[iy * g.w..(iy + 1) * g.w];
                    let src = &row[oy * g.ow..(oy + 1) * g.ow];
                    for ox in xlo..xhi {
                        dst[ox * g.stride + kx - g.pad] += src[ox];
                    }
                }
            }
        }
    }
}

fn add_bias<T: Scalar>(out: &mut [T], bias: &[T], plane: usize) {
    for (chunk, &b) in out.chunks_exact_mut(plane).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

/// Per-channel sums of `g [C, P]` added into `acc`, reduced in `f64`.
fn add_channel_sums<T: Scalar>(g: &[T], plane: usize, acc: &mut [T]) {
    for (chunk, a) in g.chunks_exact(plane).zip(acc.iter_mut()) {
        *a += T::of(chunk.iter().map(|v| v.f64()).sum::<f64>());
    }
}

pub struct ConvGrads<T> {
    pub grad_x: Tensor<T>,
    pub grad_w: Vec<T>,
    pub grad_b: Vec<T>,
}

fn conv_window<T: Scalar>(spec: &ConvSpec<T>, x: &Tensor<T>) -> Result<(usize, Window)> {
    spec.validate()?;
    let (n, c, h, w) = x.dims4()?;
    if c != spec.in_channels {
        return Err(Error::ShapeMismatch(format!("conv expects {} input channels, got {c}", spec.in_channels)));
    }
    let (oh, ow) = spec.output_hw(h, w)?;
    let g = Window { channels: c, h, w, kh: spec.kernel.0, kw: spec.kernel.1, stride: spec.stride, pad: spec.padding, oh, ow };
    Ok((n, g))
}

pub fn conv2d_forward<T: Scalar>(x: &Tensor<T>, spec: &ConvSpec<T>) -> Result<Tensor<T>> {
    let (n, g) = conv_window(spec, x)?;
    let (o, k, p) = (spec.out_channels, g.rows(), g.cols());
    let mut out = vec![T::zero(); n * o * p];
    let mut col = vec![T::zero(); k * p];
    let in_len = g.channels * g.h * g.w;
    for (xi, yi) in x.data().chunks_exact(in_len).zip(out.chunks_exact_mut(o * p)) {
        im2col(xi, g, &mut col);
        gemm(o, k, p, &spec.weight, false, &col, false, T::zero(), yi);
        add_bias(yi, &spec.bias, p);
    }
    Tensor::new(vec![n, o, g.oh, g.ow], out)
}

pub fn conv2d_backward<T: Scalar>(grad_out: &Tensor<T>, x: &Tensor<T>, spec: &ConvSpec<T>) -> Result<ConvGrads<T>> {
    let (gx, grad_w, grad_b) = conv2d_backward_impl(grad_out, x, spec, true)?;
    Ok(ConvGrads { grad_x: gx.expect("requested"), grad_w, grad_b })
}

type Grads<T> = (Option<Tensor<T>>, Vec<T>, Vec<T>);

pub(crate) fn conv2d_backward_impl<T: Scalar>(
    grad_out: &Tensor<T>,
    x: &Tensor<T>,
    spec: &ConvSpec<T>,
    want_input_grad: bool,
) -> Result<Grads<T>> {
    let (n, g) = conv_window(spec, x)?;
    let (o, k, p) = (spec.out_channels, g.rows(), g.cols());
    if grad_out.shape() != [n, o, g.oh, g.ow] {
        return Err(Error::ShapeMismatch(format!(
            "conv grad_out {:?} differs from output [{n}, {o}, {}, {}]",
            grad_out.shape(),
            g.oh,
            g.ow
        )));
    }
    let in_len = g.channels * g.h * g.w;
    let mut grad_w = vec![T::zero(); spec.weight.len()];
    let mut grad_b = vec![T::zero(); o];
    let mut grad_x = want_input_grad.then(|| vec![T::zero(); x.numel()]);
    let mut col = vec![T::zero(); k * p];
    for i in 0..n {
        let xi = &x.data()[i * in_len..(i + 1) * in_len];
        let gi = &grad_out.data()[i * o * p..(i + 1) * o * p];
        im2col(xi, g, &mut col);
        gemm(o, p, k, gi, false, &col, true, T::one(), &mut grad_w);
        add_channel_sums(gi, p, &mut grad_b);
        if let Some(gx) = grad_x.as_mut() {
            gemm(k, o, p, &spec.weight, true, gi, false, T::zero(), &mut col);
            col2im(&col, g, &mut gx[i * in_len..(i + 1) * in_len]);
        }
    }
    let grad_x = grad_x.map(|d| Tensor::new(x.shape().to_vec(), d)).transpose()?;
    Ok((grad_x, grad_w, grad_b))
}

fn deconv_window<T: Scalar>(spec: &DeconvSpec<T>, x: &Tensor<T>) -> Result<(usize, Window)> {
    spec.validate()?;
    let (n, c, h, w) = x.dims4()?;
    if c != spec.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "transposed conv expects {} input channels, got {c}",
            spec.in_channels
        )));
    }
    let (oh, ow) = spec.output_hw(h, w)?;
    // the lowering runs over the *output* image, producing one column per input pixel
    let g = Window {
        channels: spec.out_channels,
        h: oh,
        w: ow,
        kh: spec.kernel.0,
        kw: spec.kernel.1,
        stride: spec.stride,
        pad: spec.padding,
        oh: h,
        ow: w,
    };
    Ok((n, g))
}

pub fn deconv2d_forward<T: Scalar>(x: &Tensor<T>, spec: &DeconvSpec<T>) -> Result<Tensor<T>> {
    let (n, g) = deconv_window(spec, x)?;
    let (ci, k, p) = (spec.in_channels, g.rows(), g.cols());
    let out_len = g.channels * g.h * g.w;
    let mut out = vec![T::zero(); n * out_len];
    let mut col = vec![T::zero(); k * p];
    for (xi, yi) in x.data().chunks_exact(ci * p).zip(out.chunks_exact_mut(out_len)) {
        gemm(k, ci, p, &spec.weight, true, xi, false, T::zero(), &mut col);
        col2im(&col, g, yi);
        add_bias(yi, &spec.bias, g.h * g.w);
    }
    Tensor::new(vec![n, g.channels, g.h, g.w], out)
}

pub fn deconv2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    x: &Tensor<T>,
    spec: &DeconvSpec<T>,
) -> Result<ConvGrads<T>> {
    let (n, g) = deconv_window(spec, x)?;
    let (ci, k, p) = (spec.in_channels, g.rows(), g.cols());
    let out_len = g.channels * g.h * g.w;
    if grad_out.shape() != [n, g.channels, g.h, g.w] {
        return Err(Error::ShapeMismatch(format!(
            "transposed conv grad_out {:?} differs from output [{n}, {}, {}, {}]",
            grad_out.shape(),
            g.channels,
            g.h,
            g.w
        )));
    }
    let mut grad_w = vec![T::zero(); spec.weight.len()];
    let mut grad_b = vec![T::zero(); spec.out_channels];
    let mut grad_x = vec![T::zero(); x.numel()];
    let mut col = vec![T::zero(); k * p];
    for i in 0..n {
        let gi = &grad_out.data()[i * out_len..(i + 1) * out_len];
        let xi = &x.data()[i * ci * p..(i + 1) * ci * p];
        im2col(gi, g, &mut col);
        gemm(ci, k, p, &spec.weight, false, &col, false, T::zero(), &mut grad_x[i * ci * p..(i + 1) * ci * p]);
        gemm(ci, p, k, xi, false, &col, true, T::one(), &mut grad_w);
        add_channel_sums(gi, g.h * g.w, &mut grad_b);
    }
    Ok(ConvGrads { grad_x: Tensor::new(x.shape().to_vec(), grad_x)?, grad_w, grad_b })
}
