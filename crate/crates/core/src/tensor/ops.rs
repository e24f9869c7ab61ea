use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::Tensor;

fn same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, op: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{op}: {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    y.set_requires_grad(false);
    relu_in_place(&mut y);
    y
}

pub fn relu_in_place<T: Scalar>(x: &mut Tensor<T>) {
    x.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
}

/// Passes `grad_out` where `x > 0`. `x` may be the ReLU input or its output;
/// both give the same mask (the subgradient at 0 is 0).
pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(grad_out, x, "relu_backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(x.data())
        .map(|(&g, &v)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(a, b, "add")?;
    Tensor::new(a.shape().to_vec(), a.data().iter().zip(b.data()).map(|(&x, &y)| x + y).collect())
}

/// Stacks `a [N, Ca, H, W]` and `b [N, Cb, H, W]` along the channel axis.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, ca, h, w) = a.dims4()?;
    let (nb, cb, hb, wb) = b.dims4()?;
    if (n, h, w) != (nb, hb, wb) {
        return Err(Error::ShapeMismatch(format!("concat: {:?} vs {:?}", a.shape(), b.shape())));
    }
    let (la, lb) = (ca * h * w, cb * h * w);
    let mut out = Vec::with_capacity(a.numel() + b.numel());
    for i in 0..n {
        out.extend_from_slice(&a.data()[i * la..(i + 1) * la]);
        out.extend_from_slice(&b.data()[i * lb..(i + 1) * lb]);
    }
    Tensor::new(vec![n, ca + cb, h, w], out)
}

/// Splits a concatenated gradient back into the parts for `a` (first
/// `channels_a` channels) and `b`.
pub fn concat_backward<T: Scalar>(grad: &Tensor<T>, channels_a: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, c, h, w) = grad.dims4()?;
    if channels_a > c {
        return Err(Error::ShapeMismatch(format!("concat split at {channels_a} of {c} channels")));
    }
    let (la, lb) = (channels_a * h * w, (c - channels_a) * h * w);
    let (mut ga, mut gb) = (Vec::with_capacity(n * la), Vec::with_capacity(n * lb));
    for chunk in grad.data().chunks_exact((la + lb).max(1)).take(n) {
        ga.extend_from_slice(&chunk[..la]);
        gb.extend_from_slice(&chunk[la..]);
    }
    Ok((Tensor::new(vec![n, channels_a, h, w], ga)?, Tensor::new(vec![n, c - channels_a, h, w], gb)?))
}

/// Mean squared error over all elements, accumulated in `f64`.
pub fn mse_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<f64> {
    same_shape(pred, target, "mse_loss")?;
    if pred.numel() == 0 {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(&p, &o)| (p.f64() - o.f64()).powi(2)).sum();
    Ok(sum / pred.numel() as f64)
}

/// `d MSE / d pred = 2 (pred - target) / N`.
pub fn mse_backward<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(pred, target, "mse_backward")?;
    let scale = 2.0 / pred.numel() as f64;
    let data = pred.data().iter().zip(target.data()).map(|(&p, &o)| T::of(scale * (p.f64() - o.f64()))).collect();
    Tensor::new(pred.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::{central_difference, relative_error};
    use rand::{Rng, SeedableRng};

    fn t(shape: Vec<usize>, v: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape, v).unwrap()
    }

    #[test]
    fn relu_forward_backward() {
        let x = t(vec![3], vec![-1.0, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let x = t(vec![2], vec![-1.0, 2.0]);
        let g = t(vec![2], vec![5.0, 5.0]);
        assert_eq!(relu_backward(&g, &x).unwrap().data(), &[0.0, 5.0]);
    }

    #[test]
    fn relu_gradient_away_from_kink() {
        for seed in 0..20 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..32)
                .map(|_| {
                    let v: f64 = rng.random_range(0.01..1.0);
                    if rng.random() { v } else { -v }
                })
                .collect();
            let r: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
            let xt = t(vec![32], x.clone());
            let g = relu_backward(&t(vec![32], r.clone()), &xt).unwrap();
            let num = central_difference(&x, 1e-3, |v| {
                relu(&t(vec![32], v.to_vec())).data().iter().zip(&r).map(|(a, b)| a * b).sum()
            });
            assert!(relative_error(g.data(), &num) < 1e-4);
        }
    }

    #[test]
    fn concat_shapes_and_split() {
        let a = Tensor::<f64>::from_fn(vec![2, 16, 3, 3], |i| i as f64).unwrap();
        let b = Tensor::<f64>::from_fn(vec![2, 16, 3, 3], |i| -(i as f64)).unwrap();
        let c = concat_channels(&a, &b).unwrap();
        assert_eq!(c.shape(), &[2, 32, 3, 3]);
        assert_eq!(c.data()[16 * 9], -0.0);
        assert_eq!(c.data()[32 * 9], a.data()[16 * 9]);
        let (ga, gb) = concat_backward(&c, 16).unwrap();
        assert_eq!(ga, a);
        assert_eq!(gb, b);
        let empty = Tensor::<f64>::new(vec![2, 0, 3, 3], vec![]).unwrap();
        assert_eq!(concat_channels(&a, &empty).unwrap(), a);
        let wrong = Tensor::<f64>::zeros(vec![2, 16, 3, 4]);
        assert!(concat_channels(&a, &wrong).is_err());
    }

    #[test]
    fn add_elementwise() {
        let a = t(vec![2], vec![1.0, 2.0]);
        assert_eq!(add(&a, &a).unwrap().data(), &[2.0, 4.0]);
        assert!(add(&a, &t(vec![1], vec![1.0])).is_err());
    }

    #[test]
    fn mse_values_and_gradient() {
        let p = t(vec![2], vec![1.0, 1.0]);
        let o = t(vec![2], vec![0.0, 0.0]);
        assert_eq!(mse_loss(&p, &p).unwrap(), 0.0);
        assert_eq!(mse_loss(&p, &o).unwrap(), 1.0);
        assert_eq!(mse_backward(&p, &o).unwrap().data(), &[1.0, 1.0]);
        assert!(mse_loss(&p, &t(vec![1], vec![0.0])).is_err());

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let pv: Vec<f64> = (0..24).map(|_| rng.random()).collect();
        let ov: Vec<f64> = (0..24).map(|_| rng.random()).collect();
        let target = t(vec![2, 3, 2, 2], ov);
        let g = mse_backward(&t(vec![2, 3, 2, 2], pv.clone()), &target).unwrap();
        let num = central_difference(&pv, 1e-3, |v| mse_loss(&t(vec![2, 3, 2, 2], v.to_vec()), &target).unwrap());
        for (a, b) in g.data().iter().zip(&num) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
