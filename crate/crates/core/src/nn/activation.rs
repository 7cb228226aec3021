use super::Tensor;
use crate::{Error, Real, Result};

/// `max(x, 0)`, keeping NaN so non-finite values surface downstream.
pub fn relu<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let data = x.data().iter().map(|&v| if v < T::zero() { T::zero() } else { v }).collect();
    Tensor::new(x.dims(), data).expect("same shape")
}

/// Gradient through ReLU given the layer output `y`.
pub fn relu_bwd<T: Real>(y: &Tensor<T>, grad: &Tensor<T>) -> Tensor<T> {
    let data = y
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&y, &g)| if y > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(y.dims(), data).expect("same shape")
}

/// Logistic function, clamped so the result stays strictly inside (0, 1)
/// even where it would round to 0 or 1. NaN passes through.
#[inline]
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    let y = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    let eps = T::epsilon();
    y.max(eps).min(T::one() - eps)
}

pub fn sigmoid<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    let data = x.data().iter().map(|&v| sigmoid_scalar(v)).collect();
    Tensor::new(x.dims(), data).expect("same shape")
}

/// Gradient through the sigmoid given its output `y`.
pub fn sigmoid_bwd<T: Real>(y: &Tensor<T>, grad: &Tensor<T>) -> Tensor<T> {
    let data = y
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&y, &g)| g * y * (T::one() - y))
        .collect();
    Tensor::new(y.dims(), data).expect("same shape")
}

/// Average pooling with pool size and stride `(1, 2)` over `[rows, f, c]`.
/// A trailing odd frequency position is dropped.
pub fn avgpool<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [rows, fin, c] = x.dims3("avgpool input")?;
    if fin < 2 {
        return Err(Error::shape("avgpool input", &[rows, 2, c], x.dims()));
    }
    let fout = fin / 2;
    let half = T::of_f64(0.5);
    let mut out = Vec::with_capacity(rows * fout * c);
    for xr in x.data().chunks_exact(fin * c) {
        for fo in 0..fout {
            let a = &xr[2 * fo * c..][..c];
            let b = &xr[(2 * fo + 1) * c..][..c];
            out.extend(a.iter().zip(b).map(|(&a, &b)| (a + b) * half));
        }
    }
    Tensor::new(&[rows, fout, c], out)
}

pub fn avgpool_bwd<T: Real>(in_dims: &[usize], grad: &Tensor<T>) -> Result<Tensor<T>> {
    let [rows, fin, c] = match in_dims {
        &[a, b, c] => [a, b, c],
        _ => return Err(Error::shape("avgpool grad", &[0, 0, 0], in_dims)),
    };
    let fout = fin / 2;
    if grad.dims() != [rows, fout, c] {
        return Err(Error::shape("avgpool grad", &[rows, fout, c], grad.dims()));
    }
    let half = T::of_f64(0.5);
    let mut gx = vec![T::zero(); rows * fin * c];
    for (gxr, gr) in gx.chunks_exact_mut(fin * c).zip(grad.data().chunks_exact(fout * c)) {
        for fo in 0..fout {
            for ch in 0..c {
                let g = gr[fo * c + ch] * half;
                gxr[2 * fo * c + ch] = g;
                gxr[(2 * fo + 1) * c + ch] = g;
            }
        }
    }
    Tensor::new(in_dims, gx)
}
