//! Tensor type and the layer set the model is built from, each with a
//! hand-derived reverse-mode gradient.
//!
//! Activations use a `[rows, freq, channels]` layout where `rows` is the
//! flattened batch×time axis. Every layer works row by row, so no
//! information ever crosses time steps except inside [`Gru`].

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod gru;
pub mod gradcheck;
pub mod init;
pub mod mac;
mod tensor;

pub use activation::{avgpool, avgpool_bwd, relu, relu_bwd, sigmoid, sigmoid_bwd, sigmoid_scalar};
pub use batchnorm::{BatchNorm, BnCache, BnGrads, BnStats, BN_EPS, BN_MOMENTUM};
pub use conv::{Conv2d, Conv2dGrads};
pub use dense::{Dense, DenseGrads};
pub use gru::{Gru, GruCache};
pub use tensor::Tensor;

use crate::Real;

/// Dot product with eight independent partial sums.
#[inline]
pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] = acc[l] + x[l] * y[l];
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail = tail + x * y;
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

/// `y += a·x`
#[inline]
pub(crate) fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv = *yv + a * xv;
    }
}
