use super::{axpy, dot, mac, Tensor};
use crate::{Error, Real, Result};

/// Fully connected layer, `y = W·x + b` with `W` stored `out×in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.dims()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.dims()[0]
    }

    fn check(&self, x: &Tensor<T>) -> Result<usize> {
        let [rows, n] = x.dims2("dense input")?;
        if n != self.inputs() {
            return Err(Error::shape("dense input", &[rows, self.inputs()], x.dims()));
        }
        Ok(rows)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let rows = self.check(x)?;
        let (nin, nout) = (self.inputs(), self.outputs());
        let w = self.weight.data();
        let b = self.bias.data();
        let mut out = Vec::with_capacity(rows * nout);
        for xr in x.data().chunks_exact(nin) {
            out.extend(w.chunks_exact(nin).zip(b).map(|(wr, &bo)| dot(wr, xr) + bo));
        }
        mac::record((rows * nin * nout) as u64);
        Tensor::new(&[rows, nout], out)
    }

    pub fn backward(&self, x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, DenseGrads<T>)> {
        let rows = self.check(x)?;
        let (nin, nout) = (self.inputs(), self.outputs());
        if grad_out.dims() != [rows, nout] {
            return Err(Error::shape("dense grad", &[rows, nout], grad_out.dims()));
        }
        let w = self.weight.data();
        let mut gw = vec![T::zero(); w.len()];
        let mut gb = vec![T::zero(); nout];
        let mut gx = vec![T::zero(); x.len()];
        for ((xr, gr), gxr) in x
            .data()
            .chunks_exact(nin)
            .zip(grad_out.data().chunks_exact(nout))
            .zip(gx.chunks_exact_mut(nin))
        {
            for (o, &g) in gr.iter().enumerate() {
                gb[o] = gb[o] + g;
                axpy(g, &w[o * nin..][..nin], gxr);
                axpy(g, xr, &mut gw[o * nin..][..nin]);
            }
        }
        Ok((
            Tensor::new(x.dims(), gx)?,
            DenseGrads {
                weight: Tensor::new(self.weight.dims(), gw)?,
                bias: Tensor::new(&[nout], gb)?,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{assert_grads_close, central_difference};
    use rand::{Rng, SeedableRng};

    fn random(dims: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = dims.iter().product();
        Tensor::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_passes_through() {
        let mut d = Dense::<f64>::zeros(4, 4);
        for i in 0..4 {
            d.weight.data_mut()[i * 4 + i] = 1.0;
        }
        let x = random(&[3, 4], 1);
        assert_eq!(d.forward(&x).unwrap(), x);
    }

    #[test]
    fn wrong_width_is_a_shape_error() {
        let d = Dense::<f64>::zeros(208, 257);
        assert!(matches!(d.forward(&Tensor::zeros(&[1, 207])), Err(Error::Shape { .. })));
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (seed, rows, nin, nout) in [(1u64, 2, 5, 3), (2, 1, 17, 9), (3, 4, 3, 11)] {
            let mut d = Dense::zeros(nin, nout);
            d.weight = random(&[nout, nin], seed);
            d.bias = random(&[nout], seed + 1);
            let x = random(&[rows, nin], seed + 2);
            let probe = random(&[rows, nout], seed + 3);
            let loss = |d: &Dense<f64>, x: &Tensor<f64>| -> f64 {
                let y = d.forward(x).unwrap();
                y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
            };
            let (gx, grads) = d.backward(&x, &probe).unwrap();
            let num = central_difference(x.data(), 1e-5, |v| {
                loss(&d, &Tensor::new(x.dims(), v.to_vec()).unwrap())
            });
            assert_grads_close(gx.data(), &num, 1e-4, "dense dx");
            let num = central_difference(d.weight.data(), 1e-5, |v| {
                let mut c = d.clone();
                c.weight.data_mut().copy_from_slice(v);
                loss(&c, &x)
            });
            assert_grads_close(grads.weight.data(), &num, 1e-4, "dense dW");
            let num = central_difference(d.bias.data(), 1e-5, |v| {
                let mut c = d.clone();
                c.bias.data_mut().copy_from_slice(v);
                loss(&c, &x)
            });
            assert_grads_close(grads.bias.data(), &num, 1e-4, "dense db");
        }
    }
}
