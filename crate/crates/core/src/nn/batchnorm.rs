use super::Tensor;
use crate::{Error, Real, Result};

pub const BN_EPS: f64 = 1e-5;
/// Running-statistics update: `running = m·running + (1 − m)·batch`.
pub const BN_MOMENTUM: f64 = 0.99;

/// Per-channel batch normalization over the last axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

/// Normalized activations and inverse deviations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

/// Batch statistics (biased variance) of one training forward pass.
#[derive(Debug, Clone)]
pub struct BnStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BnGrads<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::filled(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], T::one()),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Tensor<T>) -> Result<usize> {
        let c = self.channels();
        match x.dims().last() {
            Some(&last) if last == c => Ok(c),
            _ => Err(Error::shape("batchnorm input", &[c], x.dims())),
        }
    }

    /// Normalizes with the running statistics.
    pub fn forward_infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let c = self.check(x)?;
        let eps = T::of_f64(BN_EPS);
        let scale: Vec<T> = self
            .gamma
            .data()
            .iter()
            .zip(self.running_var.data())
            .map(|(&g, &v)| g / (v + eps).sqrt())
            .collect();
        let mean = self.running_mean.data();
        let beta = self.beta.data();
        let mut out = x.data().to_vec();
        for row in out.chunks_exact_mut(c) {
            for ch in 0..c {
                row[ch] = (row[ch] - mean[ch]) * scale[ch] + beta[ch];
            }
        }
        Tensor::new(x.dims(), out)
    }

    /// Normalizes with the statistics of `x` itself.
    pub fn forward_train(&self, x: &Tensor<T>) -> Result<(Tensor<T>, BnCache<T>, BnStats<T>)> {
        let c = self.check(x)?;
        let n = x.len() / c;
        let inv_n = T::one() / T::of_f64(n as f64);
        let mut mean = vec![T::zero(); c];
        for row in x.data().chunks_exact(c) {
            for ch in 0..c {
                mean[ch] = mean[ch] + row[ch];
            }
        }
        mean.iter_mut().for_each(|m| *m = *m * inv_n);
        let mut var = vec![T::zero(); c];
        for row in x.data().chunks_exact(c) {
            for ch in 0..c {
                let d = row[ch] - mean[ch];
                var[ch] = var[ch] + d * d;
            }
        }
        var.iter_mut().for_each(|v| *v = *v * inv_n);
        let eps = T::of_f64(BN_EPS);
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let (gamma, beta) = (self.gamma.data(), self.beta.data());
        let mut xhat = x.data().to_vec();
        let mut out = vec![T::zero(); x.len()];
        for (xh, o) in xhat.chunks_exact_mut(c).zip(out.chunks_exact_mut(c)) {
            for ch in 0..c {
                xh[ch] = (xh[ch] - mean[ch]) * inv_std[ch];
                o[ch] = xh[ch] * gamma[ch] + beta[ch];
            }
        }
        Ok((
            Tensor::new(x.dims(), out)?,
            BnCache { xhat, inv_std },
            BnStats { mean, var },
        ))
    }

    pub fn update_running(&mut self, stats: &BnStats<T>) {
        let m = T::of_f64(BN_MOMENTUM);
        let one_m = T::one() - m;
        for (r, &b) in self.running_mean.data_mut().iter_mut().zip(&stats.mean) {
            *r = m * *r + one_m * b;
        }
        for (r, &b) in self.running_var.data_mut().iter_mut().zip(&stats.var) {
            *r = m * *r + one_m * b;
        }
    }

    pub fn backward(&self, cache: &BnCache<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, BnGrads<T>)> {
        let c = self.check(grad_out)?;
        if grad_out.len() != cache.xhat.len() {
            return Err(Error::shape("batchnorm grad", &[cache.xhat.len()], &[grad_out.len()]));
        }
        let n = T::of_f64((grad_out.len() / c) as f64);
        let mut sum_g = vec![T::zero(); c];
        let mut sum_gx = vec![T::zero(); c];
        for (g, xh) in grad_out.data().chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for ch in 0..c {
                sum_g[ch] = sum_g[ch] + g[ch];
                sum_gx[ch] = sum_gx[ch] + g[ch] * xh[ch];
            }
        }
        let gamma = self.gamma.data();
        let coef: Vec<T> = (0..c).map(|ch| gamma[ch] * cache.inv_std[ch] / n).collect();
        let mut gx = vec![T::zero(); grad_out.len()];
        for ((o, g), xh) in gx
            .chunks_exact_mut(c)
            .zip(grad_out.data().chunks_exact(c))
            .zip(cache.xhat.chunks_exact(c))
        {
            for ch in 0..c {
                o[ch] = coef[ch] * (n * g[ch] - sum_g[ch] - xh[ch] * sum_gx[ch]);
            }
        }
        Ok((
            Tensor::new(grad_out.dims(), gx)?,
            BnGrads {
                gamma: Tensor::new(&[c], sum_gx)?,
                beta: Tensor::new(&[c], sum_g)?,
            },
        ))
    }
}
