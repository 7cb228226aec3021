//! Weight initializers.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn uniform<R: Rng>(rng: &mut R, limit: f64, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-limit..=limit)).collect()
}

/// He-uniform: `U(±sqrt(6/fan_in))`.
pub fn he_uniform<R: Rng>(rng: &mut R, fan_in: usize, n: usize) -> Vec<f64> {
    uniform(rng, (6.0 / fan_in as f64).sqrt(), n)
}

/// Glorot-uniform: `U(±sqrt(6/(fan_in + fan_out)))`.
pub fn glorot_uniform<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    uniform(rng, (6.0 / (fan_in + fan_out) as f64).sqrt(), n)
}

/// Random `n×n` orthogonal matrix (row-major), Gram–Schmidt on Gaussian rows.
pub fn orthogonal<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut m: Vec<f64> = (0..n * n).map(|_| StandardNormal.sample(rng)).collect();
    for i in 0..n {
        for j in 0..i {
            let proj: f64 = (0..n).map(|k| m[i * n + k] * m[j * n + k]).sum();
            for k in 0..n {
                m[i * n + k] -= proj * m[j * n + k];
            }
        }
        let norm = (0..n).map(|k| m[i * n + k].powi(2)).sum::<f64>().sqrt();
        for k in 0..n {
            m[i * n + k] /= norm;
        }
    }
    m
}
