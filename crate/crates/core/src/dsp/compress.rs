use num_complex::Complex;

use super::{ComplexSpectrogram, StftConfig};
use crate::{Error, Real, Result};

/// Sign-preserving power-law compressed spectrogram (`X̃_r`, `X̃_i`).
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedSpectrogram<T> {
    frames: usize,
    bins: usize,
    pub real: Vec<T>,
    pub imag: Vec<T>,
    alpha: f64,
    config: StftConfig,
}

impl<T: Real> CompressedSpectrogram<T> {
    pub fn new(
        frames: usize,
        real: Vec<T>,
        imag: Vec<T>,
        alpha: f64,
        config: StftConfig,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let bins = config.n_bins();
        if real.len() != frames * bins || imag.len() != frames * bins {
            return Err(Error::shape(
                "compressed spectrogram",
                &[frames, bins],
                &[real.len(), imag.len()],
            ));
        }
        Ok(Self {
            frames,
            bins,
            real,
            imag,
            alpha,
            config,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames
    }

    pub fn n_bins(&self) -> usize {
        self.bins
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }
}

/// Magnitude and four-quadrant phase of a compressed spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct MagPhase<T> {
    frames: usize,
    bins: usize,
    pub mag: Vec<T>,
    pub phase: Vec<T>,
}

impl<T: Real> MagPhase<T> {
    pub fn new(frames: usize, bins: usize, mag: Vec<T>, phase: Vec<T>) -> Result<Self> {
        if mag.len() != frames * bins || phase.len() != frames * bins {
            return Err(Error::shape("mag/phase", &[frames, bins], &[mag.len(), phase.len()]));
        }
        Ok(Self {
            frames,
            bins,
            mag,
            phase,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames
    }

    pub fn n_bins(&self) -> usize {
        self.bins
    }

    pub fn mag_frame(&self, t: usize) -> &[T] {
        &self.mag[t * self.bins..(t + 1) * self.bins]
    }

    pub fn phase_frame(&self, t: usize) -> &[T] {
        &self.phase[t * self.bins..(t + 1) * self.bins]
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Param(format!("power-law factor {alpha} outside (0, 1]")))
    }
}

/// `sign(v)·|v|^alpha`; exact identity for `alpha == 1`.
#[inline]
pub fn compress_value<T: Real>(v: T, alpha: T) -> T {
    if alpha == T::one() || v == T::zero() {
        v
    } else {
        v.signum() * v.abs().powf(alpha)
    }
}

/// Inverse of [`compress_value`] with `beta = 1/alpha`.
#[inline]
pub fn decompress_value<T: Real>(v: T, beta: T) -> T {
    compress_value(v, beta)
}

pub fn power_law_compress<T: Real>(
    spec: &ComplexSpectrogram<T>,
    alpha: f64,
) -> Result<CompressedSpectrogram<T>> {
    check_alpha(alpha)?;
    let a = T::of_f64(alpha);
    let (real, imag) = spec
        .data()
        .iter()
        .map(|c| (compress_value(c.re, a), compress_value(c.im, a)))
        .unzip();
    Ok(CompressedSpectrogram {
        frames: spec.n_frames(),
        bins: spec.n_bins(),
        real,
        imag,
        alpha,
        config: spec.config(),
    })
}

/// Undoes [`power_law_compress`] with `β = 1/α`.
pub fn power_law_decompress<T: Real>(comp: &CompressedSpectrogram<T>) -> ComplexSpectrogram<T> {
    let beta = T::of_f64(1.0 / comp.alpha);
    let data = comp
        .real
        .iter()
        .zip(&comp.imag)
        .map(|(&r, &i)| Complex::new(decompress_value(r, beta), decompress_value(i, beta)))
        .collect();
    ComplexSpectrogram::new(comp.frames, data, comp.config)
        .unwrap_or_else(|_| ComplexSpectrogram::zeros(comp.frames, comp.config))
}

/// Maps `atan2` output into `(−π, π]`, with `(0, 0)` at phase 0.
#[inline]
pub fn wrap_phase<T: Real>(im: T, re: T) -> T {
    if re == T::zero() && im == T::zero() {
        return T::zero();
    }
    let p = im.atan2(re);
    if p <= -T::PI() {
        T::PI()
    } else {
        p
    }
}

pub fn mag_phase<T: Real>(comp: &CompressedSpectrogram<T>) -> MagPhase<T> {
    let (mag, phase) = comp
        .real
        .iter()
        .zip(&comp.imag)
        .map(|(&r, &i)| ((r * r + i * i).sqrt(), wrap_phase(i, r)))
        .unzip();
    MagPhase {
        frames: comp.frames,
        bins: comp.bins,
        mag,
        phase,
    }
}
