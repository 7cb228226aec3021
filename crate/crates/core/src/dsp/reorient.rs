use serde::{Deserialize, Serialize};

use super::MagPhase;
use crate::{Error, Real, Result};

/// Overlapping sub-band layout used to restack the frequency axis into channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReorientConfig {
    /// Sub-band length `L` in bins.
    pub band_len: usize,
    /// Overlap ratio `r` between neighbouring sub-bands.
    pub overlap: f64,
    /// Sub-band count `N`.
    pub n_bands: usize,
}

impl Default for ReorientConfig {
    fn default() -> Self {
        Self {
            band_len: 40,
            overlap: 0.4,
            n_bands: 10,
        }
    }
}

impl ReorientConfig {
    /// Sub-band start spacing, `round(L·(1 − r))`.
    pub fn stride(&self) -> usize {
        (self.band_len as f64 * (1.0 - self.overlap)).round() as usize
    }

    /// Last bin (exclusive) any sub-band reaches.
    pub fn coverage(&self) -> usize {
        self.stride() * (self.n_bands - 1) + self.band_len
    }

    pub fn validate(&self, n_bins: usize) -> Result<()> {
        if self.band_len == 0 || self.n_bands == 0 || !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::Config(format!("bad sub-band layout {self:?}")));
        }
        if self.coverage() > n_bins {
            return Err(Error::Config(format!(
                "{} sub-bands of {} bins with stride {} need {} bins, spectrum has {n_bins}",
                self.n_bands,
                self.band_len,
                self.stride(),
                self.coverage()
            )));
        }
        Ok(())
    }
}

/// `T×L×N` channel-wise view: `data[t, k, i] = mag[t, i·stride + k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubBandTensor<T> {
    frames: usize,
    band_len: usize,
    n_bands: usize,
    data: Vec<T>,
}

impl<T: Real> SubBandTensor<T> {
    pub fn n_frames(&self) -> usize {
        self.frames
    }

    pub fn band_len(&self) -> usize {
        self.band_len
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.frames, self.band_len, self.n_bands]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, t: usize, k: usize, i: usize) -> T {
        self.data[(t * self.band_len + k) * self.n_bands + i]
    }

    /// Sub-bands `range` of every frame, as a new tensor.
    fn select_bands(&self, range: std::ops::Range<usize>) -> Self {
        let n = range.len();
        let mut data = Vec::with_capacity(self.frames * self.band_len * n);
        for row in self.data.chunks_exact(self.n_bands) {
            data.extend_from_slice(&row[range.clone()]);
        }
        Self {
            frames: self.frames,
            band_len: self.band_len,
            n_bands: n,
            data,
        }
    }
}

/// Gathers one frame's magnitudes into `out` (`L×N`, band index minor).
pub fn reorient_frame<T: Real>(mag: &[T], cfg: &ReorientConfig, out: &mut [T]) {
    let stride = cfg.stride();
    for k in 0..cfg.band_len {
        for i in 0..cfg.n_bands {
            out[k * cfg.n_bands + i] = mag[i * stride + k];
        }
    }
}

/// Restacks the magnitude into overlapping sub-bands; bins past the last
/// sub-band (the Nyquist bin in the reference layout) are not included.
pub fn reorient<T: Real>(m: &MagPhase<T>, cfg: &ReorientConfig) -> Result<SubBandTensor<T>> {
    cfg.validate(m.n_bins())?;
    let per_frame = cfg.band_len * cfg.n_bands;
    let mut data = vec![T::zero(); m.n_frames() * per_frame];
    for (t, out) in data.chunks_exact_mut(per_frame).enumerate() {
        reorient_frame(m.mag_frame(t), cfg, out);
    }
    Ok(SubBandTensor {
        frames: m.n_frames(),
        band_len: cfg.band_len,
        n_bands: cfg.n_bands,
        data,
    })
}

/// Low (first five) and high (remaining five) sub-band groups.
pub fn split_bands<T: Real>(c: &SubBandTensor<T>) -> Result<(SubBandTensor<T>, SubBandTensor<T>)> {
    if c.n_bands != 10 {
        return Err(Error::Config(format!(
            "band split expects 10 sub-bands, got {}",
            c.n_bands
        )));
    }
    Ok((c.select_bands(0..5), c.select_bands(5..10)))
}
