use crate::datagen::Example;
use crate::dsp::{mag_phase, power_law_compress, reorient, split_bands, stft_samples, CompressedSpectrogram};
use crate::model::{Mode, ModelConfig};
use crate::nn::Tensor;
use crate::{Error, Real, Result};

/// Network inputs and training target of one clip, computed once.
#[derive(Debug, Clone)]
pub struct ClipFeatures<T> {
    pub frames: usize,
    /// Compressed mixture spectrum, `T×bins` each.
    pub xr: Vec<T>,
    pub xi: Vec<T>,
    pub phase: Vec<T>,
    /// Sub-band magnitudes, `T×L×5` each.
    pub low: Vec<T>,
    pub high: Vec<T>,
    /// Compressed target spectrum (desired or wind by mode).
    pub tr: Vec<T>,
    pub ti: Vec<T>,
}

fn compressed<T: Real>(x: &[f64], cfg: &ModelConfig) -> Result<CompressedSpectrogram<T>> {
    let s: Vec<T> = x.iter().map(|&v| T::of_f64(v)).collect();
    power_law_compress(&stft_samples(&s, cfg.stft)?, cfg.alpha)
}

impl<T: Real> ClipFeatures<T> {
    pub fn new(ex: &Example, cfg: &ModelConfig) -> Result<Self> {
        let x = compressed::<T>(&ex.mixture, cfg)?;
        let target = match cfg.mode {
            Mode::Rejection => &ex.desired,
            Mode::Extraction => &ex.wind,
        };
        let t = compressed::<T>(target, cfg)?;
        if x.n_frames() == 0 {
            return Err(Error::Dataset(format!("{}: shorter than one STFT window", ex.name)));
        }
        let mp = mag_phase(&x);
        let (low, high) = split_bands(&reorient(&mp, &cfg.reorient)?)?;
        Ok(Self {
            frames: x.n_frames(),
            phase: mp.phase,
            low: low.into_data(),
            high: high.into_data(),
            xr: x.real,
            xi: x.imag,
            tr: t.real,
            ti: t.imag,
        })
    }
}

/// Clips stacked along the row axis (`rows = B·T`).
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub batch: usize,
    pub frames: usize,
    pub xr: Vec<T>,
    pub xi: Vec<T>,
    pub phase: Vec<T>,
    pub low: Tensor<T>,
    pub high: Tensor<T>,
    pub tr: Vec<T>,
    pub ti: Vec<T>,
}

impl<T: Real> Batch<T> {
    pub fn rows(&self) -> usize {
        self.batch * self.frames
    }

    pub fn from_clips(clips: &[&ClipFeatures<T>], cfg: &ModelConfig) -> Result<Self> {
        let first = clips.first().ok_or(Error::EmptyInput("training batch"))?;
        let frames = first.frames;
        if clips.iter().any(|c| c.frames != frames) {
            return Err(Error::Dataset("clips in a batch must have equal length".into()));
        }
        let cat = |f: fn(&ClipFeatures<T>) -> &Vec<T>| -> Vec<T> {
            clips.iter().flat_map(|c| f(c).iter().copied()).collect()
        };
        let rows = clips.len() * frames;
        let band = [rows, cfg.reorient.band_len, cfg.reorient.n_bands / 2];
        Ok(Self {
            batch: clips.len(),
            frames,
            xr: cat(|c| &c.xr),
            xi: cat(|c| &c.xi),
            phase: cat(|c| &c.phase),
            low: Tensor::new(&band, cat(|c| &c.low))?,
            high: Tensor::new(&band, cat(|c| &c.high))?,
            tr: cat(|c| &c.tr),
            ti: cat(|c| &c.ti),
        })
    }

    pub fn from_examples(examples: &[&Example], cfg: &ModelConfig) -> Result<Self> {
        let feats = examples
            .iter()
            .map(|e| ClipFeatures::new(e, cfg))
            .collect::<Result<Vec<_>>>()?;
        Self::from_clips(&feats.iter().collect::<Vec<_>>(), cfg)
    }
}

