//! Time–frequency front-end and back-end.

mod compress;
mod reorient;
mod stft;
pub mod wav;

pub use compress::{
    compress_value, decompress_value, mag_phase, power_law_compress, power_law_decompress,
    wrap_phase, CompressedSpectrogram, MagPhase,
};
pub use reorient::{reorient, reorient_frame, split_bands, ReorientConfig, SubBandTensor};
pub use stft::{
    hann_window, istft, istft_samples, stft, stft_samples, ComplexSpectrogram, FrameRing,
    OverlapAdd, StftConfig, StftEngine,
};

use crate::{Error, Result, SAMPLE_RATE_HZ};

/// Mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioBuffer {
    /// Wraps `samples`, rejecting NaN and infinities.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// A 16 kHz buffer.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, SAMPLE_RATE_HZ)
    }

    pub fn silence(len: usize) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate_hz: SAMPLE_RATE_HZ,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Fails unless the buffer is at the pipeline rate.
    pub fn require_pipeline_rate(&self) -> Result<()> {
        if self.sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(Error::Config(format!(
                "sample rate {} Hz, pipeline requires {} Hz",
                self.sample_rate_hz, SAMPLE_RATE_HZ
            )));
        }
        Ok(())
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}
