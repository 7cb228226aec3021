//! The assembled network: configuration, both masking stages, offline and
//! frame-by-frame processing.
//!
//! Output is delayed by one window (`win_len` samples): output sample `n`
//! is the reconstruction of input sample `n − win_len`. Frame `t` of the
//! analysis needs input up to `t·hop + win_len − 1`, and the overlap-add
//! finalizes samples one hop behind the newest frame, so one window is the
//! smallest delay at which every output hop is complete when it is emitted.
//! In extraction mode the mixture is delayed by the same amount before the
//! wind estimate is subtracted.

mod config;
mod net;
mod stream;

pub use config::{Mode, ModelConfig, BANDS_PER_ENCODER, KERNEL_TAPS};
pub use net::{
    band_tensor, intermediate_features, reconstruct, ComplexMask, ConvBlock, IntermediateMask,
    ShapeTrace, TensorRole, WindNetLite,
};
pub use stream::StreamState;

pub(crate) use net::at;

use crate::dsp::{istft_samples, stft_samples, AudioBuffer};
use crate::{Error, Real, Result};

impl<T: Real> WindNetLite<T> {
    /// Input-to-output delay in samples.
    pub fn latency(&self) -> usize {
        self.config().stft.win_len
    }

    /// Number of output samples past the latency that carry a finished
    /// reconstruction for an input of `len` samples. Later samples (a partial
    /// trailing hop) are left at zero, exactly as a stream would not have
    /// emitted them yet.
    pub fn valid_len(&self, len: usize) -> usize {
        let cfg = self.config().stft;
        (cfg.n_frames(len) * cfg.hop).min(len.saturating_sub(self.latency()))
    }

    /// Offline processing of a whole signal; the output has the input's length.
    pub fn process(&self, x: &AudioBuffer) -> Result<AudioBuffer> {
        x.require_pipeline_rate()?;
        let samples: Vec<T> = x.samples().iter().map(|&s| T::of_f64(s)).collect();
        let y = self.process_samples(&samples)?;
        AudioBuffer::from_samples(y.into_iter().map(|s| s.as_f64()).collect())
    }

    /// [`process`](Self::process) on raw samples in the model's scalar type.
    pub fn process_samples(&self, x: &[T]) -> Result<Vec<T>> {
        self.process_parts(x).map(|(out, _)| out)
    }

    /// Returns `(output, wet)` where `wet` is the delayed network estimate
    /// (the desired signal in rejection mode, the wind in extraction mode).
    pub fn process_parts(&self, x: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        if x.is_empty() {
            return Err(Error::EmptyInput("process input"));
        }
        let cfg = self.config().stft;
        let latency = self.latency();
        let n = x.len();
        let frames = cfg.n_frames(n);
        let mut wet = vec![T::zero(); n];
        if frames > 0 {
            let spec = stft_samples(x, cfg)?;
            let mut hidden = vec![T::zero(); self.gru.hidden_dim()];
            let est = self.estimate_spectrogram(&spec, &mut hidden, None)?;
            let full = istft_samples(&est)?;
            for (i, &v) in full.iter().take(frames * cfg.hop).enumerate() {
                if let Some(w) = wet.get_mut(i + latency) {
                    *w = v;
                }
            }
        }
        let out = match self.config().mode {
            Mode::Rejection => wet.clone(),
            Mode::Extraction => (0..n)
                .map(|j| {
                    let dry = if j >= latency { x[j - latency] } else { T::zero() };
                    dry - wet[j]
                })
                .collect(),
        };
        Ok((out, wet))
    }
}
