use num_complex::Complex;

use super::{Mode, WindNetLite};
use crate::dsp::{ComplexSpectrogram, FrameRing, OverlapAdd, StftEngine};
use crate::{Error, Real, Result};

/// Everything a single stream carries between hops. One state per stream;
/// the network itself is shared and immutable.
#[derive(Clone)]
pub struct StreamState<T: Real> {
    ring: FrameRing<T>,
    ola: OverlapAdd<T>,
    engine: StftEngine<T>,
    hidden: Vec<T>,
    /// Reconstruction finished by the previous hop, emitted by the next.
    pending: Vec<T>,
    /// Input that arrived one window ago.
    dry: Vec<T>,
    frame: Vec<T>,
    spectrum: Vec<Complex<T>>,
}

impl<T: Real> StreamState<T> {
    pub fn new(model: &WindNetLite<T>) -> Result<Self> {
        let cfg = model.config().stft;
        Ok(Self {
            ring: FrameRing::new(cfg),
            ola: OverlapAdd::new(cfg),
            engine: StftEngine::new(cfg)?,
            hidden: vec![T::zero(); model.gru.hidden_dim()],
            pending: vec![T::zero(); cfg.hop],
            dry: vec![T::zero(); cfg.hop],
            frame: vec![T::zero(); cfg.win_len],
            spectrum: vec![Complex::new(T::zero(), T::zero()); cfg.n_bins()],
        })
    }

    pub fn reset(&mut self) {
        self.ring.reset();
        self.ola.reset();
        self.hidden.iter_mut().for_each(|v| *v = T::zero());
        self.pending.iter_mut().for_each(|v| *v = T::zero());
        self.dry.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn hidden(&self) -> &[T] {
        &self.hidden
    }
}

impl<T: Real> WindNetLite<T> {
    /// Consumes one hop of input and writes one hop of output. Concatenated
    /// outputs equal [`process_samples`](Self::process_samples) bit for bit.
    pub fn process_frame(&self, chunk: &[T], state: &mut StreamState<T>, out: &mut [T]) -> Result<()> {
        let cfg = self.config().stft;
        if chunk.len() != cfg.hop || out.len() != cfg.hop {
            return Err(Error::Param(format!(
                "streaming expects {}-sample chunks, got {} in and {} out",
                cfg.hop,
                chunk.len(),
                out.len()
            )));
        }
        if state.hidden.len() != self.gru.hidden_dim() {
            return Err(Error::shape("stream state", &[self.gru.hidden_dim()], &[state.hidden.len()]));
        }
        state.ring.push(chunk, &mut state.dry);
        match self.config().mode {
            Mode::Rejection => out.copy_from_slice(&state.pending),
            Mode::Extraction => {
                for ((o, &d), &w) in out.iter_mut().zip(&state.dry).zip(&state.pending) {
                    *o = d - w;
                }
            }
        }
        if let Some(frame) = state.ring.frame() {
            state.engine.analyze(frame, &mut state.spectrum);
            let spec = ComplexSpectrogram::new(1, state.spectrum.clone(), cfg)?;
            let est = self.estimate_spectrogram(&spec, &mut state.hidden, None)?;
            state.engine.synthesize(est.frame(0), &mut state.frame);
            state.ola.push(&state.frame, &mut state.pending);
        }
        Ok(())
    }
}
