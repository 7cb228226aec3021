use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::{Error, Real, Result};

/// STFT framing: 512-point FFT, 32 ms periodic Hann window, 50 % overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub fft_len: usize,
    pub win_len: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_len: 512,
            win_len: 512,
            hop: 256,
        }
    }
}

impl StftConfig {
    pub fn n_bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Number of frames for `len` samples without any padding.
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.win_len {
            0
        } else {
            (len - self.win_len) / self.hop + 1
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.win_len == 0 || self.fft_len % 2 != 0 {
            return Err(Error::Config(format!("bad STFT lengths {self:?}")));
        }
        if self.fft_len != self.win_len {
            return Err(Error::Config("fft_len must equal win_len".into()));
        }
        if self.hop * 2 != self.win_len {
            return Err(Error::Config("hop must be win_len / 2".into()));
        }
        Ok(())
    }
}

/// Periodic Hann window, `w[n] = 0.5 − 0.5·cos(2πn/len)`.
pub fn hann_window<T: Real>(len: usize) -> Vec<T> {
    (0..len)
        .map(|n| {
            let phase = 2.0 * std::f64::consts::PI * n as f64 / len as f64;
            T::of_f64(0.5 - 0.5 * phase.cos())
        })
        .collect()
}

/// `T×F` complex spectrogram, row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram<T> {
    frames: usize,
    bins: usize,
    data: Vec<Complex<T>>,
    config: StftConfig,
}

impl<T: Real> ComplexSpectrogram<T> {
    pub fn new(frames: usize, data: Vec<Complex<T>>, config: StftConfig) -> Result<Self> {
        let bins = config.n_bins();
        if data.len() != frames * bins {
            return Err(Error::shape("spectrogram", &[frames, bins], &[data.len()]));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("spectrogram".into()));
        }
        Ok(Self {
            frames,
            bins,
            data,
            config,
        })
    }

    pub fn zeros(frames: usize, config: StftConfig) -> Self {
        let bins = config.n_bins();
        Self {
            frames,
            bins,
            data: vec![Complex::new(T::zero(), T::zero()); frames * bins],
            config,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.frames
    }

    pub fn n_bins(&self) -> usize {
        self.bins
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn frame(&self, t: usize) -> &[Complex<T>] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [Complex<T>] {
        &mut self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn get(&self, t: usize, f: usize) -> Complex<T> {
        self.data[t * self.bins + f]
    }

    pub fn as_f64(&self) -> ComplexSpectrogram<f64> {
        ComplexSpectrogram {
            frames: self.frames,
            bins: self.bins,
            data: self
                .data
                .iter()
                .map(|c| Complex::new(c.re.as_f64(), c.im.as_f64()))
                .collect(),
            config: self.config,
        }
    }
}

/// Planned FFTs plus the analysis/synthesis window for one STFT config.
pub struct StftEngine<T: Real> {
    config: StftConfig,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    buffer: Vec<Complex<T>>,
    scratch: Vec<Complex<T>>,
}

impl<T: Real> Clone for StftEngine<T> {
    fn clone(&self) -> Self {
        Self {
            config: self.config,
            window: self.window.clone(),
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            buffer: self.buffer.clone(),
            scratch: self.scratch.clone(),
        }
    }
}

impl<T: Real> StftEngine<T> {
    pub fn new(config: StftConfig) -> Result<Self> {
        config.validate()?;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(config.fft_len);
        let inverse = planner.plan_fft_inverse(config.fft_len);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let zero = Complex::new(T::zero(), T::zero());
        Ok(Self {
            config,
            window: hann_window(config.win_len),
            forward,
            inverse,
            buffer: vec![zero; config.fft_len],
            scratch: vec![zero; scratch_len],
        })
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    /// Windowed FFT of one `win_len` frame, keeping the `n_bins` half spectrum.
    pub fn analyze(&mut self, frame: &[T], out: &mut [Complex<T>]) {
        debug_assert_eq!(frame.len(), self.config.win_len);
        debug_assert_eq!(out.len(), self.config.n_bins());
        for ((b, &s), &w) in self.buffer.iter_mut().zip(frame).zip(&self.window) {
            *b = Complex::new(s * w, T::zero());
        }
        self.forward
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        out.copy_from_slice(&self.buffer[..out.len()]);
    }

    /// Inverse FFT of a half spectrum, multiplied by the synthesis window.
    ///
    /// Imaginary parts of the DC and Nyquist bins do not reach the output.
    pub fn synthesize(&mut self, spectrum: &[Complex<T>], out: &mut [T]) {
        let n = self.config.fft_len;
        let bins = self.config.n_bins();
        debug_assert_eq!(spectrum.len(), bins);
        self.buffer[..bins].copy_from_slice(spectrum);
        for k in bins..n {
            self.buffer[k] = spectrum[n - k].conj();
        }
        self.inverse
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        let scale = T::one() / T::of_f64(n as f64);
        for ((o, b), &w) in out.iter_mut().zip(&self.buffer).zip(&self.window) {
            *o = b.re * scale * w;
        }
    }
}

/// STFT of a 16 kHz buffer. Frame `t` covers samples `[t·hop, t·hop + win_len)`.
pub fn stft<T: Real>(x: &AudioBuffer, cfg: StftConfig) -> Result<ComplexSpectrogram<T>> {
    x.require_pipeline_rate()?;
    let samples: Vec<T> = x.samples().iter().map(|&s| T::of_f64(s)).collect();
    stft_samples(&samples, cfg)
}

pub fn stft_samples<T: Real>(x: &[T], cfg: StftConfig) -> Result<ComplexSpectrogram<T>> {
    if x.is_empty() {
        return Err(Error::EmptyInput("stft input"));
    }
    let mut engine = StftEngine::new(cfg)?;
    let frames = cfg.n_frames(x.len());
    let bins = cfg.n_bins();
    let mut data = vec![Complex::new(T::zero(), T::zero()); frames * bins];
    for (t, out) in data.chunks_exact_mut(bins).enumerate() {
        let start = t * cfg.hop;
        engine.analyze(&x[start..start + cfg.win_len], out);
    }
    Ok(ComplexSpectrogram {
        frames,
        bins,
        data,
        config: cfg,
    })
}

/// Weighted overlap-add. Output length is `(T−1)·hop + win_len`. Every sample
/// is divided by the steady-state summed squared window, as if silent frames
/// continued past both ends, so the first and last half-frames fade in and
/// out instead of being amplified.
pub fn istft<T: Real>(spec: &ComplexSpectrogram<T>) -> Result<AudioBuffer> {
    let samples = istft_samples(spec)?;
    AudioBuffer::from_samples(samples.into_iter().map(|s| s.as_f64()).collect())
}

pub fn istft_samples<T: Real>(spec: &ComplexSpectrogram<T>) -> Result<Vec<T>> {
    let cfg = spec.config;
    if spec.frames == 0 {
        return Ok(Vec::new());
    }
    if spec.data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFinite("istft input".into()));
    }
    let mut engine = StftEngine::<T>::new(cfg)?;
    let len = (spec.frames - 1) * cfg.hop + cfg.win_len;
    let mut out = vec![T::zero(); len];
    let mut frame = vec![T::zero(); cfg.win_len];
    for t in 0..spec.frames {
        engine.synthesize(spec.frame(t), &mut frame);
        let start = t * cfg.hop;
        for i in 0..cfg.win_len {
            out[start + i] = out[start + i] + frame[i];
        }
    }
    let norm = steady_norm(&engine.window, cfg.hop);
    for (i, o) in out.iter_mut().enumerate() {
        *o = normalize(*o, norm[i % cfg.hop]);
    }
    Ok(out)
}

/// `w[i]² + w[i+hop]²` for one hop, summed earlier frame first.
fn steady_norm<T: Real>(window: &[T], hop: usize) -> Vec<T> {
    (0..hop)
        .map(|i| {
            let prev = window[i + hop];
            (T::zero() + prev * prev) + window[i] * window[i]
        })
        .collect()
}

#[inline]
fn normalize<T: Real>(value: T, denom: T) -> T {
    if denom > T::of_f64(1e-10) {
        value / denom
    } else {
        T::zero()
    }
}

/// Sliding analysis buffer fed in hop-sized chunks.
#[derive(Debug, Clone)]
pub struct FrameRing<T> {
    buf: Vec<T>,
    hop: usize,
    chunks_seen: u64,
}

impl<T: Real> FrameRing<T> {
    pub fn new(cfg: StftConfig) -> Self {
        Self {
            buf: vec![T::zero(); cfg.win_len],
            hop: cfg.hop,
            chunks_seen: 0,
        }
    }

    /// Appends one hop of samples and returns the chunk that fell out of the
    /// window, i.e. the samples that arrived two chunks ago.
    pub fn push(&mut self, chunk: &[T], evicted: &mut [T]) {
        debug_assert_eq!(chunk.len(), self.hop);
        evicted.copy_from_slice(&self.buf[..self.hop]);
        self.buf.copy_within(self.hop.., 0);
        let tail = self.buf.len() - self.hop;
        self.buf[tail..].copy_from_slice(chunk);
        self.chunks_seen += 1;
    }

    /// The current window, once enough chunks arrived to fill it.
    pub fn frame(&self) -> Option<&[T]> {
        let needed = (self.buf.len() / self.hop) as u64;
        (self.chunks_seen >= needed).then_some(&self.buf[..])
    }

    pub fn reset(&mut self) {
        self.buf.iter_mut().for_each(|s| *s = T::zero());
        self.chunks_seen = 0;
    }
}

/// Streaming counterpart of [`istft_samples`]; bit-identical to it.
#[derive(Debug, Clone)]
pub struct OverlapAdd<T> {
    acc: Vec<T>,
    norm: Vec<T>,
    hop: usize,
}

impl<T: Real> OverlapAdd<T> {
    pub fn new(cfg: StftConfig) -> Self {
        let window = hann_window::<T>(cfg.win_len);
        Self {
            acc: vec![T::zero(); cfg.win_len],
            norm: steady_norm(&window, cfg.hop),
            hop: cfg.hop,
        }
    }

    /// Adds one synthesized frame and writes the `hop` samples it completed.
    pub fn push(&mut self, frame: &[T], completed: &mut [T]) {
        for (a, &f) in self.acc.iter_mut().zip(frame) {
            *a = *a + f;
        }
        for ((c, &a), &d) in completed.iter_mut().zip(&self.acc[..self.hop]).zip(&self.norm) {
            *c = normalize(a, d);
        }
        self.acc.copy_within(self.hop.., 0);
        let tail = self.acc.len() - self.hop;
        self.acc[tail..].iter_mut().for_each(|a| *a = T::zero());
    }

    pub fn reset(&mut self) {
        self.acc.iter_mut().for_each(|a| *a = T::zero());
    }
}
