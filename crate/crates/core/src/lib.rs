//! Streaming wind noise reduction.
//!
//! The crate implements a low-complexity two-stage masking network for
//! single-channel wind noise reduction at 16 kHz, together with everything
//! needed to train and evaluate it at desk scale:
//!
//! ```text
//! x[n] ─ STFT ─ power-law ─┬─ |X̃| ─ sub-band reorientation ─┬─ LF encoder ─ GRU ─┐
//!                          │                                  └─ HF encoder ───────┴─ concat ─ FC ─ σ ─ M̄
//!                          └─ ∠X̃ ───────────────────────────────────── M̄·e^{j∠X̃} ─ CNN ─ complex mask M
//!                                       X̃·M ─ inverse power-law ─ iSTFT ─ d̂ (rejection) or x − ŵ (extraction)
//! ```
//!
//! * [`dsp`]: STFT/iSTFT, power-law compression, magnitude/phase, reorientation, WAV I/O.
//! * [`nn`]: the layer set with hand-derived gradients.
//! * [`model`]: the assembled network, offline and frame-by-frame processing.
//! * [`weights`]: the `WNLW` weight container and initialization.
//! * [`metrics`]: SI-SDR, wind leakage and SNR mixing.
//! * [`datagen`]: synthetic wind and desired-signal generators, dataset assembly.
//! * [`trainer`]: loss, Adam, learning-rate schedule, training loop, α sweeps.
//! * [`bench`]: MAC accounting and real-time-factor measurement.

pub mod bench;
pub mod datagen;
pub mod dsp;
mod error;
pub mod metrics;
pub mod model;
pub mod nn;
mod real;
pub mod trainer;
pub mod weights;

pub use error::{Error, Result};
pub use real::Real;

/// Sample rate every pipeline entry point expects.
pub const SAMPLE_RATE_HZ: u32 = 16_000;
