use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::{stft_samples, AudioBuffer, StftConfig};
use crate::{Error, Result, SAMPLE_RATE_HZ};

/// Gusty low-pass noise: `w[n] = g[n]·AR2(white)[n]` with a slowly varying gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindGenParams {
    pub seed: u64,
    pub duration_s: f64,
    /// `y[n] = a1·y[n−1] + a2·y[n−2] + e[n]`.
    pub ar_coeffs: [f64; 2],
    /// Bandwidth of the gust envelope.
    pub gust_rate_hz: f64,
    /// 0 gives stationary noise, 1 lets the gain reach zero.
    pub gust_depth: f64,
    /// Band edge of the spectral check.
    pub hf_cutoff_hz: f64,
}

impl Default for WindGenParams {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 3.0,
            ar_coeffs: [1.7, -0.7225],
            gust_rate_hz: 0.5,
            gust_depth: 0.8,
            hf_cutoff_hz: 4000.0,
        }
    }
}

/// Maximum share of energy allowed above the cutoff.
pub const MAX_HF_FRACTION: f64 = 0.01;

const BURN_IN: usize = 2048;
const TARGET_RMS: f64 = 0.1;

impl WindGenParams {
    pub fn validate(&self) -> Result<()> {
        let [a1, a2] = self.ar_coeffs;
        // Stability triangle of z² − a1·z − a2.
        if !(a2.abs() < 1.0 && a1.abs() < 1.0 - a2) {
            return Err(Error::Param(format!("AR(2) coefficients {:?} are not stable", self.ar_coeffs)));
        }
        if !(0.0..=1.0).contains(&self.gust_depth) {
            return Err(Error::Param(format!("gust depth {} outside [0, 1]", self.gust_depth)));
        }
        if !(self.gust_rate_hz > 0.0) || !(self.hf_cutoff_hz > 0.0) {
            return Err(Error::Param("gust rate and cutoff must be positive".into()));
        }
        let n = self.len();
        if n < StftConfig::default().win_len {
            return Err(Error::Param(format!("duration {} s is shorter than one STFT window", self.duration_s)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        (self.duration_s * SAMPLE_RATE_HZ as f64).round().max(0.0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Share of spectral energy above `cutoff_hz`, from the module's own STFT.
pub fn hf_energy_fraction(x: &[f64], cutoff_hz: f64) -> Result<f64> {
    let cfg = StftConfig::default();
    let spec = stft_samples(x, cfg)?;
    let bin_hz = SAMPLE_RATE_HZ as f64 / cfg.fft_len as f64;
    let (mut hi, mut total) = (0.0, 0.0);
    for t in 0..spec.n_frames() {
        for (f, c) in spec.frame(t).iter().enumerate() {
            let e = c.norm_sqr();
            total += e;
            if f as f64 * bin_hz > cutoff_hz {
                hi += e;
            }
        }
    }
    if total == 0.0 {
        return Err(Error::Generation("generated wind is silent".into()));
    }
    Ok(hi / total)
}

/// Cosine-interpolated random knots in `[−1, 1]`, spaced half a period of
/// `rate_hz` apart.
fn slow_noise(rng: &mut ChaCha8Rng, len: usize, rate_hz: f64) -> Vec<f64> {
    let spacing = (SAMPLE_RATE_HZ as f64 / (2.0 * rate_hz)).max(1.0);
    let knots: Vec<f64> = (0..(len as f64 / spacing) as usize + 2)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    (0..len)
        .map(|n| {
            let pos = n as f64 / spacing;
            let i = pos as usize;
            let frac = pos - i as f64;
            let mu = 0.5 - 0.5 * (std::f64::consts::PI * frac).cos();
            knots[i] * (1.0 - mu) + knots[i + 1] * mu
        })
        .collect()
}

pub fn gen_wind(p: &WindGenParams) -> Result<AudioBuffer> {
    p.validate()?;
    let n = p.len();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let [a1, a2] = p.ar_coeffs;
    let (mut y1, mut y2) = (0.0, 0.0);
    let mut shaped = Vec::with_capacity(n);
    for i in 0..n + BURN_IN {
        let e: f64 = StandardNormal.sample(&mut rng);
        let y = a1 * y1 + a2 * y2 + e;
        y2 = y1;
        y1 = y;
        if i >= BURN_IN {
            shaped.push(y);
        }
    }
    let slow = slow_noise(&mut rng, n, p.gust_rate_hz);
    let mut w: Vec<f64> = shaped
        .iter()
        .zip(&slow)
        .map(|(y, s)| y * (1.0 - p.gust_depth * (0.5 + 0.5 * s)))
        .collect();
    let rms = (w.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        w.iter_mut().for_each(|v| *v *= TARGET_RMS / rms);
    }
    let frac = hf_energy_fraction(&w, p.hf_cutoff_hz)?;
    if frac > MAX_HF_FRACTION {
        return Err(Error::Generation(format!(
            "{:.2} % of the energy lies above {} Hz (limit {} %)",
            frac * 100.0,
            p.hf_cutoff_hz,
            MAX_HF_FRACTION * 100.0
        )));
    }
    AudioBuffer::from_samples(w)
}
