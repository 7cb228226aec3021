use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::AudioBuffer;
use crate::{Error, Result, SAMPLE_RATE_HZ};

/// Synthetic stand-in for clean recordings: harmonic notes with gliding
/// pitch and envelopes, short noise bursts, and pauses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesiredGenParams {
    pub seed: u64,
    pub duration_s: f64,
    /// Highest harmonic frequency.
    pub max_harmonic_hz: f64,
    /// Probability that a segment is a noise burst rather than a note.
    pub burst_prob: f64,
    /// Probability that a segment is silent.
    pub pause_prob: f64,
}

impl Default for DesiredGenParams {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_s: 3.0,
            max_harmonic_hz: 7500.0,
            burst_prob: 0.15,
            pause_prob: 0.1,
        }
    }
}

const TARGET_RMS: f64 = 0.1;

fn envelope(i: usize, len: usize, attack: usize, release: usize) -> f64 {
    let a = if i < attack { i as f64 / attack as f64 } else { 1.0 };
    let r = if i + release > len { (len - i) as f64 / release as f64 } else { 1.0 };
    a.min(r)
}

pub fn gen_desired(p: &DesiredGenParams) -> Result<AudioBuffer> {
    let fs = SAMPLE_RATE_HZ as f64;
    let n = (p.duration_s * fs).round().max(0.0) as usize;
    if n == 0 {
        return Err(Error::Param("desired signal duration must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut x = vec![0.0; n];
    let mut pos = 0;
    while pos < n {
        let seg = ((rng.random_range(0.12..0.5) * fs) as usize).min(n - pos);
        let kind: f64 = rng.random();
        let out = &mut x[pos..pos + seg];
        if kind < p.pause_prob {
            // silence
        } else if kind < p.pause_prob + p.burst_prob {
            // First-difference of white noise: a high-tilted burst.
            let gain = rng.random_range(0.3..1.0);
            let mut prev = 0.0;
            for (i, o) in out.iter_mut().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                *o = gain * (e - prev) * envelope(i, seg, 160, 320);
                prev = e;
            }
        } else {
            let f0 = 110.0 * 4f64.powf(rng.random::<f64>());
            let glide: f64 = rng.random_range(-0.15..0.15);
            let tilt = rng.random_range(0.4..1.2);
            let harmonics = (p.max_harmonic_hz / (f0 * (1.0 + glide.abs()))).floor().max(1.0) as usize;
            let amps: Vec<f64> = (1..=harmonics)
                .map(|k| rng.random_range(0.3..1.0) / (k as f64).powf(tilt))
                .collect();
            let phases: Vec<f64> = (0..harmonics)
                .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
                .collect();
            let attack = (rng.random_range(0.005..0.05) * fs) as usize;
            let release = (rng.random_range(0.02..0.1) * fs) as usize;
            let mut phase = 0.0;
            for (i, o) in out.iter_mut().enumerate() {
                let f = f0 * (1.0 + glide * i as f64 / seg as f64);
                phase += std::f64::consts::TAU * f / fs;
                let v: f64 = amps
                    .iter()
                    .zip(&phases)
                    .enumerate()
                    .map(|(k, (a, ph))| a * ((k + 1) as f64 * phase + ph).sin())
                    .sum();
                *o = v * envelope(i, seg, attack.max(1), release.max(1));
            }
        }
        pos += seg;
    }
    if x.iter().all(|&v| v == 0.0) {
        // Only pauses were drawn; a plain tone keeps downstream SNRs defined.
        for (i, v) in x.iter_mut().enumerate() {
            *v = (std::f64::consts::TAU * 220.0 * i as f64 / fs).sin();
        }
    }
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    x.iter_mut().for_each(|v| *v *= TARGET_RMS / rms);
    AudioBuffer::from_samples(x)
}
