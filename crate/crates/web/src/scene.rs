//! Signal-side logic of the demo, kept free of JS types so it runs natively.

use windnet::datagen::{gen_desired, gen_wind, DesiredGenParams, WindGenParams};
use windnet::dsp::{
    mag_phase, power_law_compress, power_law_decompress, reorient_frame, stft_samples, ComplexSpectrogram,
    ReorientConfig, StftConfig,
};
use windnet::metrics::{leakage, mix_at_snr};
use windnet::{Error, Result};

/// Floor for the dB display, well below anything audible at 16 bits.
const DB_FLOOR: f64 = -120.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Mixture,
    Desired,
    Wind,
}

impl Source {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mixture" => Ok(Self::Mixture),
            "desired" => Ok(Self::Desired),
            "wind" => Ok(Self::Wind),
            other => Err(Error::Param(format!("unknown source {other:?}"))),
        }
    }
}

/// A synthetic desired signal, a wind recording and their mixture, with
/// spectrograms of all three.
pub struct Scene {
    mixture: Vec<f64>,
    spec: [ComplexSpectrogram<f64>; 3],
    reorient: ReorientConfig,
}

impl Scene {
    pub fn new(seed: u64, seconds: f64, gust_depth: f64, snr_db: f64) -> Result<Self> {
        let desired = gen_desired(&DesiredGenParams {
            seed,
            duration_s: seconds,
            ..Default::default()
        })?;
        let wind = gen_wind(&WindGenParams {
            seed: seed.wrapping_add(1),
            duration_s: seconds,
            gust_depth,
            ..Default::default()
        })?;
        let (mixture, wind) = mix_at_snr(desired.samples(), wind.samples(), snr_db)?;
        let cfg = StftConfig::default();
        let spec = [
            stft_samples(&mixture, cfg)?,
            stft_samples(desired.samples(), cfg)?,
            stft_samples(&wind, cfg)?,
        ];
        Ok(Self {
            mixture,
            spec,
            reorient: ReorientConfig::default(),
        })
    }

    fn spec(&self, s: Source) -> &ComplexSpectrogram<f64> {
        &self.spec[s as usize]
    }

    pub fn mixture(&self) -> &[f64] {
        &self.mixture
    }

    pub fn frames(&self) -> usize {
        self.spec[0].n_frames()
    }

    pub fn bins(&self) -> usize {
        self.spec[0].n_bins()
    }

    /// `20·log10|X|`, frame-major.
    pub fn spectrogram_db(&self, s: Source) -> Vec<f32> {
        self.spec(s)
            .data()
            .iter()
            .map(|c| (20.0 * c.norm().log10()).max(DB_FLOOR) as f32)
            .collect()
    }

    /// Magnitude after compressing real and imaginary parts with `alpha`, frame-major.
    pub fn compressed_magnitude(&self, s: Source, alpha: f64) -> Result<Vec<f32>> {
        let c = power_law_compress(self.spec(s), alpha)?;
        Ok(mag_phase(&c).mag.into_iter().map(|v| v as f32).collect())
    }

    /// Largest relative error of compress-then-decompress over all components.
    pub fn round_trip_error(&self, alpha: f64) -> Result<f64> {
        let spec = self.spec(Source::Mixture);
        let back = power_law_decompress(&power_law_compress(spec, alpha)?);
        let mut worst = 0.0f64;
        for (a, b) in spec.data().iter().zip(back.data()) {
            for (u, v) in [(a.re, b.re), (a.im, b.im)] {
                if u != 0.0 {
                    worst = worst.max(((u - v) / u).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Compressed magnitudes of one frame restacked into overlapping
    /// sub-bands: `band_len` rows of `n_bands` values.
    pub fn subbands(&self, s: Source, frame: usize, alpha: f64) -> Result<Vec<f32>> {
        if frame >= self.frames() {
            return Err(Error::Param(format!("frame {frame} of {}", self.frames())));
        }
        let c = power_law_compress(self.spec(s), alpha)?;
        let m = mag_phase(&c);
        let mut out = vec![0.0; self.reorient.band_len * self.reorient.n_bands];
        reorient_frame(m.mag_frame(frame), &self.reorient, &mut out);
        Ok(out.into_iter().map(|v| v as f32).collect())
    }

    pub fn band_len(&self) -> usize {
        self.reorient.band_len
    }

    pub fn n_bands(&self) -> usize {
        self.reorient.n_bands
    }

    /// First bin of every sub-band.
    pub fn band_starts(&self) -> Vec<usize> {
        (0..self.reorient.n_bands).map(|i| i * self.reorient.stride()).collect()
    }

    /// Wind leakage of `s` used as the estimate. The unprocessed mixture is
    /// the baseline a denoiser has to beat; the clean desired signal is the
    /// best case.
    pub fn leakage(&self, s: Source) -> Result<f64> {
        leakage(self.spec(s), self.spec(Source::Wind))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> Scene {
        Scene::new(3, 1.0, 0.8, 0.0).unwrap()
    }

    #[test]
    fn dimensions() {
        let s = scene();
        assert_eq!(s.bins(), 257);
        assert_eq!(s.frames(), (16_000 - 512) / 256 + 1);
        assert_eq!(s.spectrogram_db(Source::Wind).len(), s.frames() * s.bins());
        assert_eq!(s.mixture().len(), 16_000);
    }

    #[test]
    fn compression_acts_on_each_component() {
        let s = scene();
        let alpha = 0.5;
        let got = s.compressed_magnitude(Source::Mixture, alpha).unwrap();
        for (c, &g) in s.spec(Source::Mixture).data().iter().zip(&got) {
            let want = (c.re.abs().powf(2.0 * alpha) + c.im.abs().powf(2.0 * alpha)).sqrt();
            assert!((want - g as f64).abs() <= 1e-5 * (1.0 + want), "{want} {g}");
        }
        assert!(s.round_trip_error(0.3).unwrap() < 1e-9);
    }

    #[test]
    fn subbands_match_bins() {
        let s = scene();
        let frame = 10;
        let full = s.compressed_magnitude(Source::Mixture, 0.3).unwrap();
        let bands = s.subbands(Source::Mixture, frame, 0.3).unwrap();
        let starts = s.band_starts();
        for k in 0..s.band_len() {
            for (i, &b0) in starts.iter().enumerate() {
                assert_eq!(bands[k * s.n_bands() + i], full[frame * s.bins() + b0 + k]);
            }
        }
        assert!(s.subbands(Source::Mixture, s.frames(), 0.3).is_err());
    }

    #[test]
    fn leakage_orders_sources() {
        let s = scene();
        let mix = s.leakage(Source::Mixture).unwrap();
        let clean = s.leakage(Source::Desired).unwrap();
        assert!(clean < mix, "{clean} vs {mix}");
    }

    #[test]
    fn bad_inputs_are_errors() {
        assert!(Source::parse("noise").is_err());
        assert!(Scene::new(0, 1.0, 2.0, 0.0).is_err());
        assert!(scene().compressed_magnitude(Source::Wind, 0.0).is_err());
    }
}
