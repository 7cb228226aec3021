//! SI-SDR, the log-spectral wind leakage distance, and SNR mixing.

use serde::{Deserialize, Serialize};

use crate::dsp::ComplexSpectrogram;
use crate::{Error, Result};

/// Reported SI-SDR when the residual vanishes.
pub const SI_SDR_CAP_DB: f64 = 100.0;

/// Magnitude floor inside the logarithm of [`leakage`].
pub const LEAKAGE_FLOOR: f64 = 1e-8;

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn zero_mean(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

/// Scale-invariant signal-to-distortion ratio in dB, capped at
/// [`SI_SDR_CAP_DB`].
pub fn si_sdr(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::shape("si-sdr", &[reference.len()], &[estimate.len()]));
    }
    if reference.is_empty() {
        return Err(Error::EmptyInput("si-sdr reference"));
    }
    let s = zero_mean(reference);
    let e = zero_mean(estimate);
    let ss = energy(&s);
    if ss == 0.0 {
        return Err(Error::UndefinedMetric("SI-SDR of a silent reference"));
    }
    let scale = e.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / ss;
    let target = scale * scale * ss;
    let residual: f64 = e.iter().zip(&s).map(|(a, b)| (a - scale * b).powi(2)).sum();
    if target == 0.0 {
        return Ok(-SI_SDR_CAP_DB);
    }
    if residual == 0.0 {
        return Ok(SI_SDR_CAP_DB);
    }
    Ok((10.0 * (target / residual).log10()).clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB))
}

/// `−sqrt(mean (log10|D̂| − log10|W|)²)` over all time-frequency cells, both
/// magnitudes floored at [`LEAKAGE_FLOOR`]. More negative means the estimate
/// sits further from the wind.
pub fn leakage(d_hat: &ComplexSpectrogram<f64>, wind: &ComplexSpectrogram<f64>) -> Result<f64> {
    if d_hat.n_frames() != wind.n_frames() || d_hat.n_bins() != wind.n_bins() {
        return Err(Error::shape(
            "leakage",
            &[wind.n_frames(), wind.n_bins()],
            &[d_hat.n_frames(), d_hat.n_bins()],
        ));
    }
    if d_hat.data().is_empty() {
        return Err(Error::EmptyInput("leakage spectrogram"));
    }
    let lg = |c: &num_complex::Complex<f64>| c.norm().max(LEAKAGE_FLOOR).log10();
    let sum: f64 = d_hat
        .data()
        .iter()
        .zip(wind.data())
        .map(|(a, b)| (lg(a) - lg(b)).powi(2))
        .sum();
    Ok(-(sum / d_hat.data().len() as f64).sqrt())
}

/// `10·log10(‖desired‖² / ‖wind‖²)`.
pub fn snr_db(desired: &[f64], wind: &[f64]) -> Result<f64> {
    let (d, w) = (energy(desired), energy(wind));
    if d == 0.0 || w == 0.0 {
        return Err(Error::UndefinedMetric("SNR with a silent signal"));
    }
    Ok(10.0 * (d / w).log10())
}

/// Scales `wind` so the pair has the requested SNR; returns `(mixture, scaled_wind)`.
pub fn mix_at_snr(desired: &[f64], wind: &[f64], snr_db: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if desired.len() != wind.len() {
        return Err(Error::shape("mix", &[desired.len()], &[wind.len()]));
    }
    let (d, w) = (energy(desired), energy(wind));
    if d == 0.0 || w == 0.0 {
        return Err(Error::UndefinedMetric("SNR with a silent signal"));
    }
    let gain = (d / (w * 10f64.powf(snr_db / 10.0))).sqrt();
    let scaled: Vec<f64> = wind.iter().map(|v| v * gain).collect();
    let mixture = desired.iter().zip(&scaled).map(|(a, b)| a + b).collect();
    Ok((mixture, scaled))
}

/// Scores of one evaluated example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileScore {
    pub name: String,
    pub snr_db: f64,
    pub si_sdr_db: f64,
    pub leakage: f64,
    /// The same metrics for the unprocessed mixture.
    pub mixture_si_sdr_db: f64,
    pub mixture_leakage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub si_sdr_db: f64,
    pub leakage: f64,
    pub mixture_si_sdr_db: f64,
    pub mixture_leakage: f64,
    pub files: Vec<FileScore>,
}

impl EvalReport {
    /// Averages per-file scores.
    pub fn from_files(files: Vec<FileScore>) -> Result<Self> {
        if files.is_empty() {
            return Err(Error::Dataset("nothing to evaluate".into()));
        }
        let n = files.len() as f64;
        let mean = |f: fn(&FileScore) -> f64| files.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            si_sdr_db: mean(|f| f.si_sdr_db),
            leakage: mean(|f| f.leakage),
            mixture_si_sdr_db: mean(|f| f.mixture_si_sdr_db),
            mixture_leakage: mean(|f| f.mixture_leakage),
            files,
        })
    }

    pub fn si_sdr_improvement_db(&self) -> f64 {
        self.si_sdr_db - self.mixture_si_sdr_db
    }

    /// One `key=value` per line, aggregates first.
    pub fn to_key_value(&self) -> String {
        let mut s = format!(
            "si_sdr_db={:.4}\nleakage={:.6}\nmixture_si_sdr_db={:.4}\nmixture_leakage={:.6}\nfiles={}\n",
            self.si_sdr_db,
            self.leakage,
            self.mixture_si_sdr_db,
            self.mixture_leakage,
            self.files.len()
        );
        for f in &self.files {
            s.push_str(&format!(
                "file={} snr_db={} si_sdr_db={:.4} leakage={:.6} mixture_si_sdr_db={:.4} mixture_leakage={:.6}\n",
                f.name, f.snr_db, f.si_sdr_db, f.leakage, f.mixture_si_sdr_db, f.mixture_leakage
            ));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
