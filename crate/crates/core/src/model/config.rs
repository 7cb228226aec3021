use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::{ReorientConfig, StftConfig};
use crate::{Error, Result};

/// What the network estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Mask the mixture down to the desired signal.
    Rejection,
    /// Estimate the wind and subtract it from the (delayed) mixture.
    Extraction,
}

impl Mode {
    /// Power-law factor each mode trains and runs with unless overridden.
    pub fn default_alpha(self) -> f64 {
        match self {
            Mode::Rejection => 0.3,
            Mode::Extraction => 1.0,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Rejection => "rejection",
            Mode::Extraction => "extraction",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rejection" => Ok(Mode::Rejection),
            "extraction" => Ok(Mode::Extraction),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected rejection or extraction)"
            ))),
        }
    }
}

/// Network topology and signal-chain settings.
///
/// `scale` multiplies every channel count (rounded up, at least 2) including
/// the GRU width; the mask layer always has one unit per STFT bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub mode: Mode,
    pub alpha: f64,
    pub scale: f64,
    pub lf_filters: Vec<usize>,
    pub hf_filters: Vec<usize>,
    pub lf_pointwise: usize,
    pub hf_pointwise: usize,
    pub gru_units: usize,
    pub fc_out: usize,
    pub stage2_filters: Vec<usize>,
    pub reorient: ReorientConfig,
    pub stft: StftConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::reference(Mode::Rejection)
    }
}

/// Convolution kernel width along frequency, shared by every non-pointwise conv.
pub const KERNEL_TAPS: usize = 3;

/// Sub-bands routed to each encoder.
pub const BANDS_PER_ENCODER: usize = 5;

impl ModelConfig {
    /// Full-size network for `mode` with that mode's default power-law factor.
    pub fn reference(mode: Mode) -> Self {
        Self {
            mode,
            alpha: mode.default_alpha(),
            scale: 1.0,
            lf_filters: vec![32, 64, 96, 128],
            hf_filters: vec![8, 16, 64],
            lf_pointwise: 32,
            hf_pointwise: 16,
            gru_units: 128,
            fc_out: 257,
            stage2_filters: vec![32, 32],
            reorient: ReorientConfig::default(),
            stft: StftConfig::default(),
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.reorient.validate(self.stft.n_bins())?;
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::Config(format!("scale {} outside (0, 1]", self.scale)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if self.reorient.n_bands != 2 * BANDS_PER_ENCODER {
            return Err(Error::Config(format!(
                "encoders expect {} sub-bands, layout has {}",
                2 * BANDS_PER_ENCODER,
                self.reorient.n_bands
            )));
        }
        if self.fc_out != self.stft.n_bins() {
            return Err(Error::Config(format!(
                "mask width {} must equal the bin count {}",
                self.fc_out,
                self.stft.n_bins()
            )));
        }
        let widths = [
            &self.lf_filters[..],
            &self.hf_filters,
            &self.stage2_filters,
            &[self.lf_pointwise, self.hf_pointwise, self.gru_units],
        ];
        if self.lf_filters.is_empty()
            || self.hf_filters.is_empty()
            || self.stage2_filters.is_empty()
            || widths.iter().any(|w| w.contains(&0))
        {
            return Err(Error::Config("every layer needs at least one channel".into()));
        }
        let lf_out = self.lf_extents().last().copied().unwrap_or(0);
        let hf_out = self.hf_extents().last().copied().unwrap_or(0);
        if lf_out == 0 || hf_out == 0 {
            return Err(Error::Config("encoder strides leave no frequency positions".into()));
        }
        Ok(())
    }

    /// Applies the width multiplier to a nominal channel count.
    pub fn width(&self, nominal: usize) -> usize {
        if self.scale == 1.0 {
            nominal
        } else {
            ((nominal as f64 * self.scale).ceil() as usize).max(2)
        }
    }

    pub fn lf_widths(&self) -> Vec<usize> {
        self.lf_filters.iter().map(|&c| self.width(c)).collect()
    }

    pub fn hf_widths(&self) -> Vec<usize> {
        self.hf_filters.iter().map(|&c| self.width(c)).collect()
    }

    pub fn stage2_widths(&self) -> Vec<usize> {
        self.stage2_filters.iter().map(|&c| self.width(c)).collect()
    }

    pub fn lf_pw_width(&self) -> usize {
        self.width(self.lf_pointwise)
    }

    pub fn hf_pw_width(&self) -> usize {
        self.width(self.hf_pointwise)
    }

    pub fn gru_width(&self) -> usize {
        self.width(self.gru_units)
    }

    /// First conv of each encoder keeps the extent, later ones halve it.
    pub fn encoder_stride(layer: usize) -> usize {
        if layer == 0 {
            1
        } else {
            2
        }
    }

    /// Frequency extent after each LF conv.
    pub fn lf_extents(&self) -> Vec<usize> {
        strided_extents(self.reorient.band_len, self.lf_filters.len())
    }

    /// Frequency extent after each HF conv (the input is pooled first).
    pub fn hf_extents(&self) -> Vec<usize> {
        strided_extents(self.reorient.band_len / 2, self.hf_filters.len())
    }

    /// Flattened LF encoder output, i.e. the GRU input size.
    pub fn gru_input(&self) -> usize {
        self.lf_extents().last().copied().unwrap_or(0) * self.lf_pw_width()
    }

    /// Flattened HF encoder output.
    pub fn hf_flat(&self) -> usize {
        self.hf_extents().last().copied().unwrap_or(0) * self.hf_pw_width()
    }

    /// Input width of the mask layer.
    pub fn concat_width(&self) -> usize {
        self.gru_width() + self.hf_flat()
    }
}

fn strided_extents(mut extent: usize, layers: usize) -> Vec<usize> {
    (0..layers)
        .map(|l| {
            extent = extent.div_ceil(ModelConfig::encoder_stride(l));
            extent
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_dims() {
        let c = ModelConfig::reference(Mode::Rejection);
        c.validate().unwrap();
        assert_eq!(c.lf_extents(), vec![40, 20, 10, 5]);
        assert_eq!(c.hf_extents(), vec![20, 10, 5]);
        assert_eq!(c.gru_input(), 160);
        assert_eq!(c.concat_width(), 208);
    }

    #[test]
    fn scaled_widths_round_up() {
        let c = ModelConfig::reference(Mode::Extraction).with_scale(0.25);
        assert_eq!(c.lf_widths(), vec![8, 16, 24, 32]);
        assert_eq!(c.hf_widths(), vec![2, 4, 16]);
        assert_eq!(c.gru_width(), 32);
        assert_eq!(c.hf_pw_width(), 4);
        assert_eq!(c.fc_out, 257);
        let tiny = c.with_scale(0.01);
        assert!(tiny.lf_widths().iter().all(|&w| w == 2));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("extraction".parse::<Mode>().unwrap(), Mode::Extraction);
        assert!("both".parse::<Mode>().is_err());
        assert_eq!(Mode::Rejection.default_alpha(), 0.3);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ModelConfig::default();
        c.fc_out = 256;
        assert!(c.validate().is_err());
        assert!(ModelConfig::default().with_scale(0.0).validate().is_err());
        assert!(ModelConfig::default().with_alpha(1.5).validate().is_err());
    }

    #[test]
    fn json_rejects_unknown_keys() {
        let err = serde_json::from_str::<ModelConfig>(r#"{"mode":"rejection","alhpa":0.3}"#);
        assert!(err.is_err());
        let ok: ModelConfig = serde_json::from_str(r#"{"mode":"extraction","alpha":1.0}"#).unwrap();
        assert_eq!(ok.mode, Mode::Extraction);
    }
}
