//! MAC accounting and real-time-factor measurement.
//!
//! The compute figure in MHz is `macs_per_frame × frames_per_second`,
//! assuming one cycle per MAC. FFT work is not included.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::datagen::{gen_desired, gen_wind, DesiredGenParams, WindGenParams};
use crate::model::{ModelConfig, StreamState, WindNetLite};
use crate::nn::mac;
use crate::{Real, Result, SAMPLE_RATE_HZ};

/// Parameter and MAC cost of one layer per STFT frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub name: String,
    pub params: usize,
    pub macs: u64,
}

fn conv_cost(name: String, extent_in: usize, taps: usize, stride: usize, cin: usize, cout: usize, bn: bool) -> LayerCost {
    let out = extent_in.div_ceil(stride);
    LayerCost {
        name,
        params: taps * cin * cout + cout + if bn { 2 * cout } else { 0 },
        macs: (out * taps * cin * cout) as u64,
    }
}

/// Analytic per-layer costs derived from the configuration alone.
pub fn layer_costs(cfg: &ModelConfig) -> Result<Vec<LayerCost>> {
    cfg.validate()?;
    let k = crate::model::KERNEL_TAPS;
    let bands = cfg.reorient.n_bands / 2;
    let mut out = Vec::new();
    let mut encoder = |prefix: &str, mut extent: usize, widths: Vec<usize>, pw: usize| {
        let mut cin = bands;
        for (i, &w) in widths.iter().enumerate() {
            let s = ModelConfig::encoder_stride(i);
            out.push(conv_cost(format!("{prefix}.conv{}", i + 1), extent, k, s, cin, w, true));
            extent = extent.div_ceil(s);
            cin = w;
        }
        out.push(conv_cost(format!("{prefix}.pw"), extent, 1, 1, cin, pw, false));
    };
    encoder("lf", cfg.reorient.band_len, cfg.lf_widths(), cfg.lf_pw_width());
    encoder("hf", cfg.reorient.band_len / 2, cfg.hf_widths(), cfg.hf_pw_width());
    let (gi, gh) = (cfg.gru_input(), cfg.gru_width());
    out.push(LayerCost {
        name: "gru".into(),
        params: 3 * (gi * gh + gh * gh + gh),
        macs: (3 * (gi * gh + gh * gh)) as u64,
    });
    let ci = cfg.concat_width();
    out.push(LayerCost {
        name: "fc".into(),
        params: ci * cfg.fc_out + cfg.fc_out,
        macs: (ci * cfg.fc_out) as u64,
    });
    let mut cin = 2;
    for (i, &w) in cfg.stage2_widths().iter().enumerate() {
        out.push(conv_cost(format!("stage2.conv{}", i + 1), cfg.fc_out, k, 1, cin, w, true));
        cin = w;
    }
    out.push(conv_cost("stage2.pw".into(), cfg.fc_out, 1, 1, cin, 2, false));
    Ok(out)
}

/// Analytic MACs per STFT frame.
pub fn count_macs(cfg: &ModelConfig) -> Result<u64> {
    Ok(layer_costs(cfg)?.iter().map(|l| l.macs).sum())
}

/// MACs the layers actually execute for one streamed frame.
pub fn instrumented_macs<T: Real>(model: &WindNetLite<T>) -> Result<u64> {
    let hop = model.config().stft.hop;
    let mut state = StreamState::new(model)?;
    let mut out = vec![T::zero(); hop];
    let chunk: Vec<T> = (0..hop).map(|i| T::of_f64(((i * 37) % 17) as f64 / 17.0 - 0.5)).collect();
    // The first hop only fills the analysis window.
    model.process_frame(&chunk, &mut state, &mut out)?;
    let (r, macs) = mac::count(|| model.process_frame(&chunk, &mut state, &mut out));
    r?;
    Ok(macs)
}

/// Published real-time factor on a Cortex-A53 core, for context only.
pub const REFERENCE_RTF_A53: f64 = 0.051;
/// Published compute demand in MHz, for context only.
pub const REFERENCE_MHZ: f64 = 73.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub params: usize,
    pub macs_per_frame: u64,
    pub frames_per_second: f64,
    pub mhz: f64,
    /// Median processing time over audio duration.
    pub rtf: f64,
    /// Interquartile range of the per-repetition RTFs over their median.
    pub rtf_spread: f64,
    pub repetitions: usize,
    pub audio_seconds: f64,
    pub platform: String,
    pub fft_included: bool,
}

impl ComplexityReport {
    pub fn to_table(&self) -> String {
        format!(
            "params            {}\n\
             macs/frame        {}\n\
             frames/s          {}\n\
             compute (MHz)     {:.1}  (1 cycle/MAC, FFT excluded; published {REFERENCE_MHZ})\n\
             rtf (median)      {:.4}  (published {REFERENCE_RTF_A53} on Cortex-A53)\n\
             rtf spread        {:.1} %\n\
             repetitions       {}\n\
             audio             {} s\n\
             platform          {}\n",
            self.params,
            self.macs_per_frame,
            self.frames_per_second,
            self.mhz,
            self.rtf,
            self.rtf_spread * 100.0,
            self.repetitions,
            self.audio_seconds,
            self.platform
        )
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Times hop-by-hop streaming over a synthetic noisy signal on the calling
/// thread. `warmup` runs are discarded.
pub fn measure_rtf<T: Real>(model: &WindNetLite<T>, audio_seconds: f64, repetitions: usize, warmup: usize) -> Result<ComplexityReport> {
    let cfg = model.config();
    let hop = cfg.stft.hop;
    let duration_s = audio_seconds.max(hop as f64 / SAMPLE_RATE_HZ as f64);
    let d = gen_desired(&DesiredGenParams { duration_s, ..Default::default() })?;
    let w = gen_wind(&WindGenParams {
        duration_s: duration_s.max(0.04),
        ..Default::default()
    })?;
    let signal: Vec<T> = d
        .samples()
        .iter()
        .zip(w.samples())
        .map(|(a, b)| T::of_f64(a + b))
        .collect();
    let chunks = signal.len() / hop;
    let seconds = (chunks * hop) as f64 / SAMPLE_RATE_HZ as f64;
    let mut state = StreamState::new(model)?;
    let mut out = vec![T::zero(); hop];
    let mut sink = T::zero();
    let mut times = Vec::with_capacity(repetitions);
    for rep in 0..warmup + repetitions.max(1) {
        state.reset();
        let start = Instant::now();
        for c in signal.chunks_exact(hop) {
            model.process_frame(c, &mut state, &mut out)?;
            sink = sink + out[0];
        }
        let elapsed = start.elapsed().as_secs_f64();
        if rep >= warmup {
            times.push(elapsed / seconds);
        }
    }
    std::hint::black_box(sink);
    times.sort_by(f64::total_cmp);
    let median = quantile(&times, 0.5);
    let spread = (quantile(&times, 0.75) - quantile(&times, 0.25)) / median;
    let macs = count_macs(cfg)?;
    let fps = SAMPLE_RATE_HZ as f64 / hop as f64;
    Ok(ComplexityReport {
        params: model.param_count(),
        macs_per_frame: macs,
        frames_per_second: fps,
        mhz: macs as f64 * fps / 1e6,
        rtf: median,
        rtf_spread: spread,
        repetitions: times.len(),
        audio_seconds: seconds,
        platform: format!(
            "{}-{}, {}-bit scalars, single thread",
            std::env::consts::ARCH,
            std::env::consts::OS,
            std::mem::size_of::<T>() * 8
        ),
        fft_included: false,
    })
}
