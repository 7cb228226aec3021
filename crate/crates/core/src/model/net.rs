use num_complex::Complex;

use super::{ModelConfig, KERNEL_TAPS};
use crate::dsp::{
    decompress_value, mag_phase, power_law_compress, reorient, split_bands, wrap_phase, ComplexSpectrogram, MagPhase,
    StftConfig, SubBandTensor,
};
use crate::nn::{avgpool, relu, sigmoid, BatchNorm, Conv2d, Dense, Gru, Tensor};
use crate::{Error, Real, Result};

/// Conv followed by batch normalization and ReLU.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<T> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm<T>,
}

impl<T: Real> ConvBlock<T> {
    pub fn zeros(in_ch: usize, out_ch: usize, stride: usize) -> Self {
        Self {
            conv: Conv2d::zeros(KERNEL_TAPS, in_ch, out_ch, stride),
            bn: BatchNorm::new(out_ch),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(relu(&self.bn.forward_infer(&self.conv.forward(x)?)?))
    }
}

/// How a tensor is initialized and whether the optimizer touches it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    /// Conv kernel followed by ReLU.
    ReluKernel,
    /// Linear pointwise conv, mask layer, GRU input kernel.
    LinearKernel,
    /// GRU recurrent kernel.
    Recurrent,
    Bias,
    BnGamma,
    BnBeta,
    RunningMean,
    RunningVar,
}

impl TensorRole {
    pub fn trainable(self) -> bool {
        !matches!(self, TensorRole::RunningMean | TensorRole::RunningVar)
    }
}

/// Intermediate real-valued mask, `[T, bins]`, entries in (0, 1).
pub type IntermediateMask<T> = Tensor<T>;

/// Second-stage complex mask in polar form, each `T×bins` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMask<T> {
    pub mag: Vec<T>,
    pub phase: Vec<T>,
}

impl<T: Real> ComplexMask<T> {
    /// Reads the two pointwise output channels as `(Re M, Im M)`.
    pub fn from_cartesian(m: &Tensor<T>) -> Result<Self> {
        let [_, _, c] = m.dims3("complex mask")?;
        if c != 2 {
            return Err(Error::shape("complex mask", &[m.dims()[0], m.dims()[1], 2], m.dims()));
        }
        let (mag, phase) = m
            .data()
            .chunks_exact(2)
            .map(|p| (p[0].hypot(p[1]), wrap_phase(p[1], p[0])))
            .unzip();
        Ok(Self { mag, phase })
    }
}

/// `(junction, dims)` pairs recorded along a forward pass.
pub type ShapeTrace = Vec<(String, Vec<usize>)>;

fn trace<T: Real>(tr: &mut Option<&mut ShapeTrace>, name: &str, t: &Tensor<T>) {
    if let Some(tr) = tr.as_deref_mut() {
        tr.push((name.to_string(), t.dims().to_vec()));
    }
}

/// Prefixes a shape error with the layer it came from.
pub(crate) fn at<R>(layer: &str, r: Result<R>) -> Result<R> {
    r.map_err(|e| match e {
        Error::Shape {
            junction,
            expected,
            got,
        } => Error::Shape {
            junction: format!("{layer} ({junction})"),
            expected,
            got,
        },
        other => other,
    })
}

/// The two-stage masking network.
#[derive(Debug, Clone, PartialEq)]
pub struct WindNetLite<T> {
    cfg: ModelConfig,
    pub lf: Vec<ConvBlock<T>>,
    pub lf_pw: Conv2d<T>,
    pub hf: Vec<ConvBlock<T>>,
    pub hf_pw: Conv2d<T>,
    pub gru: Gru<T>,
    pub fc: Dense<T>,
    pub stage2: Vec<ConvBlock<T>>,
    pub stage2_pw: Conv2d<T>,
}

fn blocks<T: Real>(in_ch: usize, widths: &[usize], strided: bool) -> Vec<ConvBlock<T>> {
    let mut cin = in_ch;
    widths
        .iter()
        .enumerate()
        .map(|(l, &w)| {
            let s = if strided { ModelConfig::encoder_stride(l) } else { 1 };
            let b = ConvBlock::zeros(cin, w, s);
            cin = w;
            b
        })
        .collect()
}

impl<T: Real> WindNetLite<T> {
    /// All-zero network (BN at identity statistics) shaped for `cfg`.
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let bands = cfg.reorient.n_bands / 2;
        let lf = blocks(bands, &cfg.lf_widths(), true);
        let hf = blocks(bands, &cfg.hf_widths(), true);
        let stage2 = blocks(2, &cfg.stage2_widths(), false);
        let last = |b: &[ConvBlock<T>]| b.last().map(|b| b.conv.out_ch()).unwrap_or(0);
        Ok(Self {
            lf_pw: Conv2d::zeros(1, last(&lf), cfg.lf_pw_width(), 1),
            hf_pw: Conv2d::zeros(1, last(&hf), cfg.hf_pw_width(), 1),
            stage2_pw: Conv2d::zeros(1, last(&stage2), 2, 1),
            gru: Gru::zeros(cfg.gru_input(), cfg.gru_width()),
            fc: Dense::zeros(cfg.concat_width(), cfg.fc_out),
            lf,
            hf,
            stage2,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Overrides mode and power-law factor; the topology is unaffected.
    pub fn set_mode(&mut self, mode: super::Mode, alpha: f64) -> Result<()> {
        let mut cfg = self.cfg.clone();
        cfg.mode = mode;
        cfg.alpha = alpha;
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    /// Every tensor with its weight-file name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>, TensorRole)> {
        let mut out = Vec::new();
        fn push_blocks<'a, T>(out: &mut Vec<(String, &'a Tensor<T>, TensorRole)>, prefix: &str, bl: &'a [ConvBlock<T>]) {
            for (i, b) in bl.iter().enumerate() {
                let n = i + 1;
                out.push((format!("{prefix}.conv{n}.kernel"), &b.conv.kernel, TensorRole::ReluKernel));
                out.push((format!("{prefix}.conv{n}.bias"), &b.conv.bias, TensorRole::Bias));
                out.push((format!("{prefix}.bn{n}.gamma"), &b.bn.gamma, TensorRole::BnGamma));
                out.push((format!("{prefix}.bn{n}.beta"), &b.bn.beta, TensorRole::BnBeta));
                out.push((format!("{prefix}.bn{n}.running_mean"), &b.bn.running_mean, TensorRole::RunningMean));
                out.push((format!("{prefix}.bn{n}.running_var"), &b.bn.running_var, TensorRole::RunningVar));
            }
        }
        push_blocks(&mut out, "lf", &self.lf);
        out.push(("lf.pw.kernel".into(), &self.lf_pw.kernel, TensorRole::LinearKernel));
        out.push(("lf.pw.bias".into(), &self.lf_pw.bias, TensorRole::Bias));
        push_blocks(&mut out, "hf", &self.hf);
        out.push(("hf.pw.kernel".into(), &self.hf_pw.kernel, TensorRole::LinearKernel));
        out.push(("hf.pw.bias".into(), &self.hf_pw.bias, TensorRole::Bias));
        for (name, t) in GRU_NAMES.iter().zip(self.gru.tensors()) {
            out.push((format!("gru.{name}"), t, gru_role(name)));
        }
        out.push(("fc.weight".into(), &self.fc.weight, TensorRole::LinearKernel));
        out.push(("fc.bias".into(), &self.fc.bias, TensorRole::Bias));
        push_blocks(&mut out, "stage2", &self.stage2);
        out.push(("stage2.pw.kernel".into(), &self.stage2_pw.kernel, TensorRole::LinearKernel));
        out.push(("stage2.pw.bias".into(), &self.stage2_pw.bias, TensorRole::Bias));
        out
    }

    /// Mutable counterpart of [`named_tensors`](Self::named_tensors), same order.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>, TensorRole)> {
        let mut out = Vec::new();
        fn push_blocks<'a, T>(out: &mut Vec<(String, &'a mut Tensor<T>, TensorRole)>, prefix: &str, bl: &'a mut [ConvBlock<T>]) {
            for (i, b) in bl.iter_mut().enumerate() {
                let n = i + 1;
                out.push((format!("{prefix}.conv{n}.kernel"), &mut b.conv.kernel, TensorRole::ReluKernel));
                out.push((format!("{prefix}.conv{n}.bias"), &mut b.conv.bias, TensorRole::Bias));
                out.push((format!("{prefix}.bn{n}.gamma"), &mut b.bn.gamma, TensorRole::BnGamma));
                out.push((format!("{prefix}.bn{n}.beta"), &mut b.bn.beta, TensorRole::BnBeta));
                out.push((format!("{prefix}.bn{n}.running_mean"), &mut b.bn.running_mean, TensorRole::RunningMean));
                out.push((format!("{prefix}.bn{n}.running_var"), &mut b.bn.running_var, TensorRole::RunningVar));
            }
        }
        push_blocks(&mut out, "lf", &mut self.lf);
        out.push(("lf.pw.kernel".into(), &mut self.lf_pw.kernel, TensorRole::LinearKernel));
        out.push(("lf.pw.bias".into(), &mut self.lf_pw.bias, TensorRole::Bias));
        push_blocks(&mut out, "hf", &mut self.hf);
        out.push(("hf.pw.kernel".into(), &mut self.hf_pw.kernel, TensorRole::LinearKernel));
        out.push(("hf.pw.bias".into(), &mut self.hf_pw.bias, TensorRole::Bias));
        for (name, t) in GRU_NAMES.iter().zip(self.gru.tensors_mut()) {
            out.push((format!("gru.{name}"), t, gru_role(name)));
        }
        out.push(("fc.weight".into(), &mut self.fc.weight, TensorRole::LinearKernel));
        out.push(("fc.bias".into(), &mut self.fc.bias, TensorRole::Bias));
        push_blocks(&mut out, "stage2", &mut self.stage2);
        out.push(("stage2.pw.kernel".into(), &mut self.stage2_pw.kernel, TensorRole::LinearKernel));
        out.push(("stage2.pw.bias".into(), &mut self.stage2_pw.bias, TensorRole::Bias));
        out
    }

    /// Trainable scalar count (running statistics excluded).
    pub fn param_count(&self) -> usize {
        self.named_tensors()
            .iter()
            .filter(|(_, _, r)| r.trainable())
            .map(|(_, t, _)| t.len())
            .sum()
    }

    /// Same weights in another scalar type.
    pub fn cast<U: Real>(&self) -> WindNetLite<U> {
        let mut out = WindNetLite::<U>::zeros(&self.cfg).expect("validated config");
        for ((_, dst, _), (_, src, _)) in out.named_tensors_mut().into_iter().zip(self.named_tensors()) {
            *dst = src.cast();
        }
        out
    }

    /// First stage: sub-band features to the intermediate mask `[T, bins]`.
    ///
    /// `low` and `high` are `[T, L, 5]`. The GRU starts from `hidden` and
    /// leaves its final state there, so consecutive calls continue a stream.
    pub fn stage1_forward(
        &self,
        low: &Tensor<T>,
        high: &Tensor<T>,
        hidden: &mut [T],
        mut tr: Option<&mut ShapeTrace>,
    ) -> Result<IntermediateMask<T>> {
        let bands = self.cfg.reorient.n_bands / 2;
        let want = [low.dims().first().copied().unwrap_or(0), self.cfg.reorient.band_len, bands];
        if low.dims() != want {
            return Err(Error::shape("lf input", &want, low.dims()));
        }
        if high.dims() != want {
            return Err(Error::shape("hf input", &want, high.dims()));
        }
        if hidden.len() != self.gru.hidden_dim() {
            return Err(Error::shape("gru state", &[self.gru.hidden_dim()], &[hidden.len()]));
        }
        let rows = want[0];
        trace(&mut tr, "lf.input", low);
        let mut a = low.clone();
        for (i, b) in self.lf.iter().enumerate() {
            a = at(&format!("lf.conv{}", i + 1), b.forward(&a))?;
            trace(&mut tr, &format!("lf.conv{}", i + 1), &a);
        }
        let c_l = at("lf.pw", self.lf_pw.forward(&a))?;
        trace(&mut tr, "lf.pw", &c_l);

        trace(&mut tr, "hf.input", high);
        let mut a = at("hf.pool", avgpool(high))?;
        trace(&mut tr, "hf.pool", &a);
        for (i, b) in self.hf.iter().enumerate() {
            a = at(&format!("hf.conv{}", i + 1), b.forward(&a))?;
            trace(&mut tr, &format!("hf.conv{}", i + 1), &a);
        }
        let c_h = at("hf.pw", self.hf_pw.forward(&a))?;
        trace(&mut tr, "hf.pw", &c_h);

        let gin = c_l.len() / rows.max(1);
        if gin != self.gru.input_dim() {
            return Err(Error::shape("gru input", &[rows, self.gru.input_dim()], &[rows, gin]));
        }
        let nh = self.gru.hidden_dim();
        let hf_flat = c_h.len() / rows.max(1);
        let width = nh + hf_flat;
        let mut concat = vec![T::zero(); rows * width];
        let mut next = vec![T::zero(); nh];
        for (t, row) in concat.chunks_exact_mut(width).enumerate() {
            self.gru.step(&c_l.data()[t * gin..][..gin], hidden, &mut next)?;
            hidden.copy_from_slice(&next);
            row[..nh].copy_from_slice(hidden);
            row[nh..].copy_from_slice(&c_h.data()[t * hf_flat..][..hf_flat]);
        }
        if let Some(tr) = tr.as_deref_mut() {
            tr.push(("gru.input".into(), vec![rows, gin]));
            tr.push(("gru.output".into(), vec![rows, nh]));
        }
        let concat = Tensor::new(&[rows, width], concat)?;
        trace(&mut tr, "concat", &concat);
        let mask = sigmoid(&at("fc", self.fc.forward(&concat))?);
        trace(&mut tr, "fc", &mask);
        Ok(mask)
    }

    /// Second stage: intermediate complex features `[T, bins, 2]` to the complex mask.
    pub fn stage2_forward(&self, features: &Tensor<T>, mut tr: Option<&mut ShapeTrace>) -> Result<ComplexMask<T>> {
        let mut a = features.clone();
        trace(&mut tr, "stage2.input", &a);
        for (i, b) in self.stage2.iter().enumerate() {
            a = at(&format!("stage2.conv{}", i + 1), b.forward(&a))?;
            trace(&mut tr, &format!("stage2.conv{}", i + 1), &a);
        }
        let m = at("stage2.pw", self.stage2_pw.forward(&a))?;
        trace(&mut tr, "stage2.pw", &m);
        ComplexMask::from_cartesian(&m)
    }

    /// Runs both stages on a spectrogram and returns the estimate in the
    /// linear STFT domain (desired signal or wind depending on mode).
    pub fn estimate_spectrogram(
        &self,
        spec: &ComplexSpectrogram<T>,
        hidden: &mut [T],
        mut tr: Option<&mut ShapeTrace>,
    ) -> Result<ComplexSpectrogram<T>> {
        let comp = power_law_compress(spec, self.cfg.alpha)?;
        let mp = mag_phase(&comp);
        let (low, high) = split_bands(&reorient(&mp, &self.cfg.reorient)?)?;
        let mask = self.stage1_forward(&band_tensor(low)?, &band_tensor(high)?, hidden, tr.as_deref_mut())?;
        let feats = intermediate_features(&mask, &mp.phase)?;
        let cm = self.stage2_forward(&feats, tr)?;
        reconstruct(&mp, &cm, self.cfg.alpha, self.cfg.stft)
    }
}

const GRU_NAMES: [&str; 9] = ["W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h"];

fn gru_role(name: &str) -> TensorRole {
    match name.as_bytes()[0] {
        b'W' => TensorRole::LinearKernel,
        b'U' => TensorRole::Recurrent,
        _ => TensorRole::Bias,
    }
}

/// `[T, L, bands]` tensor view of a sub-band group.
pub fn band_tensor<T: Real>(s: SubBandTensor<T>) -> Result<Tensor<T>> {
    let dims = s.dims();
    Tensor::new(&dims, s.into_data())
}

/// `(M̄·cos φ, M̄·sin φ)` stacked as two channels, `[T, bins, 2]`.
pub fn intermediate_features<T: Real>(mask: &Tensor<T>, phase: &[T]) -> Result<Tensor<T>> {
    let [rows, bins] = mask.dims2("intermediate features")?;
    if phase.len() != rows * bins {
        return Err(Error::shape("intermediate features", &[rows * bins], &[phase.len()]));
    }
    let mut out = Vec::with_capacity(rows * bins * 2);
    for (&m, &p) in mask.data().iter().zip(phase) {
        out.push(m * p.cos());
        out.push(m * p.sin());
    }
    Tensor::new(&[rows, bins, 2], out)
}

/// Applies the complex mask in polar form, `X̃_m·M_m·e^{j(X̃_p + M_p)}`, then
/// undoes the power-law compression.
pub fn reconstruct<T: Real>(
    x: &MagPhase<T>,
    m: &ComplexMask<T>,
    alpha: f64,
    stft: StftConfig,
) -> Result<ComplexSpectrogram<T>> {
    let n = x.mag.len();
    if m.mag.len() != n || m.phase.len() != n {
        return Err(Error::shape("reconstruct", &[n], &[m.mag.len()]));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Param(format!("power-law factor {alpha} outside (0, 1]")));
    }
    let beta = T::of_f64(1.0 / alpha);
    let data = (0..n)
        .map(|i| {
            let r = x.mag[i] * m.mag[i];
            let p = x.phase[i] + m.phase[i];
            let c = Complex::new(r * p.cos(), r * p.sin());
            Complex::new(
                decompress_value(c.re, beta),
                decompress_value(c.im, beta),
            )
        })
        .collect();
    ComplexSpectrogram::new(x.n_frames(), data, stft)
}
