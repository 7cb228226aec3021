//! Toy-scale training: compressed-domain MSE, Adam, step-decayed learning
//! rate, best-checkpoint selection, and the power-law factor sweep.

mod features;
mod graph;

pub use features::{Batch, ClipFeatures};
pub use graph::{train_pass, update_running_stats, TrainPass};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::Example;
use crate::dsp::{
    mag_phase, power_law_compress, reorient, split_bands, stft_samples, CompressedSpectrogram,
    StftConfig,
};
use crate::metrics::{leakage, si_sdr, EvalReport, FileScore};
use crate::model::{band_tensor, intermediate_features, Mode, ModelConfig, WindNetLite};
use crate::nn::Tensor;
use crate::weights::WeightStore;
use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr0: f64,
    /// The learning rate drops by `lr_decay_factor` every `lr_decay_every` epochs.
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Run a finite-difference gradient check on the first batch.
    pub grad_check: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 4e-4,
            lr_decay_every: 3,
            lr_decay_factor: 10.0,
            batch_size: 8,
            epochs: 6,
            seed: 0,
            grad_check: false,
        }
    }
}

impl TrainConfig {
    /// Schedule used for the synthetic toy set: small batches and a higher
    /// initial rate, since a few hundred clips give far fewer optimizer
    /// steps per epoch than a full corpus.
    pub fn toy() -> Self {
        Self {
            lr0: 5e-3,
            lr_decay_every: 6,
            batch_size: 2,
            epochs: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) || self.batch_size == 0 || self.lr_decay_every == 0 || !(self.lr_decay_factor >= 1.0) {
            return Err(Error::Config(format!("invalid training config {self:?}")));
        }
        Ok(())
    }
}

/// `lr0 · factor^(−floor(epoch / every))`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr0 * cfg.lr_decay_factor.powi(-((epoch / cfg.lr_decay_every) as i32))
}

/// Mean over all cells of `(Δre² + Δim²)/2`.
pub fn loss<T: Real>(estimate: &CompressedSpectrogram<T>, target: &CompressedSpectrogram<T>) -> Result<f64> {
    if estimate.alpha() != target.alpha() {
        return Err(Error::Param(format!(
            "loss between spectra compressed with α={} and α={}",
            estimate.alpha(),
            target.alpha()
        )));
    }
    if estimate.real.len() != target.real.len() {
        return Err(Error::shape(
            "loss",
            &[target.n_frames(), target.n_bins()],
            &[estimate.n_frames(), estimate.n_bins()],
        ));
    }
    if estimate.real.is_empty() {
        return Err(Error::EmptyInput("loss"));
    }
    let sum: f64 = (0..estimate.real.len())
        .map(|i| {
            let dr = (estimate.real[i] - target.real[i]).as_f64();
            let di = (estimate.imag[i] - target.imag[i]).as_f64();
            0.5 * (dr * dr + di * di)
        })
        .sum();
    Ok(sum / estimate.real.len() as f64)
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moments for every trainable tensor.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(model: &WindNetLite<T>) -> Self {
        let zeros: Vec<Tensor<T>> = model
            .named_tensors()
            .into_iter()
            .filter(|(_, _, r)| r.trainable())
            .map(|(_, t, _)| t.zeros_like())
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, model: &mut WindNetLite<T>, grads: &WindNetLite<T>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (T::of_f64(ADAM_BETA1), T::of_f64(ADAM_BETA2));
        let step = T::of_f64(lr * (1.0 - ADAM_BETA2.powi(t)).sqrt() / (1.0 - ADAM_BETA1.powi(t)));
        let eps = T::of_f64(ADAM_EPS);
        let params = model.named_tensors_mut().into_iter().filter(|(_, _, r)| r.trainable());
        let gs = grads.named_tensors().into_iter().filter(|(_, _, r)| r.trainable());
        for (((_, p, _), (_, g, _)), (m, v)) in params.zip(gs).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                *p = *p - step * *m / (v.sqrt() + eps);
            }
        }
    }
}

/// One optimizer step on a batch; returns the loss before the update.
pub fn train_step<T: Real>(model: &mut WindNetLite<T>, adam: &mut AdamState<T>, batch: &Batch<T>, lr: f64) -> Result<f64> {
    let pass = train_pass(model, batch, true)?;
    let grads = pass.grads.expect("requested");
    update_running_stats(model, &pass.bn_stats);
    adam.update(model, &grads, lr);
    Ok(pass.loss)
}

/// Compressed-domain estimate of the inference path (running BN statistics),
/// `X̃_m·M_m·e^{j(X̃_p + M_p)}`, for one clip.
pub fn estimate_compressed<T: Real>(model: &WindNetLite<T>, mixture: &[T]) -> Result<CompressedSpectrogram<T>> {
    let cfg = model.config();
    let comp = power_law_compress(&stft_samples(mixture, cfg.stft)?, cfg.alpha)?;
    let mp = mag_phase(&comp);
    let (low, high) = split_bands(&reorient(&mp, &cfg.reorient)?)?;
    let mut hidden = vec![T::zero(); model.gru.hidden_dim()];
    let mask = model.stage1_forward(&band_tensor(low)?, &band_tensor(high)?, &mut hidden, None)?;
    let cm = model.stage2_forward(&intermediate_features(&mask, &mp.phase)?, None)?;
    let (real, imag) = (0..mp.mag.len())
        .map(|i| {
            let r = mp.mag[i] * cm.mag[i];
            let p = mp.phase[i] + cm.phase[i];
            (r * p.cos(), r * p.sin())
        })
        .unzip();
    CompressedSpectrogram::new(comp.n_frames(), real, imag, cfg.alpha, cfg.stft)
}

/// Inference-mode loss against the mode's target, averaged over clips.
pub fn eval_loss<T: Real>(model: &WindNetLite<T>, examples: &[Example]) -> Result<f64> {
    let cfg = model.config();
    let mut total = 0.0;
    for ex in examples {
        let x: Vec<T> = ex.mixture.iter().map(|&v| T::of_f64(v)).collect();
        let target = match cfg.mode {
            Mode::Rejection => &ex.desired,
            Mode::Extraction => &ex.wind,
        };
        let t: Vec<T> = target.iter().map(|&v| T::of_f64(v)).collect();
        let t = power_law_compress(&stft_samples(&t, cfg.stft)?, cfg.alpha)?;
        total += loss(&estimate_compressed(model, &x)?, &t)?;
    }
    Ok(total / examples.len().max(1) as f64)
}

fn spectrum(x: &[f64]) -> Result<crate::dsp::ComplexSpectrogram<f64>> {
    stft_samples(x, StftConfig::default())
}

/// Scores the network's desired-signal estimate against the clean stem,
/// aligned for the processing delay, next to the unprocessed mixture.
pub fn evaluate<T: Real>(model: &WindNetLite<T>, examples: &[Example]) -> Result<EvalReport> {
    let lat = model.latency();
    let files = examples
        .iter()
        .map(|ex| {
            let x: Vec<T> = ex.mixture.iter().map(|&v| T::of_f64(v)).collect();
            let out = model.process_samples(&x)?;
            let n = model.valid_len(x.len());
            if n < StftConfig::default().win_len {
                return Err(Error::Dataset(format!("{}: too short to evaluate", ex.name)));
            }
            let est: Vec<f64> = out[lat..lat + n].iter().map(|v| v.as_f64()).collect();
            let (d, w, m) = (&ex.desired[..n], &ex.wind[..n], &ex.mixture[..n]);
            let wspec = spectrum(w)?;
            Ok(FileScore {
                name: ex.name.clone(),
                snr_db: ex.snr_db,
                si_sdr_db: si_sdr(&est, d)?,
                leakage: leakage(&spectrum(&est)?, &wspec)?,
                mixture_si_sdr_db: si_sdr(m, d)?,
                mixture_leakage: leakage(&spectrum(m)?, &wspec)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_files(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_si_sdr_db: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Weights of the epoch with the lowest validation loss.
    pub weights: WeightStore,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Trains a fresh network in f32 and keeps the best-validation checkpoint.
/// Deterministic for a given seed.
pub fn fit(train: &[Example], val: &[Example], mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<FitOutcome> {
    fit_with(train, val, mcfg, tcfg, |_| {})
}

/// [`fit`] with a callback after every epoch.
pub fn fit_with(
    train: &[Example],
    val: &[Example],
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitOutcome> {
    tcfg.validate()?;
    if train.is_empty() {
        return Err(Error::Dataset("training split is empty".into()));
    }
    if val.is_empty() {
        return Err(Error::Dataset("validation split is empty".into()));
    }
    let mut model = WindNetLite::<f32>::init(mcfg, tcfg.seed)?;
    if tcfg.grad_check {
        let probe: Vec<&Example> = train.iter().take(2).collect();
        let worst = gradcheck_model(&model.cast::<f64>(), &Batch::from_examples(&probe, mcfg)?, 25, tcfg.seed)?;
        log::info!("gradient check: max relative error {worst:.2e}");
        if worst > 1e-4 {
            return Err(Error::NonFinite(format!("gradient check failed, rel err {worst:.2e}")));
        }
    }
    let feats = train
        .iter()
        .map(|e| ClipFeatures::<f32>::new(e, mcfg))
        .collect::<Result<Vec<_>>>()?;
    let mut adam = AdamState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed ^ 0x7472_6169_6e00);
    let mut order: Vec<usize> = (0..feats.len()).collect();
    let mut history = Vec::with_capacity(tcfg.epochs);
    let mut best: Option<(f64, usize, WindNetLite<f32>)> = None;
    for epoch in 0..tcfg.epochs {
        let lr = lr_at(epoch, tcfg);
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut steps = 0;
        for chunk in order.chunks(tcfg.batch_size) {
            let clips: Vec<&ClipFeatures<f32>> = chunk.iter().map(|&i| &feats[i]).collect();
            sum += train_step(&mut model, &mut adam, &Batch::from_clips(&clips, mcfg)?, lr)?;
            steps += 1;
        }
        let val_loss = eval_loss(&model, val)?;
        let val_si_sdr_db = evaluate(&model, val)?.si_sdr_db;
        let rec = EpochRecord {
            epoch,
            lr,
            train_loss: sum / steps as f64,
            val_loss,
            val_si_sdr_db,
        };
        log::info!("{rec:?}");
        on_epoch(&rec);
        history.push(rec);
        if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
            best = Some((val_loss, epoch, model.clone()));
        }
    }
    let (_, best_epoch, best_model) = match best {
        Some(b) => b,
        None => (f64::NAN, 0, model),
    };
    Ok(FitOutcome {
        weights: WeightStore::from_model(&best_model, tcfg.seed),
        best_epoch,
        history,
    })
}

/// Largest relative error between analytic and central-difference
/// gradients over `samples` randomly chosen trainable scalars.
pub fn gradcheck_model(model: &WindNetLite<f64>, batch: &Batch<f64>, samples: usize, seed: u64) -> Result<f64> {
    use crate::nn::gradcheck::rel_err;
    use rand::Rng;
    let pass = train_pass(model, batch, true)?;
    let grads = pass.grads.expect("requested");
    let analytic: Vec<(String, Vec<f64>)> = grads
        .named_tensors()
        .into_iter()
        .filter(|(_, _, r)| r.trainable())
        .map(|(n, t, _)| (n, t.data().to_vec()))
        .collect();
    let total: usize = analytic.iter().map(|(_, d)| d.len()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let h = 1e-5;
    for _ in 0..samples {
        let mut k = rng.random_range(0..total);
        let (ti, idx) = analytic
            .iter()
            .enumerate()
            .find_map(|(ti, (_, d))| {
                if k < d.len() {
                    Some((ti, k))
                } else {
                    k -= d.len();
                    None
                }
            })
            .expect("index in range");
        let eval = |delta: f64| -> Result<f64> {
            let mut m = model.clone();
            let mut params: Vec<_> = m.named_tensors_mut().into_iter().filter(|(_, _, r)| r.trainable()).collect();
            params[ti].1.data_mut()[idx] += delta;
            Ok(train_pass(&m, batch, false)?.loss)
        };
        let numeric = (eval(h)? - eval(-h)?) / (2.0 * h);
        worst = worst.max(rel_err(analytic[ti].1[idx], numeric));
    }
    Ok(worst)
}

/// Power-law factors of the sweep grid, 0.3 to 1.0 in steps of 0.1.
pub fn alpha_grid() -> Vec<f64> {
    (3..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub leakage: f64,
    pub si_sdr_db: f64,
    pub val_loss: f64,
}

/// Trains and evaluates one network per α.
pub fn sweep_alpha(
    mode: Mode,
    alphas: &[f64],
    train: &[Example],
    val: &[Example],
    test: &[Example],
    mcfg: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<Vec<SweepRow>> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut cfg = mcfg.clone();
            cfg.mode = mode;
            cfg.alpha = alpha;
            let out = fit(train, val, &cfg, tcfg)?;
            let model = WindNetLite::<f32>::from_store(&out.weights, &cfg)?;
            let report = evaluate(&model, test)?;
            Ok(SweepRow {
                alpha,
                leakage: report.leakage,
                si_sdr_db: report.si_sdr_db,
                val_loss: out.history[out.best_epoch].val_loss,
            })
        })
        .collect()
}

/// α with the lowest (most negative) leakage.
pub fn best_alpha(rows: &[SweepRow]) -> Option<f64> {
    rows.iter()
        .min_by(|a, b| a.leakage.total_cmp(&b.leakage))
        .map(|r| r.alpha)
}

/// Whether the sweep lands where each mode is expected to do best:
/// rejection at the low end of the grid, extraction at α = 1.
pub fn expected_trend_observed(mode: Mode, rows: &[SweepRow]) -> bool {
    let target = mode.default_alpha();
    best_alpha(rows).is_some_and(|a| (a - target).abs() <= 0.1 + 1e-9)
}
