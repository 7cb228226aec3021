use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{gen_desired, gen_wind, sub_seed, DesiredGenParams, WindGenParams};
use crate::dsp::wav::{read_wav, write_wav, WavFormat};
use crate::dsp::AudioBuffer;
use crate::metrics::mix_at_snr;
use crate::{Error, Result, SAMPLE_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One mixture with its exact stems: `mixture == desired + wind` sample for sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub name: String,
    pub mixture: Vec<f64>,
    pub desired: Vec<f64>,
    pub wind: Vec<f64>,
    pub snr_db: f64,
}

/// Stems are rounded to this grid so that their sum is exact, also in f32.
const GRID: f64 = 1.0 / (1u64 << 24) as f64;
const TARGET_RMS: f64 = 0.1;
const PEAK: f64 = 0.9;

fn quantize(v: f64) -> f64 {
    (v / GRID).round() * GRID
}

/// Mixes `desired` with `wind` at `snr_db`, then applies a common gain so the
/// mixture sits near −20 dBFS RMS without clipping.
pub fn make_example(name: String, desired: &[f64], wind: &[f64], snr_db: f64) -> Result<Example> {
    let (mix, scaled) = mix_at_snr(desired, wind, snr_db)?;
    let rms = (mix.iter().map(|v| v * v).sum::<f64>() / mix.len() as f64).sqrt();
    let peak = mix
        .iter()
        .chain(desired)
        .chain(&scaled)
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let gain = (TARGET_RMS / rms).min(PEAK / peak);
    let desired: Vec<f64> = desired.iter().map(|v| quantize(v * gain)).collect();
    let wind: Vec<f64> = scaled.iter().map(|v| quantize(v * gain)).collect();
    let mixture = desired.iter().zip(&wind).map(|(d, w)| d + w).collect();
    Ok(Example {
        name,
        mixture,
        desired,
        wind,
        snr_db,
    })
}

fn fit_length(mut x: Vec<f64>, len: usize) -> Vec<f64> {
    x.resize(len, 0.0);
    x
}

/// One example per (clip, SNR) pair; wind seeds derive from `wind.seed`.
pub fn build_examples(clips: &[(String, Vec<f64>)], snr_set: &[f64], wind: &WindGenParams, clip_len: usize) -> Result<Vec<Example>> {
    let mut out = Vec::with_capacity(clips.len() * snr_set.len());
    for (i, (name, clip)) in clips.iter().enumerate() {
        let desired = fit_length(clip.clone(), clip_len);
        for (j, &snr) in snr_set.iter().enumerate() {
            let params = WindGenParams {
                seed: sub_seed(wind.seed, (i * snr_set.len() + j) as u64),
                duration_s: clip_len as f64 / SAMPLE_RATE_HZ as f64,
                ..wind.clone()
            };
            let w = gen_wind(&params)?;
            out.push(make_example(format!("{name}_snr{snr}"), &desired, w.samples(), snr)?);
        }
    }
    if out.is_empty() {
        return Err(Error::Dataset("no examples produced".into()));
    }
    Ok(out)
}

/// Fully synthetic in-memory examples: `n_clips` desired clips, each mixed at
/// every SNR in `snr_set`.
pub fn toy_examples(n_clips: usize, snr_set: &[f64], seed: u64, clip_s: f64) -> Result<Vec<Example>> {
    let clips = (0..n_clips)
        .map(|i| {
            let p = DesiredGenParams {
                seed: sub_seed(seed, i as u64),
                duration_s: clip_s,
                ..Default::default()
            };
            gen_desired(&p).map(|a| (format!("clip{i:04}"), a.into_samples()))
        })
        .collect::<Result<Vec<_>>>()?;
    let wind = WindGenParams {
        seed: sub_seed(seed, u64::MAX),
        ..Default::default()
    };
    let len = (clip_s * SAMPLE_RATE_HZ as f64).round() as usize;
    build_examples(&clips, snr_set, &wind, len)
}

/// SNRs mixed into the toy training split.
pub const TOY_TRAIN_SNRS: [f64; 5] = [-10.0, -5.0, 0.0, 5.0, 10.0];
/// SNRs of the toy validation and test splits.
pub const TOY_EVAL_SNRS: [f64; 3] = [-10.0, 0.0, 10.0];

/// In-memory train/val/test sets of 3 s synthetic clips with disjoint seeds.
#[derive(Debug, Clone)]
pub struct ToySplits {
    pub train: Vec<Example>,
    pub val: Vec<Example>,
    pub test: Vec<Example>,
}

impl ToySplits {
    /// `train_clips` desired clips, each mixed at every [`TOY_TRAIN_SNRS`];
    /// 6 validation and 10 test clips at every [`TOY_EVAL_SNRS`].
    pub fn new(train_clips: usize, seed: u64) -> Result<Self> {
        Ok(Self {
            train: toy_examples(train_clips, &TOY_TRAIN_SNRS, sub_seed(seed, 1), 3.0)?,
            val: toy_examples(6, &TOY_EVAL_SNRS, sub_seed(seed, 2), 3.0)?,
            test: toy_examples(10, &TOY_EVAL_SNRS, sub_seed(seed, 3), 3.0)?,
        })
    }

    pub fn train_seconds(&self) -> f64 {
        self.train.iter().map(|e| e.mixture.len()).sum::<usize>() as f64 / SAMPLE_RATE_HZ as f64
    }
}

/// Writes `n_files` synthetic desired clips as float WAVs and returns their paths.
pub fn synth_corpus(out_dir: impl AsRef<Path>, n_files: usize, duration_s: f64, seed: u64) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    (0..n_files)
        .map(|i| {
            let p = DesiredGenParams {
                seed: sub_seed(seed, i as u64),
                duration_s,
                ..Default::default()
            };
            let path = dir.join(format!("desired_{i:04}.wav"));
            write_wav(&path, &gen_desired(&p)?, WavFormat::Float32)?;
            Ok(path)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub snr_set: Vec<f64>,
    pub clip_s: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub wind: WindGenParams,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            snr_set: vec![-20.0, -10.0, 0.0, 10.0, 20.0],
            clip_s: 3.0,
            val_fraction: 0.1,
            test_fraction: 0.1,
            wind: WindGenParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub mixture: PathBuf,
    pub desired: PathBuf,
    pub wind: PathBuf,
    pub snr_db: f64,
    pub seed: u64,
    pub split: Split,
}

/// Examples listed one JSON object per line; paths relative to `root`.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.jsonl";

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::file(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::file(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::Dataset(format!("{}:{}: {e}", path.display(), i + 1)))?,
            );
        }
        Ok(Self {
            root: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            entries,
        })
    }

    pub fn save(&self) -> Result<PathBuf> {
        let path = self.root.join(MANIFEST_NAME);
        let mut f = fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
        for e in &self.entries {
            writeln!(f, "{}", serde_json::to_string(e)?).map_err(|e| Error::file(&path, e))?;
        }
        Ok(path)
    }

    /// Reads every triplet of a split.
    pub fn examples(&self, split: Split) -> Result<Vec<Example>> {
        let read = |p: &Path| read_wav(self.root.join(p)).map(AudioBuffer::into_samples);
        let out: Vec<Example> = self
            .entries
            .iter()
            .filter(|e| e.split == split)
            .map(|e| {
                let ex = Example {
                    name: e.mixture.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                    mixture: read(&e.mixture)?,
                    desired: read(&e.desired)?,
                    wind: read(&e.wind)?,
                    snr_db: e.snr_db,
                };
                if ex.mixture.len() != ex.desired.len() || ex.mixture.len() != ex.wind.len() {
                    return Err(Error::Dataset(format!("{}: stems differ in length", e.mixture.display())));
                }
                Ok(ex)
            })
            .collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(Error::Dataset(format!("split {split:?} is empty")));
        }
        Ok(out)
    }
}

fn split_for(i: usize, n: usize, cfg: &DatasetConfig) -> Split {
    let n_test = (n as f64 * cfg.test_fraction).round() as usize;
    let n_val = (n as f64 * cfg.val_fraction).round() as usize;
    let n_train = n.saturating_sub(n_test + n_val).max(1);
    if i < n_train {
        Split::Train
    } else if i < n_train + n_val {
        Split::Val
    } else {
        Split::Test
    }
}

/// Crops every readable corpus file to `clip_s` seconds (zero-padding short
/// ones), mixes it with fresh wind at each SNR, and writes float WAV triplets
/// plus `manifest.jsonl` into `out_dir`. Unreadable files are skipped.
pub fn build_dataset(corpus: &[PathBuf], cfg: &DatasetConfig, out_dir: impl AsRef<Path>) -> Result<DatasetManifest> {
    if corpus.is_empty() {
        return Err(Error::Dataset("empty corpus".into()));
    }
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let clip_len = (cfg.clip_s * SAMPLE_RATE_HZ as f64).round() as usize;
    let clips: Vec<(String, Vec<f64>)> = corpus
        .iter()
        .filter_map(|p| match read_wav(p) {
            Ok(a) => Some((p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), a.into_samples())),
            Err(e) => {
                log::warn!("skipping {}: {e}", p.display());
                None
            }
        })
        .collect();
    if clips.is_empty() {
        return Err(Error::Dataset("no readable corpus files".into()));
    }
    let mut entries = Vec::new();
    for (i, clip) in clips.iter().enumerate() {
        let split = split_for(i, clips.len(), cfg);
        for (j, &snr) in cfg.snr_set.iter().enumerate() {
            let seed = sub_seed(cfg.wind.seed, (i * cfg.snr_set.len() + j) as u64);
            let wind = gen_wind(&WindGenParams {
                seed,
                duration_s: clip_len as f64 / SAMPLE_RATE_HZ as f64,
                ..cfg.wind.clone()
            })?;
            let ex = make_example(String::new(), &fit_length(clip.1.clone(), clip_len), wind.samples(), snr)?;
            let stem = format!("{i:04}_{}_snr{snr:+}", clip.0);
            let mut paths = Vec::new();
            for (kind, data) in [("mixture", ex.mixture), ("desired", ex.desired), ("wind", ex.wind)] {
                let rel = PathBuf::from(format!("{stem}_{kind}.wav"));
                write_wav(dir.join(&rel), &AudioBuffer::from_samples(data)?, WavFormat::Float32)?;
                paths.push(rel);
            }
            let mut it = paths.into_iter();
            entries.push(ManifestEntry {
                mixture: it.next().expect("three stems"),
                desired: it.next().expect("three stems"),
                wind: it.next().expect("three stems"),
                snr_db: snr,
                seed,
                split,
            });
        }
    }
    let manifest = DatasetManifest {
        root: dir.to_path_buf(),
        entries,
    };
    manifest.save()?;
    Ok(manifest)
}
