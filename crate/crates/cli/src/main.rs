//! `windnet` command-line tool.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

mod config;

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use windnet::bench::{count_macs, instrumented_macs, layer_costs, measure_rtf};
use windnet::datagen::{build_dataset, synth_corpus, DatasetManifest, Example, Split, ToySplits};
use windnet::dsp::wav::{read_wav, write_wav, WavFormat};
use windnet::dsp::AudioBuffer;
use windnet::model::{Mode, ModelConfig, StreamState, WindNetLite};
use windnet::trainer::{alpha_grid, best_alpha, evaluate, expected_trend_observed, fit_with, sweep_alpha};
use windnet::weights::WeightStore;
use windnet::Real;

use config::RunConfig;

/// Parameter count of the published network.
const REFERENCE_PARAMS: f64 = 249_000.0;
const PARAM_TOLERANCE: f64 = 0.05;

/// A problem with how the tool was invoked rather than with the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "windnet", version, about = "Two-stage wind noise reduction: enhance, train, evaluate, benchmark")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove (rejection) or isolate (extraction) wind noise in a WAV file.
    Enhance(EnhanceArgs),
    /// Generate a synthetic corpus and a mixed dataset with a manifest.
    Synth(SynthArgs),
    /// Train a network and write its weight file.
    Train(TrainArgs),
    /// Score a weight file on one split of a dataset.
    Eval(EvalArgs),
    /// Count MACs and measure the real-time factor.
    Bench(BenchArgs),
    /// Print the parameter count; fails if it is more than 5 % off the reference.
    ParamCount(ModelArgs),
    /// Train and score one network per power-law factor 0.3, 0.4, ..., 1.0.
    SweepAlpha(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rejection,
    Extraction,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rejection => Mode::Rejection,
            ModeArg::Extraction => Mode::Extraction,
        }
    }
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Precision {
    F32,
    F64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Val,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Val => Split::Val,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long = "in", value_name = "WAV")]
    input: PathBuf,
    #[arg(long = "out", value_name = "WAV")]
    output: PathBuf,
    #[arg(long, value_name = "FILE")]
    weights: Option<PathBuf>,
    /// Run in this mode even if the weights were trained for the other one.
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Process hop by hop through the streaming path.
    #[arg(long)]
    stream: bool,
    #[arg(long, value_enum, default_value = "f32")]
    precision: Precision,
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory; receives `corpus/` (unless --corpus is given) and `dataset/`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Use the WAV files in this directory instead of synthesizing a corpus.
    #[arg(long, value_name = "DIR")]
    corpus: Option<PathBuf>,
    #[arg(long)]
    files: Option<usize>,
    /// Length of each synthetic corpus file in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// Clip length of the mixed examples in seconds.
    #[arg(long)]
    clip: Option<f64>,
    /// Comma-separated SNRs in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Width multiplier in (0, 1].
    #[arg(long)]
    scale: Option<f64>,
    /// Power-law factor; defaults to the mode's own.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset manifest written by `synth`.
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Train on an in-memory toy set with this many 3 s training clips instead.
    #[arg(long, value_name = "N", conflicts_with = "manifest")]
    toy_clips: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Weight file to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write the per-epoch history as JSON.
    #[arg(long, value_name = "FILE")]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Use the schedule tuned for the small toy set as the starting point.
    #[arg(long)]
    toy_schedule: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "test")]
    split: SplitArg,
    #[arg(long, value_enum, default_value = "f32")]
    precision: Precision,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Benchmark these weights instead of a freshly initialized network.
    #[arg(long, value_name = "FILE")]
    weights: Option<PathBuf>,
    /// Seconds of audio per repetition.
    #[arg(long, default_value_t = 4.0)]
    seconds: f64,
    #[arg(long, default_value_t = 15)]
    reps: usize,
    #[arg(long, default_value_t = 3)]
    warmup: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    schedule: ScheduleArgs,
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<windnet::Error>() {
        Some(windnet::Error::Config(_) | windnet::Error::Param(_) | windnet::Error::ConfigMismatch(_)) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.unwrap_or(cfg.seed);
    cfg.apply_seed(seed);
    match cli.command {
        Command::Enhance(a) => cmd_enhance(&cfg, a),
        Command::Synth(a) => cmd_synth(&cfg, a),
        Command::Train(a) => cmd_train(&cfg, a),
        Command::Eval(a) => cmd_eval(&cfg, a),
        Command::Bench(a) => cmd_bench(&cfg, a),
        Command::ParamCount(a) => cmd_param_count(&cfg, a),
        Command::SweepAlpha(a) => cmd_sweep_alpha(&cfg, a),
    }
}

/// Model config from the file, overridden by flags. A mode given without an
/// α also resets α to that mode's default.
fn model_config(cfg: &RunConfig, a: &ModelArgs) -> Result<ModelConfig> {
    let mut m = cfg.model.clone();
    if let Some(mode) = a.mode {
        m.mode = mode.into();
        m.alpha = m.mode.default_alpha();
    }
    if let Some(s) = a.scale {
        m.scale = s;
    }
    if let Some(al) = a.alpha {
        m.alpha = al;
    }
    m.validate()?;
    Ok(m)
}

fn schedule(cfg: &RunConfig, a: &ScheduleArgs) -> Result<windnet::trainer::TrainConfig> {
    let mut t = if a.toy_schedule {
        windnet::trainer::TrainConfig {
            seed: cfg.train.seed,
            ..windnet::trainer::TrainConfig::toy()
        }
    } else {
        cfg.train.clone()
    };
    if let Some(e) = a.epochs {
        t.epochs = e;
    }
    if let Some(lr) = a.lr {
        t.lr0 = lr;
    }
    if let Some(b) = a.batch_size {
        t.batch_size = b;
    }
    t.validate()?;
    Ok(t)
}

fn existing(path: Option<&PathBuf>, fallback: Option<&PathBuf>, what: &str) -> Result<PathBuf> {
    let p = path
        .or(fallback)
        .cloned()
        .ok_or_else(|| usage(format!("no {what} given (flag or config paths)")))?;
    if !p.is_file() {
        return Err(usage(format!("{what} {} does not exist", p.display())));
    }
    Ok(p)
}

fn load_weights(path: Option<&PathBuf>, cfg: &RunConfig) -> Result<(PathBuf, WeightStore)> {
    let p = existing(path, cfg.paths.weights.as_ref(), "weights file")?;
    let store = WeightStore::load(&p).with_context(|| format!("loading weights {}", p.display()))?;
    Ok((p, store))
}

/// Train, validation and test examples from a manifest or the toy generator.
fn load_data(cfg: &RunConfig, a: &DataArgs) -> Result<(Vec<Example>, Vec<Example>, Vec<Example>)> {
    if let Some(n) = a.toy_clips {
        let s = ToySplits::new(n, cfg.seed)?;
        info!("toy set: {:.1} min of training audio", s.train_seconds() / 60.0);
        return Ok((s.train, s.val, s.test));
    }
    let path = existing(a.manifest.as_ref(), cfg.paths.manifest.as_ref(), "manifest")?;
    let m = DatasetManifest::load(&path)?;
    Ok((m.examples(Split::Train)?, m.examples(Split::Val)?, m.examples(Split::Test)?))
}

fn cmd_enhance(cfg: &RunConfig, a: EnhanceArgs) -> Result<()> {
    if !a.input.is_file() {
        return Err(usage(format!("input {} does not exist", a.input.display())));
    }
    let (path, store) = load_weights(a.weights.as_ref(), cfg)?;
    let mcfg = store.meta.model_config();
    let mode = a.mode.map(Mode::from).unwrap_or(mcfg.mode);
    if mode != mcfg.mode {
        warn!("{} holds {} weights; running them in {} mode", path.display(), mcfg.mode, mode);
    }
    let input = read_wav(&a.input)?;
    input.require_pipeline_rate()?;
    let y = match a.precision {
        Precision::F32 => enhance::<f32>(&store, &mcfg, mode, input.samples(), a.stream)?,
        Precision::F64 => enhance::<f64>(&store, &mcfg, mode, input.samples(), a.stream)?,
    };
    write_wav(&a.output, &AudioBuffer::from_samples(y)?, WavFormat::Float32)?;
    info!("wrote {}", a.output.display());
    Ok(())
}

fn enhance<T: Real>(store: &WeightStore, mcfg: &ModelConfig, mode: Mode, x: &[f64], stream: bool) -> Result<Vec<f64>> {
    let mut model = WindNetLite::<T>::from_store(store, mcfg)?;
    model.set_mode(mode, mcfg.alpha)?;
    let x: Vec<T> = x.iter().map(|&v| T::of_f64(v)).collect();
    let y = if stream { stream_samples(&model, &x)? } else { model.process_samples(&x)? };
    Ok(y.into_iter().map(|v| v.as_f64()).collect())
}

/// Streams `x` in hop-sized chunks, zero-padding the last one. Frames that
/// reach into the padding only affect output past the end of `x`, which is
/// cut off, so the result equals offline processing.
fn stream_samples<T: Real>(model: &WindNetLite<T>, x: &[T]) -> Result<Vec<T>> {
    if x.is_empty() {
        return Err(windnet::Error::EmptyInput("process input").into());
    }
    let hop = model.config().stft.hop;
    let mut state = StreamState::new(model)?;
    let mut y = Vec::with_capacity(x.len() + hop);
    let mut chunk = vec![T::zero(); hop];
    let mut out = vec![T::zero(); hop];
    for c in x.chunks(hop) {
        chunk.iter_mut().for_each(|v| *v = T::zero());
        chunk[..c.len()].copy_from_slice(c);
        model.process_frame(&chunk, &mut state, &mut out)?;
        y.extend_from_slice(&out);
    }
    y.truncate(x.len());
    Ok(y)
}

fn cmd_synth(cfg: &RunConfig, a: SynthArgs) -> Result<()> {
    let mut dcfg = cfg.dataset.clone();
    if let Some(c) = a.clip {
        dcfg.clip_s = c;
    }
    if let Some(s) = a.snr {
        dcfg.snr_set = s;
    }
    if dcfg.snr_set.is_empty() {
        return Err(usage("empty SNR set"));
    }
    let corpus: Vec<PathBuf> = match &a.corpus {
        Some(dir) => {
            let mut files: Vec<PathBuf> = fs::read_dir(dir)
                .with_context(|| format!("reading corpus directory {}", dir.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
                .collect();
            files.sort();
            files
        }
        None => {
            let files = a.files.unwrap_or(cfg.synth.files);
            let dur = a.duration.unwrap_or(cfg.synth.duration_s);
            synth_corpus(a.out.join("corpus"), files, dur, cfg.seed)?
        }
    };
    let manifest = build_dataset(&corpus, &dcfg, a.out.join("dataset"))?;
    println!(
        "{} examples from {} corpus files; manifest {}",
        manifest.entries.len(),
        corpus.len(),
        manifest.root.join(windnet::datagen::MANIFEST_NAME).display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig, a: TrainArgs) -> Result<()> {
    let mcfg = model_config(cfg, &a.model)?;
    let tcfg = schedule(cfg, &a.schedule)?;
    let (train, val, test) = load_data(cfg, &a.data)?;
    println!("training {} at scale {} (α={}) on {} clips", mcfg.mode, mcfg.scale, mcfg.alpha, train.len());
    println!("epoch       lr  train_loss    val_loss  val_si_sdr_db");
    let out = fit_with(&train, &val, &mcfg, &tcfg, |r| {
        println!(
            "{:>5} {:>8.1e} {:>11.5} {:>11.5} {:>14.2}",
            r.epoch, r.lr, r.train_loss, r.val_loss, r.val_si_sdr_db
        );
    })?;
    out.weights.save(&a.out)?;
    println!("best epoch {}; weights written to {}", out.best_epoch, a.out.display());
    if let Some(h) = &a.history {
        fs::write(h, serde_json::to_string_pretty(&out.history)?).with_context(|| format!("writing {}", h.display()))?;
    }
    if !test.is_empty() {
        let model = WindNetLite::<f32>::from_store(&out.weights, &mcfg)?;
        let r = evaluate(&model, &test)?;
        println!(
            "test: SI-SDR {:.2} dB (mixture {:.2} dB), leakage {:.3} (mixture {:.3})",
            r.si_sdr_db, r.mixture_si_sdr_db, r.leakage, r.mixture_leakage
        );
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, a: EvalArgs) -> Result<()> {
    let (_, store) = load_weights(a.weights.as_ref(), cfg)?;
    let path = existing(a.manifest.as_ref(), cfg.paths.manifest.as_ref(), "manifest")?;
    let examples = DatasetManifest::load(&path)?.examples(a.split.into())?;
    let mcfg = store.meta.model_config();
    let report = match a.precision {
        Precision::F32 => evaluate(&WindNetLite::<f32>::from_store(&store, &mcfg)?, &examples)?,
        Precision::F64 => evaluate(&WindNetLite::<f64>::from_store(&store, &mcfg)?, &examples)?,
    };
    if a.json {
        println!("{}", report.to_json()?);
    } else {
        print!("{}", report.to_key_value());
    }
    Ok(())
}

fn cmd_bench(cfg: &RunConfig, a: BenchArgs) -> Result<()> {
    let model = match &a.weights {
        Some(p) => {
            let (_, store) = load_weights(Some(p), cfg)?;
            WindNetLite::<f32>::from_store_meta(&store)?
        }
        None => WindNetLite::<f32>::init(&model_config(cfg, &a.model)?, cfg.seed)?,
    };
    let analytic = count_macs(model.config())?;
    let counted = instrumented_macs(&model)?;
    if analytic != counted {
        bail!("MAC accounting disagrees: analytic {analytic}, instrumented {counted}");
    }
    let report = measure_rtf(&model, a.seconds, a.reps, a.warmup)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

fn cmd_param_count(cfg: &RunConfig, a: ModelArgs) -> Result<()> {
    let mcfg = model_config(cfg, &a)?;
    let layers = layer_costs(&mcfg)?;
    for l in &layers {
        println!("{:<14} {:>8}", l.name, l.params);
    }
    let n = WindNetLite::<f32>::zeros(&mcfg)?.param_count();
    let dev = (n as f64 - REFERENCE_PARAMS) / REFERENCE_PARAMS;
    println!("total          {n:>8}");
    println!("reference      {:>8} ({:+.2} %)", REFERENCE_PARAMS as u64, dev * 100.0);
    if dev.abs() > PARAM_TOLERANCE {
        bail!("{n} parameters is more than {:.0} % from the reference", PARAM_TOLERANCE * 100.0);
    }
    Ok(())
}

fn cmd_sweep_alpha(cfg: &RunConfig, a: SweepArgs) -> Result<()> {
    let mcfg = model_config(cfg, &a.model)?;
    let tcfg = schedule(cfg, &a.schedule)?;
    let (train, val, test) = load_data(cfg, &a.data)?;
    if test.is_empty() {
        return Err(usage("the sweep needs a non-empty test split"));
    }
    let rows = sweep_alpha(mcfg.mode, &alpha_grid(), &train, &val, &test, &mcfg, &tcfg)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
        return Ok(());
    }
    println!("alpha   leakage  si_sdr_db  val_loss");
    for r in &rows {
        println!("{:>5.1} {:>9.4} {:>10.2} {:>9.5}", r.alpha, r.leakage, r.si_sdr_db, r.val_loss);
    }
    let best = best_alpha(&rows).unwrap_or(f64::NAN);
    let seen = expected_trend_observed(mcfg.mode, &rows);
    println!(
        "lowest leakage at α={best:.1}; expected {} optimum near α={:.1} {}",
        mcfg.mode,
        mcfg.mode.default_alpha(),
        if seen { "observed" } else { "not observed" }
    );
    Ok(())
}
