#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use windnet::model::{ModelConfig, WindNetLite};
use windnet::nn::gradcheck::{central_difference, max_rel_err};
use windnet::nn::{self, BatchNorm, Conv2d, Dense, Gru, Tensor};
use windnet::Real;

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white(len: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len).map(|_| r.random_range(-1.0..1.0)).collect()
}

pub fn random_tensor(dims: &[usize], seed: u64) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::new(dims, white(n, seed)).unwrap()
}

pub fn snr_db(reference: &[f64], estimate: &[f64]) -> f64 {
    let num: f64 = reference.iter().map(|v| v * v).sum();
    let den: f64 = reference.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum();
    10.0 * (num / den).log10()
}

/// Second-stage output forced to the constant complex mask `re + j·im`.
pub fn force_mask<T: Real>(model: &mut WindNetLite<T>, re: f64, im: f64) {
    model.stage2_pw.kernel.data_mut().iter_mut().for_each(|v| *v = T::zero());
    let b = model.stage2_pw.bias.data_mut();
    b[0] = T::of_f64(re);
    b[1] = T::of_f64(im);
}

/// Initialized network with BN parameters and statistics away from identity.
pub fn random_model(cfg: &ModelConfig, seed: u64) -> WindNetLite<f64> {
    let mut m = WindNetLite::<f64>::init(cfg, seed).unwrap();
    let mut r = rng(seed ^ 0xabcdef);
    for (name, t, _) in m.named_tensors_mut() {
        if name.ends_with("bias") || name.ends_with("beta") || name.ends_with("running_mean") {
            t.data_mut().iter_mut().for_each(|v| *v = r.random_range(-0.1..0.1));
        } else if name.ends_with("gamma") || name.ends_with("running_var") {
            t.data_mut().iter_mut().for_each(|v| *v = r.random_range(0.5..1.5));
        }
    }
    m
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splits `flat` into pieces of the given lengths.
fn split<'a>(mut flat: &'a [f64], lens: &[usize]) -> Vec<&'a [f64]> {
    lens.iter()
        .map(|&n| {
            let (a, b) = flat.split_at(n);
            flat = b;
            a
        })
        .collect()
}

/// Compares `analytic` against central differences of `f` at `x0`.
fn compare(x0: &[f64], analytic: &[f64], f: impl FnMut(&[f64]) -> f64) -> f64 {
    let numeric = central_difference(x0, FD_STEP, f);
    max_rel_err(analytic, &numeric)
}

/// Conv2d on `[rows, fin, cin]` → `cout`, checked w.r.t. input, kernel and bias.
pub fn conv_grad_err(rows: usize, fin: usize, cin: usize, cout: usize, stride: usize, seed: u64) -> f64 {
    let mut conv = Conv2d::<f64>::zeros(3, cin, cout, stride);
    conv.kernel = random_tensor(conv.kernel.dims(), seed);
    conv.bias = random_tensor(&[cout], seed + 1);
    let x = random_tensor(&[rows, fin, cin], seed + 2);
    let y = conv.forward(&x).unwrap();
    let g = random_tensor(y.dims(), seed + 3);
    let (gx, gp) = conv.backward(&x, &g).unwrap();
    let lens = [x.len(), conv.kernel.len(), cout];
    let x0: Vec<f64> = [x.data(), conv.kernel.data(), conv.bias.data()].concat();
    let analytic = [gx.data(), gp.kernel.data(), gp.bias.data()].concat();
    compare(&x0, &analytic, |p| {
        let s = split(p, &lens);
        let mut c = conv.clone();
        c.kernel.data_mut().copy_from_slice(s[1]);
        c.bias.data_mut().copy_from_slice(s[2]);
        let y = c.forward(&Tensor::new(x.dims(), s[0].to_vec()).unwrap()).unwrap();
        dot(y.data(), g.data())
    })
}

pub fn dense_grad_err(rows: usize, nin: usize, nout: usize, seed: u64) -> f64 {
    let mut d = Dense::<f64>::zeros(nin, nout);
    d.weight = random_tensor(&[nout, nin], seed);
    d.bias = random_tensor(&[nout], seed + 1);
    let x = random_tensor(&[rows, nin], seed + 2);
    let g = random_tensor(&[rows, nout], seed + 3);
    let (gx, gp) = d.backward(&x, &g).unwrap();
    let lens = [x.len(), d.weight.len(), nout];
    let x0 = [x.data(), d.weight.data(), d.bias.data()].concat();
    let analytic = [gx.data(), gp.weight.data(), gp.bias.data()].concat();
    compare(&x0, &analytic, |p| {
        let s = split(p, &lens);
        let mut dd = d.clone();
        dd.weight.data_mut().copy_from_slice(s[1]);
        dd.bias.data_mut().copy_from_slice(s[2]);
        let y = dd.forward(&Tensor::new(x.dims(), s[0].to_vec()).unwrap()).unwrap();
        dot(y.data(), g.data())
    })
}

/// Training-mode batch norm over `[rows, f, c]`.
pub fn bn_grad_err(rows: usize, f: usize, c: usize, seed: u64) -> f64 {
    let mut bn = BatchNorm::<f64>::new(c);
    bn.gamma = random_tensor(&[c], seed);
    bn.beta = random_tensor(&[c], seed + 1);
    let x = random_tensor(&[rows, f, c], seed + 2);
    let g = random_tensor(x.dims(), seed + 3);
    let (_, cache, _) = bn.forward_train(&x).unwrap();
    let (gx, gp) = bn.backward(&cache, &g).unwrap();
    let lens = [x.len(), c, c];
    let x0 = [x.data(), bn.gamma.data(), bn.beta.data()].concat();
    let analytic = [gx.data(), gp.gamma.data(), gp.beta.data()].concat();
    compare(&x0, &analytic, |p| {
        let s = split(p, &lens);
        let mut b = bn.clone();
        b.gamma.data_mut().copy_from_slice(s[1]);
        b.beta.data_mut().copy_from_slice(s[2]);
        let (y, _, _) = b.forward_train(&Tensor::new(x.dims(), s[0].to_vec()).unwrap()).unwrap();
        dot(y.data(), g.data())
    })
}

/// ReLU with inputs kept away from the kink by more than the FD step.
pub fn relu_grad_err(dims: &[usize], seed: u64) -> f64 {
    let mut x = random_tensor(dims, seed);
    x.data_mut().iter_mut().for_each(|v| {
        if v.abs() < 1e-3 {
            *v += 1e-2;
        }
    });
    let g = random_tensor(dims, seed + 1);
    let y = nn::relu(&x);
    let gx = nn::relu_bwd(&y, &g);
    compare(x.data(), gx.data(), |p| {
        dot(nn::relu(&Tensor::new(dims, p.to_vec()).unwrap()).data(), g.data())
    })
}

pub fn sigmoid_grad_err(dims: &[usize], seed: u64) -> f64 {
    let mut x = random_tensor(dims, seed);
    x.data_mut().iter_mut().for_each(|v| *v *= 4.0);
    let g = random_tensor(dims, seed + 1);
    let gx = nn::sigmoid_bwd(&nn::sigmoid(&x), &g);
    compare(x.data(), gx.data(), |p| {
        dot(nn::sigmoid(&Tensor::new(dims, p.to_vec()).unwrap()).data(), g.data())
    })
}

pub fn avgpool_grad_err(rows: usize, fin: usize, c: usize, seed: u64) -> f64 {
    let x = random_tensor(&[rows, fin, c], seed);
    let y = nn::avgpool(&x).unwrap();
    let g = random_tensor(y.dims(), seed + 1);
    let gx = nn::avgpool_bwd(x.dims(), &g).unwrap();
    compare(x.data(), gx.data(), |p| {
        let y = nn::avgpool(&Tensor::new(x.dims(), p.to_vec()).unwrap()).unwrap();
        dot(y.data(), g.data())
    })
}

/// GRU over `[batch, steps, nin]`, checked w.r.t. input and all nine tensors.
pub fn gru_grad_err(batch: usize, steps: usize, nin: usize, nh: usize, seed: u64) -> f64 {
    let mut gru = Gru::<f64>::zeros(nin, nh);
    for (i, t) in gru.tensors_mut().into_iter().enumerate() {
        let r = random_tensor(t.dims(), seed + 10 + i as u64);
        t.data_mut().iter_mut().zip(r.data()).for_each(|(a, b)| *a = 0.7 * b);
    }
    let x = random_tensor(&[batch, steps, nin], seed + 1);
    let (hs, cache) = gru.forward_train(&x).unwrap();
    let g = random_tensor(hs.dims(), seed + 2);
    let (gx, gp) = gru.backward(&x, &cache, &g).unwrap();
    let mut lens = vec![x.len()];
    lens.extend(gru.tensors().iter().map(|t| t.len()));
    let mut x0 = x.data().to_vec();
    let mut analytic = gx.data().to_vec();
    for (p, gt) in gru.tensors().iter().zip(gp.tensors()) {
        x0.extend_from_slice(p.data());
        analytic.extend_from_slice(gt.data());
    }
    compare(&x0, &analytic, |p| {
        let s = split(p, &lens);
        let mut gg = gru.clone();
        for (t, v) in gg.tensors_mut().into_iter().zip(&s[1..]) {
            t.data_mut().copy_from_slice(v);
        }
        let hs = gg.forward_seq(&Tensor::new(x.dims(), s[0].to_vec()).unwrap()).unwrap();
        dot(hs.data(), g.data())
    })
}

/// At least ten shapes per layer type; returns `(layer, shape, max rel err)`.
pub fn layer_gradient_suite() -> Vec<(&'static str, String, f64)> {
    let mut out = Vec::new();
    let conv_shapes = [
        (1, 3, 1, 1, 1),
        (2, 5, 2, 3, 1),
        (3, 8, 3, 2, 2),
        (2, 7, 2, 4, 2),
        (1, 40, 5, 3, 1),
        (2, 20, 3, 3, 2),
        (4, 4, 1, 2, 2),
        (1, 9, 4, 1, 1),
        (3, 6, 2, 2, 1),
        (2, 11, 3, 2, 2),
        (2, 257, 2, 2, 1),
    ];
    for (i, &(r, f, ci, co, s)) in conv_shapes.iter().enumerate() {
        let e = conv_grad_err(r, f, ci, co, s, 100 + i as u64 * 7);
        out.push(("conv", format!("rows={r} f={f} cin={ci} cout={co} stride={s}"), e));
    }
    let dense_shapes = [(1, 1, 1), (2, 3, 4), (3, 5, 2), (1, 8, 8), (4, 2, 6), (2, 10, 3), (5, 4, 4), (1, 16, 7), (3, 7, 9), (2, 12, 5)];
    for (i, &(r, a, b)) in dense_shapes.iter().enumerate() {
        out.push(("dense", format!("rows={r} in={a} out={b}"), dense_grad_err(r, a, b, 200 + i as u64 * 7)));
    }
    let bn_shapes = [(2, 1, 1), (3, 2, 2), (4, 3, 1), (2, 5, 3), (6, 1, 4), (2, 4, 2), (3, 3, 3), (5, 2, 1), (2, 8, 2), (4, 4, 4)];
    for (i, &(r, f, c)) in bn_shapes.iter().enumerate() {
        out.push(("batchnorm", format!("rows={r} f={f} c={c}"), bn_grad_err(r, f, c, 300 + i as u64 * 7)));
    }
    let act_shapes: [&[usize]; 10] = [&[1], &[3], &[2, 2], &[2, 3, 4], &[1, 5, 1], &[4, 1, 2], &[3, 3], &[2, 6, 2], &[7], &[1, 2, 8]];
    for (i, d) in act_shapes.iter().enumerate() {
        out.push(("relu", format!("{d:?}"), relu_grad_err(d, 400 + i as u64 * 7)));
        out.push(("sigmoid", format!("{d:?}"), sigmoid_grad_err(d, 500 + i as u64 * 7)));
    }
    let pool_shapes = [(1, 2, 1), (2, 4, 2), (3, 5, 1), (1, 20, 3), (2, 7, 2), (4, 6, 1), (2, 10, 4), (1, 3, 2), (3, 8, 3), (2, 40, 5)];
    for (i, &(r, f, c)) in pool_shapes.iter().enumerate() {
        out.push(("avgpool", format!("rows={r} f={f} c={c}"), avgpool_grad_err(r, f, c, 600 + i as u64 * 7)));
    }
    let gru_shapes = [(1, 1, 1, 1), (1, 3, 2, 2), (2, 2, 3, 2), (1, 5, 2, 3), (2, 4, 4, 2), (3, 2, 1, 3), (1, 6, 3, 3), (2, 3, 5, 4), (1, 4, 6, 2), (2, 5, 2, 5)];
    for (i, &(b, t, ni, nh)) in gru_shapes.iter().enumerate() {
        out.push(("gru", format!("batch={b} steps={t} in={ni} hidden={nh}"), gru_grad_err(b, t, ni, nh, 700 + i as u64 * 7)));
    }
    out
}

/// End-to-end analytic-vs-numeric check on a shrunken network in f64,
/// sampling `samples` trainable scalars.
pub fn model_gradcheck(mode: windnet::model::Mode, samples: usize, seed: u64) -> f64 {
    use windnet::datagen::toy_examples;
    use windnet::trainer::{gradcheck_model, Batch};
    let cfg = ModelConfig::reference(mode).with_scale(0.0625);
    let model = random_model(&cfg, seed);
    let examples = toy_examples(2, &[0.0], seed, 0.12).unwrap();
    let refs: Vec<_> = examples.iter().collect();
    let batch = Batch::<f64>::from_examples(&refs, &cfg).unwrap();
    gradcheck_model(&model, &batch, samples, seed).unwrap()
}

/// Layer-by-layer shapes of the reference network for `t` frames.
pub fn reference_shape_chain(t: usize) -> Vec<(String, Vec<usize>)> {
    [
        ("lf.input", vec![t, 40, 5]),
        ("lf.conv1", vec![t, 40, 32]),
        ("lf.conv2", vec![t, 20, 64]),
        ("lf.conv3", vec![t, 10, 96]),
        ("lf.conv4", vec![t, 5, 128]),
        ("lf.pw", vec![t, 5, 32]),
        ("hf.input", vec![t, 40, 5]),
        ("hf.pool", vec![t, 20, 5]),
        ("hf.conv1", vec![t, 20, 8]),
        ("hf.conv2", vec![t, 10, 16]),
        ("hf.conv3", vec![t, 5, 64]),
        ("hf.pw", vec![t, 5, 16]),
        ("gru.input", vec![t, 160]),
        ("gru.output", vec![t, 128]),
        ("concat", vec![t, 208]),
        ("fc", vec![t, 257]),
        ("stage2.input", vec![t, 257, 2]),
        ("stage2.conv1", vec![t, 257, 32]),
        ("stage2.conv2", vec![t, 257, 32]),
        ("stage2.pw", vec![t, 257, 2]),
    ]
    .into_iter()
    .map(|(n, d)| (n.to_string(), d))
    .collect()
}

/// Runs `x` through the stream hop by hop; `x.len()` must be a multiple of the hop.
pub fn stream_all<T: Real>(model: &WindNetLite<T>, x: &[T]) -> Vec<T> {
    let hop = model.config().stft.hop;
    let mut state = windnet::model::StreamState::new(model).unwrap();
    let mut out = vec![T::zero(); x.len()];
    for (c, o) in x.chunks_exact(hop).zip(out.chunks_exact_mut(hop)) {
        model.process_frame(c, &mut state, o).unwrap();
    }
    out
}

/// Bytes of a small, fully populated weight file.
pub fn small_weight_bytes(seed: u64) -> Vec<u8> {
    let cfg = ModelConfig::reference(windnet::model::Mode::Rejection).with_scale(0.125);
    windnet::weights::init_weights(&cfg, seed).unwrap().to_bytes().unwrap()
}

/// Every single-byte corruption and every truncation of a weight file must
/// yield a typed error; returns how many variants were tried.
pub fn weight_file_abuse(bytes: &[u8]) -> usize {
    use windnet::weights::WeightStore;
    use windnet::Error;
    let mut tried = 0;
    let stride = (bytes.len() / 400).max(1);
    for i in (0..bytes.len()).step_by(stride) {
        let mut b = bytes.to_vec();
        b[i] ^= 0x5a;
        assert!(matches!(WeightStore::from_bytes(&b), Err(Error::Corrupt(_))), "flip at {i}");
        let t = &bytes[..i];
        assert!(matches!(WeightStore::from_bytes(t), Err(Error::Corrupt(_))), "truncated to {i}");
        tried += 2;
    }
    tried
}

/// Scalar double-loop leakage reference, indexing `[t][f]` directly.
pub fn leakage_reference(
    d: &windnet::dsp::ComplexSpectrogram<f64>,
    w: &windnet::dsp::ComplexSpectrogram<f64>,
) -> f64 {
    let floor = windnet::metrics::LEAKAGE_FLOOR;
    let mut sum = 0.0;
    let mut count = 0usize;
    for t in 0..d.n_frames() {
        for f in 0..d.n_bins() {
            let a = d.get(t, f);
            let b = w.get(t, f);
            let la = (a.re * a.re + a.im * a.im).sqrt().max(floor).log10();
            let lb = (b.re * b.re + b.im * b.im).sqrt().max(floor).log10();
            sum += (la - lb) * (la - lb);
            count += 1;
        }
    }
    -(sum / count as f64).sqrt()
}

pub fn random_spectrogram(frames: usize, seed: u64) -> windnet::dsp::ComplexSpectrogram<f64> {
    let cfg = windnet::dsp::StftConfig::default();
    let v = white(2 * frames * cfg.n_bins(), seed);
    let mut r = rng(seed);
    let data = v
        .chunks_exact(2)
        .map(|c| {
            // Occasional exact zeros exercise the floor.
            if r.random_range(0.0..1.0) < 0.05 {
                num_complex::Complex::new(0.0, 0.0)
            } else {
                num_complex::Complex::new(c[0] * 10.0, c[1] * 10.0)
            }
        })
        .collect();
    windnet::dsp::ComplexSpectrogram::new(frames, data, cfg).unwrap()
}

/// Reference plus noise made exactly orthogonal to it at `snr` dB.
pub fn orthogonal_noise_estimate(len: usize, snr: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let zm = |x: Vec<f64>| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.into_iter().map(|v| v - m).collect::<Vec<_>>()
    };
    let s = zm(white(len, seed));
    let mut n = zm(white(len, seed + 1));
    let ss: f64 = s.iter().map(|v| v * v).sum();
    let proj: f64 = n.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / ss;
    n.iter_mut().zip(&s).for_each(|(a, b)| *a -= proj * b);
    let nn: f64 = n.iter().map(|v| v * v).sum();
    let g = (ss / (nn * 10f64.powf(snr / 10.0))).sqrt();
    let est = s.iter().zip(&n).map(|(a, b)| a + g * b).collect();
    (est, s)
}
