//! Training-mode forward pass (batch statistics in every BN) and its
//! hand-derived backward pass through both stages.

use super::Batch;
use crate::model::{at, intermediate_features, ConvBlock, WindNetLite};
use crate::nn::{
    avgpool, relu, relu_bwd, sigmoid, sigmoid_bwd, BnCache, BnStats, Conv2d, GruCache, Tensor,
};
use crate::{Error, Real, Result};

struct BlockTape<T> {
    input: Tensor<T>,
    cache: BnCache<T>,
    output: Tensor<T>,
}

fn blocks_forward<T: Real>(
    prefix: &str,
    blocks: &[ConvBlock<T>],
    mut a: Tensor<T>,
    tapes: &mut Vec<BlockTape<T>>,
    stats: &mut Vec<BnStats<T>>,
    acts: &mut Vec<(String, bool)>,
) -> Result<Tensor<T>> {
    for (i, b) in blocks.iter().enumerate() {
        let name = format!("{prefix}.conv{}", i + 1);
        let z = at(&name, b.conv.forward(&a))?;
        let (y, cache, st) = b.bn.forward_train(&z)?;
        let out = relu(&y);
        acts.push((name, out.is_finite()));
        tapes.push(BlockTape {
            input: a,
            cache,
            output: out.clone(),
        });
        stats.push(st);
        a = out;
    }
    Ok(a)
}

fn blocks_backward<T: Real>(
    blocks: &[ConvBlock<T>],
    grads: &mut [ConvBlock<T>],
    tapes: &[BlockTape<T>],
    mut g: Tensor<T>,
) -> Result<Tensor<T>> {
    for ((b, gb), tape) in blocks.iter().zip(grads.iter_mut()).zip(tapes).rev() {
        let dy = relu_bwd(&tape.output, &g);
        let (dz, bng) = b.bn.backward(&tape.cache, &dy)?;
        let (dx, cg) = b.conv.backward(&tape.input, &dz)?;
        gb.conv.kernel = cg.kernel;
        gb.conv.bias = cg.bias;
        gb.bn.gamma = bng.gamma;
        gb.bn.beta = bng.beta;
        g = dx;
    }
    Ok(g)
}

fn pw_backward<T: Real>(pw: &Conv2d<T>, grad: &mut Conv2d<T>, x: &Tensor<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    let (dx, cg) = pw.backward(x, g)?;
    grad.kernel = cg.kernel;
    grad.bias = cg.bias;
    Ok(dx)
}

/// Result of one training-mode pass.
pub struct TrainPass<T> {
    pub loss: f64,
    /// Gradient of the loss for every trainable tensor, laid out like the
    /// network (running-statistic slots stay zero).
    pub grads: Option<WindNetLite<T>>,
    /// Batch statistics of every BN layer in LF, HF, stage-2 order.
    pub bn_stats: Vec<BnStats<T>>,
}

/// Mean over all cells of `(Δre² + Δim²)/2` between the masked compressed
/// mixture `X̃·M` and the compressed target.
pub fn train_pass<T: Real>(model: &WindNetLite<T>, batch: &Batch<T>, want_grads: bool) -> Result<TrainPass<T>> {
    let cfg = model.config();
    let rows = batch.rows();
    let bins = cfg.fc_out;
    let mut stats = Vec::new();
    let mut acts: Vec<(String, bool)> = Vec::new();

    let mut lf_tapes = Vec::new();
    let lf_top = blocks_forward("lf", &model.lf, batch.low.clone(), &mut lf_tapes, &mut stats, &mut acts)?;
    let c_l = at("lf.pw", model.lf_pw.forward(&lf_top))?;
    let gin = model.gru.input_dim();
    let gru_in = c_l.clone().reshape(&[batch.batch, batch.frames, gin])?;
    let (h, gru_cache): (Tensor<T>, GruCache<T>) = at("gru", model.gru.forward_train(&gru_in))?;
    acts.push(("gru".into(), h.is_finite()));

    let mut hf_tapes = Vec::new();
    let pooled = at("hf.pool", avgpool(&batch.high))?;
    let hf_top = blocks_forward("hf", &model.hf, pooled, &mut hf_tapes, &mut stats, &mut acts)?;
    let c_h = at("hf.pw", model.hf_pw.forward(&hf_top))?;

    let nh = model.gru.hidden_dim();
    let hf_flat = c_h.len() / rows;
    let width = nh + hf_flat;
    let mut concat = vec![T::zero(); rows * width];
    for (r, row) in concat.chunks_exact_mut(width).enumerate() {
        row[..nh].copy_from_slice(&h.data()[r * nh..][..nh]);
        row[nh..].copy_from_slice(&c_h.data()[r * hf_flat..][..hf_flat]);
    }
    let concat = Tensor::new(&[rows, width], concat)?;
    let mask = sigmoid(&at("fc", model.fc.forward(&concat))?);
    acts.push(("fc".into(), mask.is_finite()));
    let feats = intermediate_features(&mask, &batch.phase)?;

    let mut s2_tapes = Vec::new();
    let s2_top = blocks_forward("stage2", &model.stage2, feats, &mut s2_tapes, &mut stats, &mut acts)?;
    let m = at("stage2.pw", model.stage2_pw.forward(&s2_top))?;
    acts.push(("stage2.pw".into(), m.is_finite()));

    let n = (rows * bins) as f64;
    let md = m.data();
    let mut dr = vec![T::zero(); rows * bins];
    let mut di = vec![T::zero(); rows * bins];
    let mut sum = 0.0;
    for c in 0..rows * bins {
        let (xr, xi) = (batch.xr[c], batch.xi[c]);
        let (mr, mi) = (md[2 * c], md[2 * c + 1]);
        let er = xr * mr - xi * mi - batch.tr[c];
        let ei = xr * mi + xi * mr - batch.ti[c];
        sum += 0.5 * (er.as_f64().powi(2) + ei.as_f64().powi(2));
        dr[c] = er;
        di[c] = ei;
    }
    let loss = sum / n;
    if !loss.is_finite() {
        let culprit = model
            .named_tensors()
            .into_iter()
            .find(|(_, t, _)| !t.is_finite())
            .map(|(name, _, _)| format!("parameter {name}"))
            .or_else(|| acts.iter().find(|(_, ok)| !ok).map(|(name, _)| format!("activation {name}")))
            .unwrap_or_else(|| "loss".into());
        return Err(Error::NonFinite(culprit));
    }
    if !want_grads {
        return Ok(TrainPass {
            loss,
            grads: None,
            bn_stats: stats,
        });
    }

    let mut g = WindNetLite::<T>::zeros(cfg)?;
    let inv_n = T::of_f64(1.0 / n);
    let mut dm = vec![T::zero(); rows * bins * 2];
    for c in 0..rows * bins {
        let (xr, xi) = (batch.xr[c], batch.xi[c]);
        let (er, ei) = (dr[c] * inv_n, di[c] * inv_n);
        dm[2 * c] = er * xr + ei * xi;
        dm[2 * c + 1] = ei * xr - er * xi;
    }
    let dm = Tensor::new(m.dims(), dm)?;
    let d_top = pw_backward(&model.stage2_pw, &mut g.stage2_pw, &s2_top, &dm)?;
    let dfeat = blocks_backward(&model.stage2, &mut g.stage2, &s2_tapes, d_top)?;

    let dmask_data = dfeat
        .data()
        .chunks_exact(2)
        .zip(&batch.phase)
        .map(|(d, &p)| d[0] * p.cos() + d[1] * p.sin())
        .collect();
    let dlogits = sigmoid_bwd(&mask, &Tensor::new(mask.dims(), dmask_data)?);
    let (dconcat, fcg) = model.fc.backward(&concat, &dlogits)?;
    g.fc.weight = fcg.weight;
    g.fc.bias = fcg.bias;

    let mut dh = Vec::with_capacity(rows * nh);
    let mut dch = Vec::with_capacity(rows * hf_flat);
    for row in dconcat.data().chunks_exact(width) {
        dh.extend_from_slice(&row[..nh]);
        dch.extend_from_slice(&row[nh..]);
    }
    let dh = Tensor::new(h.dims(), dh)?;
    let (dgin, gg) = model.gru.backward(&gru_in, &gru_cache, &dh)?;
    g.gru = gg;
    let dcl = dgin.reshape(c_l.dims())?;
    let d_lf_top = pw_backward(&model.lf_pw, &mut g.lf_pw, &lf_top, &dcl)?;
    blocks_backward(&model.lf, &mut g.lf, &lf_tapes, d_lf_top)?;

    let dch = Tensor::new(c_h.dims(), dch)?;
    let d_hf_top = pw_backward(&model.hf_pw, &mut g.hf_pw, &hf_top, &dch)?;
    blocks_backward(&model.hf, &mut g.hf, &hf_tapes, d_hf_top)?;

    Ok(TrainPass {
        loss,
        grads: Some(g),
        bn_stats: stats,
    })
}

/// Folds one pass's batch statistics into the running statistics.
pub fn update_running_stats<T: Real>(model: &mut WindNetLite<T>, stats: &[BnStats<T>]) {
    let blocks = model
        .lf
        .iter_mut()
        .chain(model.hf.iter_mut())
        .chain(model.stage2.iter_mut());
    for (b, s) in blocks.zip(stats) {
        b.bn.update_running(s);
    }
}
