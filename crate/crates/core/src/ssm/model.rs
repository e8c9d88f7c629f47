//! Forward and reverse passes of the sequence classifier.
//!
//! ```text
//! clip features ─ input projection ─┬─ [norm → scan → GELU → mix → dropout] ─ + ─ ... ─ mean over L ─ decoder ─ logits
//!                                   └──────────────── residual ──────────────┘
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::{focal_loss, softmax};
use super::params::{Params, TemporalPooling};
use super::scan::{scan_backward, scan_with_state};
use crate::error::{Error, Result};
use crate::features::{FeatureGrid, CELLS};

const NORM_EPS: f64 = 1e-5;
const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/π)
const GELU_C: f64 = 0.044_715;

/// Row-major `L × dim` sequence of real vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    dim: usize,
    data: Vec<f64>,
}

impl Sequence {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::Config(format!(
                "sequence of {} values is not a nonempty L x {dim} array",
                data.len()
            )));
        }
        Ok(Sequence { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Config("ragged sequence rows".into()));
        }
        Sequence::new(dim, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    /// Rows `start..end` as a new sequence.
    pub fn window(&self, start: usize, end: usize) -> Sequence {
        Sequence {
            dim: self.dim,
            data: self.data[start * self.dim..end * self.dim].to_vec(),
        }
    }
}

/// A labelled training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub seq: Sequence,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dropout {
    Off,
    /// Inverted dropout with masks drawn from this seed.
    Seeded(u64),
}

/// Collapses one clip's grid to the classifier's input vector.
///
/// Averages over the surviving cells (the nine window cells of a masked
/// grid, otherwise all 49) and, for [`TemporalPooling::Mean`], over time.
pub fn pool_clip(grid: &FeatureGrid, pooling: TemporalPooling) -> Vec<f64> {
    let (t_bins, channels) = (grid.t_bins(), grid.channels());
    let cells = if grid.mask().is_some() {
        9.0
    } else {
        CELLS as f64
    };
    let mut per_bin = vec![0.0; t_bins * channels];
    for t in 0..t_bins {
        for cell in 0..CELLS {
            let start = (t * CELLS + cell) * channels;
            for (acc, &v) in per_bin[t * channels..(t + 1) * channels]
                .iter_mut()
                .zip(&grid.data()[start..start + channels])
            {
                *acc += v as f64;
            }
        }
    }
    per_bin.iter_mut().for_each(|v| *v /= cells);
    match pooling {
        TemporalPooling::Concat => per_bin,
        TemporalPooling::Mean => (0..channels)
            .map(|ch| (0..t_bins).map(|t| per_bin[t * channels + ch]).sum::<f64>() / t_bins as f64)
            .collect(),
    }
}

/// Input width produced by [`pool_clip`].
pub fn pooled_dim(channels: usize, t_bins: usize, pooling: TemporalPooling) -> usize {
    match pooling {
        TemporalPooling::Mean => channels,
        TemporalPooling::Concat => channels * t_bins,
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n_in = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n_in).zip(b)) {
        *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Pools `grid` and applies the input projection.
pub fn embed_clip(params: &Params, grid: &FeatureGrid) -> Vec<f64> {
    let pooled = pool_clip(grid, params.config().pooling);
    project_input(params, &pooled)
}

fn project_input(params: &Params, x: &[f64]) -> Vec<f64> {
    let l = params.layout();
    let mut out = vec![0.0; params.config().hidden_dim];
    affine(
        params.slice(l.input_w),
        params.slice(l.input_b),
        x,
        &mut out,
    );
    out
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let th = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

struct BlockCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
    u: Vec<f64>,
    state: Vec<f64>,
    y: Vec<f64>,
    g: Vec<f64>,
    keep: Option<Vec<f64>>,
}

struct ForwardCache {
    input: Option<Sequence>,
    blocks: Vec<BlockCache>,
    pooled: Vec<f64>,
    logits: Vec<f64>,
}

fn run(
    params: &Params,
    embedded: Vec<f64>,
    input: Option<Sequence>,
    dropout: Dropout,
) -> ForwardCache {
    let cfg = params.config();
    let h = cfg.hidden_dim;
    let len = embedded.len() / h;
    let layout = params.layout();
    let mut rng = match dropout {
        Dropout::Seeded(seed) if cfg.dropout_rate > 0.0 => Some(ChaCha8Rng::seed_from_u64(seed)),
        _ => None,
    };
    let mut z = embedded;
    let mut blocks = Vec::with_capacity(cfg.n_blocks);
    for (bi, bl) in layout.blocks.iter().enumerate() {
        let scale = params.slice(bl.norm_scale);
        let shift = params.slice(bl.norm_bias);
        let mut xhat = vec![0.0; len * h];
        let mut u = vec![0.0; len * h];
        let mut inv_std = vec![0.0; len];
        for t in 0..len {
            let row = &z[t * h..(t + 1) * h];
            let mean = row.iter().sum::<f64>() / h as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / h as f64;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            inv_std[t] = inv;
            for j in 0..h {
                let xh = (row[j] - mean) * inv;
                xhat[t * h + j] = xh;
                u[t * h + j] = xh * scale[j] + shift[j];
            }
        }
        let (y, state) = scan_with_state(&params.ssm_layer(bi), &u);
        let g: Vec<f64> = y.iter().map(|&v| gelu(v)).collect();
        let mix_w = params.slice(bl.mix_w);
        let mix_b = params.slice(bl.mix_b);
        let mut m = vec![0.0; h];
        let keep = rng.as_mut().map(|rng| {
            let p = cfg.dropout_rate;
            (0..len * h)
                .map(|_| {
                    if rng.random::<f64>() < p {
                        0.0
                    } else {
                        1.0 / (1.0 - p)
                    }
                })
                .collect::<Vec<f64>>()
        });
        for t in 0..len {
            affine(mix_w, mix_b, &g[t * h..(t + 1) * h], &mut m);
            for j in 0..h {
                let k = keep.as_ref().map_or(1.0, |k| k[t * h + j]);
                z[t * h + j] += m[j] * k;
            }
        }
        blocks.push(BlockCache {
            xhat,
            inv_std,
            u,
            state,
            y,
            g,
            keep,
        });
    }
    let mut pooled = vec![0.0; h];
    for t in 0..len {
        for j in 0..h {
            pooled[j] += z[t * h + j];
        }
    }
    pooled.iter_mut().for_each(|v| *v /= len as f64);
    let mut logits = vec![0.0; cfg.n_classes];
    affine(
        params.slice(layout.dec_w),
        params.slice(layout.dec_b),
        &pooled,
        &mut logits,
    );
    ForwardCache {
        input,
        blocks,
        pooled,
        logits,
    }
}

fn embed_sequence(params: &Params, x: &Sequence) -> Vec<f64> {
    (0..x.len())
        .flat_map(|t| project_input(params, x.row(t)))
        .collect()
}

/// Logits for a sequence of pooled clip features (`L × input_dim`).
pub fn forward(params: &Params, x: &Sequence, dropout: Dropout) -> Vec<f64> {
    assert_eq!(x.dim(), params.config().input_dim, "input width");
    run(params, embed_sequence(params, x), None, dropout).logits
}

/// Logits for already-projected clip embeddings (`L × hidden_dim`).
pub fn forward_embedded(params: &Params, embeddings: &Sequence, dropout: Dropout) -> Vec<f64> {
    assert_eq!(
        embeddings.dim(),
        params.config().hidden_dim,
        "embedding width"
    );
    run(params, embeddings.data().to_vec(), None, dropout).logits
}

/// Adds `∂loss/∂params` for one sample into `grads`, given `∂loss/∂logits`.
fn backprop(params: &Params, cache: &ForwardCache, dlogits: &[f64], grads: &mut Params) {
    let cfg = params.config();
    let h = cfg.hidden_dim;
    let layout = params.layout().clone();
    let len = cache.blocks.first().map_or(0, |b| b.u.len() / h);

    {
        let gw = grads.slice_mut(layout.dec_w);
        for (k, &dl) in dlogits.iter().enumerate() {
            for j in 0..h {
                gw[k * h + j] += dl * cache.pooled[j];
            }
        }
    }
    for (g, &dl) in grads.slice_mut(layout.dec_b).iter_mut().zip(dlogits) {
        *g += dl;
    }
    let dec_w = params.slice(layout.dec_w);
    let mut dpooled = vec![0.0; h];
    for (k, &dl) in dlogits.iter().enumerate() {
        for j in 0..h {
            dpooled[j] += dl * dec_w[k * h + j];
        }
    }
    let mut dz: Vec<f64> = (0..len * h).map(|i| dpooled[i % h] / len as f64).collect();

    for (bi, bl) in layout.blocks.iter().enumerate().rev() {
        let c = &cache.blocks[bi];
        let mix_w = params.slice(bl.mix_w);
        let dm: Vec<f64> = match &c.keep {
            Some(keep) => dz.iter().zip(keep).map(|(a, k)| a * k).collect(),
            None => dz.clone(),
        };
        let mut dg = vec![0.0; len * h];
        {
            let gw = grads.slice_mut(bl.mix_w);
            for t in 0..len {
                let dm_t = &dm[t * h..(t + 1) * h];
                let g_t = &c.g[t * h..(t + 1) * h];
                for (o, &d) in dm_t.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * h..(o + 1) * h];
                    for (r, &gv) in row.iter_mut().zip(g_t) {
                        *r += d * gv;
                    }
                    let wrow = &mix_w[o * h..(o + 1) * h];
                    for (acc, &wv) in dg[t * h..(t + 1) * h].iter_mut().zip(wrow) {
                        *acc += d * wv;
                    }
                }
            }
        }
        {
            let gb = grads.slice_mut(bl.mix_b);
            for t in 0..len {
                for j in 0..h {
                    gb[j] += dm[t * h + j];
                }
            }
        }
        let dy: Vec<f64> = dg
            .iter()
            .zip(&c.y)
            .map(|(d, &y)| d * gelu_grad(y))
            .collect();
        let layer = params.ssm_layer(bi);
        let sg = scan_backward(&layer, &c.u, &c.state, &dy);
        grads.add_ssm_layer(bi, &sg.params);

        let scale = params.slice(bl.norm_scale);
        let mut dscale = vec![0.0; h];
        let mut dshift = vec![0.0; h];
        for t in 0..len {
            let du = &sg.du[t * h..(t + 1) * h];
            let xh = &c.xhat[t * h..(t + 1) * h];
            let mut dxhat = vec![0.0; h];
            for j in 0..h {
                dscale[j] += du[j] * xh[j];
                dshift[j] += du[j];
                dxhat[j] = du[j] * scale[j];
            }
            let mean_d = dxhat.iter().sum::<f64>() / h as f64;
            let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / h as f64;
            for j in 0..h {
                dz[t * h + j] += c.inv_std[t] * (dxhat[j] - mean_d - xh[j] * mean_dx);
            }
        }
        for (g, d) in grads.slice_mut(bl.norm_scale).iter_mut().zip(&dscale) {
            *g += d;
        }
        for (g, d) in grads.slice_mut(bl.norm_bias).iter_mut().zip(&dshift) {
            *g += d;
        }
    }

    let input = cache
        .input
        .as_ref()
        .expect("backprop needs the input sequence");
    let n_in = cfg.input_dim;
    {
        let gw = grads.slice_mut(layout.input_w);
        for t in 0..len {
            let x = input.row(t);
            for j in 0..h {
                let d = dz[t * h + j];
                for (i, &xv) in x.iter().enumerate() {
                    gw[j * n_in + i] += d * xv;
                }
            }
        }
    }
    let gb = grads.slice_mut(layout.input_b);
    for t in 0..len {
        for j in 0..h {
            gb[j] += dz[t * h + j];
        }
    }
}

/// Focal loss of one sample and its parameter gradient.
pub fn sample_loss_and_grad(params: &Params, sample: &Sample, dropout: Dropout) -> (f64, Params) {
    let cache = run(
        params,
        embed_sequence(params, &sample.seq),
        Some(sample.seq.clone()),
        dropout,
    );
    let (loss, dlogits) = focal_loss(&cache.logits, sample.label, params.config().focal_gamma);
    let mut grads = Params::zeros(params.config());
    backprop(params, &cache, &dlogits, &mut grads);
    (loss, grads)
}

/// Mean focal loss over `batch` and its exact gradient.
///
/// Sample `i` draws dropout masks from `seeds(i)`. Per-sample work may run
/// in parallel; accumulation is in sample order, so results are reproducible.
pub fn backward(
    params: &Params,
    batch: &[Sample],
    dropout: impl Fn(usize) -> Dropout + Sync,
) -> (f64, Params) {
    use rayon::prelude::*;
    assert!(!batch.is_empty(), "empty batch");
    let parts: Vec<(f64, Params)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| sample_loss_and_grad(params, s, dropout(i)))
        .collect();
    let mut total = Params::zeros(params.config());
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        total.add_assign(g);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    (loss / n, total)
}

/// Mean focal loss in evaluation mode.
pub fn mean_loss(params: &Params, samples: &[Sample]) -> f64 {
    let gamma = params.config().focal_gamma;
    samples
        .iter()
        .map(|s| focal_loss(&forward(params, &s.seq, Dropout::Off), s.label, gamma).0)
        .sum::<f64>()
        / samples.len() as f64
}

/// Class with the highest probability (first on ties) and the probabilities.
pub fn predict(params: &Params, x: &Sequence) -> (usize, Vec<f64>) {
    let probs = softmax(&forward(params, x, Dropout::Off));
    (argmax(&probs), probs)
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One prediction per full window `[i·stride, i·stride + window)`.
pub fn predict_windows(
    params: &Params,
    x: &Sequence,
    window: usize,
    stride: usize,
) -> Result<Vec<usize>> {
    if window == 0 || stride == 0 {
        return Err(Error::Config("window and stride must be at least 1".into()));
    }
    if window > x.len() {
        return Err(Error::Config(format!(
            "window of {window} clips exceeds sequence of {}",
            x.len()
        )));
    }
    let count = (x.len() - window) / stride + 1;
    Ok((0..count)
        .map(|i| predict(params, &x.window(i * stride, i * stride + window)).0)
        .collect())
}
