//! Model configuration and the flat parameter store.
//!
//! All parameters live in one `Vec<f64>`; [`Layout`] names the groups.
//! Group order (also the checkpoint order):
//!
//! ```text
//! input.weight      H × I   (row-major, output-major)
//! input.bias        H
//! for each block b:
//!   block{b}.norm.scale   H
//!   block{b}.norm.bias    H
//!   block{b}.ssm.a_raw    H
//!   block{b}.ssm.log_dt   H
//!   block{b}.ssm.b        H
//!   block{b}.ssm.c        H
//!   block{b}.ssm.skip_d   H
//!   block{b}.mix.weight   H × H
//!   block{b}.mix.bias     H
//! decoder.weight    K × H
//! decoder.bias      K
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scan::SsmLayerParams;
use crate::error::{Error, Result};

/// How a clip's `T × cells × D` features collapse into one input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalPooling {
    /// Average over time bins: `D` inputs.
    #[default]
    Mean,
    /// Keep time bins side by side: `D × T` inputs.
    Concat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_blocks: usize,
    pub n_classes: usize,
    pub dropout_rate: f64,
    pub focal_gamma: f64,
    #[serde(default)]
    pub pooling: TemporalPooling,
}

impl ModelConfig {
    /// Desk-scale defaults: hidden 64, two blocks, dropout 0.2, γ = 2.
    pub fn desk(input_dim: usize, n_classes: usize) -> Self {
        ModelConfig {
            input_dim,
            hidden_dim: 64,
            n_blocks: 2,
            n_classes,
            dropout_rate: 0.2,
            focal_gamma: 2.0,
            pooling: TemporalPooling::Mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.n_blocks == 0 || self.n_classes == 0
        {
            return Err(Error::Config(
                "model dimensions must all be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.focal_gamma >= 0.0 && self.focal_gamma.is_finite()) {
            return Err(Error::Config(format!(
                "focal gamma {} must be >= 0",
                self.focal_gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub len: usize,
}

impl Span {
    pub fn range(self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub norm_scale: Span,
    pub norm_bias: Span,
    pub a_raw: Span,
    pub log_dt: Span,
    pub b: Span,
    pub c: Span,
    pub skip_d: Span,
    pub mix_w: Span,
    pub mix_b: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub input_w: Span,
    pub input_b: Span,
    pub blocks: Vec<BlockLayout>,
    pub dec_w: Span,
    pub dec_b: Span,
    pub total: usize,
}

/// A named parameter group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    pub name: String,
    pub span: Span,
    /// Whether decoupled weight decay applies.
    pub decay: bool,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (h, i, k) = (cfg.hidden_dim, cfg.input_dim, cfg.n_classes);
        let mut next = 0;
        let mut take = |len: usize| {
            let s = Span { start: next, len };
            next += len;
            s
        };
        let input_w = take(h * i);
        let input_b = take(h);
        let blocks = (0..cfg.n_blocks)
            .map(|_| BlockLayout {
                norm_scale: take(h),
                norm_bias: take(h),
                a_raw: take(h),
                log_dt: take(h),
                b: take(h),
                c: take(h),
                skip_d: take(h),
                mix_w: take(h * h),
                mix_b: take(h),
            })
            .collect();
        let dec_w = take(k * h);
        let dec_b = take(k);
        Layout {
            input_w,
            input_b,
            blocks,
            dec_w,
            dec_b,
            total: next,
        }
    }

    /// Groups in storage order. Decay covers the projection matrices and
    /// the SSM input/output/skip gains; rates, step sizes, normalization
    /// and biases are not decayed.
    pub fn groups(&self) -> Vec<GroupSpec> {
        let g = |name: String, span: Span, decay: bool| GroupSpec { name, span, decay };
        let mut out = vec![
            g("input.weight".into(), self.input_w, true),
            g("input.bias".into(), self.input_b, false),
        ];
        for (n, b) in self.blocks.iter().enumerate() {
            out.extend([
                g(format!("block{n}.norm.scale"), b.norm_scale, false),
                g(format!("block{n}.norm.bias"), b.norm_bias, false),
                g(format!("block{n}.ssm.a_raw"), b.a_raw, false),
                g(format!("block{n}.ssm.log_dt"), b.log_dt, false),
                g(format!("block{n}.ssm.b"), b.b, true),
                g(format!("block{n}.ssm.c"), b.c, true),
                g(format!("block{n}.ssm.skip_d"), b.skip_d, true),
                g(format!("block{n}.mix.weight"), b.mix_w, true),
                g(format!("block{n}.mix.bias"), b.mix_b, false),
            ]);
        }
        out.push(g("decoder.weight".into(), self.dec_w, true));
        out.push(g("decoder.bias".into(), self.dec_b, false));
        out
    }
}

/// Parameters (or gradients, which share the shape) of the classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    config: ModelConfig,
    layout: Layout,
    values: Vec<f64>,
}

impl Params {
    pub fn zeros(config: &ModelConfig) -> Self {
        let layout = Layout::new(config);
        Params {
            values: vec![0.0; layout.total],
            config: config.clone(),
            layout,
        }
    }

    pub fn from_values(config: &ModelConfig, values: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(config);
        if values.len() != layout.total {
            return Err(Error::Config(format!(
                "{} parameter values for a model of {}",
                values.len(),
                layout.total
            )));
        }
        Ok(Params {
            config: config.clone(),
            layout,
            values,
        })
    }

    /// Seeded initialization:
    /// - projections uniform in `±1/sqrt(fan_in)`,
    /// - `A = -U(0.5, 1)`, `log Δ ~ U(log 0.001, log 0.1)`,
    /// - `b = 1`, `c, D ~ U(-1, 1)`, normalization scale 1, biases 0.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut p = Params::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, i) = (config.hidden_dim, config.input_dim);
        let uniform = |rng: &mut ChaCha8Rng, bound: f64| rng.random_range(-bound..=bound);
        let span = p.layout.input_w;
        for v in p.slice_mut(span) {
            *v = uniform(&mut rng, 1.0 / (i as f64).sqrt());
        }
        for b in p.layout.blocks.clone() {
            p.slice_mut(b.norm_scale).fill(1.0);
            for v in p.slice_mut(b.a_raw) {
                *v = rng.random_range(0.5..=1.0f64).ln();
            }
            for v in p.slice_mut(b.log_dt) {
                *v = rng.random_range((0.001f64).ln()..=(0.1f64).ln());
            }
            p.slice_mut(b.b).fill(1.0);
            for v in p.slice_mut(b.c) {
                *v = uniform(&mut rng, 1.0);
            }
            for v in p.slice_mut(b.skip_d) {
                *v = uniform(&mut rng, 1.0);
            }
            for v in p.slice_mut(b.mix_w) {
                *v = uniform(&mut rng, 1.0 / (h as f64).sqrt());
            }
        }
        let span = p.layout.dec_w;
        for v in p.slice_mut(span) {
            *v = uniform(&mut rng, 1.0 / (h as f64).sqrt());
        }
        p
    }

    /// Rescales the input projection so that inputs with per-feature
    /// `mean` and `std` map to roughly unit-scale embeddings.
    pub fn fold_input_standardization(&mut self, mean: &[f64], std: &[f64]) {
        let (h, i) = (self.config.hidden_dim, self.config.input_dim);
        assert_eq!(mean.len(), i);
        assert_eq!(std.len(), i);
        let (w_span, b_span) = (self.layout.input_w, self.layout.input_b);
        for r in 0..h {
            let mut shift = 0.0;
            for c in 0..i {
                let scale = if std[c] > 1e-12 { std[c] } else { 1.0 };
                let w = &mut self.values[w_span.start + r * i + c];
                *w /= scale;
                shift += *w * mean[c];
            }
            self.values[b_span.start + r] = -shift;
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn slice(&self, span: Span) -> &[f64] {
        &self.values[span.range()]
    }

    pub fn slice_mut(&mut self, span: Span) -> &mut [f64] {
        &mut self.values[span.range()]
    }

    pub fn ssm_layer(&self, block: usize) -> SsmLayerParams {
        let b = &self.layout.blocks[block];
        SsmLayerParams {
            a_raw: self.slice(b.a_raw).to_vec(),
            log_dt: self.slice(b.log_dt).to_vec(),
            b: self.slice(b.b).to_vec(),
            c: self.slice(b.c).to_vec(),
            skip_d: self.slice(b.skip_d).to_vec(),
        }
    }

    pub fn add_ssm_layer(&mut self, block: usize, g: &SsmLayerParams) {
        let b = self.layout.blocks[block].clone();
        for (span, src) in [
            (b.a_raw, &g.a_raw),
            (b.log_dt, &g.log_dt),
            (b.b, &g.b),
            (b.c, &g.c),
            (b.skip_d, &g.skip_d),
        ] {
            for (d, s) in self.slice_mut(span).iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    /// Non-empty groups as `(name, values)`.
    pub fn named_groups(&self) -> Vec<(String, &[f64])> {
        self.layout
            .groups()
            .into_iter()
            .filter(|g| g.span.len > 0)
            .map(|g| (g.name, &self.values[g.span.range()]))
            .collect()
    }

    pub fn add_assign(&mut self, other: &Params) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }
}
