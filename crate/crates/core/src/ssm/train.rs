//! Mini-batch training with AdamW and a reduce-on-plateau schedule.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::{CheckpointMeta, SsmCheckpoint};
use super::model::{backward, mean_loss, Dropout, Sample};
use super::params::{ModelConfig, Params};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            weight_decay: 0.01,
            batch_size: 16,
            max_epochs: 200,
            plateau_patience: 10,
            lr_factor: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be > 0",
                self.lr
            )));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(Error::Config(format!(
                "lr factor {} outside (0, 1)",
                self.lr_factor
            )));
        }
        if self.plateau_patience == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "patience, batch size and epoch budget must be at least 1".into(),
            ));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over a sequence of words; derives per-step seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

/// Multiplies the learning rate by `factor` once the monitored loss has
/// not strictly improved for `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct PlateauSchedule {
    lr: f64,
    factor: f64,
    patience: usize,
    best: f64,
    bad_epochs: usize,
}

impl PlateauSchedule {
    pub fn new(lr: f64, factor: f64, patience: usize) -> Self {
        PlateauSchedule {
            lr,
            factor,
            patience,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records one epoch's loss; returns `true` when the rate was reduced.
    pub fn step(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.patience {
            self.lr *= self.factor;
            self.bad_epochs = 0;
            true
        } else {
            false
        }
    }
}

/// Adam with decoupled weight decay (β₁ 0.9, β₂ 0.999, ε 1e-8).
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    decay_mask: Vec<bool>,
}

impl AdamW {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(params: &Params) -> Self {
        let mut decay_mask = vec![false; params.values().len()];
        for g in params.layout().groups() {
            decay_mask[g.span.range()].fill(g.decay);
        }
        AdamW {
            m: vec![0.0; decay_mask.len()],
            v: vec![0.0; decay_mask.len()],
            step: 0,
            decay_mask,
        }
    }

    pub fn update(&mut self, params: &mut Params, grads: &Params, lr: f64, weight_decay: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for (i, (p, &g)) in params
            .values_mut()
            .iter_mut()
            .zip(grads.values())
            .enumerate()
        {
            if self.decay_mask[i] {
                *p -= lr * weight_decay * *p;
            }
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: SsmCheckpoint,
    pub log: Vec<EpochLog>,
}

fn check_split(name: &str, samples: &[Sample], cfg: &ModelConfig) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Dataset(format!("{name} split is empty")));
    }
    for s in samples {
        if s.label >= cfg.n_classes {
            return Err(Error::Label(format!(
                "label {} out of range for {} classes",
                s.label, cfg.n_classes
            )));
        }
        if s.seq.dim() != cfg.input_dim {
            return Err(Error::Config(format!(
                "sample width {} does not match input_dim {}",
                s.seq.dim(),
                cfg.input_dim
            )));
        }
    }
    Ok(())
}

/// Per-feature mean and standard deviation over every time step.
fn input_moments(samples: &[Sample], dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; dim];
    let mut sum_sq = vec![0.0; dim];
    let mut n = 0.0;
    for s in samples {
        for t in 0..s.seq.len() {
            for (i, &v) in s.seq.row(t).iter().enumerate() {
                sum[i] += v;
                sum_sq[i] += v * v;
            }
            n += 1.0;
        }
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (sq / n - m * m).max(0.0).sqrt())
        .collect();
    (mean, std)
}

/// Trains for the full epoch budget and returns the parameters with the
/// lowest validation loss.
///
/// The input projection is initialized with the training set's feature
/// moments folded in. Data order and dropout masks come from `cfg.seed`,
/// so equal inputs give bit-identical checkpoints.
pub fn train(
    model: &ModelConfig,
    train_set: &[Sample],
    val_set: &[Sample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    model.validate()?;
    cfg.validate()?;
    check_split("training", train_set, model)?;
    check_split("validation", val_set, model)?;

    let mut params = Params::init(model, mix_seed(&[cfg.seed, 1]));
    let (mean, std) = input_moments(train_set, model.input_dim);
    params.fold_input_standardization(&mean, &std);

    let mut opt = AdamW::new(&params);
    let mut schedule = PlateauSchedule::new(cfg.lr, cfg.lr_factor, cfg.plateau_patience);
    let mut order_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 2]));
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut best = SsmCheckpoint {
        meta: CheckpointMeta {
            config: model.clone(),
            epoch: 0,
            best_val_loss: None,
            seed: cfg.seed,
            pipeline: None,
        },
        params: params.clone(),
    };
    let mut best_loss = f64::INFINITY;
    let mut log = Vec::with_capacity(cfg.max_epochs);

    for epoch in 1..=cfg.max_epochs {
        let lr = schedule.lr();
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Sample> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (loss, grads) = backward(&params, &batch, |i| {
                Dropout::Seeded(mix_seed(&[
                    cfg.seed,
                    3,
                    epoch as u64,
                    b as u64,
                    chunk[i] as u64,
                ]))
            });
            if !loss.is_finite() || grads.values().iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence(format!(
                    "non-finite loss or gradient at epoch {epoch}"
                )));
            }
            loss_sum += loss * chunk.len() as f64;
            opt.update(&mut params, &grads, lr, cfg.weight_decay);
        }
        let val_loss = mean_loss(&params, val_set);
        if !val_loss.is_finite() {
            return Err(Error::Divergence(format!(
                "non-finite validation loss at epoch {epoch}"
            )));
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            best.params = params.clone();
            best.meta.epoch = epoch;
            best.meta.best_val_loss = Some(val_loss);
        }
        schedule.step(val_loss);
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            val_loss,
            lr,
        });
    }
    Ok(TrainOutcome {
        checkpoint: best,
        log,
    })
}
