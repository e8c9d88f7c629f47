//! Rotating k-fold cross-validation of the sequence classifier.

use rayon::prelude::*;

use super::folds::FoldAssignment;
use super::metrics::{macro_f1, micro_accuracy, ConfusionMatrix};
use crate::error::{Error, Result};
use crate::ssm::{mix_seed, predict, train, ModelConfig, Sample, SsmCheckpoint, TrainConfig};

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub fold: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Predictions for `test`, in the same order.
    pub preds: Vec<usize>,
    pub checkpoint: SsmCheckpoint,
}

#[derive(Debug, Clone)]
pub struct CrossvalResult {
    pub folds: Vec<FoldOutcome>,
    /// Test prediction for every sample, indexed like the input.
    pub preds: Vec<usize>,
    pub truths: Vec<usize>,
}

/// Summary numbers over pooled predictions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledMetrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

impl CrossvalResult {
    pub fn metrics(&self, n_classes: usize) -> Result<PooledMetrics> {
        pooled_metrics(&self.preds, &self.truths, n_classes)
    }

    pub fn confusion(&self, n_classes: usize) -> Result<ConfusionMatrix> {
        ConfusionMatrix::new(&self.preds, &self.truths, n_classes)
    }
}

pub fn pooled_metrics(
    preds: &[usize],
    truths: &[usize],
    n_classes: usize,
) -> Result<PooledMetrics> {
    Ok(PooledMetrics {
        accuracy: micro_accuracy(preds, truths)?,
        macro_f1: macro_f1(preds, truths, n_classes)?,
    })
}

/// Trains one model per fold: fold `i` tests on fold `i`, validates on fold
/// `(i+1) mod k` and trains on the rest. Fold `i` trains with seed
/// `mix_seed([train.seed, i])`. Folds run in parallel; results are merged
/// in fold order.
pub fn run_crossval(
    samples: &[Sample],
    folds: &FoldAssignment,
    model: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<CrossvalResult> {
    if folds.fold_of.len() != samples.len() {
        return Err(Error::Dataset(format!(
            "fold assignment covers {} rows, dataset has {}",
            folds.fold_of.len(),
            samples.len()
        )));
    }
    let outcomes: Vec<FoldOutcome> = (0..folds.k)
        .into_par_iter()
        .map(|fold| run_fold(samples, folds, fold, model, train_cfg))
        .collect::<Result<_>>()?;
    let mut preds = vec![usize::MAX; samples.len()];
    for o in &outcomes {
        for (&i, &p) in o.test.iter().zip(&o.preds) {
            preds[i] = p;
        }
    }
    debug_assert!(preds.iter().all(|&p| p != usize::MAX));
    Ok(CrossvalResult {
        folds: outcomes,
        preds,
        truths: samples.iter().map(|s| s.label).collect(),
    })
}

fn run_fold(
    samples: &[Sample],
    folds: &FoldAssignment,
    fold: usize,
    model: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<FoldOutcome> {
    let split = folds.split(fold);
    if split.test.is_empty() {
        return Err(Error::Dataset(format!("fold {fold} has no test rows")));
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
    let cfg = TrainConfig {
        seed: mix_seed(&[train_cfg.seed, fold as u64]),
        ..train_cfg.clone()
    };
    let outcome = train(model, &pick(&split.train), &pick(&split.val), &cfg)?;
    let preds = split
        .test
        .iter()
        .map(|&i| predict(&outcome.checkpoint.params, &samples[i].seq).0)
        .collect();
    Ok(FoldOutcome {
        fold,
        train: split.train,
        val: split.val,
        test: split.test,
        preds,
        checkpoint: outcome.checkpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::folds::{make_folds, FoldOptions};
    use crate::ssm::{Sequence, TemporalPooling};

    #[test]
    fn every_sample_tested_once() {
        let samples: Vec<Sample> = (0..24)
            .map(|i| {
                let label = i % 3;
                let v = label as f64 + 0.01 * i as f64;
                Sample {
                    seq: Sequence::new(2, vec![v, -v, v, -v]).unwrap(),
                    label,
                }
            })
            .collect();
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        let folds = make_folds(&labels, None, 8, 5, FoldOptions::default()).unwrap();
        let model = ModelConfig {
            input_dim: 2,
            hidden_dim: 4,
            n_blocks: 1,
            n_classes: 3,
            dropout_rate: 0.0,
            focal_gamma: 2.0,
            pooling: TemporalPooling::Mean,
        };
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let r = run_crossval(&samples, &folds, &model, &cfg).unwrap();
        assert_eq!(r.folds.len(), 8);
        let mut seen = vec![0; 24];
        for o in &r.folds {
            for &i in &o.test {
                seen[i] += 1;
            }
            for &i in &o.train {
                assert!(!o.val.contains(&i) && !o.test.contains(&i));
            }
            assert!(o.val.iter().all(|i| !o.test.contains(i)));
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(r.preds.len(), 24);
        assert!(r.preds.iter().all(|&p| p < 3));
    }
}
