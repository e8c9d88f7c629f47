//! Classification metrics over integer labels.

use crate::error::{Error, Result};

fn check(preds: &[usize], truths: &[usize], k: Option<usize>) -> Result<()> {
    if preds.len() != truths.len() {
        return Err(Error::Dataset(format!(
            "{} predictions for {} truths",
            preds.len(),
            truths.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Dataset("no predictions to score".into()));
    }
    if let Some(k) = k {
        if let Some(bad) = preds.iter().chain(truths).find(|&&l| l >= k) {
            return Err(Error::Label(format!("label {bad} outside 0..{k}")));
        }
    }
    Ok(())
}

/// Counts with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(preds: &[usize], truths: &[usize], k: usize) -> Result<Self> {
        check(preds, truths, Some(k))?;
        let mut counts = vec![0; k * k];
        for (&p, &t) in preds.iter().zip(truths) {
            counts[t * k + p] += 1;
        }
        Ok(ConfusionMatrix { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn row_total(&self, truth: usize) -> u64 {
        (0..self.k).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_total(&self, pred: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, pred)).sum()
    }

    /// Row-normalized matrix; rows without samples stay zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|t| {
                let total = self.row_total(t);
                (0..self.k)
                    .map(|p| {
                        if total == 0 {
                            0.0
                        } else {
                            self.get(t, p) as f64 / total as f64
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Fraction of exact matches.
pub fn micro_accuracy(preds: &[usize], truths: &[usize]) -> Result<f64> {
    check(preds, truths, None)?;
    let hits = preds.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Unweighted mean of per-class F1 over classes present in predictions or
/// truths. A present class without true positives scores 0.
pub fn macro_f1(preds: &[usize], truths: &[usize], k: usize) -> Result<f64> {
    let cm = ConfusionMatrix::new(preds, truths, k)?;
    let mut sum = 0.0;
    let mut classes = 0;
    for c in 0..k {
        let tp = cm.get(c, c) as f64;
        let fn_ = cm.row_total(c) as f64 - tp;
        let fp = cm.col_total(c) as f64 - tp;
        if tp + fn_ + fp == 0.0 {
            continue;
        }
        classes += 1;
        sum += 2.0 * tp / (2.0 * tp + fp + fn_);
    }
    Ok(sum / classes as f64)
}

pub fn normalized_confusion(preds: &[usize], truths: &[usize], k: usize) -> Result<Vec<Vec<f64>>> {
    Ok(ConfusionMatrix::new(preds, truths, k)?.normalized())
}

/// Quadratic weighted kappa for ordinal labels in `0..k`.
///
/// `κ = 1 - Σ w O / Σ w E` with `w_ij = (i-j)² / (k-1)²`, `O` the observed
/// counts and `E` the outer product of the marginals over the total.
/// Returns 1 when the expected disagreement is zero.
pub fn qwk(preds: &[usize], truths: &[usize], k: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::Config(format!("QWK needs k >= 2, got {k}")));
    }
    let cm = ConfusionMatrix::new(preds, truths, k)?;
    let n = cm.total() as f64;
    let rows: Vec<f64> = (0..k).map(|i| cm.row_total(i) as f64).collect();
    let cols: Vec<f64> = (0..k).map(|j| cm.col_total(j) as f64).collect();
    let denom_k = ((k - 1) * (k - 1)) as f64;
    let (mut observed, mut expected) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let d = i as f64 - j as f64;
            let w = d * d / denom_k;
            observed += w * cm.get(i, j) as f64;
            expected += w * rows[i] * cols[j] / n;
        }
    }
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - observed / expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(micro_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(micro_accuracy(&[0, 1, 1, 1], &[0, 0, 1, 2]).unwrap(), 0.5);
        assert!(micro_accuracy(&[], &[]).is_err());
        assert!(micro_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn macro_f1_examples() {
        assert_eq!(macro_f1(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        let f = macro_f1(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        // class 2 absent everywhere is skipped
        let f = macro_f1(&[0, 1], &[0, 1], 3).unwrap();
        assert_eq!(f, 1.0);
        assert!(macro_f1(&[3], &[0], 3).is_err());
    }

    #[test]
    fn normalized_confusion_examples() {
        assert_eq!(
            normalized_confusion(&[0, 1], &[0, 0], 2).unwrap(),
            vec![vec![0.5, 0.5], vec![0.0, 0.0]]
        );
        let id = normalized_confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        for (i, row) in id.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn qwk_examples() {
        assert_eq!(qwk(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap(), 1.0);
        assert!((qwk(&[2, 1, 0], &[0, 1, 2], 3).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(qwk(&[1, 1], &[1, 1], 3).unwrap(), 1.0);
        assert!(qwk(&[1, 1, 1, 1], &[0, 1, 2, 2], 3).unwrap() <= 0.0);
        assert!(qwk(&[0], &[0], 1).is_err());
    }

    #[test]
    fn accuracy_is_trace_over_total() {
        let preds = [0, 2, 1, 1, 0, 2, 2];
        let truths = [0, 1, 1, 2, 0, 2, 0];
        let cm = ConfusionMatrix::new(&preds, &truths, 3).unwrap();
        assert_eq!(
            micro_accuracy(&preds, &truths).unwrap(),
            cm.trace() as f64 / cm.total() as f64
        );
    }
}
