//! Stratified (optionally grouped) k-fold assignment.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::manifest::DatasetManifest;
use crate::error::{Error, Result};

/// Fold index of every row, plus the fold count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

/// Indices of one cross-validation round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldAssignment {
    pub fn members(&self, fold: usize) -> Vec<usize> {
        self.fold_of
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Round `i`: test on fold `i`, validate on fold `(i + 1) mod k`,
    /// train on the rest.
    pub fn split(&self, round: usize) -> Split {
        let val_fold = (round + 1) % self.k;
        let mut s = Split {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for (i, &f) in self.fold_of.iter().enumerate() {
            if f == round {
                s.test.push(i);
            } else if f == val_fold {
                s.val.push(i);
            } else {
                s.train.push(i);
            }
        }
        s
    }

    /// Per fold, per class counts.
    pub fn class_counts(&self, labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
        let mut counts = vec![vec![0; n_classes]; self.k];
        for (&f, &l) in self.fold_of.iter().zip(labels) {
            counts[f][l] += 1;
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FoldOptions {
    /// Keep all rows that share a group id in one fold.
    pub group: bool,
    /// Proceed when a class has fewer than `k` rows (leaves some folds without it).
    pub allow_sparse: bool,
}

/// Stratified k-fold assignment.
///
/// Ungrouped: each class's rows are shuffled with `seed` and dealt
/// round-robin, the dealing position carrying over between classes, so
/// per-class fold counts differ by at most one.
///
/// Grouped: groups are shuffled, ordered by decreasing size, and each is
/// placed in the fold where its classes are currently least represented
/// (relative to class totals), ties going to the smaller, then lower, fold.
pub fn make_folds(
    labels: &[usize],
    groups: Option<&[String]>,
    k: usize,
    seed: u64,
    options: FoldOptions,
) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if labels.is_empty() {
        return Err(Error::Dataset("no rows to split".into()));
    }
    let n_classes = labels.iter().max().unwrap() + 1;
    let mut totals = vec![0usize; n_classes];
    for &l in labels {
        totals[l] += 1;
    }
    if !options.allow_sparse {
        if let Some((class, &n)) = totals.iter().enumerate().find(|&(_, &n)| n > 0 && n < k) {
            return Err(Error::Dataset(format!(
                "class {class} has {n} videos, fewer than {k} folds"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];

    match groups.filter(|_| options.group) {
        None => {
            let mut next = 0;
            for class in 0..n_classes {
                let mut rows: Vec<usize> =
                    (0..labels.len()).filter(|&i| labels[i] == class).collect();
                rows.shuffle(&mut rng);
                for i in rows {
                    fold_of[i] = next;
                    next = (next + 1) % k;
                }
            }
        }
        Some(groups) => {
            if groups.len() != labels.len() {
                return Err(Error::Dataset("group ids do not match rows".into()));
            }
            let mut by_group: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, g) in groups.iter().enumerate() {
                by_group.entry(g.as_str()).or_default().push(i);
            }
            let mut members: Vec<Vec<usize>> = by_group.into_values().collect();
            members.shuffle(&mut rng);
            members.sort_by_key(|m| std::cmp::Reverse(m.len()));
            let mut counts = vec![vec![0usize; n_classes]; k];
            let mut sizes = vec![0usize; k];
            for rows in members {
                let cost = |f: usize| -> f64 {
                    rows.iter()
                        .map(|&i| counts[f][labels[i]] as f64 / totals[labels[i]] as f64)
                        .sum()
                };
                let best = (0..k)
                    .min_by(|&a, &b| {
                        cost(a)
                            .total_cmp(&cost(b))
                            .then(sizes[a].cmp(&sizes[b]))
                            .then(a.cmp(&b))
                    })
                    .unwrap();
                for &i in &rows {
                    fold_of[i] = best;
                    counts[best][labels[i]] += 1;
                }
                sizes[best] += rows.len();
            }
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

/// Folds for a manifest, grouped by mouse when every row has a mouse id.
/// Rows with a preassigned `fold` keep it when all rows carry one.
pub fn manifest_folds(
    manifest: &DatasetManifest,
    k: usize,
    seed: u64,
    group_by_mouse: bool,
) -> Result<FoldAssignment> {
    if let Some(preset) = manifest
        .rows
        .iter()
        .map(|r| r.fold)
        .collect::<Option<Vec<_>>>()
    {
        if let Some(bad) = preset.iter().find(|&&f| f >= k) {
            return Err(Error::Dataset(format!("preassigned fold {bad} >= k={k}")));
        }
        return Ok(FoldAssignment { k, fold_of: preset });
    }
    let groups = manifest.groups();
    make_folds(
        &manifest.labels(),
        groups.as_deref(),
        k,
        seed,
        FoldOptions {
            group: group_by_mouse,
            allow_sparse: false,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_of_one_class_two_per_fold() {
        let f = make_folds(&[0; 16], None, 8, 1, FoldOptions::default()).unwrap();
        for fold in 0..8 {
            assert_eq!(f.members(fold).len(), 2);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let labels: Vec<usize> = (0..40).map(|i| i % 3).collect();
        let a = make_folds(&labels, None, 8, 7, FoldOptions::default()).unwrap();
        let b = make_folds(&labels, None, 8, 7, FoldOptions::default()).unwrap();
        let c = make_folds(&labels, None, 8, 8, FoldOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sparse_class_is_reported() {
        let labels = [0, 0, 0, 1];
        assert!(make_folds(&labels, None, 3, 0, FoldOptions::default()).is_err());
        let ok = make_folds(
            &labels,
            None,
            3,
            0,
            FoldOptions {
                allow_sparse: true,
                ..Default::default()
            },
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn rotation_splits_are_disjoint() {
        let labels: Vec<usize> = (0..48).map(|i| i % 3).collect();
        let f = make_folds(&labels, None, 8, 2, FoldOptions::default()).unwrap();
        let mut tested = vec![0; 48];
        for round in 0..8 {
            let s = f.split(round);
            assert_eq!(s.train.len() + s.val.len() + s.test.len(), 48);
            for i in &s.test {
                assert!(!s.val.contains(i) && !s.train.contains(i));
                tested[*i] += 1;
            }
            for i in &s.val {
                assert!(!s.train.contains(i));
            }
        }
        assert!(tested.iter().all(|&c| c == 1));
    }

    #[test]
    fn groups_stay_together() {
        let labels: Vec<usize> = (0..60).map(|i| i % 5).collect();
        let groups: Vec<String> = (0..60).map(|i| format!("m{}", i / 5)).collect();
        let f = make_folds(
            &labels,
            Some(&groups),
            4,
            3,
            FoldOptions {
                group: true,
                allow_sparse: false,
            },
        )
        .unwrap();
        for m in 0..12 {
            let folds: std::collections::HashSet<_> =
                (m * 5..m * 5 + 5).map(|i| f.fold_of[i]).collect();
            assert_eq!(folds.len(), 1);
        }
        for fold in 0..4 {
            assert_eq!(f.members(fold).len(), 15);
        }
    }
}
