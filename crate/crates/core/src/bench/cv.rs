//! Seeded k-fold and stratified k-fold splitters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpinexError};

/// One train/test split; both index lists are ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn folds_from_assignment(assignment: &[usize], k: usize) -> Vec<Fold> {
    (0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = (0..assignment.len()).partition(|&i| assignment[i] == f);
            Fold { train, test }
        })
        .collect()
}

/// Shuffles `0..n` and cuts it into `k` contiguous test folds; the first
/// `n mod k` folds take one extra row.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(SpinexError::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(SpinexError::TooFewRows { rows: n, folds: k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut assignment = vec![0; n];
    let mut pos = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &order[pos..pos + size] {
            assignment[i] = f;
        }
        pos += size;
    }
    Ok(folds_from_assignment(&assignment, k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedFolds {
    pub folds: Vec<Fold>,
    /// Fold count actually used; lower than requested when a class is too small.
    pub k: usize,
    pub warning: Option<String>,
}

/// Deals each class's shuffled rows round-robin across folds, continuing the
/// rotation from one class to the next, so every fold holds within one row of
/// each class's share and fold sizes differ by at most one.
pub fn stratified_kfold_split(labels: &[usize], k: usize, seed: u64) -> Result<StratifiedFolds> {
    if k < 2 {
        return Err(SpinexError::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    let n = labels.len();
    if n < 2 {
        return Err(SpinexError::TooFewRows { rows: n, folds: k });
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let smallest = by_class.iter().filter(|c| !c.is_empty()).map(Vec::len).min().unwrap_or(0);
    let (k_used, warning) = if smallest < k {
        let reduced = smallest.max(2);
        let msg = format!("smallest class has {smallest} rows; reduced stratified folds from {k} to {reduced}");
        (reduced, Some(msg))
    } else {
        (k, None)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; n];
    let mut slot = 0;
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = slot % k_used;
            slot += 1;
        }
    }
    Ok(StratifiedFolds { folds: folds_from_assignment(&assignment, k_used), k: k_used, warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remainder_goes_to_leading_folds() {
        let sizes: Vec<usize> = kfold_split(7, 5, 3).unwrap().iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
    }

    #[test]
    fn too_few_rows() {
        assert!(matches!(kfold_split(3, 5, 0), Err(SpinexError::TooFewRows { rows: 3, folds: 5 })));
    }

    #[test]
    fn imbalanced_stratification() {
        let labels: Vec<usize> = (0..50).map(|i| usize::from(i >= 45)).collect();
        let s = stratified_kfold_split(&labels, 5, 1).unwrap();
        assert!(s.warning.is_none());
        for f in &s.folds {
            let ones = f.test.iter().filter(|&&i| labels[i] == 1).count();
            assert_eq!((f.test.len() - ones, ones), (9, 1));
        }
    }

    #[test]
    fn small_class_reduces_k() {
        let labels = vec![0, 0, 0, 0, 0, 0, 1, 1, 1];
        let s = stratified_kfold_split(&labels, 5, 0).unwrap();
        assert_eq!(s.k, 3);
        assert!(s.warning.is_some());
    }
}
