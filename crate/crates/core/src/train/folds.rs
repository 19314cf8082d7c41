use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::molio::Task;
use crate::{Error, Result};

/// Quantile bins used to stratify regression targets.
pub const REGRESSION_BINS: usize = 10;

/// Record indices of one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Every record is dealt into one of `k` groups. Fold `f` tests on group
/// `f`, validates on group `(f + 1) % k` and trains on the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub seed: u64,
    pub k: usize,
    pub groups: Vec<usize>,
    /// False when stratification was abandoned for a plain random deal.
    pub stratified: bool,
}

impl FoldAssignment {
    pub fn split(&self, fold: usize) -> Result<FoldSplit> {
        if fold >= self.k {
            return Err(Error::Config(format!("fold {fold} out of range for {} folds", self.k)));
        }
        let val_group = (fold + 1) % self.k;
        let mut s = FoldSplit {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for (i, &g) in self.groups.iter().enumerate() {
            if g == fold {
                s.test.push(i);
            } else if g == val_group {
                s.val.push(i);
            } else {
                s.train.push(i);
            }
        }
        Ok(s)
    }

    pub fn splits(&self) -> Vec<FoldSplit> {
        (0..self.k).map(|f| self.split(f).expect("fold in range")).collect()
    }
}

fn strata(targets: &[f64], task: Task, k: usize) -> Result<Option<Vec<Vec<usize>>>> {
    match task {
        Task::Classification => {
            let mut by_class: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
            for (i, &t) in targets.iter().enumerate() {
                let c = match t {
                    x if x == 0.0 => 0,
                    x if x == 1.0 => 1,
                    other => {
                        return Err(Error::Dataset(format!(
                            "classification target must be 0 or 1, got {other}"
                        )))
                    }
                };
                by_class.entry(c).or_default().push(i);
            }
            if let Some((c, v)) = by_class.iter().find(|(_, v)| v.len() < k) {
                log::warn!(
                    "class {c} has {} members, fewer than {k} folds; splitting without stratification",
                    v.len()
                );
                return Ok(None);
            }
            Ok(Some(by_class.into_values().collect()))
        }
        Task::Regression => {
            let mut order: Vec<usize> = (0..targets.len()).collect();
            order.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]).then(a.cmp(&b)));
            let n = order.len();
            let bins = REGRESSION_BINS.min(n);
            Ok(Some(
                (0..bins)
                    .map(|b| order[b * n / bins..(b + 1) * n / bins].to_vec())
                    .collect(),
            ))
        }
    }
}

/// Stratified `k`-fold assignment: each stratum (class, or target-quantile
/// bin for regression) is shuffled and dealt round-robin, the dealing
/// position carrying over between strata so group sizes differ by at most one.
pub fn stratified_folds(targets: &[f64], task: Task, k: usize, seed: u64) -> Result<FoldAssignment> {
    if targets.is_empty() {
        return Err(Error::Dataset("cannot split an empty dataset".into()));
    }
    if k < 3 {
        return Err(Error::Config(format!(
            "need at least 3 folds for train/val/test, got {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let found = strata(targets, task, k)?;
    let stratified = found.is_some();
    let strata = found.unwrap_or_else(|| vec![(0..targets.len()).collect()]);
    let mut groups = vec![0; targets.len()];
    let mut next = 0;
    for mut s in strata {
        s.shuffle(&mut rng);
        for i in s {
            groups[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment {
        seed,
        k,
        groups,
        stratified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_and_balance() {
        let targets: Vec<f64> = (0..100).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        let a = stratified_folds(&targets, Task::Classification, 10, 4).unwrap();
        assert!(a.stratified);
        let mut seen = vec![0; 100];
        for s in a.splits() {
            let pos = s.test.iter().filter(|&&i| targets[i] == 1.0).count();
            assert!((4..=6).contains(&pos));
            assert_eq!((s.train.len(), s.val.len(), s.test.len()), (80, 10, 10));
            for &i in &s.test {
                seen[i] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(a, stratified_folds(&targets, Task::Classification, 10, 4).unwrap());
        assert_ne!(a, stratified_folds(&targets, Task::Classification, 10, 5).unwrap());
    }

    #[test]
    fn rare_class_falls_back() {
        let mut t = vec![0.0; 30];
        t[0] = 1.0;
        let a = stratified_folds(&t, Task::Classification, 10, 0).unwrap();
        assert!(!a.stratified);
        assert!(stratified_folds(&t, Task::Classification, 2, 0).is_err());
    }
}
