use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stratified partition of subjects into folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_folds: usize,
    pub seed: u64,
    /// Fold of each subject, by subject index.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    /// `(train, validation)` subject indices of fold `f`, ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        (0..self.assignment.len()).partition(|&i| self.assignment[i] != f)
    }
}

/// Shuffles each class and deals it round-robin over the folds; negatives
/// pick up the rotation where positives stopped, so fold sizes differ by at
/// most one.
pub fn make_folds(labels: &[u8], n_folds: usize, seed: u64) -> Result<FoldPlan> {
    if n_folds < 2 {
        return Err(Error::Config(format!(
            "need at least 2 folds, got {n_folds}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut next = 0;
    for class in [1u8, 0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < n_folds {
            return Err(Error::Config(format!(
                "class {class} has {} subjects, fewer than {n_folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for i in idx {
            assignment[i] = next;
            next = (next + 1) % n_folds;
        }
    }
    Ok(FoldPlan {
        n_folds,
        seed,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(plan: &FoldPlan, labels: &[u8], class: u8) -> Vec<usize> {
        (0..plan.n_folds)
            .map(|f| {
                (0..labels.len())
                    .filter(|&i| plan.assignment[i] == f && labels[i] == class)
                    .count()
            })
            .collect()
    }

    #[test]
    fn eight_subjects_give_one_of_each_per_fold() {
        let labels = [1, 0, 1, 0, 1, 0, 1, 0];
        let plan = make_folds(&labels, 4, 2024).unwrap();
        assert_eq!(counts(&plan, &labels, 1), vec![1; 4]);
        assert_eq!(counts(&plan, &labels, 0), vec![1; 4]);
        assert_eq!(plan, make_folds(&labels, 4, 2024).unwrap());
    }

    #[test]
    fn clinical_class_sizes_stay_proportional() {
        let labels: Vec<u8> = (0..1086).map(|i| u8::from(i < 351)).collect();
        let plan = make_folds(&labels, 4, 2024).unwrap();
        for c in counts(&plan, &labels, 1) {
            assert!(c == 87 || c == 88);
        }
        let sizes: Vec<usize> = (0..4)
            .map(|f| plan.assignment.iter().filter(|&&a| a == f).count())
            .collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn splits_partition_subjects() {
        let labels: Vec<u8> = (0..23).map(|i| u8::from(i % 3 == 0)).collect();
        let plan = make_folds(&labels, 4, 7).unwrap();
        let mut seen = vec![0; labels.len()];
        for f in 0..4 {
            let (train, val) = plan.split(f);
            assert_eq!(train.len() + val.len(), labels.len());
            val.iter().for_each(|&i| seen[i] += 1);
        }
        assert!(seen.iter().all(|&s| s == 1));
        assert_ne!(
            plan.assignment,
            make_folds(&labels, 4, 8).unwrap().assignment
        );
    }

    #[test]
    fn too_few_class_members() {
        assert!(make_folds(&[1, 1, 1, 0, 0, 0, 0, 0], 4, 0).is_err());
    }
}
