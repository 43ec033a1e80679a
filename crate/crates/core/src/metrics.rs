//! Evaluation quantities.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateAssignment;
use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Column totals: how often each class was predicted.
    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.classes)
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }
}

pub fn top1_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    if preds.len() != labels.len() {
        return Err(Error::shape("predictions and labels differ in length"));
    }
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Accuracy per true class; `None` for classes without instances.
pub fn per_class_accuracy(preds: &[usize], labels: &[usize], classes: usize) -> Vec<Option<f64>> {
    let mut hits = vec![0usize; classes];
    let mut totals = vec![0usize; classes];
    for (&p, &l) in preds.iter().zip(labels) {
        totals[l] += 1;
        if p == l {
            hits[l] += 1;
        }
    }
    hits.iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect()
}

/// Rate at which the true label is inside the candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelEstimation {
    /// Over instances with a nonempty set.
    pub nonempty: f64,
    /// Over every labeled instance; empty sets count as misses.
    pub overall: f64,
}

/// `labels[i]` is the ground truth for `assign.sets[i]`; unlabeled entries
/// are skipped.
pub fn label_estimation_accuracy(assign: &CandidateAssignment, labels: &[Option<usize>]) -> Result<LabelEstimation> {
    if labels.len() != assign.len() {
        return Err(Error::shape("labels and assignment differ in length"));
    }
    let (mut hits, mut nonempty, mut total) = (0usize, 0usize, 0usize);
    for (set, label) in assign.sets.iter().zip(labels) {
        let Some(label) = label else { continue };
        total += 1;
        if !set.is_empty() {
            nonempty += 1;
            if set.binary_search(label).is_ok() {
                hits += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::MissingLabels("label estimation accuracy"));
    }
    Ok(LabelEstimation {
        nonempty: if nonempty == 0 {
            0.0
        } else {
            hits as f64 / nonempty as f64
        },
        overall: hits as f64 / total as f64,
    })
}

/// Mean candidate-set size over nonempty sets.
pub fn avg_candidate_size(assign: &CandidateAssignment) -> Result<f64> {
    let sizes: Vec<usize> = assign.sets.iter().map(Vec::len).filter(|&s| s > 0).collect();
    if sizes.is_empty() {
        return Err(Error::NoTrainableInstances);
    }
    Ok(sizes.iter().sum::<usize>() as f64 / sizes.len() as f64)
}

/// How many candidate sets contain each class.
pub fn class_frequency(assign: &CandidateAssignment) -> Vec<u64> {
    let mut freq = vec![0u64; assign.c];
    for &c in assign.sets.iter().flatten() {
        freq[c] += 1;
    }
    freq
}

pub fn confusion(preds: &[usize], labels: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::shape("predictions and labels differ in length"));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if l >= classes || p >= classes {
            return Err(Error::LabelOutOfRange {
                label: l.max(p),
                classes,
            });
        }
        counts[l][p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

/// Ratio of the largest to the smallest class frequency; infinite when a
/// class never appears.
pub fn frequency_imbalance(freq: &[u64]) -> f64 {
    let max = freq.iter().copied().max().unwrap_or(0);
    let min = freq.iter().copied().min().unwrap_or(0);
    if min == 0 {
        f64::INFINITY
    } else {
        max as f64 / min as f64
    }
}
