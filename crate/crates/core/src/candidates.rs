//! Candidate label sets and the filtered training set built from them.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Per-instance candidate sets with their intra/inter provenance.
///
/// `sets[i]` is sorted ascending. When inter-instance selection is off,
/// `inter_sets` is `None` and `sets == intra_sets`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateAssignment {
    pub c: usize,
    /// Threshold used for intra-instance selection.
    pub tau: f64,
    pub sets: Vec<Vec<usize>>,
    pub intra_sets: Vec<Vec<usize>>,
    pub inter_sets: Option<Vec<Vec<usize>>>,
}

impl CandidateAssignment {
    /// Assignment with no provenance, for callers that already have final sets.
    pub fn from_sets(c: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        let sets: Vec<Vec<usize>> = sets
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                s.dedup();
                s
            })
            .collect();
        if let Some(&label) = sets.iter().flatten().find(|&&l| l >= c) {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        Ok(Self {
            c,
            tau: 0.0,
            intra_sets: sets.clone(),
            sets,
            inter_sets: None,
        })
    }

    pub fn from_targets(targets: &[Vec<bool>]) -> Result<Self> {
        let c = targets.first().map_or(0, Vec::len);
        if targets.iter().any(|t| t.len() != c) {
            return Err(Error::shape("target vectors differ in length"));
        }
        let sets = targets.iter().map(|t| target_to_set(t)).collect();
        Self::from_sets(c, sets)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Binary target vector `s_i`.
    pub fn target(&self, i: usize) -> Vec<bool> {
        set_to_target(&self.sets[i], self.c)
    }

    pub fn targets(&self) -> Vec<Vec<bool>> {
        (0..self.len()).map(|i| self.target(i)).collect()
    }

    pub fn nonempty_count(&self) -> usize {
        self.sets.iter().filter(|s| !s.is_empty()).count()
    }
}

pub fn set_to_target(set: &[usize], c: usize) -> Vec<bool> {
    let mut t = vec![false; c];
    for &k in set {
        t[k] = true;
    }
    t
}

pub fn target_to_set(target: &[bool]) -> Vec<usize> {
    target.iter().enumerate().filter(|(_, &b)| b).map(|(k, _)| k).collect()
}

/// Instances admitted for training in one iteration.
///
/// `indices` point into the confidence matrix the assignment was built from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub indices: Vec<usize>,
    pub targets: Vec<Vec<bool>>,
    /// Class whose top-K pass admitted the instance; `None` when the set was
    /// built without curriculum selection.
    pub selected_by: Vec<Option<usize>>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub(crate) fn push(&mut self, index: usize, target: Vec<bool>, selected_by: Option<usize>) {
        self.indices.push(index);
        self.targets.push(target);
        self.selected_by.push(selected_by);
    }
}
