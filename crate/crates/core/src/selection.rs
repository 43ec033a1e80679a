//! Candidate pseudolabel generation.
//!
//! Two filters run on a confidence matrix `p` (`n x c`):
//!
//! * intra-instance: for row `i`, classes are taken in descending confidence
//!   until their cumulative confidence reaches `tau`, where `tau` is the
//!   `alpha` quantile of the per-row maxima;
//! * inter-instance: class `c` survives for row `i` only when `p[i][c]` is
//!   strictly above the `beta` quantile of column `c`.
//!
//! The candidate set is the intersection of the two. Quantiles use the
//! nearest-rank rule `sorted[min(floor(ratio * n), n - 1)]` with no
//! interpolation, so `alpha = 0` yields the smallest row maximum and every
//! intra set collapses to the argmax.
//!
//! Sorting ties resolve toward the lower class index, and toward the lower
//! instance index in the curriculum ranking.

use alloc::vec;
use alloc::vec::Vec;

use crate::candidates::{set_to_target, CandidateAssignment, TrainingSet};
use crate::confidence::ConfidenceMatrix;
use crate::config::SelectionParams;
use crate::error::{Error, Result};
use crate::math;

/// Per-class inter-instance thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassThresholds {
    pub values: Vec<f64>,
}

/// Curriculum position: iteration `t` of `iterations`, per-class cap `k_t`
/// growing by `delta` each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurriculumState {
    pub t: usize,
    pub iterations: usize,
    pub k_t: usize,
    pub delta: usize,
}

impl CurriculumState {
    /// Starts at `t = 1` with `k_1 = delta = max(1, floor(pool / (iterations * classes)))`.
    pub fn new(pool_size: usize, iterations: usize, classes: usize) -> Result<Self> {
        if iterations == 0 || classes == 0 {
            return Err(Error::config("curriculum needs at least one iteration and one class"));
        }
        let delta = (pool_size / (iterations * classes)).max(1);
        Ok(Self {
            t: 1,
            iterations,
            k_t: delta,
            delta,
        })
    }

    /// Moves to the next iteration. Returns `false` once `t` would pass the
    /// final iteration, leaving the state unchanged.
    pub fn advance(&mut self) -> bool {
        if self.t >= self.iterations {
            return false;
        }
        self.t += 1;
        self.k_t += self.delta;
        true
    }

    /// Cap at iteration `t` without stepping through the sequence.
    pub fn cap_at(&self, t: usize) -> usize {
        let first = self.k_t - (self.t - 1) * self.delta;
        first + (t - 1) * self.delta
    }
}

/// `alpha` quantile of the per-instance maximum confidence.
pub fn adaptive_threshold(conf: &ConfidenceMatrix, alpha: f64) -> Result<f64> {
    if conf.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut maxima = conf.row_max();
    math::nearest_rank_quantile(&mut maxima, alpha)
}

/// Smallest descending-confidence prefix whose sum reaches `tau`, returned in
/// ascending class order. Falls back to every class if rounding keeps the
/// running sum below `tau`.
pub fn intra_select(row: &[f64], tau: f64) -> Vec<usize> {
    let order = descending_order(row);
    let mut sum = 0.0;
    let mut take = order.len();
    for (k, &c) in order.iter().enumerate() {
        sum += row[c];
        if sum >= tau {
            take = k + 1;
            break;
        }
    }
    let mut set = order[..take].to_vec();
    set.sort_unstable();
    set
}

/// Class indices of `row` sorted by descending confidence, ties by index.
pub fn descending_order(row: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    order
}

/// `beta` quantile of every column.
pub fn inter_thresholds(conf: &ConfidenceMatrix, beta: f64) -> Result<ClassThresholds> {
    if conf.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let mut column = Vec::with_capacity(conf.rows());
    let mut values = Vec::with_capacity(conf.classes());
    for c in 0..conf.classes() {
        column.clear();
        column.extend(conf.column(c));
        values.push(math::nearest_rank_quantile(&mut column, beta)?);
    }
    Ok(ClassThresholds { values })
}

/// Classes whose confidence for `row_index` is strictly above the class threshold.
pub fn inter_select(row_index: usize, conf: &ConfidenceMatrix, th: &ClassThresholds) -> Vec<usize> {
    conf.row(row_index)
        .iter()
        .zip(&th.values)
        .enumerate()
        .filter(|(_, (&p, &t))| p > t)
        .map(|(c, _)| c)
        .collect()
}

/// Runs both selection stages over every row and intersects them.
pub fn generate_candidates(conf: &ConfidenceMatrix, params: &SelectionParams) -> Result<CandidateAssignment> {
    params.validate()?;
    let tau = adaptive_threshold(conf, params.alpha)?;
    let thresholds = params.beta.map(|b| inter_thresholds(conf, b)).transpose()?;

    let per_row = |i: usize| {
        let intra = intra_select(conf.row(i), tau);
        match &thresholds {
            Some(th) => {
                let inter = inter_select(i, conf, th);
                let set = intersect_sorted(&intra, &inter);
                (set, intra, Some(inter))
            }
            None => (intra.clone(), intra, None),
        }
    };

    #[cfg(feature = "parallel")]
    let rows: Vec<_> = {
        use rayon::prelude::*;
        (0..conf.rows()).into_par_iter().map(per_row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<_> = (0..conf.rows()).map(per_row).collect();

    let mut sets = Vec::with_capacity(rows.len());
    let mut intra_sets = Vec::with_capacity(rows.len());
    let mut inter_sets = thresholds.as_ref().map(|_| Vec::with_capacity(rows.len()));
    for (set, intra, inter) in rows {
        sets.push(set);
        intra_sets.push(intra);
        if let (Some(all), Some(inter)) = (inter_sets.as_mut(), inter) {
            all.push(inter);
        }
    }
    Ok(CandidateAssignment {
        c: conf.classes(),
        tau,
        sets,
        intra_sets,
        inter_sets,
    })
}

fn intersect_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

/// Keeps every instance with a nonempty candidate set.
pub fn filter_nonempty(assign: &CandidateAssignment) -> Result<TrainingSet> {
    let mut out = TrainingSet::default();
    for (i, set) in assign.sets.iter().enumerate() {
        if !set.is_empty() {
            out.push(i, set_to_target(set, assign.c), None);
        }
    }
    if out.is_empty() {
        return Err(Error::NoTrainableInstances);
    }
    Ok(out)
}

/// Class-wise top-K selection restricted to candidate labels.
///
/// Classes are visited in ascending order. For class `c`, the instances
/// still in the pool whose candidate set contains `c` are ranked by `p[i][c]`
/// (descending, lower index first on ties) and the first `k_t` are moved into
/// the training set. A selected instance leaves the pool, so it is never
/// admitted twice. Instances with empty sets are never eligible.
pub fn topk_curriculum_select(
    assign: &CandidateAssignment,
    conf: &ConfidenceMatrix,
    state: &CurriculumState,
) -> Result<TrainingSet> {
    if conf.rows() != assign.len() || conf.classes() != assign.c {
        return Err(Error::shape("assignment and confidence matrix disagree"));
    }
    if state.k_t == 0 {
        return Err(Error::config("per-class cap must be at least 1"));
    }
    let mut available: Vec<bool> = assign.sets.iter().map(|s| !s.is_empty()).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); assign.c];
    for (i, set) in assign.sets.iter().enumerate() {
        for &c in set {
            members[c].push(i);
        }
    }

    let mut out = TrainingSet::default();
    for (c, candidates) in members.iter_mut().enumerate() {
        candidates.retain(|&i| available[i]);
        candidates.sort_by(|&a, &b| conf.get(b, c).total_cmp(&conf.get(a, c)).then(a.cmp(&b)));
        for &i in candidates.iter().take(state.k_t) {
            available[i] = false;
            out.push(i, set_to_target(&assign.sets[i], assign.c), Some(c));
        }
    }
    Ok(out)
}
