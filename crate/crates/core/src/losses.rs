//! Partial-label losses over one logit row, each returning its value and
//! the analytic gradient with respect to the logits.
//!
//! With `p = softmax(z)` and candidate set `S`:
//!
//! | loss    | value                                                        | gradient        |
//! |---------|--------------------------------------------------------------|-----------------|
//! | CC      | `-log sum_{c in S} p_c`                                      | `p - p_S / sum_S p` |
//! | RC      | `sum_{c in S} w_c (-log p_c)`, `w` = detached `p` renormalized on `S` | `p - w` |
//! | CAV     | cross-entropy toward `argmax_{c in S} z_c`                   | `p - e_c*`      |
//! | LW      | RC term `+ leverage * sum_{c not in S} w'_c (-log(1 - p_c))` | see [`loss_lw`] |
//! | Soft-CE | `-sum_c y_c log p_c`, `y` = prior confidence renormalized on `S` | `p - y`     |
//!
//! All weights derived from probabilities are treated as constants.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    /// Classifier-consistent.
    Cc,
    /// Risk-consistent.
    Rc,
    /// Class activation value.
    Cav,
    /// Leveraged weighted; `leverage` scales the non-candidate term.
    Lw { leverage: f64 },
    /// Cross-entropy against soft targets built from the previous model.
    SoftCe,
}

impl LossKind {
    pub const LW_DEFAULT_LEVERAGE: f64 = 1.0;

    pub fn validate(&self) -> Result<()> {
        match self {
            LossKind::Lw { leverage } if leverage.is_nan() || *leverage < 0.0 => {
                Err(Error::config("LW leverage must be non-negative"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Cc => "cc",
            LossKind::Rc => "rc",
            LossKind::Cav => "cav",
            LossKind::Lw { .. } => "lw",
            LossKind::SoftCe => "softce",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// A probability vector supported on a candidate set.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftTarget {
    y: Vec<f64>,
}

impl SoftTarget {
    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }

    /// Wraps an arbitrary probability vector.
    pub fn new(y: Vec<f64>) -> Result<Self> {
        if y.is_empty() || y.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NotStochastic {
                row: 0,
                reason: "soft target entry invalid",
            });
        }
        let sum: f64 = y.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotStochastic {
                row: 0,
                reason: "soft target does not sum to 1",
            });
        }
        Ok(Self { y })
    }
}

fn check(logits: &[f64], target: &[bool]) -> Result<()> {
    if logits.len() != target.len() {
        return Err(Error::shape("logits and target differ in length"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    if !target.iter().any(|&b| b) {
        return Err(Error::EmptyCandidateTarget);
    }
    Ok(())
}

/// `probs` renormalized over the entries selected by `mask`; uniform over
/// the mask when the selected mass is zero.
fn renormalize(probs: &[f64], mask: &[bool]) -> Vec<f64> {
    let mass: f64 = probs.iter().zip(mask).filter(|(_, &m)| m).map(|(p, _)| p).sum();
    if mass > 0.0 && mass.is_finite() {
        probs
            .iter()
            .zip(mask)
            .map(|(&p, &m)| if m { p / mass } else { 0.0 })
            .collect()
    } else {
        let count = mask.iter().filter(|&&m| m).count();
        log::warn!("zero probability mass on {count} selected classes, using uniform weights");
        mask.iter().map(|&m| if m { 1.0 / count as f64 } else { 0.0 }).collect()
    }
}

/// Weighted cross-entropy `sum_c w_c (-log p_c)` with `sum w = 1`.
fn weighted_ce(logits: &[f64], weights: &[f64]) -> Result<LossEval> {
    let lse = math::logsumexp(logits);
    let p = math::softmax_row(logits)?;
    let value = logits
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&z, &w)| w * (lse - z))
        .sum();
    let grad = p.iter().zip(weights).map(|(p, w)| p - w).collect();
    Ok(LossEval { value, grad })
}

pub fn supervised_ce(logits: &[f64], label: usize) -> Result<LossEval> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    let mut one_hot = vec![0.0; logits.len()];
    one_hot[label] = 1.0;
    weighted_ce(logits, &one_hot)
}

pub fn loss_cc(logits: &[f64], target: &[bool]) -> Result<LossEval> {
    check(logits, target)?;
    let lse = math::logsumexp(logits);
    let lse_s = math::masked_logsumexp(logits, target);
    let p = math::softmax_row(logits)?;
    let grad = p
        .iter()
        .zip(logits)
        .zip(target)
        .map(|((&p, &z), &m)| if m { p - libm::exp(z - lse_s) } else { p })
        .collect();
    Ok(LossEval {
        value: (lse - lse_s).max(0.0),
        grad,
    })
}

/// `detached` supplies the weights and receives no gradient.
pub fn loss_rc(logits: &[f64], target: &[bool], detached: &[f64]) -> Result<LossEval> {
    check(logits, target)?;
    if detached.len() != logits.len() {
        return Err(Error::shape("detached probabilities differ in length"));
    }
    weighted_ce(logits, &renormalize(detached, target))
}

pub fn loss_cav(logits: &[f64], target: &[bool]) -> Result<LossEval> {
    check(logits, target)?;
    let mut best: Option<usize> = None;
    for (c, (&z, &m)) in logits.iter().zip(target).enumerate() {
        if m && best.is_none_or(|b| z > logits[b]) {
            best = Some(c);
        }
    }
    // check() guarantees a candidate
    supervised_ce(logits, best.unwrap_or(0))
}

/// Leveraged weighted loss.
///
/// The candidate term equals RC. For each non-candidate `c` the term
/// `-log(1 - p_c)` equals `lse(z) - lse(z without c)`, whose gradient is
/// `p - softmax(z without c)` (zero at `c`); both are computed in log space.
pub fn loss_lw(logits: &[f64], target: &[bool], detached: &[f64], leverage: f64) -> Result<LossEval> {
    check(logits, target)?;
    if detached.len() != logits.len() {
        return Err(Error::shape("detached probabilities differ in length"));
    }
    if leverage.is_nan() || leverage < 0.0 {
        return Err(Error::config("LW leverage must be non-negative"));
    }
    let mut eval = weighted_ce(logits, &renormalize(detached, target))?;
    let complement: Vec<bool> = target.iter().map(|&m| !m).collect();
    if leverage == 0.0 || !complement.iter().any(|&m| m) {
        return Ok(eval);
    }

    let lse = math::logsumexp(logits);
    let p = math::softmax_row(logits)?;
    let weights = renormalize(detached, &complement);
    let mut others = vec![true; logits.len()];
    for (c, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        others[c] = false;
        let lse_rest = math::masked_logsumexp(logits, &others);
        eval.value += leverage * w * (lse - lse_rest);
        for (j, g) in eval.grad.iter_mut().enumerate() {
            let rest = if j == c { 0.0 } else { libm::exp(logits[j] - lse_rest) };
            *g += leverage * w * (p[j] - rest);
        }
        others[c] = true;
    }
    Ok(eval)
}

/// Prior confidence renormalized over the candidate set.
pub fn make_soft_target(prior: &[f64], target: &[bool]) -> Result<SoftTarget> {
    if prior.len() != target.len() {
        return Err(Error::shape("prior and target differ in length"));
    }
    if !target.iter().any(|&b| b) {
        return Err(Error::EmptyCandidateTarget);
    }
    Ok(SoftTarget {
        y: renormalize(prior, target),
    })
}

pub fn loss_soft_ce(logits: &[f64], y: &SoftTarget) -> Result<LossEval> {
    if logits.len() != y.y.len() {
        return Err(Error::shape("logits and soft target differ in length"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    weighted_ce(logits, &y.y)
}

/// Dispatches on `kind`. RC and LW weight with the detached softmax of
/// `logits`; Soft-CE needs `prior`, the confidence row used when the
/// candidate set was generated.
pub fn partial_loss(kind: &LossKind, logits: &[f64], target: &[bool], prior: Option<&[f64]>) -> Result<LossEval> {
    match kind {
        LossKind::Cc => loss_cc(logits, target),
        LossKind::Rc => {
            check(logits, target)?;
            loss_rc(logits, target, &math::softmax_row(logits)?)
        }
        LossKind::Cav => loss_cav(logits, target),
        LossKind::Lw { leverage } => {
            check(logits, target)?;
            loss_lw(logits, target, &math::softmax_row(logits)?, *leverage)
        }
        LossKind::SoftCe => {
            let prior = prior.ok_or_else(|| Error::config("soft-target loss needs prior confidences"))?;
            check(logits, target)?;
            loss_soft_ce(logits, &make_soft_target(prior, target)?)
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LabeledExample<'a> {
    pub logits: &'a [f64],
    pub label: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct PartialExample<'a> {
    pub logits: &'a [f64],
    pub target: &'a [bool],
    pub prior: Option<&'a [f64]>,
}

/// Value and per-example logit gradients of one mixed step. Gradients are
/// already scaled by the batch means and `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub value: f64,
    pub labeled_grads: Vec<Vec<f64>>,
    pub unlabeled_grads: Vec<Vec<f64>>,
}

/// `mean CE(labeled) + lambda * mean partial(unlabeled)`. With an empty
/// labeled batch the objective is the unweighted partial mean and `lambda`
/// is ignored.
pub fn combined_batch_loss(
    labeled: &[LabeledExample<'_>],
    unlabeled: &[PartialExample<'_>],
    lambda: f64,
    kind: &LossKind,
) -> Result<BatchLoss> {
    if labeled.is_empty() && unlabeled.is_empty() {
        return Err(Error::EmptyInput);
    }
    let weight = if labeled.is_empty() { 1.0 } else { lambda };

    let sup = map_examples(labeled, |ex| supervised_ce(ex.logits, ex.label))?;
    let part = map_examples(unlabeled, |ex| partial_loss(kind, ex.logits, ex.target, ex.prior))?;

    let mut value = 0.0;
    let labeled_grads = scale(sup, labeled.len(), 1.0, &mut value);
    let unlabeled_grads = scale(part, unlabeled.len(), weight, &mut value);
    Ok(BatchLoss {
        value,
        labeled_grads,
        unlabeled_grads,
    })
}

fn scale(evals: Vec<LossEval>, count: usize, weight: f64, value: &mut f64) -> Vec<Vec<f64>> {
    if count == 0 {
        return Vec::new();
    }
    let factor = weight / count as f64;
    let mut mean = 0.0;
    let grads = evals
        .into_iter()
        .map(|mut e| {
            mean += e.value;
            e.grad.iter_mut().for_each(|g| *g *= factor);
            e.grad
        })
        .collect();
    *value += mean * factor;
    grads
}

#[cfg(feature = "parallel")]
fn map_examples<T: Sync, F>(items: &[T], f: F) -> Result<Vec<LossEval>>
where
    F: Fn(&T) -> Result<LossEval> + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_examples<T, F>(items: &[T], f: F) -> Result<Vec<LossEval>>
where
    F: Fn(&T) -> Result<LossEval>,
{
    items.iter().map(f).collect()
}
