//! Run configuration. Defaults follow the reference training protocol:
//! SGD with momentum 0.9, weight decay 5e-2, learning rate 0.02 after two
//! warmup epochs at 1e-4, cosine annealing, unlabeled batch 64, 50 epochs
//! and ten curriculum iterations.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossKind;

/// Quantile ratios for the two selection stages. `beta == None` disables
/// inter-instance selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub alpha: f64,
    pub beta: Option<f64>,
}

impl SelectionParams {
    pub fn new(alpha: f64, beta: Option<f64>) -> Result<Self> {
        let params = Self { alpha, beta };
        params.validate()?;
        Ok(params)
    }

    /// `alpha = 0` with inter selection off: one label per instance.
    pub fn hard_pseudolabel() -> Self {
        Self { alpha: 0.0, beta: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if let Some(beta) = self.beta {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::config(format!("beta {beta} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            alpha: 0.75,
            beta: Some(0.95),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    /// Semi-supervised: a few labeled instances per class.
    Ssl,
    /// Unsupervised: no labels are used for training.
    Ul,
    /// Transductive zero-shot: seen classes labeled, unseen classes unlabeled.
    Trzsl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParadigmSpec {
    pub paradigm: Paradigm,
    pub labeled_per_class: usize,
    pub seen_fraction: f64,
    /// Per-class cap on unlabeled instances (few-shot unlabeled scenario).
    pub q_fewshot: Option<usize>,
    /// Weight of the candidate-label term against the labeled term.
    pub lambda: f64,
}

impl ParadigmSpec {
    pub fn new(paradigm: Paradigm) -> Self {
        Self {
            paradigm,
            labeled_per_class: 2,
            seen_fraction: 0.62,
            q_fewshot: None,
            lambda: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_nan() || self.lambda < 0.0 {
            return Err(Error::config("lambda must be non-negative"));
        }
        if !(self.seen_fraction > 0.0 && self.seen_fraction < 1.0) {
            return Err(Error::config("seen fraction must lie in (0, 1)"));
        }
        if self.paradigm == Paradigm::Ssl && self.labeled_per_class == 0 {
            return Err(Error::config("labeled_per_class must be at least 1"));
        }
        if self.q_fewshot == Some(0) {
            return Err(Error::config("few-shot q must be at least 1"));
        }
        Ok(())
    }
}

impl Default for ParadigmSpec {
    fn default() -> Self {
        Self::new(Paradigm::Ul)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub lr: f64,
    pub warmup_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    /// Unlabeled batch size; the labeled batch size is derived from it.
    pub batch_unlabeled: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            warmup_epochs: 2,
            lr: 0.02,
            warmup_lr: 1e-4,
            momentum: 0.9,
            weight_decay: 5e-2,
            batch_unlabeled: 64,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_epochs >= self.epochs {
            return Err(Error::config("warmup epochs must be fewer than epochs"));
        }
        if !(self.lr > 0.0 && self.warmup_lr > 0.0) {
            return Err(Error::config("learning rates must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::config(
                "momentum must lie in [0, 1) and weight decay be non-negative",
            ));
        }
        if self.batch_unlabeled == 0 {
            return Err(Error::config("b2 must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub paradigm: ParadigmSpec,
    pub selection: SelectionParams,
    pub loss: LossKind,
    pub optim: OptimConfig,
    /// Number of curriculum iterations.
    pub iterations: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            paradigm: ParadigmSpec::default(),
            selection: SelectionParams::default(),
            loss: LossKind::Cc,
            optim: OptimConfig::default(),
            iterations: 10,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.paradigm.validate()?;
        self.selection.validate()?;
        self.loss.validate()?;
        self.optim.validate()?;
        if self.iterations == 0 {
            return Err(Error::config("iterations must be at least 1"));
        }
        Ok(())
    }
}
