//! Synthetic data whose zero-shot logits are miscalibrated toward chosen
//! classes.
//!
//! Features are Gaussian blobs: class `k` has mean `separation * u_k` for a
//! random unit vector `u_k` and identity covariance. The zero-shot logit for
//! class `k` is `logit_scale * <x, u_k> + bias[k] + noise * eps`, so a large
//! positive `bias[k]` pulls mispredictions into class `k` and produces a
//! confusion matrix with one dominant column.

use cpl_core::{ContainerKind, DataContainer};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    /// Additive logit bias per class; empty means no bias.
    pub confusion_bias: Vec<f64>,
    /// Standard deviation of the independent logit noise.
    pub logit_noise: f64,
    pub logit_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 200,
            classes: 10,
            dim: 32,
            separation: 3.0,
            confusion_bias: Vec::new(),
            logit_noise: 1.0,
            logit_scale: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(cpl_core::Error::Config(m.into()).into());
        if self.classes < 2 {
            return bad("synthetic data needs at least two classes");
        }
        if self.dim == 0 || self.n_per_class == 0 {
            return bad("dimension and per-class count must be positive");
        }
        if self.separation.is_nan() || self.separation <= 0.0 {
            return bad("separation must be positive");
        }
        if !self.confusion_bias.is_empty() && self.confusion_bias.len() != self.classes {
            return bad("confusion bias needs one entry per class");
        }
        if self.logit_noise.is_nan() || self.logit_noise < 0.0 {
            return bad("logit noise must be non-negative");
        }
        Ok(())
    }
}

/// Generates aligned feature and zero-shot logit containers, both labeled,
/// in a seeded random instance order.
pub fn make_synthetic(cfg: &SynthConfig) -> Result<(DataContainer, DataContainer)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (c, d) = (cfg.classes, cfg.dim);

    let mut directions = Vec::with_capacity(c * d);
    for _ in 0..c {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        directions.extend(v.iter().map(|x| x / norm));
    }

    let mut order: Vec<usize> = (0..c).flat_map(|k| std::iter::repeat_n(k, cfg.n_per_class)).collect();
    order.shuffle(&mut rng);

    let mut features = Vec::with_capacity(order.len() * d);
    let mut logits = Vec::with_capacity(order.len() * c);
    let mut labels = Vec::with_capacity(order.len());
    for &class in &order {
        let mean = &directions[class * d..(class + 1) * d];
        let x: Vec<f64> = mean
            .iter()
            .map(|m| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                cfg.separation * m + eps
            })
            .collect();
        for k in 0..c {
            let u = &directions[k * d..(k + 1) * d];
            let dot: f64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
            let bias = cfg.confusion_bias.get(k).copied().unwrap_or(0.0);
            let noise: f64 = StandardNormal.sample(&mut rng);
            logits.push(cfg.logit_scale * dot + bias + cfg.logit_noise * noise);
        }
        features.extend(x);
        labels.push(Some(class));
    }
    // the container format stores f32
    let narrow = |v: Vec<f64>| v.into_iter().map(|x| x as f32 as f64).collect::<Vec<_>>();
    let features = DataContainer::new(ContainerKind::Features, d, c, narrow(features), labels.clone(), None)?;
    let logits = DataContainer::new(ContainerKind::Logits, c, c, narrow(logits), labels, None)?;
    Ok((features, logits))
}

/// Moves the first `per_class` instances of every class into a held-out
/// container. Returns `(rest, held_out)` index lists.
pub fn holdout_per_class(data: &DataContainer, per_class: usize) -> (Vec<usize>, Vec<usize>) {
    let mut taken = vec![0usize; data.classes()];
    let (mut rest, mut held) = (Vec::new(), Vec::new());
    for i in 0..data.len() {
        match data.label(i) {
            Some(l) if taken[l] < per_class => {
                taken[l] += 1;
                held.push(i);
            }
            _ => rest.push(i),
        }
    }
    (rest, held)
}

/// Train and test splits of one generated population.
#[derive(Debug, Clone)]
pub struct SyntheticSplit {
    pub train_features: DataContainer,
    pub train_logits: DataContainer,
    pub test_features: DataContainer,
    pub test_logits: DataContainer,
}

/// Generates `n_per_class + test_per_class` instances per class and holds
/// out `test_per_class` of each class for testing.
pub fn make_synthetic_split(cfg: &SynthConfig, test_per_class: usize) -> Result<SyntheticSplit> {
    let total = SynthConfig {
        n_per_class: cfg.n_per_class + test_per_class,
        ..cfg.clone()
    };
    let (features, logits) = make_synthetic(&total)?;
    let (train, test) = holdout_per_class(&features, test_per_class);
    Ok(SyntheticSplit {
        train_features: features.subset(&train),
        train_logits: logits.subset(&train),
        test_features: features.subset(&test),
        test_logits: logits.subset(&test),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use cpl_core::metrics;

    fn zero_shot_preds(logits: &DataContainer) -> Vec<usize> {
        (0..logits.len())
            .map(|i| cpl_core::math::argmax(logits.row(i)))
            .collect()
    }

    fn truth(data: &DataContainer) -> Vec<usize> {
        data.labels().iter().map(|l| l.unwrap()).collect()
    }

    #[test]
    fn separable_limit_is_accurate() {
        let cfg = SynthConfig {
            separation: 30.0,
            n_per_class: 50,
            classes: 5,
            ..SynthConfig::default()
        };
        let (_, logits) = make_synthetic(&cfg).unwrap();
        let acc = metrics::top1_accuracy(&zero_shot_preds(&logits), &truth(&logits)).unwrap();
        assert!(acc > 0.99, "{acc}");
    }

    #[test]
    fn biased_class_dominates_confusion() {
        let mut bias = vec![0.0; 6];
        bias[4] = 4.0;
        let cfg = SynthConfig {
            classes: 6,
            n_per_class: 100,
            confusion_bias: bias,
            ..SynthConfig::default()
        };
        let (_, logits) = make_synthetic(&cfg).unwrap();
        let cm = metrics::confusion(&zero_shot_preds(&logits), &truth(&logits), 6).unwrap();
        let cols = cm.column_sums();
        let top = cpl_core::math::argmax(&cols.iter().map(|&v| v as f64).collect::<Vec<_>>());
        assert_eq!(top, 4);
        assert!(
            cols[4]
                > 2 * cols
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != 4)
                    .map(|(_, &v)| v)
                    .max()
                    .unwrap()
        );
    }

    #[test]
    fn deterministic_and_counted() {
        let cfg = SynthConfig {
            n_per_class: 20,
            classes: 3,
            dim: 4,
            seed: 7,
            ..SynthConfig::default()
        };
        let a = make_synthetic(&cfg).unwrap();
        let b = make_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        let counts: Vec<usize> = a.0.indices_by_class().iter().map(Vec::len).collect();
        assert_eq!(counts, vec![20, 20, 20]);
        assert_eq!(a.0.labels(), a.1.labels());
    }

    #[test]
    fn split_holds_out_per_class() {
        let cfg = SynthConfig {
            n_per_class: 10,
            classes: 3,
            dim: 2,
            ..SynthConfig::default()
        };
        let s = make_synthetic_split(&cfg, 4).unwrap();
        assert_eq!(s.train_features.len(), 30);
        assert_eq!(s.test_features.len(), 12);
        assert_eq!(s.test_logits.labels(), s.test_features.labels());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(make_synthetic(&SynthConfig {
            classes: 1,
            ..SynthConfig::default()
        })
        .is_err());
        assert!(make_synthetic(&SynthConfig {
            separation: 0.0,
            ..SynthConfig::default()
        })
        .is_err());
        assert!(make_synthetic(&SynthConfig {
            confusion_bias: vec![1.0],
            ..SynthConfig::default()
        })
        .is_err());
    }
}
