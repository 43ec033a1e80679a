//! Dataset splits for the three learning paradigms and the imbalanced
//! variant.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::DataContainer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitResult {
    pub labeled_indices: Vec<usize>,
    pub unlabeled_indices: Vec<usize>,
    pub seen_classes: Vec<usize>,
    pub unseen_classes: Vec<usize>,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const SSL_STREAM: u64 = 0x55_4c;
const TRZSL_STREAM: u64 = 0x54_5a;
const IMBALANCE_STREAM: u64 = 0x49_4d;

/// `labeled_per_class` random instances of every class become labeled; the
/// rest form the unlabeled pool. Both index lists are ascending.
pub fn split_ssl(data: &DataContainer, labeled_per_class: usize, seed: u64) -> Result<SplitResult> {
    if !data.is_fully_labeled() {
        return Err(Error::MissingLabels("semi-supervised split"));
    }
    let mut rng = rng(seed, SSL_STREAM);
    let mut split = SplitResult::default();
    for (class, mut members) in data.indices_by_class().into_iter().enumerate() {
        if members.len() < labeled_per_class {
            return Err(Error::InsufficientClass {
                class,
                available: members.len(),
                required: labeled_per_class,
            });
        }
        members.shuffle(&mut rng);
        split.labeled_indices.extend_from_slice(&members[..labeled_per_class]);
        split.unlabeled_indices.extend_from_slice(&members[labeled_per_class..]);
    }
    split.labeled_indices.sort_unstable();
    split.unlabeled_indices.sort_unstable();
    Ok(split)
}

/// `round(seen_fraction * c)` shuffled classes are seen and fully labeled;
/// every instance of the other classes is unlabeled.
pub fn split_trzsl(data: &DataContainer, seen_fraction: f64, seed: u64) -> Result<SplitResult> {
    let c = data.classes();
    if c < 2 {
        return Err(Error::config("transductive split needs at least two classes"));
    }
    if !data.is_fully_labeled() {
        return Err(Error::MissingLabels("transductive zero-shot split"));
    }
    let seen_count = libm::round(seen_fraction * c as f64) as usize;
    if seen_count == 0 || seen_count >= c {
        return Err(Error::config(format!(
            "seen fraction {seen_fraction} leaves no seen or no unseen class"
        )));
    }
    let mut classes: Vec<usize> = (0..c).collect();
    classes.shuffle(&mut rng(seed, TRZSL_STREAM));
    let mut seen = classes[..seen_count].to_vec();
    let mut unseen = classes[seen_count..].to_vec();
    seen.sort_unstable();
    unseen.sort_unstable();

    let mut split = SplitResult {
        seen_classes: seen,
        unseen_classes: unseen,
        ..SplitResult::default()
    };
    for i in 0..data.len() {
        let label = data.label(i).unwrap_or_default();
        if split.seen_classes.binary_search(&label).is_ok() {
            split.labeled_indices.push(i);
        } else {
            split.unlabeled_indices.push(i);
        }
    }
    Ok(split)
}

/// Per-rank class sizes `round(n_max * delta^(-r / (c - 1)))`, clamped to 1.
pub fn imbalance_profile(n_max: usize, classes: usize, delta: f64) -> Vec<usize> {
    (0..classes)
        .map(|r| {
            let exponent = if classes > 1 {
                -(r as f64) / (classes - 1) as f64
            } else {
                0.0
            };
            let n = libm::round(n_max as f64 * libm::pow(delta, exponent)) as usize;
            if n == 0 {
                log::warn!("class rank {r} rounds to zero instances, keeping one");
            }
            n.max(1)
        })
        .collect()
}

/// Subsamples classes along an exponential profile with max/min ratio
/// `delta`. Classes are ranked by a seeded shuffle; the class at rank `r`
/// keeps its first `profile[r]` instances after a seeded shuffle. Retained
/// instances keep their original order.
pub fn make_imbalanced(data: &DataContainer, delta: f64, seed: u64) -> Result<DataContainer> {
    if delta.is_nan() || delta < 1.0 {
        return Err(Error::config("imbalance ratio must be at least 1"));
    }
    if !data.is_fully_labeled() {
        return Err(Error::MissingLabels("imbalanced subsampling"));
    }
    let groups = data.indices_by_class();
    let n_max = groups.iter().map(Vec::len).max().unwrap_or(0);
    let profile = imbalance_profile(n_max, data.classes(), delta);
    let mut rng = rng(seed, IMBALANCE_STREAM);
    let mut order: Vec<usize> = (0..data.classes()).collect();
    order.shuffle(&mut rng);

    let mut keep = Vec::new();
    for (rank, &class) in order.iter().enumerate() {
        let mut members = groups[class].clone();
        members.shuffle(&mut rng);
        members.truncate(profile[rank]);
        keep.extend(members);
    }
    keep.sort_unstable();
    Ok(data.subset(&keep))
}

/// `2ab / (a + b)`, zero when both accuracies are zero.
pub fn harmonic_mean(acc_seen: f64, acc_unseen: f64) -> f64 {
    let sum = acc_seen + acc_unseen;
    if sum == 0.0 {
        0.0
    } else {
        2.0 * acc_seen * acc_unseen / sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ContainerKind;
    use alloc::vec;

    fn labeled(per_class: &[usize]) -> DataContainer {
        let mut labels = Vec::new();
        for (c, &n) in per_class.iter().enumerate() {
            labels.extend(core::iter::repeat_n(Some(c), n));
        }
        let rows = (0..labels.len()).map(|i| i as f64).collect();
        DataContainer::new(ContainerKind::Features, 1, per_class.len(), rows, labels, None).unwrap()
    }

    #[test]
    fn ssl_split_is_uniform_and_seeded() {
        let data = labeled(&[5, 7, 4]);
        let s = split_ssl(&data, 2, 3).unwrap();
        let mut hist = vec![0; 3];
        for &i in &s.labeled_indices {
            hist[data.label(i).unwrap()] += 1;
        }
        assert_eq!(hist, vec![2, 2, 2]);
        assert_eq!(s.unlabeled_indices.len(), 10);
        assert_eq!(s, split_ssl(&data, 2, 3).unwrap());
        let boundary = split_ssl(&data, 4, 0).unwrap();
        assert_eq!(boundary.labeled_indices.len(), 12);
        assert!(matches!(
            split_ssl(&data, 5, 0),
            Err(Error::InsufficientClass { class: 2, .. })
        ));
    }

    #[test]
    fn trzsl_split() {
        let data = labeled(&[3; 100]);
        let s = split_trzsl(&data, 0.62, 1).unwrap();
        assert_eq!((s.seen_classes.len(), s.unseen_classes.len()), (62, 38));
        for &i in &s.unlabeled_indices {
            assert!(s.unseen_classes.contains(&data.label(i).unwrap()));
        }
        assert_eq!(s, split_trzsl(&data, 0.62, 1).unwrap());
        let two = split_trzsl(&labeled(&[2, 2]), 0.5, 9).unwrap();
        assert_eq!((two.seen_classes.len(), two.unseen_classes.len()), (1, 1));
        assert!(split_trzsl(&labeled(&[2, 2]), 0.1, 0).is_err());
        assert!(split_trzsl(&labeled(&[2]), 0.5, 0).is_err());
    }

    #[test]
    fn imbalance_profile_values() {
        let p = imbalance_profile(500, 10, 100.0);
        assert_eq!(p[0], 500);
        assert_eq!(p[9], 5);
        assert!(p.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(imbalance_profile(500, 10, 1.0), vec![500; 10]);
        assert_eq!(imbalance_profile(3, 3, 1000.0)[2], 1);
    }

    #[test]
    fn imbalanced_subsample() {
        let data = labeled(&[50; 5]);
        let identity = make_imbalanced(&data, 1.0, 4).unwrap();
        assert_eq!(identity, data);
        let skewed = make_imbalanced(&data, 50.0, 4).unwrap();
        let mut counts: Vec<usize> = skewed.indices_by_class().iter().map(Vec::len).collect();
        counts.sort_unstable();
        assert_eq!(counts, vec![1, 3, 7, 19, 50]);
        assert!(make_imbalanced(&data, 0.5, 0).is_err());
    }

    #[test]
    fn harmonic_mean_cases() {
        assert!((harmonic_mean(0.8, 0.4) - 0.533_333_333_333_333_3).abs() < 1e-9);
        assert_eq!(harmonic_mean(0.7, 0.7), 0.7);
        assert_eq!(harmonic_mean(0.7, 0.0), 0.0);
        assert_eq!(harmonic_mean(0.0, 0.0), 0.0);
    }
}
