use cpl_core::metrics::{
    avg_candidate_size, class_frequency, confusion, frequency_imbalance, label_estimation_accuracy, per_class_accuracy,
    top1_accuracy,
};
use cpl_core::paradigms::{harmonic_mean, imbalance_profile};
use cpl_core::selection::generate_candidates;
use cpl_core::{CandidateAssignment, ConfidenceMatrix, SelectionParams};
use proptest::prelude::*;

#[test]
fn harmonic_mean_example() {
    assert!((harmonic_mean(0.8, 0.4) - 0.8 * 0.4 * 2.0 / 1.2).abs() < 1e-12);
    assert!((harmonic_mean(0.8, 0.4) - 0.533_333_333_3).abs() < 1e-9);
    assert_eq!(harmonic_mean(0.0, 0.0), 0.0);
    assert_eq!(harmonic_mean(0.5, 0.5), 0.5);
}

#[test]
fn hand_counted_confusion() {
    let labels = [0, 0, 0, 1, 1, 2];
    let preds = [0, 1, 0, 1, 2, 2];
    let m = confusion(&preds, &labels, 3).unwrap();
    assert_eq!(m.counts, vec![vec![2, 1, 0], vec![0, 1, 1], vec![0, 0, 1]]);
    assert_eq!(m.row_sums(), vec![3, 2, 1]);
    assert_eq!(m.column_sums(), vec![2, 2, 2]);

    let constant = confusion(&[1, 1, 1, 1], &[0, 1, 1, 0], 2).unwrap();
    assert_eq!(constant.counts, vec![vec![0, 2], vec![0, 2]]);
    assert!(confusion(&[3], &[0], 2).is_err());
}

#[test]
fn accuracy_examples() {
    assert_eq!(top1_accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
    assert!(top1_accuracy(&[], &[]).is_err());
    let per = per_class_accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0], 3);
    assert_eq!(per, vec![Some(2.0 / 3.0), Some(1.0), None]);
}

#[test]
fn candidate_set_statistics() {
    let a = CandidateAssignment::from_sets(3, vec![vec![0], vec![0, 1], vec![], vec![1, 2]]).unwrap();
    assert_eq!(class_frequency(&a), vec![2, 2, 1]);
    assert!((avg_candidate_size(&a).unwrap() - 5.0 / 3.0).abs() < 1e-15);
    let est = label_estimation_accuracy(&a, &[Some(0), Some(2), Some(1), Some(2)]).unwrap();
    assert!((est.nonempty - 2.0 / 3.0).abs() < 1e-15);
    assert!((est.overall - 0.5).abs() < 1e-15);
    assert_eq!(frequency_imbalance(&[4, 2, 1]), 4.0);
    assert!(frequency_imbalance(&[4, 0]).is_infinite());
    let singles = CandidateAssignment::from_sets(2, vec![vec![0], vec![1]]).unwrap();
    assert_eq!(avg_candidate_size(&singles).unwrap(), 1.0);
    assert_eq!(
        class_frequency(&CandidateAssignment::from_sets(2, vec![]).unwrap()),
        vec![0, 0]
    );
}

#[test]
fn imbalance_profile_decays_geometrically() {
    let counts = imbalance_profile(100, 5, 10.0);
    assert_eq!(counts[0], 100);
    assert_eq!(counts[4], 10);
    assert!(counts.windows(2).all(|w| w[0] >= w[1]));
}

fn stochastic(c: usize, rows: Vec<Vec<f64>>) -> (ConfidenceMatrix, Vec<Vec<f64>>) {
    let rows: Vec<Vec<f64>> = rows
        .into_iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            r.iter().map(|v| v / s).collect()
        })
        .collect();
    (ConfidenceMatrix::new(c, rows.concat()).unwrap(), rows)
}

proptest! {
    #[test]
    fn estimation_without_inter_beats_hard_labels(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 1..40),
        labels in prop::collection::vec(0usize..4, 40),
        alpha in 0.0f64..=1.0,
    ) {
        let (m, _) = stochastic(4, rows);
        let truth: Vec<Option<usize>> = labels[..m.rows()].iter().map(|&l| Some(l)).collect();
        let a = generate_candidates(&m, &SelectionParams { alpha, beta: None }).unwrap();
        let est = label_estimation_accuracy(&a, &truth).unwrap();
        let hard: Vec<usize> = m.argmax();
        let plain: Vec<usize> = truth.iter().map(|l| l.unwrap()).collect();
        prop_assert!(est.nonempty >= top1_accuracy(&hard, &plain).unwrap());
    }

    #[test]
    fn frequency_sums_to_candidate_mass(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 5), 1..40),
        alpha in 0.0f64..=1.0,
        beta in 0.0f64..=1.0,
    ) {
        let (m, _) = stochastic(5, rows);
        let a = generate_candidates(&m, &SelectionParams { alpha, beta: Some(beta) }).unwrap();
        let mass: usize = a.sets.iter().map(Vec::len).sum();
        prop_assert_eq!(class_frequency(&a).iter().sum::<u64>() as usize, mass);
    }

    #[test]
    fn per_class_accuracy_weights_back_to_top1(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60),
    ) {
        let (preds, labels): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let per = per_class_accuracy(&preds, &labels, 4);
        let weighted: f64 = (0..4)
            .map(|k| per[k].unwrap_or(0.0) * labels.iter().filter(|&&l| l == k).count() as f64)
            .sum::<f64>()
            / labels.len() as f64;
        prop_assert!((weighted - top1_accuracy(&preds, &labels).unwrap()).abs() < 1e-12);
    }
}
