//! The iterative candidate-pseudolabel training loop.
//!
//! Each iteration builds a confidence matrix over the unlabeled pool,
//! generates candidate sets, admits at most `k_t` instances per class,
//! re-initializes the head and optimizer, trains for the iteration's epoch
//! budget and logs metrics. `k_t` then grows by `delta`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::ConfidenceMatrix;
pub use crate::config::RunConfig;
use crate::config::{OptimConfig, Paradigm};
use crate::data::{ContainerKind, DataContainer};
use crate::error::{Error, Result};
use crate::losses::{combined_batch_loss, LabeledExample, PartialExample};
use crate::metrics::{self, ConfusionMatrix};
use crate::model::{self, LinearModel, OptimizerState};
use crate::paradigms::{self, harmonic_mean};
use crate::selection::{self, CurriculumState};

const SHUFFLE_STREAM: u64 = 1 << 32;
const FEWSHOT_STREAM: u64 = 2 << 32;

/// Metrics logged after one curriculum iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub tau: f64,
    pub k_t: usize,
    /// Training-set size after top-K selection.
    pub m: usize,
    /// Instances of the pool with a nonempty candidate set.
    pub nonempty: usize,
    pub b1: Option<usize>,
    pub epochs: usize,
    pub avg_candidate_size: f64,
    /// True label inside the candidate set, over nonempty sets.
    pub label_estimation_accuracy: Option<f64>,
    /// Same, over the whole pool with empty sets counted as misses.
    pub label_estimation_accuracy_all: Option<f64>,
    pub class_frequency: Vec<u64>,
    /// Mean objective per epoch.
    pub train_loss: Vec<f64>,
    pub test_top1: Option<f64>,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub seen_accuracy: Option<f64>,
    pub unseen_accuracy: Option<f64>,
    pub harmonic_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub labeled: usize,
    pub unlabeled: usize,
    pub delta: usize,
    pub seen_classes: Vec<usize>,
    pub unseen_classes: Vec<usize>,
    pub test_top1: Option<f64>,
    pub harmonic_mean: Option<f64>,
    pub confusion: Option<ConfusionMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub per_iteration: Vec<IterationRecord>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: RunReport,
    pub model: LinearModel,
}

/// Labeled batch size that gives the labeled set as many passes as the
/// training set: `max(1, round(labeled / m * b2))`.
pub fn compute_b1(labeled: usize, training_set: usize, b2: usize) -> usize {
    if training_set == 0 {
        return b2.max(1);
    }
    let b1 = libm::round(labeled as f64 / training_set as f64 * b2 as f64) as usize;
    b1.max(1)
}

/// Keeps at most `q` uniformly drawn instances of every true class, then
/// hides all labels. Instances without a label are dropped.
pub fn fewshot_unlabeled_subsample(data: &DataContainer, q: usize, seed: u64) -> Result<DataContainer> {
    let all: Vec<usize> = (0..data.len()).collect();
    let keep = fewshot_indices(data.labels(), &all, data.classes(), q, seed)?;
    Ok(data.subset(&keep).masked())
}

fn fewshot_indices(
    labels: &[Option<usize>],
    pool: &[usize],
    classes: usize,
    q: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if q == 0 {
        return Err(Error::config("few-shot q must be at least 1"));
    }
    let mut groups = vec![Vec::new(); classes];
    for &i in pool {
        match labels[i] {
            Some(l) => groups[l].push(i),
            None => return Err(Error::MissingLabels("few-shot subsampling")),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FEWSHOT_STREAM);
    let mut keep = Vec::new();
    for (class, mut members) in groups.into_iter().enumerate() {
        if members.is_empty() {
            log::warn!("class {class} has no instances to sample");
            continue;
        }
        members.shuffle(&mut rng);
        members.truncate(q);
        keep.extend(members);
    }
    keep.sort_unstable();
    Ok(keep)
}

struct Pools {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    seen: Vec<usize>,
    unseen: Vec<usize>,
}

fn build_pools(config: &RunConfig, data: &DataContainer) -> Result<Pools> {
    let spec = &config.paradigm;
    let presplit = !data.is_fully_labeled();
    let mut pools = match spec.paradigm {
        Paradigm::Ul => Pools {
            labeled: Vec::new(),
            unlabeled: (0..data.len()).collect(),
            seen: Vec::new(),
            unseen: Vec::new(),
        },
        Paradigm::Ssl if presplit => Pools {
            labeled: data.labeled_indices(),
            unlabeled: data.unlabeled_indices(),
            seen: Vec::new(),
            unseen: Vec::new(),
        },
        Paradigm::Ssl => {
            let s = paradigms::split_ssl(data, spec.labeled_per_class, config.seed)?;
            Pools {
                labeled: s.labeled_indices,
                unlabeled: s.unlabeled_indices,
                seen: Vec::new(),
                unseen: Vec::new(),
            }
        }
        Paradigm::Trzsl if presplit => {
            let labeled = data.labeled_indices();
            let mut seen: Vec<usize> = labeled.iter().filter_map(|&i| data.label(i)).collect();
            seen.sort_unstable();
            seen.dedup();
            let unseen = (0..data.classes()).filter(|c| seen.binary_search(c).is_err()).collect();
            Pools {
                labeled,
                unlabeled: data.unlabeled_indices(),
                seen,
                unseen,
            }
        }
        Paradigm::Trzsl => {
            let s = paradigms::split_trzsl(data, spec.seen_fraction, config.seed)?;
            Pools {
                labeled: s.labeled_indices,
                unlabeled: s.unlabeled_indices,
                seen: s.seen_classes,
                unseen: s.unseen_classes,
            }
        }
    };
    if let Some(q) = spec.q_fewshot {
        pools.unlabeled = fewshot_indices(data.labels(), &pools.unlabeled, data.classes(), q, config.seed)?;
    }
    if pools.unlabeled.is_empty() {
        return Err(Error::NoTrainableInstances);
    }
    Ok(pools)
}

/// Optimizer settings for one iteration: the total epoch budget split evenly
/// over the iterations, with warmup kept shorter than the split.
pub fn iteration_schedule(optim: &OptimConfig, iterations: usize) -> OptimConfig {
    let epochs = (optim.epochs / iterations.max(1)).max(1);
    OptimConfig {
        epochs,
        warmup_epochs: optim.warmup_epochs.min(epochs - 1),
        ..*optim
    }
}

/// Runs the full curriculum.
///
/// `zero_shot`, when given, is a logits container aligned with `data` whose
/// softmax seeds the first iteration's candidates. Without it a logits-kind
/// `data` seeds itself, and a features-kind `data` starts from a randomly
/// initialized head. Ground-truth labels of unlabeled instances are only
/// read for metrics (and for few-shot subsampling when requested).
pub fn run_cpl(
    config: &RunConfig,
    data: &DataContainer,
    zero_shot: Option<&DataContainer>,
    test: Option<&DataContainer>,
) -> Result<RunOutcome> {
    config.validate()?;
    let (c, d) = (data.classes(), data.dim());
    if let Some(z) = zero_shot {
        if z.kind() != ContainerKind::Logits || z.len() != data.len() || z.classes() != c {
            return Err(Error::shape(
                "zero-shot logits must be a logits container aligned with the data",
            ));
        }
    }
    if let Some(t) = test {
        if t.dim() != d || t.classes() != c {
            return Err(Error::shape(format!(
                "test container is {}x{} classes, data is {}x{}",
                t.dim(),
                t.classes(),
                d,
                c
            )));
        }
    }

    let pools = build_pools(config, data)?;
    let pool_data = data.subset(&pools.unlabeled);
    let pool_truth: Vec<Option<usize>> = pool_data.labels().to_vec();
    let labeled_data = data.subset(&pools.labeled);
    let use_labeled = config.paradigm.paradigm != Paradigm::Ul && !pools.labeled.is_empty();

    let mut conf = match (zero_shot, data.kind()) {
        (Some(z), _) => ConfidenceMatrix::from_logits(c, z.subset(&pools.unlabeled).rows())?,
        (None, ContainerKind::Logits) => ConfidenceMatrix::from_logits(c, pool_data.rows())?,
        (None, ContainerKind::Features) => {
            model::predict_proba(&model::reinit(c, d, config.seed, 0), pool_data.rows())?
        }
    };

    let mut state = CurriculumState::new(pools.unlabeled.len(), config.iterations, c)?;
    let schedule = iteration_schedule(&config.optim, config.iterations);
    let mut records = Vec::with_capacity(config.iterations);
    let mut head: LinearModel;
    let mut confusion = None;

    loop {
        let t = state.t;
        let at = |e: Error| Error::Iteration {
            iteration: t,
            source: alloc::boxed::Box::new(e),
        };

        let assign = selection::generate_candidates(&conf, &config.selection).map_err(at)?;
        let set = selection::topk_curriculum_select(&assign, &conf, &state).map_err(at)?;
        if set.is_empty() {
            return Err(at(Error::NoTrainableInstances));
        }

        head = model::reinit(c, d, config.seed, t as u64);
        let mut opt = OptimizerState::new(&head);
        let b1 = use_labeled.then(|| compute_b1(pools.labeled.len(), set.len(), config.optim.batch_unlabeled));

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SHUFFLE_STREAM | t as u64);
        let mut train_loss = Vec::with_capacity(schedule.epochs);
        let mut labeled_order: Vec<usize> = (0..labeled_data.len()).collect();
        let mut labeled_cursor = 0usize;
        for epoch in 0..schedule.epochs {
            let lr = model::lr_at(epoch, &schedule);
            let mut order: Vec<usize> = (0..set.len()).collect();
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            let mut steps = 0usize;
            for batch in order.chunks(config.optim.batch_unlabeled) {
                let unl_logits: Vec<Vec<f64>> = batch
                    .iter()
                    .map(|&k| head.logits(pool_data.row(set.indices[k])))
                    .collect();
                let unlabeled: Vec<PartialExample<'_>> = batch
                    .iter()
                    .zip(&unl_logits)
                    .map(|(&k, z)| PartialExample {
                        logits: z,
                        target: &set.targets[k],
                        prior: Some(conf.row(set.indices[k])),
                    })
                    .collect();

                let mut lab_rows = Vec::new();
                if let Some(b1) = b1 {
                    for _ in 0..b1 {
                        if labeled_cursor == 0 {
                            labeled_order.shuffle(&mut rng);
                        }
                        lab_rows.push(labeled_order[labeled_cursor]);
                        labeled_cursor = (labeled_cursor + 1) % labeled_order.len();
                    }
                }
                let lab_logits: Vec<Vec<f64>> = lab_rows.iter().map(|&r| head.logits(labeled_data.row(r))).collect();
                let labeled: Vec<LabeledExample<'_>> = lab_rows
                    .iter()
                    .zip(&lab_logits)
                    .map(|(&r, z)| LabeledExample {
                        logits: z,
                        label: labeled_data.label(r).unwrap_or_default(),
                    })
                    .collect();

                let loss =
                    combined_batch_loss(&labeled, &unlabeled, config.paradigm.lambda, &config.loss).map_err(at)?;
                if !loss.value.is_finite() {
                    return Err(at(Error::Diverged));
                }
                let mut grads = LinearModel::zeros(c, d);
                for (&r, g) in lab_rows.iter().zip(&loss.labeled_grads) {
                    grads.accumulate_grad(labeled_data.row(r), g);
                }
                for (&k, g) in batch.iter().zip(&loss.unlabeled_grads) {
                    grads.accumulate_grad(pool_data.row(set.indices[k]), g);
                }
                model::sgd_step(&mut head, &grads, &mut opt, lr, &schedule).map_err(at)?;
                epoch_loss += loss.value;
                steps += 1;
            }
            opt.epoch += 1;
            train_loss.push(epoch_loss / steps.max(1) as f64);
        }

        let estimation = metrics::label_estimation_accuracy(&assign, &pool_truth).ok();
        let mut record = IterationRecord {
            t,
            tau: assign.tau,
            k_t: state.k_t,
            m: set.len(),
            nonempty: assign.nonempty_count(),
            b1,
            epochs: schedule.epochs,
            avg_candidate_size: metrics::avg_candidate_size(&assign).unwrap_or(0.0),
            label_estimation_accuracy: estimation.map(|e| e.nonempty),
            label_estimation_accuracy_all: estimation.map(|e| e.overall),
            class_frequency: metrics::class_frequency(&assign),
            train_loss,
            test_top1: None,
            per_class_accuracy: Vec::new(),
            seen_accuracy: None,
            unseen_accuracy: None,
            harmonic_mean: None,
        };
        if let Some(test) = test {
            confusion = evaluate(&head, test, &pools, config.paradigm.paradigm, &mut record).map_err(at)?;
        }
        records.push(record);

        if !state.advance() {
            break;
        }
        conf = model::predict_proba(&head, pool_data.rows()).map_err(|e| Error::Iteration {
            iteration: state.t,
            source: alloc::boxed::Box::new(e),
        })?;
    }

    let last = records.last();
    let summary = RunSummary {
        iterations: records.len(),
        labeled: if use_labeled { pools.labeled.len() } else { 0 },
        unlabeled: pools.unlabeled.len(),
        delta: state.delta,
        seen_classes: pools.seen,
        unseen_classes: pools.unseen,
        test_top1: last.and_then(|r| r.test_top1),
        harmonic_mean: last.and_then(|r| r.harmonic_mean),
        confusion,
    };
    Ok(RunOutcome {
        report: RunReport {
            per_iteration: records,
            summary,
        },
        model: head,
    })
}

fn evaluate(
    head: &LinearModel,
    test: &DataContainer,
    pools: &Pools,
    paradigm: Paradigm,
    record: &mut IterationRecord,
) -> Result<Option<ConfusionMatrix>> {
    let preds = head.predict(test.rows())?;
    let (preds, labels): (Vec<usize>, Vec<usize>) = preds
        .iter()
        .zip(test.labels())
        .filter_map(|(&p, l)| l.map(|l| (p, l)))
        .unzip();
    if labels.is_empty() {
        return Ok(None);
    }
    let c = head.classes();
    record.test_top1 = Some(metrics::top1_accuracy(&preds, &labels)?);
    record.per_class_accuracy = metrics::per_class_accuracy(&preds, &labels, c);
    if paradigm == Paradigm::Trzsl {
        let group = |classes: &[usize]| {
            let (p, l): (Vec<usize>, Vec<usize>) = preds
                .iter()
                .zip(&labels)
                .filter(|(_, l)| classes.binary_search(l).is_ok())
                .unzip();
            metrics::top1_accuracy(&p, &l).ok()
        };
        record.seen_accuracy = group(&pools.seen);
        record.unseen_accuracy = group(&pools.unseen);
        if let (Some(s), Some(u)) = (record.seen_accuracy, record.unseen_accuracy) {
            record.harmonic_mean = Some(harmonic_mean(s, u));
        }
    }
    Ok(Some(metrics::confusion(&preds, &labels, c)?))
}
