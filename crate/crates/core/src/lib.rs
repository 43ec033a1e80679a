//! Candidate pseudolabel learning over frozen embeddings.
//!
//! The crate is `no_std` (it needs `alloc`). It holds the pure parts of the
//! engine: candidate-set generation from a confidence matrix, the
//! partial-label losses, a linear softmax head with its SGD optimizer, the
//! iterative curriculum trainer, dataset paradigms and evaluation metrics.
//! File formats, the synthetic generator and the command line live in the
//! `cpl` companion crate.
//!
//! Enable the `parallel` feature to evaluate rows and per-example gradients
//! on a rayon pool. Reductions stay in fixed order, so results do not depend
//! on the thread count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod candidates;
pub mod confidence;
pub mod config;
pub mod data;
pub mod error;
pub mod losses;
pub mod math;
pub mod metrics;
pub mod model;
pub mod paradigms;
pub mod selection;
pub mod trainer;

pub use candidates::{CandidateAssignment, TrainingSet};
pub use confidence::ConfidenceMatrix;
pub use config::{OptimConfig, Paradigm, ParadigmSpec, RunConfig, SelectionParams};
pub use data::{ContainerKind, DataContainer};
pub use error::{Error, Result};
pub use losses::{LossEval, LossKind, SoftTarget};
pub use model::{LinearModel, OptimizerState};
pub use selection::{ClassThresholds, CurriculumState};
pub use trainer::{run_cpl, IterationRecord, RunOutcome, RunReport, RunSummary};
