//! Files, synthetic data, reports and the command line around `cpl-core`.

pub mod cli;
pub mod container;
pub mod error;
pub mod report;
pub mod synth;

pub use container::{load_container, save_container};
pub use error::IoError;
pub use report::ReportDocument;
pub use synth::{make_synthetic, make_synthetic_split, SynthConfig};
