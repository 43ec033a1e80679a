//! The JSON run report and its CSV side exports.

use std::io::Write;
use std::path::Path;

use cpl_core::{IterationRecord, RunConfig, RunReport, RunSummary};
use serde::{Deserialize, Serialize};

use crate::error::{IoError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// The committed JSON schema for [`ReportDocument`].
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub data: Option<String>,
    pub logits: Option<String>,
    pub test: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub run: RunConfig,
    pub inputs: Inputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalSection {
    pub test_top1: Option<f64>,
    pub harmonic_mean: Option<f64>,
    /// `None` when timing is omitted for reproducible output.
    pub wallclock_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub config: ConfigEcho,
    pub per_iteration: Vec<IterationRecord>,
    pub summary: RunSummary,
    #[serde(rename = "final")]
    pub final_: FinalSection,
}

impl ReportDocument {
    pub fn new(run: RunConfig, inputs: Inputs, report: RunReport, wallclock_s: Option<f64>) -> Self {
        let final_ = FinalSection {
            test_top1: report.summary.test_top1,
            harmonic_mean: report.summary.harmonic_mean,
            wallclock_s,
        };
        Self {
            schema_version: SCHEMA_VERSION,
            config: ConfigEcho { run, inputs },
            per_iteration: report.per_iteration,
            summary: report.summary,
            final_,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| IoError::io(path, e))
    }

    /// Confusion matrix as CSV: a `true` column then one column per
    /// predicted class.
    pub fn confusion_csv(&self) -> Option<String> {
        let cm = self.summary.confusion.as_ref()?;
        let mut out = Vec::new();
        let header: Vec<String> = (0..cm.classes).map(|k| format!("pred_{k}")).collect();
        writeln!(out, "true,{}", header.join(",")).ok()?;
        for (k, row) in cm.counts.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(out, "{k},{}", cells.join(",")).ok()?;
        }
        String::from_utf8(out).ok()
    }

    /// Candidate-label frequency per class, one row per iteration.
    pub fn class_frequency_csv(&self) -> String {
        let classes = self.per_iteration.first().map_or(0, |r| r.class_frequency.len());
        let mut out = String::from("iteration");
        for k in 0..classes {
            out.push_str(&format!(",class_{k}"));
        }
        out.push('\n');
        for r in &self.per_iteration {
            out.push_str(&r.t.to_string());
            for v in &r.class_frequency {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }

    /// Writes `<stem>.confusion.csv` and `<stem>.class_frequency.csv` next
    /// to `report_path`.
    pub fn write_csv_exports(&self, report_path: &Path) -> Result<()> {
        let stem = report_path.with_extension("");
        let write = |suffix: &str, body: &str| {
            let path = stem.with_extension(suffix);
            std::fs::write(&path, body).map_err(|e| IoError::io(&path, e))
        };
        if let Some(cm) = self.confusion_csv() {
            write("confusion.csv", &cm)?;
        }
        write("class_frequency.csv", &self.class_frequency_csv())
    }
}
