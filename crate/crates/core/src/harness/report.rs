//! Experiment reports and convergence tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{SuccessReport, Verdict};

use super::config::ExperimentConfig;

pub const CSV_HEADER: &str = "seed,n,guess,stabilized,verdict";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub manifest_hash: String,
    pub learner: String,
    /// One per truth, in config order.
    pub results: Vec<SuccessReport>,
    /// Whether every truth met the success threshold, when one is configured.
    pub passed: Option<bool>,
    pub wall_clock_secs: f64,
}

fn io_error(path: &Path, e: impl ToString) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Correct => "correct",
        Verdict::Wrong => "wrong",
        Verdict::Unknown => "unknown",
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// The JSON with the wall-clock field zeroed; equal across repeated runs.
    pub fn deterministic_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_secs = 0.0;
        r.to_json()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("report", e.to_string()))
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Report::from_json(&text)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| io_error(path, e))
    }

    /// One row per stream and grid length, truths in config order.
    pub fn convergence_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for result in &self.results {
            for rec in &result.records {
                for p in &rec.grid {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{}",
                        rec.seed,
                        p.n,
                        p.guess,
                        p.stabilized,
                        verdict_name(rec.verdict)
                    );
                }
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        emit_convergence_table(self, path)
    }

    pub fn success_fractions(&self) -> Vec<(u64, f64)> {
        self.results
            .iter()
            .map(|r| (r.truth, r.success_fraction))
            .collect()
    }
}

pub fn emit_convergence_table(report: &Report, path: &Path) -> Result<()> {
    std::fs::write(path, report.convergence_csv()).map_err(|e| io_error(path, e))
}
