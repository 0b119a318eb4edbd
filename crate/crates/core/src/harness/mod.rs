//! Seeded experiment batches: config parsing, suite runners, CSV records
//! and re-verification.
//!
//! A run writes three files: the records CSV, `<stem>.scenes.json` with
//! every scene used, and `<stem>.summary.json` with per-algorithm means.

pub mod config;
pub mod records;
pub mod suite;
pub mod verify;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub use config::{AlgorithmSpec, PrismSpec, ScenarioConfig, SceneSource, SuiteKind};
pub use records::{read_records, write_records, ExperimentRecord};
pub use suite::{is_failure, run_dynamic_suite, run_robust_suite, SceneArchive, Summary, SummaryEntry, SuiteOutput};
pub use verify::{verify_records, Mismatch, VerifyReport, VERIFY_REL_TOL};

use crate::error::Result;

pub fn scenes_path(csv: &Path) -> PathBuf {
    csv.with_extension("scenes.json")
}

pub fn summary_path(csv: &Path) -> PathBuf {
    csv.with_extension("summary.json")
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes the CSV and both sidecars.
pub fn write_outputs(csv: &Path, output: &SuiteOutput) -> Result<()> {
    let mut w = BufWriter::new(File::create(csv)?);
    write_records(&mut w, &output.records)?;
    w.flush()?;
    write_json(&scenes_path(csv), &output.scenes)?;
    write_json(&summary_path(csv), &output.summary)
}

/// Reads a records CSV and its scene sidecar and recomputes every value.
pub fn verify_file(csv: &Path) -> Result<VerifyReport> {
    let records = read_records(BufReader::new(File::open(csv)?))?;
    if records.is_empty() {
        return Ok(VerifyReport::default());
    }
    let archive: SceneArchive = serde_json::from_reader(BufReader::new(File::open(scenes_path(csv))?))?;
    verify_records(&records, &archive)
}
