//! Recomputes every stored value from the scene archive.

use super::records::ExperimentRecord;
use super::suite::{mse_seed, SceneArchive};
use crate::crlb::FisherMatrix;
use crate::error::Result;
use crate::positioning::mse_eval;
use crate::robust::GridProblem;

/// Relative difference above which a stored value counts as a mismatch.
pub const VERIFY_REL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    /// 0-based record index.
    pub row: usize,
    pub column: &'static str,
    pub stored: f64,
    pub recomputed: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checked: usize,
    pub skipped: usize,
    pub mismatches: Vec<Mismatch>,
    /// Rows that cannot be checked at all (bad experiment or index).
    pub invalid: Vec<(usize, String)>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.mismatches.is_empty() && self.invalid.is_empty()
    }
}

fn agrees(stored: f64, recomputed: f64) -> bool {
    if stored.is_infinite() || recomputed.is_infinite() {
        return stored == recomputed;
    }
    (stored - recomputed).abs() <= VERIFY_REL_TOL * stored.abs().max(recomputed.abs()).max(f64::MIN_POSITIVE)
}

pub fn verify_records(records: &[ExperimentRecord], archive: &SceneArchive) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut problems: Vec<Option<GridProblem>> = vec![None; archive.scenes.len()];
    for (row, rec) in records.iter().enumerate() {
        if rec.error.is_some() {
            report.skipped += 1;
            continue;
        }
        let Some(scene) = archive.scenes.get(rec.experiment) else {
            report.invalid.push((row, format!("no scene for experiment {}", rec.experiment)));
            continue;
        };
        let n = scene.sensor_count();
        if rec.subset.iter().any(|&s| s >= n) || rec.weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            report.invalid.push((row, "subset or weights out of range".into()));
            continue;
        }
        if !rec.weights.is_empty() && rec.weights.len() != n {
            report.invalid.push((row, format!("{} weights for {n} sensors", rec.weights.len())));
            continue;
        }
        let mut seen = vec![false; n];
        if rec.subset.iter().any(|&s| std::mem::replace(&mut seen[s], true)) {
            report.invalid.push((row, "subset repeats a sensor".into()));
            continue;
        }
        let is_relaxed = rec.algorithm == "relaxed";
        if !is_relaxed && rec.subset.len() != rec.m {
            report.invalid.push((row, format!("subset has {} sensors, M={}", rec.subset.len(), rec.m)));
            continue;
        }
        let mut check = |column: &'static str, stored: f64, recomputed: f64| {
            if !agrees(stored, recomputed) {
                report.mismatches.push(Mismatch { row, column, stored, recomputed });
            }
        };
        match rec.target {
            Some(t) => {
                let Some(target) = scene.targets.get(t) else {
                    report.invalid.push((row, format!("no target {t}")));
                    continue;
                };
                let geoms = scene.geometries(target)?;
                let v = FisherMatrix::from_geometries(rec.subset.iter().map(|&m| &geoms[m])).crlb().value();
                check("value", rec.value, v);
                if let (Some(mse), Some(trials)) = (rec.mse, archive.config.mse_trials) {
                    let report = mse_eval(scene, &rec.subset, target, trials, mse_seed(rec.seed))?;
                    check("mse", mse, report.mse);
                }
            }
            None => {
                let problem = match &mut problems[rec.experiment] {
                    Some(p) => p,
                    slot => slot.insert(GridProblem::new(scene)?),
                };
                let stored_value = if is_relaxed {
                    problem.worst_case(&rec.weights).value.value()
                } else {
                    problem.worst_case_subset(&rec.subset).value.value()
                };
                check("value", rec.value, stored_value);
                if let (Some(rv), false) = (rec.relaxed_value, rec.weights.is_empty()) {
                    check("relaxed_value", rv, problem.worst_case(&rec.weights).value.value());
                }
            }
        }
        report.checked += 1;
    }
    Ok(report)
}
