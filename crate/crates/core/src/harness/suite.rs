//! Batch runners. Every record is a pure function of the config: seeds come
//! from [`derive_seed`] over the (experiment, target, M) path and work items
//! are collected in a fixed order, so the CSV is identical for any worker
//! count apart from `wall_us`.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{AlgorithmSpec, ScenarioConfig, SuiteKind};
use super::records::ExperimentRecord;
use crate::crlb::CrlbValue;
use crate::dynamic::{bof_on, exhaustive_dynamic_with, gss_f_on, gss_t_on, op_count_model, GreedyAlgorithm, GreedyConfig};
use crate::error::{Result, SelectError};
use crate::exec::{derive_seed, par_map, par_map_range};
use crate::robust::convex::{relaxed_solve_with, ConvexOptions, RelaxedSolution};
use crate::robust::dcp::{dcp_with, DcpOptions};
use crate::robust::dmo::{dmo_with, DmoOptions};
use crate::robust::ico::ico_on;
use crate::robust::{exhaustive_robust_on, round_top_m, GridProblem};
use crate::positioning::mse_eval;
use crate::scene::Scene;

/// Noise seed for the `mse` column; shared by every algorithm of a
/// (experiment, target, M) cell.
pub fn mse_seed(row_seed: u64) -> u64 {
    derive_seed(row_seed, &[0])
}

/// The config and the scenes used by a run, indexed by experiment. Written
/// next to the CSV so that `verify` can recompute every value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneArchive {
    pub config: ScenarioConfig,
    pub scenes: Vec<Scene>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub algorithm: String,
    pub kappa: Option<f64>,
    pub m: usize,
    pub rows: usize,
    pub errors: usize,
    pub singular: usize,
    /// Mean over rows with a finite value.
    pub mean_value: Option<f64>,
    pub mean_op_count: Option<f64>,
    /// Closed-form operation count for greedy algorithms.
    pub model_op_count: Option<u64>,
    pub mean_zero_penalty_rate: Option<f64>,
    pub mean_mse: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub total_rows: usize,
    pub error_rows: usize,
    /// Keyed by `algorithm[@kappa]/M=m`.
    pub entries: BTreeMap<String, SummaryEntry>,
}

#[derive(Clone, Debug)]
pub struct SuiteOutput {
    pub records: Vec<ExperimentRecord>,
    pub scenes: SceneArchive,
    pub summary: Summary,
}

fn scenes_for(cfg: &ScenarioConfig) -> Result<Vec<Scene>> {
    par_map_range(cfg.experiments, |e| cfg.scene_for(e)).into_iter().collect()
}

fn error_text(e: &SelectError) -> String {
    match e {
        SelectError::EnumerationCap { .. } => format!("skipped: {e}"),
        _ => e.to_string(),
    }
}

/// True for errors that mark real failures rather than skipped work.
pub fn is_failure(record: &ExperimentRecord) -> bool {
    record.error.as_deref().is_some_and(|e| !e.starts_with("skipped:"))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_micros() as u64)
}

fn fill_value(rec: &mut ExperimentRecord, v: CrlbValue) {
    rec.value = v.value();
}

/// Single-target selection with the greedy selectors and, optionally, the
/// exhaustive optimum. One row per (experiment, target, M, algorithm).
pub fn run_dynamic_suite(cfg: &ScenarioConfig) -> Result<SuiteOutput> {
    cfg.validate(SuiteKind::Dynamic)?;
    let scenes = scenes_for(cfg)?;
    let mut items = Vec::new();
    for (e, scene) in scenes.iter().enumerate() {
        let t_count = cfg.targets_per_experiment.map_or(scene.target_count(), |t| t.min(scene.target_count()));
        items.extend((0..t_count).map(|t| (e, t)));
    }
    let rows = par_map(&items, |&(e, t)| dynamic_rows(cfg, &scenes[e], e, t));
    let records: Vec<ExperimentRecord> = rows.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    finish(cfg, records, scenes)
}

fn dynamic_rows(cfg: &ScenarioConfig, scene: &Scene, e: usize, t: usize) -> Result<Vec<ExperimentRecord>> {
    let target = scene.targets[t];
    let geoms = scene.geometries(&target)?;
    let mut out = Vec::new();
    for &m in &cfg.m_values {
        let seed = derive_seed(cfg.master_seed, &[e as u64, t as u64, m as u64]);
        for alg in &cfg.algorithms {
            let mut rec = ExperimentRecord::new(&cfg.id, e, &alg.label(), seed, m);
            rec.target = Some(t);
            let (res, us) = timed(|| match alg.greedy() {
                Some((kind, cost)) => {
                    let gc = GreedyConfig { cost, ..GreedyConfig::default() };
                    match kind {
                        GreedyAlgorithm::GssT => gss_t_on(&geoms, m, seed, &gc),
                        GreedyAlgorithm::GssF => gss_f_on(&geoms, m, seed, &gc),
                        GreedyAlgorithm::Bof => bof_on(&geoms, m, seed, &gc),
                    }
                }
                None => exhaustive_dynamic_with(scene, &target, m, cfg.enumeration_cap as u128, &Default::default()),
            });
            rec.wall_us = us;
            match res {
                Ok(r) => {
                    fill_value(&mut rec, r.crlb);
                    rec.subset = r.sorted_subset();
                    rec.op_count = Some(r.op_count);
                    rec.converged = true;
                    if let Some(trials) = cfg.mse_trials.filter(|_| rec.subset.len() >= 3) {
                        match mse_eval(scene, &rec.subset, &target, trials, mse_seed(seed)) {
                            Ok(report) => rec.mse = Some(report.mse),
                            Err(err) => rec.error = Some(error_text(&err)),
                        }
                    }
                }
                Err(err) => rec.error = Some(error_text(&err)),
            }
            out.push(rec);
        }
    }
    Ok(out)
}

/// Worst-case selection over each scene's grid. One row per
/// (experiment, M, algorithm).
pub fn run_robust_suite(cfg: &ScenarioConfig) -> Result<SuiteOutput> {
    cfg.validate(SuiteKind::Robust)?;
    let scenes = scenes_for(cfg)?;
    let problems: Vec<GridProblem> =
        par_map(&scenes, GridProblem::new).into_iter().collect::<Result<Vec<_>>>()?;
    let items: Vec<(usize, usize)> =
        (0..scenes.len()).flat_map(|e| cfg.m_values.iter().map(move |&m| (e, m))).collect();
    let rows = par_map(&items, |&(e, m)| robust_rows(cfg, &problems[e], e, m));
    finish(cfg, rows.into_iter().flatten().collect(), scenes)
}

fn robust_rows(cfg: &ScenarioConfig, problem: &GridProblem, e: usize, m: usize) -> Vec<ExperimentRecord> {
    let seed = derive_seed(cfg.master_seed, &[e as u64, m as u64]);
    let convex = ConvexOptions::default();
    let mut relaxed: Option<(std::result::Result<RelaxedSolution, String>, u64)> = None;
    let mut relaxed_once = || {
        relaxed
            .get_or_insert_with(|| {
                let (r, us) = timed(|| relaxed_solve_with(problem, m, &[], None, &convex));
                (r.map_err(|e| error_text(&e)), us)
            })
            .clone()
    };
    let mut out = Vec::new();
    for alg in &cfg.algorithms {
        let mut rec = ExperimentRecord::new(&cfg.id, e, &alg.label(), seed, m);
        let outcome: std::result::Result<(), String> = match alg {
            AlgorithmSpec::Relaxed => {
                let (r, us) = relaxed_once();
                rec.wall_us = us;
                r.map(|sol| {
                    fill_value(&mut rec, sol.worst.value);
                    rec.weights = sol.c.as_slice().to_vec();
                    rec.converged = sol.converged;
                })
            }
            AlgorithmSpec::RoundTopM => {
                let (r, us) = relaxed_once();
                let (rounded, round_us) = timed(|| {
                    r.map(|sol| {
                        let subset = round_top_m(&sol.c, m).support();
                        (problem.worst_case_subset(&subset), subset, sol)
                    })
                });
                rec.wall_us = us + round_us;
                rounded.map(|(worst, subset, sol)| {
                    fill_value(&mut rec, worst.value);
                    rec.subset = subset;
                    rec.relaxed_value = Some(sol.worst.value.value());
                    rec.converged = sol.converged;
                })
            }
            AlgorithmSpec::Ico => {
                let (r, us) = timed(|| ico_on(problem, m, &convex));
                rec.wall_us = us;
                r.map_err(|e| error_text(&e)).map(|res| {
                    fill_value(&mut rec, res.worst.value);
                    rec.subset = res.selection.support();
                    rec.converged = res.converged;
                })
            }
            &AlgorithmSpec::Dcp { kappa, n_starts, eps_conv } => {
                rec.kappa = Some(kappa);
                let opts = DcpOptions { kappa, n_starts, eps_conv, ..DcpOptions::default() };
                let (r, us) = timed(|| dcp_with(problem, m, &opts, seed));
                rec.wall_us = us;
                r.map_err(|e| error_text(&e)).map(|res| {
                    fill_value(&mut rec, res.rounded_worst.value);
                    rec.subset = res.rounded;
                    rec.weights = res.selection.as_slice().to_vec();
                    rec.relaxed_value = Some(res.worst.value.value());
                    rec.zero_penalty_rate = Some(res.zero_penalty_rate);
                    rec.converged = res.converged;
                })
            }
            &AlgorithmSpec::Dmo { mu, delta } => {
                let opts = DmoOptions { mu, delta, ..DmoOptions::default() };
                let (r, us) = timed(|| dmo_with(problem, m, &opts));
                rec.wall_us = us;
                r.map_err(|e| error_text(&e)).map(|res| {
                    fill_value(&mut rec, res.worst.value);
                    rec.subset = res.subset;
                    rec.converged = !res.budget_hit;
                    rec.repaired = res.repaired;
                })
            }
            AlgorithmSpec::ExhaustiveRobust => {
                let (r, us) = timed(|| exhaustive_robust_on(problem, m, cfg.enumeration_cap as u128));
                rec.wall_us = us;
                r.map_err(|e| error_text(&e)).map(|res| {
                    fill_value(&mut rec, res.worst.value);
                    rec.subset = res.subset;
                    rec.converged = true;
                })
            }
            other => Err(format!("{} is not a robust algorithm", other.label())),
        };
        if let Err(msg) = outcome {
            rec.error = Some(msg);
        }
        out.push(rec);
    }
    out
}

fn finish(cfg: &ScenarioConfig, records: Vec<ExperimentRecord>, scenes: Vec<Scene>) -> Result<SuiteOutput> {
    let summary = summarize(cfg, &records, &scenes);
    for r in records.iter().filter(|r| is_failure(r)) {
        log::warn!("{} e={} M={}: {}", r.algorithm, r.experiment, r.m, r.error.as_deref().unwrap_or(""));
    }
    Ok(SuiteOutput { records, scenes: SceneArchive { config: cfg.clone(), scenes }, summary })
}

pub fn summary_key(algorithm: &str, kappa: Option<f64>, m: usize) -> String {
    match kappa {
        Some(k) => format!("{algorithm}@{k:?}/M={m}"),
        None => format!("{algorithm}/M={m}"),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn summarize(cfg: &ScenarioConfig, records: &[ExperimentRecord], scenes: &[Scene]) -> Summary {
    let mut groups: BTreeMap<String, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(summary_key(&r.algorithm, r.kappa, r.m)).or_default().push(r);
    }
    let n_sensors = scenes.first().map_or(0, Scene::sensor_count);
    let entries = groups
        .into_iter()
        .map(|(key, rows)| {
            let first = rows[0];
            let ok: Vec<&&ExperimentRecord> = rows.iter().filter(|r| r.error.is_none()).collect();
            let model_op_count = cfg
                .algorithms
                .iter()
                .find(|a| a.label() == first.algorithm)
                .and_then(AlgorithmSpec::greedy)
                .map(|(kind, cost)| op_count_model(kind, first.m, n_sensors, &cost));
            let entry = SummaryEntry {
                algorithm: first.algorithm.clone(),
                kappa: first.kappa,
                m: first.m,
                rows: rows.len(),
                errors: rows.len() - ok.len(),
                singular: ok.iter().filter(|r| r.value.is_infinite()).count(),
                mean_value: mean(ok.iter().map(|r| r.value).filter(|v| v.is_finite())),
                mean_op_count: mean(ok.iter().filter_map(|r| r.op_count).map(|c| c as f64)),
                model_op_count,
                mean_zero_penalty_rate: mean(ok.iter().filter_map(|r| r.zero_penalty_rate)),
                mean_mse: mean(ok.iter().filter_map(|r| r.mse)),
            };
            (key, entry)
        })
        .collect();
    Summary {
        scenario: cfg.id.clone(),
        total_rows: records.len(),
        error_rows: records.iter().filter(|r| r.error.is_some()).count(),
        entries,
    }
}
