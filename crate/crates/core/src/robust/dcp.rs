//! Difference-of-convex programming with a concave binarity penalty.
//!
//! The penalised relaxation minimises `f(c) - g(c)` with
//! `f(c) = max_g tr{J_g(c)^-1} + lambda 1^T c` and `g(c) = lambda c^T c`.
//! Each iteration replaces `g` by its tangent at the current point and
//! solves the resulting convex problem; since `1^T c = M` is fixed, the
//! tangent contributes the linear term `-2 lambda c_k^T c`.

use rand::Rng;

use super::convex::{relaxed_solve_with, ConvexOptions};
use super::{round_top_m, GridProblem, SelectionVector, WorstCase};
use crate::error::{Result, SelectError};
use crate::exec::{derive_seed, par_map_range, rng_from_seed};
use crate::scene::Scene;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcpOptions {
    /// Penalty scale: `lambda = kappa * gamma_0`.
    pub kappa: f64,
    pub n_starts: usize,
    /// Stop a run once `|c_{k+1} - c_k| < eps_conv`.
    pub eps_conv: f64,
    pub max_iter: usize,
    pub convex: ConvexOptions,
}

impl Default for DcpOptions {
    fn default() -> Self {
        Self { kappa: 1.0, n_starts: 20, eps_conv: 0.05, max_iter: 50, convex: ConvexOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct DcpRun {
    pub start: SelectionVector,
    pub end: SelectionVector,
    /// `f - g` at `c_0, c_1, ...`.
    pub objective_log: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl DcpRun {
    pub fn objective(&self) -> f64 {
        *self.objective_log.last().expect("log holds the start")
    }

    /// Largest increase between consecutive logged objectives, relative to
    /// the earlier value; `<= 0` for a monotone log.
    pub fn max_relative_ascent(&self) -> f64 {
        self.objective_log
            .windows(2)
            .filter(|w| w[0].is_finite())
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct DcpResult {
    pub gamma0: f64,
    pub lambda: f64,
    /// Best converged end point by `f - g` (best overall if none converged).
    pub selection: SelectionVector,
    pub objective: f64,
    pub worst: WorstCase,
    /// `selection` is binary, i.e. its penalty is zero.
    pub binary: bool,
    /// Top-M rounding of `selection`; equals its support when binary.
    pub rounded: Vec<usize>,
    pub rounded_worst: WorstCase,
    /// Fraction of starts that ended on a binary point.
    pub zero_penalty_rate: f64,
    pub converged: bool,
    pub runs: Vec<DcpRun>,
}

/// `f(c) - g(c) = max_g tr{J_g(c)^-1} + lambda (1^T c - c^T c)`.
pub fn dc_objective(problem: &GridProblem, c: &[f64], lambda: f64) -> f64 {
    let penalty: f64 = c.iter().map(|x| x - x * x).sum();
    problem.worst_case(c).value.value() + lambda * penalty
}

pub fn dcp(scene: &Scene, m: usize, kappa: f64, n_starts: usize, eps_conv: f64, seed: u64) -> Result<DcpResult> {
    let opts = DcpOptions { kappa, n_starts, eps_conv, ..DcpOptions::default() };
    dcp_with(&GridProblem::new(scene)?, m, &opts, seed)
}

pub fn dcp_with(problem: &GridProblem, m: usize, opts: &DcpOptions, seed: u64) -> Result<DcpResult> {
    let n = problem.sensor_count();
    if m == 0 || m > n {
        return Err(SelectError::InvalidArgument(format!("need 1 <= M <= M_max (M={m}, M_max={n})")));
    }
    if !(opts.kappa >= 0.0) || opts.n_starts == 0 || !(opts.eps_conv > 0.0) {
        return Err(SelectError::InvalidArgument("need kappa >= 0, n_starts >= 1, eps_conv > 0".into()));
    }
    let base = relaxed_solve_with(problem, m, &[], None, &opts.convex)?;
    if base.degenerate {
        return Err(SelectError::DegenerateScene("every sensor subset is singular at some grid point".into()));
    }
    let gamma0 = base.worst.value.value();
    let lambda = opts.kappa * gamma0;

    let runs = par_map_range(opts.n_starts, |k| {
        let mut rng = rng_from_seed(derive_seed(seed, &[k as u64]));
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let start = project_capped_simplex(&raw, m as f64);
        dcp_run(problem, m, lambda, start, opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let any_converged = runs.iter().any(|r| r.converged);
    let best = runs
        .iter()
        .filter(|r| r.converged || !any_converged)
        .min_by(|a, b| a.objective().total_cmp(&b.objective()))
        .expect("at least one start");
    if !any_converged {
        log::warn!("no DC start converged within {} iterations; returning the best iterate", opts.max_iter);
    }
    let selection = best.end.clone();
    let rounded = round_top_m(&selection, m).support();
    let binaries = runs.iter().filter(|r| r.end.is_binary()).count();
    Ok(DcpResult {
        gamma0,
        lambda,
        objective: best.objective(),
        worst: problem.worst_case(selection.as_slice()),
        binary: selection.is_binary(),
        rounded_worst: problem.worst_case_subset(&rounded),
        rounded,
        selection,
        zero_penalty_rate: binaries as f64 / runs.len() as f64,
        converged: any_converged,
        runs,
    })
}

/// One DC run from a given feasible start.
pub fn dcp_run(problem: &GridProblem, m: usize, lambda: f64, start: SelectionVector, opts: &DcpOptions) -> Result<DcpRun> {
    if (start.sum() - m as f64).abs() > 1e-9 * m as f64 {
        return Err(SelectError::InvalidArgument("DC start must satisfy 1^T c = M".into()));
    }
    let mut ck = start.clone();
    let mut log = vec![dc_objective(problem, ck.as_slice(), lambda)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let linear: Vec<f64> = ck.as_slice().iter().map(|x| -2.0 * lambda * x).collect();
        let next = relaxed_solve_with(problem, m, &[], Some(&linear), &opts.convex)?.c;
        iterations += 1;
        log.push(dc_objective(problem, next.as_slice(), lambda));
        let step: f64 = next.as_slice().iter().zip(ck.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        ck = next;
        if step < opts.eps_conv {
            converged = true;
            break;
        }
    }
    Ok(DcpRun { start, end: ck, objective_log: log, iterations, converged })
}

/// Euclidean projection onto `{c : 1^T c = total, 0 <= c <= 1}`.
pub fn project_capped_simplex(x: &[f64], total: f64) -> SelectionVector {
    assert!(total >= 0.0 && total <= x.len() as f64, "infeasible capped simplex");
    let mass = |tau: f64| x.iter().map(|v| (v - tau).clamp(0.0, 1.0)).sum::<f64>();
    let (mut lo, mut hi) = (
        x.iter().copied().fold(f64::INFINITY, f64::min) - 1.0,
        x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut c: Vec<f64> = x.iter().map(|v| (v - tau).clamp(0.0, 1.0)).collect();
    // spread the bisection residue over interior entries
    let interior: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0.0 && c[i] < 1.0).collect();
    if !interior.is_empty() {
        let fix = (total - c.iter().sum::<f64>()) / interior.len() as f64;
        interior.iter().for_each(|&i| c[i] = (c[i] + fix).clamp(0.0, 1.0));
    }
    SelectionVector(c)
}
