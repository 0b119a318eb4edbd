//! Discrete monotonic optimisation by branch-reduce-and-bound.
//!
//! Maximises `f+(c) - f-(c)` over binary `c`, where
//! `f+(c) = -max_g tr{J_g(c)^-1}` is increasing in `c` and
//! `f-(c) = mu * max(0, 1^T c - M)` penalises over-selection. Binarity is the
//! DC constraint `1^T c - c^T c <= 0` on the box `[0, 1]`. Over a box
//! `[v, w]` the objective is bounded by `f+(w) - f-(v)`.

use super::{greedy_fill, GridProblem, SelectionVector, WorstCase};
use crate::error::{Result, SelectError};
use crate::exec::par_map;
use crate::scene::Scene;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DmoOptions {
    pub mu: f64,
    /// Relative bound gap at which the incumbent is accepted.
    pub delta: f64,
    /// Bisection tolerance for the reduce-step suprema.
    pub bisect_tol: f64,
    /// Hard cap on reduced boxes before giving up on the bound.
    pub max_boxes: usize,
}

impl Default for DmoOptions {
    fn default() -> Self {
        Self { mu: 100.0, delta: 0.05, bisect_tol: 1e-3, max_boxes: 1_000_000 }
    }
}

/// Box `[v, w]` in `[0, 1]^n` with its objective upper bound.
#[derive(Clone, Debug, PartialEq)]
pub struct Box {
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct DmoResult {
    pub subset: Vec<usize>,
    pub selection: SelectionVector,
    pub worst: WorstCase,
    /// Lower bound on the optimal worst case implied by the final box bounds.
    pub worst_lower_bound: f64,
    /// Penalty weight actually used (see [`effective_mu`]).
    pub mu_eff: f64,
    pub iterations: usize,
    pub boxes_reduced: usize,
    /// Every box was pruned, so the incumbent is exactly optimal.
    pub exhausted: bool,
    /// The incumbent did not have exactly M ones and was completed greedily.
    pub repaired: bool,
    /// `max_boxes` was hit; the bound is then not certified.
    pub budget_hit: bool,
}

/// Objective pieces for one problem instance.
pub struct DmoObjective<'a> {
    problem: &'a GridProblem,
    m: f64,
    mu: f64,
}

impl<'a> DmoObjective<'a> {
    pub fn new(problem: &'a GridProblem, m: usize, mu: f64) -> Self {
        Self { problem, m: m as f64, mu }
    }

    /// `-max_g tr{J_g(c)^-1}`; `-inf` when any grid point is singular.
    pub fn f_plus(&self, c: &[f64]) -> f64 {
        -self.problem.worst_case(c).value.value()
    }

    pub fn f_minus(&self, c: &[f64]) -> f64 {
        self.mu * (c.iter().sum::<f64>() - self.m).max(0.0)
    }

    pub fn value(&self, c: &[f64]) -> f64 {
        self.f_plus(c) - self.f_minus(c)
    }
}

/// The penalty must make any over-budget point worse than a feasible one.
/// Adding sensors beyond M gains at most the worst case of a feasible
/// M-subset, so twice a greedy subset's worst case (or `mu`, if larger)
/// guarantees domination.
pub fn effective_mu(problem: &GridProblem, m: usize, mu: f64) -> f64 {
    let greedy = problem.worst_case_subset(&greedy_fill(problem, &[], m)).value.value();
    if greedy.is_finite() {
        mu.max(2.0 * greedy)
    } else {
        mu
    }
}

pub fn dmo(scene: &Scene, m: usize, mu: f64, delta: f64) -> Result<DmoResult> {
    dmo_with(&GridProblem::new(scene)?, m, &DmoOptions { mu, delta, ..DmoOptions::default() })
}

pub fn dmo_with(problem: &GridProblem, m: usize, opts: &DmoOptions) -> Result<DmoResult> {
    let n = problem.sensor_count();
    if m == 0 || m > n {
        return Err(SelectError::InvalidArgument(format!("need 1 <= M <= M_max (M={m}, M_max={n})")));
    }
    if !(opts.delta > 0.0 && opts.delta < 1.0) || !(opts.mu > 0.0) {
        return Err(SelectError::InvalidArgument("need mu > 0 and 0 < delta < 1".into()));
    }
    let mu_eff = effective_mu(problem, m, opts.mu);
    let obj = DmoObjective::new(problem, m, mu_eff);

    let mut incumbent: Option<Vec<f64>> = None;
    let mut nu = f64::NEG_INFINITY;
    let mut pending = vec![(vec![0.0; n], vec![1.0; n])];
    let mut live: Vec<Box> = Vec::new();
    let (mut iterations, mut reduced) = (0usize, 0usize);
    let mut exhausted = false;
    let mut budget_hit = false;
    let mut final_bound;

    loop {
        iterations += 1;
        reduced += pending.len();
        let fresh: Vec<Box> =
            par_map(&pending, |(v, w)| reduce(&obj, v, w, nu, opts.bisect_tol)).into_iter().flatten().collect();
        for b in &fresh {
            let cand = candidate(b);
            let val = obj.value(&cand);
            if val > nu {
                nu = val;
                incumbent = Some(cand);
            }
        }
        live.extend(fresh);
        live.retain(|b| b.bound >= nu && b.bound > f64::NEG_INFINITY);
        let Some(top) = (0..live.len()).max_by(|&a, &b| live[a].bound.total_cmp(&live[b].bound).then(b.cmp(&a)))
        else {
            exhausted = true;
            final_bound = nu;
            break;
        };
        final_bound = live[top].bound.max(nu);
        if nu >= final_bound - opts.delta * final_bound.abs() {
            break;
        }
        if reduced >= opts.max_boxes {
            log::warn!("DMO stopped after {reduced} boxes without closing the bound gap");
            budget_hit = true;
            break;
        }
        let b = live.swap_remove(top);
        let k = (0..n)
            .max_by(|&i, &j| (b.w[i] - b.v[i]).total_cmp(&(b.w[j] - b.v[j])).then(j.cmp(&i)))
            .expect("n >= 1");
        if b.w[k] - b.v[k] <= 0.0 {
            // a single lattice point; its value is already the incumbent candidate
            continue;
        }
        let (mut w0, mut v1) = (b.w.clone(), b.v.clone());
        w0[k] = 0.0;
        v1[k] = 1.0;
        pending = vec![(b.v.clone(), w0), (v1, b.w)];
        if live.is_empty() && pending.is_empty() {
            exhausted = true;
            break;
        }
    }

    let Some(best) = incumbent else {
        return Err(SelectError::DegenerateScene(
            "every candidate selection is singular at some grid point".into(),
        ));
    };
    let mut subset: Vec<usize> = (0..n).filter(|&i| best[i] >= 0.5).collect();
    let repaired = subset.len() != m;
    if subset.len() > m {
        subset = greedy_trim(problem, subset, m);
    } else if subset.len() < m {
        subset = greedy_fill(problem, &subset, m);
    }
    let worst = problem.worst_case_subset(&subset);
    if worst.value.is_singular() {
        return Err(SelectError::DegenerateScene("every size-M selection is singular at some grid point".into()));
    }
    Ok(DmoResult {
        selection: SelectionVector::from_subset(n, &subset),
        subset,
        worst,
        worst_lower_bound: -final_bound,
        mu_eff,
        iterations,
        boxes_reduced: reduced,
        exhausted,
        repaired,
        budget_hit,
    })
}

/// `ceil((v + w) / 2)`.
fn candidate(b: &Box) -> Vec<f64> {
    b.v.iter().zip(&b.w).map(|(v, w)| (0.5 * (v + w)).ceil()).collect()
}

/// Largest `s` in `[0, 1]` with `ok(s)`, for a predicate that holds on an
/// initial segment. Assumes `ok(0)`.
fn supremum(ok: impl Fn(f64) -> bool, tol: f64) -> f64 {
    if ok(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Shrinks `[v, w]` to the smallest lattice box that can still hold a
/// feasible point with value at least `nu`; `None` when none can.
pub fn reduce(obj: &DmoObjective<'_>, v: &[f64], w: &[f64], nu: f64, tol: f64) -> Option<Box> {
    let g1 = |c: &[f64]| c.iter().sum::<f64>();
    let h1 = |c: &[f64]| c.iter().map(|x| x * x).sum::<f64>();
    let bound = obj.f_plus(w) - obj.f_minus(v);
    if bound == f64::NEG_INFINITY || bound < nu || g1(v) - h1(w) > 0.0 {
        return None;
    }
    let n = v.len();
    let mut v2 = v.to_vec();
    if nu > f64::NEG_INFINITY {
        for m in (0..n).filter(|&m| w[m] > v[m]) {
            let span = w[m] - v[m];
            let alpha = supremum(
                |a| {
                    let mut x = w.to_vec();
                    x[m] -= a * span;
                    g1(v) - h1(&x) <= 0.0 && obj.f_plus(&x) - obj.f_minus(v) >= nu
                },
                tol,
            );
            v2[m] = (w[m] - alpha * span).ceil();
        }
    }
    let mut w2 = w.to_vec();
    if nu > f64::NEG_INFINITY {
        let fw = obj.f_plus(w);
        for m in (0..n).filter(|&m| w[m] > v2[m]) {
            let span = w[m] - v2[m];
            let beta = supremum(
                |b| {
                    let mut x = v2.clone();
                    x[m] += b * span;
                    g1(&x) - h1(w) <= 0.0 && fw - obj.f_minus(&x) >= nu
                },
                tol,
            );
            w2[m] = (v2[m] + beta * span).floor();
        }
    }
    if v2.iter().zip(&w2).any(|(a, b)| a > b) {
        return None;
    }
    let bound = obj.f_plus(&w2) - obj.f_minus(&v2);
    if bound == f64::NEG_INFINITY || bound < nu {
        return None;
    }
    Some(Box { v: v2, w: w2, bound })
}

fn greedy_trim(problem: &GridProblem, mut subset: Vec<usize>, m: usize) -> Vec<usize> {
    while subset.len() > m {
        let drop = (0..subset.len())
            .min_by(|&a, &b| {
                let wa = without(problem, &subset, a);
                let wb = without(problem, &subset, b);
                wa.total_cmp(&wb).then(a.cmp(&b))
            })
            .expect("non-empty");
        subset.remove(drop);
    }
    subset
}

fn without(problem: &GridProblem, subset: &[usize], k: usize) -> f64 {
    let rest: Vec<usize> = subset.iter().enumerate().filter(|&(i, _)| i != k).map(|(_, &s)| s).collect();
    problem.worst_case_subset(&rest).value.value()
}
