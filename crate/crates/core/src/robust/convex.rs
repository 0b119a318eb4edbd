//! Convex relaxation of the min-max problem,
//!
//! ```text
//! min_{c, gamma}  gamma + l^T c
//! s.t.  tr{J_g(c)^-1} <= gamma  for every grid point g
//!       1^T c = M,  0 <= c <= 1,  c_m = 1 for m in fixed_ones
//! ```
//!
//! solved with a primal log-barrier interior-point method. Each centering
//! step is a Newton step on the equality-constrained barrier problem, using
//! the analytic gradient `d tr{J^-1} / dc_m = -eps_m |J^-1 u_m|^2` and
//! Hessian `2 eps_m eps_n (u_m^T J^-1 u_n)(u_m^T J^-2 u_n)`.
//! The linear term `l` is zero for the plain relaxation; the DC iteration
//! uses it for its linearised concave penalty.

use nalgebra::{DMatrix, DVector};

use super::{GridProblem, SelectionVector, WorstCase};
use crate::error::{Result, SelectError};
use crate::linalg::Vec3;
use crate::scene::Scene;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexOptions {
    /// Stop once the duality gap bound falls below `tol * |objective|`.
    pub tol: f64,
    /// Barrier weight multiplier between centering steps.
    pub t_factor: f64,
    /// Newton step budget across all centering steps.
    pub max_newton: usize,
}

impl Default for ConvexOptions {
    fn default() -> Self {
        Self { tol: 1e-8, t_factor: 10.0, max_newton: 500 }
    }
}

#[derive(Clone, Debug)]
pub struct RelaxedSolution {
    pub c: SelectionVector,
    /// `max_g tr{J_g(c)^-1}` at the returned point.
    pub worst: WorstCase,
    /// Objective `max_g tr{J_g(c)^-1} + l^T c`.
    pub objective: f64,
    /// Upper bound on the suboptimality of `objective`.
    pub gap: f64,
    pub newton_steps: usize,
    pub converged: bool,
    /// The full support is singular at some grid point, so every feasible
    /// point is; `c` is then the uniform start.
    pub degenerate: bool,
}

pub fn relaxed_solve(scene: &Scene, m: usize, fixed_ones: &[usize]) -> Result<RelaxedSolution> {
    relaxed_solve_with(&GridProblem::new(scene)?, m, fixed_ones, None, &ConvexOptions::default())
}

pub fn relaxed_solve_with(
    problem: &GridProblem,
    m: usize,
    fixed_ones: &[usize],
    linear: Option<&[f64]>,
    opts: &ConvexOptions,
) -> Result<RelaxedSolution> {
    let n = problem.sensor_count();
    if m > n {
        return Err(SelectError::InvalidArgument(format!("M={m} exceeds M_max={n}")));
    }
    if fixed_ones.len() > m {
        return Err(SelectError::InvalidArgument(format!(
            "{} fixed sensors exceed the budget M={m}",
            fixed_ones.len()
        )));
    }
    if let Some(l) = linear {
        if l.len() != n {
            return Err(SelectError::InvalidArgument("linear term length mismatch".into()));
        }
    }
    let mut c = vec![0.0; n];
    for &f in fixed_ones {
        if f >= n || c[f] == 1.0 {
            return Err(SelectError::InvalidArgument(format!("fixed sensor {f} invalid or repeated")));
        }
        c[f] = 1.0;
    }
    let free: Vec<usize> = (0..n).filter(|&i| c[i] == 0.0).collect();
    let budget = (m - fixed_ones.len()) as f64;
    let linear_at = |c: &[f64]| linear.map_or(0.0, |l| l.iter().zip(c).map(|(a, b)| a * b).sum::<f64>());

    let trivial = |c: Vec<f64>, degenerate: bool| {
        let worst = problem.worst_case(&c);
        let objective = worst.value.value() + linear_at(&c);
        Ok(RelaxedSolution {
            c: SelectionVector(c),
            worst,
            objective,
            gap: 0.0,
            newton_steps: 0,
            converged: !degenerate,
            degenerate,
        })
    };
    if budget == 0.0 {
        return trivial(c, false);
    }
    if budget as usize == free.len() {
        free.iter().for_each(|&i| c[i] = 1.0);
        return trivial(c, false);
    }
    for &i in &free {
        c[i] = budget / free.len() as f64;
    }
    let start = problem.worst_case(&c);
    if start.value.is_singular() {
        return trivial(c, true);
    }

    let barrier = Barrier {
        problem,
        free: &free,
        ell: linear.map(|l| free.iter().map(|&i| l[i]).collect()).unwrap_or_else(|| vec![0.0; free.len()]),
    };
    let mut x: Vec<f64> = free.iter().map(|&i| c[i]).collect();
    let f0 = start.value.value();
    let mut gamma = 1.1 * f0;
    // barrier parameter: 1 + 3 per grid point (epigraph plus log-det), 2 per box
    let m_ineq = (4 * problem.grid_count() + 2 * free.len()) as f64;
    // objective scale at the start, including any linear term
    let lin_scale: f64 = barrier.ell.iter().zip(&x).map(|(l, v)| (l * v).abs()).sum();
    let mut t = m_ineq / (f0 + lin_scale);
    let mut steps = 0;
    let mut converged = false;

    'outer: loop {
        // centering
        loop {
            if steps >= opts.max_newton {
                break 'outer;
            }
            let Some(sys) = barrier.newton_system(&x, gamma, t) else { break 'outer };
            let Some(dx) = sys.solve() else { break 'outer };
            steps += 1;
            let slope = sys.slope(&dx);
            // centred once the decrement drops below the resolution of the barrier value
            if -slope / 2.0 <= 1e-10_f64.max(1e-14 * t * barrier.objective_scale(&x, gamma)) {
                break;
            }
            let Some((nx, ng)) = barrier.line_search(&x, gamma, &dx, t, slope) else { break };
            x = nx;
            gamma = ng;
        }
        if m_ineq / t <= opts.tol * barrier.objective_scale(&x, gamma).max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        t *= opts.t_factor;
    }
    if !converged {
        log::warn!("relaxed solve stopped after {steps} Newton steps without reaching tolerance");
    }
    for (k, &i) in free.iter().enumerate() {
        c[i] = x[k].clamp(0.0, 1.0);
    }
    let worst = problem.worst_case(&c);
    let objective = worst.value.value() + linear_at(&c);
    Ok(RelaxedSolution { c: SelectionVector(c), worst, objective, gap: m_ineq / t, newton_steps: steps, converged, degenerate: false })
}

struct Barrier<'a> {
    problem: &'a GridProblem,
    free: &'a [usize],
    ell: Vec<f64>,
}

impl Barrier<'_> {
    /// Magnitude of the objective terms, `|gamma| + sum |l_k x_k|`.
    fn objective_scale(&self, x: &[f64], gamma: f64) -> f64 {
        gamma.abs() + self.ell.iter().zip(x).map(|(l, v)| (l * v).abs()).sum::<f64>()
    }

    fn full(&self, x: &[f64]) -> Vec<f64> {
        // fixed sensors are the non-free ones, always at weight 1
        let mut c = vec![1.0; self.problem.sensor_count()];
        for (k, &i) in self.free.iter().enumerate() {
            c[i] = x[k];
        }
        c
    }

    /// Barrier value, `None` outside the strict interior.
    fn value(&self, x: &[f64], gamma: f64, t: f64) -> Option<f64> {
        if x.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return None;
        }
        let c = self.full(x);
        let mut phi = t * (gamma + self.ell.iter().zip(x).map(|(l, v)| l * v).sum::<f64>());
        for g in 0..self.problem.grid_count() {
            let j = self.problem.fim(g, &c);
            let f = j.crlb();
            let slack = gamma - f.value();
            if f.is_singular() || !(slack > 0.0) {
                return None;
            }
            phi -= slack.ln() + j.matrix().determinant().ln();
        }
        phi -= x.iter().map(|&v| v.ln() + (1.0 - v).ln()).sum::<f64>();
        Some(phi)
    }

    /// Newton system over `(x, gamma)` with `gamma` eliminated.
    ///
    /// Each grid point contributes `-ln(gamma - tr J^-1) - ln det J`; the
    /// log-det term keeps the barrier self-concordant near singular `J`.
    ///
    /// Writing `a_g` for the gradient of the slack `gamma - f_g` in `x`, the
    /// barrier Hessian has the block form
    /// `[sum a a^T / s^2 + R, sum a / s^2; ., sum 1 / s^2]`. Its Schur
    /// complement on `gamma` is the weighted covariance
    /// `sum (a_g - abar)(a_g - abar)^T / s_g^2 + R`, assembled from PSD terms
    /// so the near-active constraints do not swamp the box curvature.
    fn newton_system(&self, x: &[f64], gamma: f64, t: f64) -> Option<NewtonSystem> {
        let nf = x.len();
        let c = self.full(x);
        let grid = self.problem.grid_count();
        let mut u = vec![Vec3::zeros(); nf];
        let mut v = vec![Vec3::zeros(); nf];
        let mut a = vec![vec![0.0; nf]; grid];
        let mut inv_s = vec![0.0; grid];
        let mut schur = DMatrix::<f64>::zeros(nf, nf);
        let mut grad_x = vec![0.0; nf];
        let mut grad_gamma = t;
        for g in 0..grid {
            let jinv = self.problem.fim(g, &c).inverse()?;
            let slack = gamma - jinv.trace();
            if !(slack > 0.0) {
                return None;
            }
            inv_s[g] = 1.0 / slack;
            for (k, &i) in self.free.iter().enumerate() {
                let geom = self.problem.geometry(g, i);
                u[k] = geom.los * geom.epsilon.sqrt();
                v[k] = jinv * u[k];
                a[g][k] = v[k].norm_squared();
            }
            grad_gamma -= inv_s[g];
            for k in 0..nf {
                grad_x[k] -= a[g][k] * inv_s[g] + u[k].dot(&v[k]);
                for l in k..nf {
                    let ukvl = u[k].dot(&v[l]);
                    let h = 2.0 * ukvl * v[k].dot(&v[l]) * inv_s[g] + ukvl * ukvl;
                    schur[(k, l)] += h;
                    if l != k {
                        schur[(l, k)] += h;
                    }
                }
            }
        }
        let h_gamma: f64 = inv_s.iter().map(|s| s * s).sum();
        let abar: Vec<f64> =
            (0..nf).map(|k| (0..grid).map(|g| a[g][k] * inv_s[g] * inv_s[g]).sum::<f64>() / h_gamma).collect();
        for g in 0..grid {
            let w = inv_s[g] * inv_s[g];
            let dev: Vec<f64> = (0..nf).map(|k| a[g][k] - abar[k]).collect();
            for k in 0..nf {
                for l in k..nf {
                    let h = w * dev[k] * dev[l];
                    schur[(k, l)] += h;
                    if l != k {
                        schur[(l, k)] += h;
                    }
                }
            }
        }
        for k in 0..nf {
            let (lo, hi) = (x[k], 1.0 - x[k]);
            grad_x[k] += t * self.ell[k] - 1.0 / lo + 1.0 / hi;
            schur[(k, k)] += 1.0 / (lo * lo) + 1.0 / (hi * hi);
        }
        Some(NewtonSystem { grad_x, grad_gamma, h_gamma, abar, schur })
    }

    /// Backtracking Armijo search that keeps the iterate strictly feasible;
    /// `None` when no step strictly decreases the barrier.
    fn line_search(&self, x: &[f64], gamma: f64, dx: &[f64], t: f64, slope: f64) -> Option<(Vec<f64>, f64)> {
        let nf = x.len();
        let mut step: f64 = 1.0;
        for k in 0..nf {
            if dx[k] > 0.0 {
                step = step.min(0.99 * (1.0 - x[k]) / dx[k]);
            } else if dx[k] < 0.0 {
                step = step.min(0.99 * x[k] / -dx[k]);
            }
        }
        let phi0 = self.value(x, gamma, t)?;
        for _ in 0..60 {
            let nx: Vec<f64> = (0..nf).map(|k| x[k] + step * dx[k]).collect();
            let ng = gamma + step * dx[nf];
            if let Some(phi) = self.value(&nx, ng, t) {
                if phi < phi0 && phi <= phi0 + 0.01 * step * slope {
                    return Some((nx, ng));
                }
            }
            step *= 0.5;
        }
        None
    }
}

struct NewtonSystem {
    grad_x: Vec<f64>,
    grad_gamma: f64,
    h_gamma: f64,
    abar: Vec<f64>,
    schur: DMatrix<f64>,
}

impl NewtonSystem {
    /// Newton step `(dx, dgamma)` subject to `sum dx = 0`.
    ///
    /// The Schur matrix is Jacobi-scaled before factoring; its diagonal spans
    /// many orders of magnitude once weights approach the box bounds.
    fn solve(&self) -> Option<Vec<f64>> {
        let nf = self.grad_x.len();
        let d: Vec<f64> = (0..nf).map(|k| 1.0 / self.schur[(k, k)].sqrt()).collect();
        if d.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let scaled = DMatrix::from_fn(nf, nf, |k, l| self.schur[(k, l)] * d[k] * d[l]);
        let r = DVector::from_fn(nf, |k, _| -(self.grad_x[k] - self.abar[k] * self.grad_gamma) * d[k]);
        let ones = DVector::from_vec(d.clone());
        let (y_r, y_1) = match scaled.clone().cholesky() {
            Some(ch) => (ch.solve(&r), ch.solve(&ones)),
            None => {
                let lu = scaled.lu();
                (lu.solve(&r)?, lu.solve(&ones)?)
            }
        };
        // multiplier of the budget constraint
        let nu = ones.dot(&y_r) / ones.dot(&y_1);
        let mut step: Vec<f64> = (0..nf).map(|k| d[k] * (y_r[k] - nu * y_1[k])).collect();
        let dgamma = -self.grad_gamma / self.h_gamma - step.iter().zip(&self.abar).map(|(d, a)| d * a).sum::<f64>();
        step.push(dgamma);
        step.iter().all(|v| v.is_finite()).then_some(step)
    }

    /// Directional derivative of the barrier along `step`.
    fn slope(&self, step: &[f64]) -> f64 {
        let nf = self.grad_x.len();
        self.grad_x.iter().zip(step).map(|(g, d)| g * d).sum::<f64>() + self.grad_gamma * step[nf]
    }
}
