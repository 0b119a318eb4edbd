//! Iterative convex optimisation: solve the relaxation, pin the sensor with
//! the largest relaxed weight to 1, repeat until M sensors are pinned.

use super::convex::{relaxed_solve_with, ConvexOptions};
use super::{GridProblem, SelectionVector, WorstCase};
use crate::error::{Result, SelectError};
use crate::scene::Scene;

/// Relaxed weights closer than this to the round maximum count as tied.
const TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct IcoResult {
    /// Sensors in the order they were pinned.
    pub order: Vec<usize>,
    pub selection: SelectionVector,
    pub worst: WorstCase,
    /// Relaxed worst case of each round (non-decreasing as sensors are pinned).
    pub round_values: Vec<f64>,
    /// Every relaxed solve reached its tolerance.
    pub converged: bool,
}

pub fn ico(scene: &Scene, m: usize) -> Result<IcoResult> {
    ico_on(&GridProblem::new(scene)?, m, &ConvexOptions::default())
}

pub fn ico_on(problem: &GridProblem, m: usize, opts: &ConvexOptions) -> Result<IcoResult> {
    let n = problem.sensor_count();
    if m == 0 || m > n {
        return Err(SelectError::InvalidArgument(format!("need 1 <= M <= M_max (M={m}, M_max={n})")));
    }
    let mut order = Vec::with_capacity(m);
    let mut round_values = Vec::with_capacity(m);
    let mut converged = true;
    while order.len() < m {
        let sol = relaxed_solve_with(problem, m, &order, None, opts)?;
        converged &= sol.converged || sol.degenerate;
        round_values.push(sol.worst.value.value());
        let c = sol.c.as_slice();
        let top = (0..n).filter(|i| !order.contains(i)).map(|i| c[i]).fold(f64::NEG_INFINITY, f64::max);
        let pick = (0..n)
            .find(|i| !order.contains(i) && c[*i] >= top - TIE_TOL)
            .expect("an unpinned sensor remains");
        order.push(pick);
    }
    let selection = SelectionVector::from_subset(n, &order);
    Ok(IcoResult { worst: problem.worst_case_subset(&order), selection, order, round_values, converged })
}
