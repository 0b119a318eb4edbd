//! Worst-case (min-max) sensor selection over a grid of candidate target
//! locations.
//!
//! All algorithms work on a [`GridProblem`], which caches the per
//! (grid point, sensor) geometry of a scene.

pub mod convex;
pub mod dcp;
pub mod dmo;
pub mod ico;

use serde::{Deserialize, Serialize};

use crate::combin::{argmin_subsets, binomial};
use crate::crlb::{CrlbValue, FisherMatrix};
use crate::dynamic::DEFAULT_ENUMERATION_CAP;
use crate::error::{Result, SelectError};
use crate::linalg::Mat3;
use crate::scene::{Scene, SensorTargetGeometry};

pub use convex::{relaxed_solve, relaxed_solve_with, ConvexOptions, RelaxedSolution};
pub use dcp::{dcp, dcp_with, DcpOptions, DcpResult, DcpRun};
pub use dmo::{dmo, dmo_with, DmoOptions, DmoResult};
pub use ico::{ico, IcoResult};

/// Entries closer than this to 0 or 1 count as binary.
pub const BINARY_TOL: f64 = 1e-6;

/// Relaxed or binary selection weights, one per sensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SelectionVector(Vec<f64>);

impl SelectionVector {
    /// Validates `0 <= c_m <= 1`.
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if let Some(m) = c.iter().position(|x| !(0.0..=1.0).contains(x)) {
            return Err(SelectError::InvalidArgument(format!("selection weight c[{m}]={} outside [0,1]", c[m])));
        }
        Ok(SelectionVector(c))
    }

    pub fn zeros(n: usize) -> Self {
        SelectionVector(vec![0.0; n])
    }

    pub fn ones(n: usize) -> Self {
        SelectionVector(vec![1.0; n])
    }

    pub fn from_subset(n: usize, subset: &[usize]) -> Self {
        let mut c = vec![0.0; n];
        for &m in subset {
            c[m] = 1.0;
        }
        SelectionVector(c)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_binary(&self) -> bool {
        self.0.iter().all(|&x| x <= BINARY_TOL || x >= 1.0 - BINARY_TOL)
    }

    /// Indices whose weight rounds to 1, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&m| self.0[m] >= 0.5).collect()
    }

    /// `1^T c - c^T c`: zero exactly on binary vectors, positive otherwise.
    pub fn binarity_penalty(&self) -> f64 {
        self.0.iter().map(|x| x - x * x).sum()
    }
}

impl std::ops::Index<usize> for SelectionVector {
    type Output = f64;
    fn index(&self, m: usize) -> &f64 {
        &self.0[m]
    }
}

/// `max_g tr{J_g(c)^-1}` and the grid point attaining it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorstCase {
    pub value: CrlbValue,
    pub argmax_g: usize,
}

/// Cached geometry of every (grid point, sensor) pair.
#[derive(Clone, Debug)]
pub struct GridProblem {
    n: usize,
    /// `geoms[g * n + m]`
    geoms: Vec<SensorTargetGeometry>,
    /// `eps u u^T` per (g, m), same layout.
    dyads: Vec<Mat3>,
}

impl GridProblem {
    pub fn new(scene: &Scene) -> Result<Self> {
        if scene.targets.is_empty() {
            return Err(SelectError::InvalidScene("robust selection needs at least one grid target".into()));
        }
        let table = scene.geometry_table()?;
        Ok(Self::from_table(table))
    }

    /// Builds from `table[g][m]`; every row must have the same length.
    pub fn from_table(table: Vec<Vec<SensorTargetGeometry>>) -> Self {
        let n = table.first().map_or(0, Vec::len);
        assert!(table.iter().all(|row| row.len() == n), "ragged geometry table");
        let geoms: Vec<_> = table.into_iter().flatten().collect();
        let dyads = geoms.iter().map(|g| (g.los * g.los.transpose()) * g.epsilon).collect();
        GridProblem { n, geoms, dyads }
    }

    pub fn sensor_count(&self) -> usize {
        self.n
    }

    pub fn grid_count(&self) -> usize {
        self.geoms.len().checked_div(self.n).unwrap_or(0)
    }

    pub fn geometry(&self, g: usize, m: usize) -> &SensorTargetGeometry {
        &self.geoms[g * self.n + m]
    }

    /// `J_g(c) = sum_m c_m eps_mg u_mg u_mg^T`.
    pub fn fim(&self, g: usize, c: &[f64]) -> FisherMatrix {
        let row = &self.dyads[g * self.n..(g + 1) * self.n];
        let mut j = Mat3::zeros();
        for (d, &w) in row.iter().zip(c) {
            if w != 0.0 {
                j += d * w;
            }
        }
        FisherMatrix::from_matrix(j)
    }

    pub fn fim_subset(&self, g: usize, subset: &[usize]) -> FisherMatrix {
        let mut j = Mat3::zeros();
        for &m in subset {
            j += self.dyads[g * self.n + m];
        }
        FisherMatrix::from_matrix(j)
    }

    fn worst_by(&self, crlb_at: impl Fn(usize) -> CrlbValue) -> WorstCase {
        assert!(self.grid_count() > 0, "empty target grid");
        let mut worst = WorstCase { value: crlb_at(0), argmax_g: 0 };
        for g in 1..self.grid_count() {
            if worst.value.is_singular() {
                break;
            }
            let v = crlb_at(g);
            if v.value() > worst.value.value() {
                worst = WorstCase { value: v, argmax_g: g };
            }
        }
        worst
    }

    /// Worst case at relaxed or binary weights; any singular grid point
    /// makes the worst case singular.
    pub fn worst_case(&self, c: &[f64]) -> WorstCase {
        assert_eq!(c.len(), self.n, "selection vector length mismatch");
        self.worst_by(|g| self.fim(g, c).crlb())
    }

    pub fn worst_case_subset(&self, subset: &[usize]) -> WorstCase {
        self.worst_by(|g| self.fim_subset(g, subset).crlb())
    }
}

pub fn worst_case_crlb(scene: &Scene, c: &SelectionVector) -> Result<WorstCase> {
    if c.len() != scene.sensor_count() {
        return Err(SelectError::InvalidArgument(format!(
            "selection vector has {} entries for {} sensors",
            c.len(),
            scene.sensor_count()
        )));
    }
    Ok(GridProblem::new(scene)?.worst_case(c.as_slice()))
}

/// Sets the `m` largest entries to 1 and the rest to 0; ties go to the
/// lower index.
pub fn round_top_m(c: &SelectionVector, m: usize) -> SelectionVector {
    let mut idx: Vec<usize> = (0..c.len()).collect();
    idx.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(a.cmp(&b)));
    SelectionVector::from_subset(c.len(), &idx[..m.min(c.len())])
}

#[derive(Clone, Debug)]
pub struct RobustSelection {
    pub subset: Vec<usize>,
    pub worst: WorstCase,
    /// Every size-M subset is singular at some grid point.
    pub all_singular: bool,
}

pub fn exhaustive_robust(scene: &Scene, m: usize) -> Result<RobustSelection> {
    exhaustive_robust_on(&GridProblem::new(scene)?, m, DEFAULT_ENUMERATION_CAP)
}

/// Global min-max optimum over all size-`m` subsets, lexicographic tie-break.
pub fn exhaustive_robust_on(problem: &GridProblem, m: usize, cap: u128) -> Result<RobustSelection> {
    let n = problem.sensor_count();
    if m == 0 || m > n {
        return Err(SelectError::InvalidArgument(format!("need 1 <= M <= M_max (M={m}, M_max={n})")));
    }
    let subsets = binomial(n, m);
    let per_subset = problem.grid_count() as u64;
    if subsets.saturating_mul(per_subset as u128) > cap {
        return Err(SelectError::EnumerationCap { subsets, per_subset, cap });
    }
    let (subset, _) =
        argmin_subsets(n, m, |s| problem.worst_case_subset(s).value.value()).expect("non-empty enumeration");
    let worst = problem.worst_case_subset(&subset);
    Ok(RobustSelection { all_singular: worst.value.is_singular(), subset, worst })
}

/// Sensors added one at a time, each minimising the worst case; used to
/// seed penalties and to complete short selections.
pub(crate) fn greedy_fill(problem: &GridProblem, start: &[usize], m: usize) -> Vec<usize> {
    let mut subset = start.to_vec();
    while subset.len() < m {
        let mut best: Option<(usize, f64, f64)> = None;
        let candidates: Vec<usize> = (0..problem.sensor_count()).filter(|c| !subset.contains(c)).collect();
        for cand in candidates {
            subset.push(cand);
            let v = problem.worst_case_subset(&subset).value.value();
            // singular sets are compared by total information instead
            let info: f64 = (0..problem.grid_count()).map(|g| problem.fim_subset(g, &subset).trace()).sum();
            subset.pop();
            let better = match best {
                None => true,
                Some((_, bv, bi)) => v < bv || (v == bv && v.is_infinite() && info > bi),
            };
            if better {
                best = Some((cand, v, info));
            }
        }
        subset.push(best.expect("m <= n").0);
    }
    subset.sort_unstable();
    subset
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Vec3;

    fn axis_problem() -> GridProblem {
        let dirs = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (-1.0, 0.0, 0.0), (0.0, -1.0, 0.0)];
        let row = dirs
            .iter()
            .map(|&(x, y, z)| SensorTargetGeometry { distance: 1.0, los: Vec3::new(x, y, z), epsilon: 1.0 })
            .collect();
        GridProblem::from_table(vec![row])
    }

    #[test]
    fn round_top_m_examples() {
        let c = SelectionVector::new(vec![0.9, 0.8, 0.1, 0.1, 0.1]).unwrap();
        assert_eq!(round_top_m(&c, 2).support(), vec![0, 1]);
        let b = SelectionVector::from_subset(5, &[1, 3]);
        assert_eq!(round_top_m(&b, 2), b);
        let tie = SelectionVector::new(vec![0.5; 4]).unwrap();
        assert_eq!(round_top_m(&tie, 3).support(), vec![0, 1, 2]);
    }

    #[test]
    fn worst_case_singular_and_full() {
        let p = axis_problem();
        assert!(p.worst_case(&[1.0, 1.0, 0.0, 0.0, 0.0]).value.is_singular());
        let full = p.worst_case(&[1.0; 5]).value.value();
        // J = diag(2, 2, 1)
        assert!((full - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_prefers_lexicographic_ties() {
        let p = axis_problem();
        let r = exhaustive_robust_on(&p, 3, DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(r.subset, vec![0, 1, 2]);
        assert!((r.worst.value.value() - 3.0).abs() < 1e-12);
        assert!(!r.all_singular);
    }

    #[test]
    fn selection_vector_validation() {
        assert!(SelectionVector::new(vec![0.5, 1.2]).is_err());
        let c = SelectionVector::new(vec![0.0, 1.0, 1.0 - 1e-8]).unwrap();
        assert!(c.is_binary());
        assert!(!SelectionVector::new(vec![0.3, 0.7]).unwrap().is_binary());
    }
}
