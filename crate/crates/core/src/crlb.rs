//! Fisher information and the CRLB in trace and fractional (angle) form,
//! plus the rank-one update quantities used by greedy selection.

use std::cmp::Ordering;

use crate::error::{Result, SelectError};
use crate::linalg::{self, Mat3, Vec3};
use crate::scene::{Point3, Scene, SensorTargetGeometry};

/// Smallest eigenvalue at or below this fraction of the trace marks a FIM singular.
pub const SINGULAR_EIG_RATIO: f64 = 1e-10;
/// Fractional-form denominator at or below this fraction of the numerator marks it singular.
pub const SINGULAR_DEN_RATIO: f64 = 1e-12;

/// 3x3 symmetric PSD Fisher information matrix (units m^-2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FisherMatrix(Mat3);

impl FisherMatrix {
    pub fn zero() -> Self {
        FisherMatrix(Mat3::zeros())
    }

    pub fn from_matrix(m: Mat3) -> Self {
        FisherMatrix(m)
    }

    /// `sum_m eps_m u_m u_m^T` over the given geometries.
    pub fn from_geometries<'a>(geoms: impl IntoIterator<Item = &'a SensorTargetGeometry>) -> Self {
        let mut fim = Self::zero();
        for g in geoms {
            fim.add(g, 1.0);
        }
        fim
    }

    /// Adds `weight * eps * u u^T`.
    pub fn add(&mut self, g: &SensorTargetGeometry, weight: f64) {
        self.0 += (g.los * g.los.transpose()) * (g.epsilon * weight);
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn eigenvalues(&self) -> [f64; 3] {
        linalg::sym_eigenvalues(&self.0)
    }

    pub fn is_singular(&self) -> bool {
        let tr = self.trace();
        !(tr > 0.0) || self.eigenvalues()[0] <= SINGULAR_EIG_RATIO * tr
    }

    /// Inverse when the matrix passes the singularity test.
    pub fn inverse(&self) -> Option<Mat3> {
        if self.is_singular() {
            return None;
        }
        linalg::inverse(&self.0)
    }

    /// `tr{J^-1}`, or the singular sentinel.
    pub fn crlb(&self) -> CrlbValue {
        if self.is_singular() {
            return CrlbValue::SINGULAR;
        }
        let (_, det) = linalg::adjugate_det(&self.0);
        CrlbValue::finite(linalg::principal_minor_sum(&self.0) / det)
    }
}

/// CRLB in m^2; `+inf` is the singular sentinel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrlbValue(f64);

impl CrlbValue {
    pub const SINGULAR: CrlbValue = CrlbValue(f64::INFINITY);

    pub fn finite(v: f64) -> Self {
        debug_assert!(v.is_finite());
        CrlbValue(v)
    }

    /// Wraps a raw value; non-finite or non-positive values become the sentinel.
    pub fn from_raw(v: f64) -> Self {
        if v.is_finite() && v > 0.0 {
            CrlbValue(v)
        } else {
            Self::SINGULAR
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_singular(&self) -> bool {
        self.0.is_infinite()
    }
}

impl PartialOrd for CrlbValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

pub(crate) fn check_subset(n_sensors: usize, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(SelectError::InvalidArgument("subset must be non-empty".into()));
    }
    let mut seen = vec![false; n_sensors];
    for &m in subset {
        if m >= n_sensors {
            return Err(SelectError::InvalidArgument(format!("sensor index {m} out of range ({n_sensors} sensors)")));
        }
        if std::mem::replace(&mut seen[m], true) {
            return Err(SelectError::InvalidArgument(format!("sensor index {m} repeated in subset")));
        }
    }
    Ok(())
}

fn subset_geometries(scene: &Scene, subset: &[usize], target: &Point3) -> Result<Vec<SensorTargetGeometry>> {
    check_subset(scene.sensor_count(), subset)?;
    subset.iter().map(|&m| scene.geometry(m, target)).collect()
}

pub fn fim(scene: &Scene, subset: &[usize], target: &Point3) -> Result<FisherMatrix> {
    Ok(FisherMatrix::from_geometries(&subset_geometries(scene, subset, target)?))
}

/// Trace form: `tr{(sum eps u u^T)^-1}`.
pub fn crlb_trace(scene: &Scene, subset: &[usize], target: &Point3) -> Result<CrlbValue> {
    Ok(fim(scene, subset, target)?.crlb())
}

/// Numerator (pair sum) and denominator (triplet sum) of the fractional form.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FractionalParts {
    pub numerator: f64,
    pub denominator: f64,
}

impl FractionalParts {
    pub fn from_geometries(geoms: &[SensorTargetGeometry]) -> Self {
        let n = geoms.len();
        let mut parts = FractionalParts::default();
        for a in 0..n {
            for b in a + 1..n {
                parts.numerator += pair_term(&geoms[a], &geoms[b]);
                for c in b + 1..n {
                    parts.denominator += triplet_term(&geoms[a], &geoms[b], &geoms[c]);
                }
            }
        }
        parts
    }

    pub fn crlb(&self) -> CrlbValue {
        if !(self.numerator > 0.0) || self.denominator <= SINGULAR_DEN_RATIO * self.numerator {
            return CrlbValue::SINGULAR;
        }
        CrlbValue::from_raw(self.numerator / self.denominator)
    }
}

/// Fractional form N/D built from pairwise angles and triple products.
pub fn crlb_fractional(scene: &Scene, subset: &[usize], target: &Point3) -> Result<CrlbValue> {
    if subset.len() < 3 {
        return Err(SelectError::InvalidArgument(format!(
            "fractional CRLB needs at least 3 sensors, got {}",
            subset.len()
        )));
    }
    Ok(FractionalParts::from_geometries(&subset_geometries(scene, subset, target)?).crlb())
}

/// `A_ab = eps_a eps_b sin^2(theta_ab)`, with `sin^2 theta = |u_a x u_b|^2`.
pub fn pair_term(a: &SensorTargetGeometry, b: &SensorTargetGeometry) -> f64 {
    a.epsilon * b.epsilon * a.los.cross(&b.los).norm_squared()
}

/// `V_abc = eps_a eps_b eps_c ((u_a x u_b) . u_c)^2`.
pub fn triplet_term(a: &SensorTargetGeometry, b: &SensorTargetGeometry, c: &SensorTargetGeometry) -> f64 {
    let triple = a.los.cross(&b.los).dot(&c.los);
    a.epsilon * b.epsilon * c.epsilon * triple * triple
}

/// CRLB decrease from adding `geom` to a FIM whose inverse is `fim_inverse`:
/// `eps |J^-1 u|^2 / (1 + eps u^T J^-1 u)`.
pub fn marginal_reduction(fim_inverse: &Mat3, geom: &SensorTargetGeometry) -> f64 {
    let w: Vec3 = fim_inverse * geom.los;
    geom.epsilon * w.norm_squared() / (1.0 + geom.epsilon * geom.los.dot(&w))
}

/// Sherman-Morrison: inverse of `J + eps u u^T` from `J^-1`.
pub fn sherman_morrison_update(fim_inverse: &Mat3, geom: &SensorTargetGeometry) -> Mat3 {
    let w: Vec3 = fim_inverse * geom.los;
    let denom = 1.0 + geom.epsilon * geom.los.dot(&w);
    fim_inverse - (w * w.transpose()) * (geom.epsilon / denom)
}

/// Eigenvalues of a FIM read as the edges of a rectangular prism.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Svr {
    pub eigenvalues: [f64; 3],
    /// Full surface area `2 (l1 l2 + l1 l3 + l2 l3)`.
    pub surface: f64,
    pub volume: f64,
}

impl Svr {
    /// Half the surface-to-volume ratio; equals `tr{J^-1}` for non-singular `J`.
    pub fn crlb(&self) -> CrlbValue {
        CrlbValue::from_raw(0.5 * self.surface / self.volume)
    }
}

pub fn svr_decompose(fim: &FisherMatrix) -> Svr {
    let l = fim.eigenvalues();
    Svr {
        eigenvalues: l,
        surface: 2.0 * (l[0] * l[1] + l[0] * l[2] + l[1] * l[2]),
        volume: l[0] * l[1] * l[2],
    }
}
