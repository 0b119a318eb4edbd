//! Monte-Carlo positioning: hybrid TOA/RSS measurement draws and an
//! iterative weighted Gauss-Newton (Taylor-series) estimator.

use nalgebra::{Matrix2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::crlb::check_subset;
use crate::error::{Result, SelectError};
use crate::exec::{derive_seed, par_map_range, rng_from_seed};
use crate::linalg::{Mat3, Vec3};
use crate::scene::{Point3, Scene};

/// Gauss-Newton stops once a step is shorter than this (meters).
pub const TOL_EST: f64 = 1e-8;
pub const MAX_ITER: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub subset: Vec<usize>,
    /// TOA distance estimates, meters.
    pub toa: Vec<f64>,
    /// Natural log of the RSS distance estimates.
    pub log_rss: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub location: Point3,
    pub iterations: usize,
    pub converged: bool,
}

/// Cholesky factor of the per-sensor covariance of (TOA distance, log RSS distance).
fn noise_factor(sigma_t: f64, sigma_r: f64, eta: f64) -> Matrix2<f64> {
    Matrix2::new(sigma_t, 0.0, eta * sigma_r, (1.0 - eta * eta).sqrt() * sigma_r)
}

/// Inverse covariance `R_mm^-1` of one sensor's measurement pair.
fn weight(sigma_t: f64, sigma_r: f64, eta: f64) -> Matrix2<f64> {
    let cross = eta * sigma_t * sigma_r;
    let det = sigma_t * sigma_t * sigma_r * sigma_r * (1.0 - eta * eta);
    Matrix2::new(sigma_r * sigma_r, -cross, -cross, sigma_t * sigma_t) / det
}

pub fn simulate_measurements(scene: &Scene, subset: &[usize], target: &Point3, seed: u64) -> Result<MeasurementSet> {
    check_subset(scene.sensor_count(), subset)?;
    let mut rng = rng_from_seed(seed);
    let mut toa = Vec::with_capacity(subset.len());
    let mut log_rss = Vec::with_capacity(subset.len());
    for &m in subset {
        let d = scene.sensors[m].position.distance(target);
        if !(d > 0.0) {
            return Err(SelectError::DegenerateGeometry { sensor: m });
        }
        let (st, sr) = scene.noise_at(m, d);
        let z = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
        let e = noise_factor(st, sr, scene.sensors[m].eta) * z;
        toa.push(d + e[0]);
        log_rss.push(d.ln() + e[1]);
    }
    Ok(MeasurementSet { subset: subset.to_vec(), toa, log_rss, seed })
}

/// Weighted Gauss-Newton on the TOA and log-RSS residuals. Weights use the
/// noise statistics at the current iterate's ranges.
pub fn taylor_ls_estimate(scene: &Scene, subset: &[usize], meas: &MeasurementSet, init: &Point3) -> Result<Estimate> {
    check_subset(scene.sensor_count(), subset)?;
    if subset.len() < 3 {
        return Err(SelectError::InvalidArgument(format!(
            "position estimation needs at least 3 sensors, got {}",
            subset.len()
        )));
    }
    if meas.toa.len() != subset.len() || meas.log_rss.len() != subset.len() {
        return Err(SelectError::InvalidArgument("measurement set does not match subset".into()));
    }
    let mut x = init.to_vec();
    for iter in 1..=MAX_ITER {
        let mut normal = Mat3::zeros();
        let mut rhs = Vec3::zeros();
        for (k, &m) in subset.iter().enumerate() {
            let delta = scene.sensors[m].position.to_vec() - x;
            let d = delta.norm();
            if !(d > 0.0) {
                return Ok(Estimate { location: Point3::from_vec(&x), iterations: iter, converged: false });
            }
            let u = delta / d;
            let (st, sr) = scene.noise_at(m, d);
            let w = weight(st, sr, scene.sensors[m].eta);
            let r = Vector2::new(meas.toa[k] - d, meas.log_rss[k] - d.ln());
            // rows of A are -u^T (TOA) and -u^T / d (RSS)
            let s = Vector2::new(-1.0, -1.0 / d);
            let ws = w * s;
            normal += (u * u.transpose()) * s.dot(&ws);
            rhs += u * ws.dot(&r);
        }
        let Some(inv) = normal.try_inverse() else {
            return Ok(Estimate { location: Point3::from_vec(&x), iterations: iter, converged: false });
        };
        let step = inv * rhs;
        x += step;
        let norm = step.norm();
        if !norm.is_finite() || norm > 10.0 * scene.d_max {
            return Ok(Estimate { location: Point3::from_vec(&x), iterations: iter, converged: false });
        }
        if norm < TOL_EST {
            return Ok(Estimate { location: Point3::from_vec(&x), iterations: iter, converged: true });
        }
    }
    Ok(Estimate { location: Point3::from_vec(&x), iterations: MAX_ITER, converged: false })
}

/// Starting point: the selected sensors' centroid moved `(d_s + d_max) / 2`
/// against their mean LOS direction toward the nominal target.
pub fn default_init(scene: &Scene, subset: &[usize], nominal: &Point3) -> Point3 {
    let n = subset.len() as f64;
    let centroid: Vec3 = subset.iter().map(|&m| scene.sensors[m].position.to_vec()).sum::<Vec3>() / n;
    let mean_los: Vec3 = subset
        .iter()
        .map(|&m| (scene.sensors[m].position.to_vec() - nominal.to_vec()).normalize())
        .sum::<Vec3>();
    let dir = if mean_los.norm() > 1e-12 {
        mean_los.normalize()
    } else {
        (centroid - nominal.to_vec()).try_normalize(1e-12).unwrap_or_else(Vec3::x)
    };
    Point3::from_vec(&(centroid - dir * (0.5 * (scene.d_s + scene.d_max))))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MseReport {
    /// Mean squared 3D error over the trials that converged.
    pub mse: f64,
    /// Standard error of `mse`.
    pub std_error: f64,
    /// Norm of the mean error vector (bias estimate).
    pub bias: f64,
    pub n_used: usize,
    /// Trials that needed the perturbed retry.
    pub n_retried: usize,
    /// Trials that failed twice and were left out.
    pub n_excluded: usize,
}

impl MseReport {
    pub fn exclusion_rate(&self) -> f64 {
        self.n_excluded as f64 / (self.n_used + self.n_excluded).max(1) as f64
    }
}

pub fn mse_eval(scene: &Scene, subset: &[usize], target: &Point3, n_trials: usize, seed: u64) -> Result<MseReport> {
    check_subset(scene.sensor_count(), subset)?;
    if subset.len() < 3 {
        return Err(SelectError::InvalidArgument("MSE evaluation needs at least 3 sensors".into()));
    }
    let init = default_init(scene, subset, target);
    let truth = target.to_vec();
    let outcomes = par_map_range(n_trials, |k| -> Result<(Option<Vec3>, bool)> {
        let trial_seed = derive_seed(seed, &[k as u64]);
        let meas = simulate_measurements(scene, subset, target, derive_seed(trial_seed, &[0]))?;
        let est = taylor_ls_estimate(scene, subset, &meas, &init)?;
        if est.converged {
            return Ok((Some(est.location.to_vec() - truth), false));
        }
        let mut rng = rng_from_seed(derive_seed(trial_seed, &[1]));
        let jitter = Vec3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let retry_init = init.translate(&(jitter.normalize() * scene.d_s));
        let est = taylor_ls_estimate(scene, subset, &meas, &retry_init)?;
        Ok((est.converged.then(|| est.location.to_vec() - truth), true))
    });
    let (mut sum, mut sum_sq, mut bias) = (0.0, 0.0, Vec3::zeros());
    let (mut used, mut retried, mut excluded) = (0usize, 0usize, 0usize);
    for o in outcomes {
        let (err, was_retried) = o?;
        retried += was_retried as usize;
        match err {
            Some(e) => {
                let sq = e.norm_squared();
                sum += sq;
                sum_sq += sq * sq;
                bias += e;
                used += 1;
            }
            None => excluded += 1,
        }
    }
    if used == 0 {
        return Ok(MseReport {
            mse: f64::NAN,
            std_error: f64::NAN,
            bias: f64::NAN,
            n_used: 0,
            n_retried: retried,
            n_excluded: excluded,
        });
    }
    let n = used as f64;
    let mse = sum / n;
    let var = if used > 1 { (sum_sq / n - mse * mse).max(0.0) * n / (n - 1.0) } else { 0.0 };
    Ok(MseReport {
        mse,
        std_error: (var / n).sqrt(),
        bias: (bias / n).norm(),
        n_used: used,
        n_retried: retried,
        n_excluded: excluded,
    })
}
