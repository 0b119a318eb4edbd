//! Sensor geometry, candidate target grid and per-sensor noise statistics.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SelectError};
use crate::exec::rng_from_seed;
use crate::linalg::Vec3;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vec(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn from_vec(v: &Vec3) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        (self.to_vec() - other.to_vec()).norm()
    }

    pub fn translate(&self, by: &Vec3) -> Self {
        Self::from_vec(&(self.to_vec() + by))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// One sensor's position and noise parameters.
///
/// `sigma_t` is the TOA-derived distance-error standard deviation at a
/// range of 1 m; the scene's `toa_distance_exponent` scales it with range.
/// `sigma_r` is the std dev of the log-distance error from RSS and `eta`
/// the within-sensor TOA/RSS correlation coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub position: Point3,
    pub sigma_t: f64,
    pub sigma_r: f64,
    #[serde(default)]
    pub eta: f64,
}

/// Per (sensor, evaluation point) quantities consumed by every CRLB kernel.
///
/// Fields are public so callers can override `epsilon` (e.g. to model a
/// TOA-only or RSS-only system) without going through a [`Scene`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorTargetGeometry {
    pub distance: f64,
    /// Unit line-of-sight vector pointing from the target to the sensor.
    pub los: Vec3,
    pub epsilon: f64,
}

/// Range-dependent noise std devs `(sigma_t, sigma_r)` of one measurement
/// pair, plus the information weight it contributes along its LOS.
pub fn information_weight(sigma_t: f64, sigma_r: f64, eta: f64, distance: f64) -> f64 {
    let it = 1.0 / sigma_t;
    let ir = 1.0 / sigma_r;
    (it * it + ir * ir / (distance * distance) - 2.0 * eta * it * ir / distance) / (1.0 - eta * eta)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseParams {
    /// Signal bandwidth W in Hz.
    pub bandwidth_hz: f64,
    /// Path-loss exponent xi.
    pub path_loss_exponent: f64,
    /// Shadowing variance sigma_S^2.
    pub shadowing_var: f64,
    /// Within-sensor TOA/RSS correlation.
    #[serde(default)]
    pub eta: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self { bandwidth_hz: 500e6, path_loss_exponent: 2.0, shadowing_var: 0.83, eta: 0.0 }
    }
}

/// TOA and RSS distance-error standard deviations at `distance` under the
/// SNR = d^-xi signal model: sigma_T^2 = c^2 / (8 pi SNR W^2) and
/// sigma_R^2 = (ln 10 / (10 xi))^2 sigma_S^2.
pub fn default_noise(params: &NoiseParams, distance: f64) -> Result<(f64, f64)> {
    let NoiseParams { bandwidth_hz: w, path_loss_exponent: xi, shadowing_var: s2, .. } = *params;
    if !(w > 0.0 && xi > 0.0 && s2 > 0.0 && distance > 0.0) {
        return Err(SelectError::InvalidArgument(format!(
            "noise parameters must be positive (W={w}, xi={xi}, sigma_s^2={s2}, d={distance})"
        )));
    }
    let snr = distance.powf(-xi);
    let var_t = SPEED_OF_LIGHT * SPEED_OF_LIGHT / (8.0 * PI * snr * w * w);
    let var_r = (std::f64::consts::LN_10 / (10.0 * xi)).powi(2) * s2;
    Ok((var_t.sqrt(), var_r.sqrt()))
}

/// Candidate target layout inside the shell `(d_s, d_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetLayout {
    Random,
    Even,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub sensors: Vec<SensorSpec>,
    pub sensor_center: Point3,
    pub d_s: f64,
    pub d_max: f64,
    pub targets: Vec<Point3>,
    /// sigma_T(d) = sigma_t * d^exponent. Zero means range-independent.
    #[serde(default)]
    pub toa_distance_exponent: f64,
}

impl Scene {
    /// Builds a scene and checks every invariant.
    pub fn new(
        sensors: Vec<SensorSpec>,
        d_s: f64,
        d_max: f64,
        targets: Vec<Point3>,
        toa_distance_exponent: f64,
    ) -> Result<Self> {
        let center = centroid(sensors.iter().map(|s| s.position));
        let scene = Scene { sensors, sensor_center: center, d_s, d_max, targets, toa_distance_exponent };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SelectError::InvalidScene(msg));
        if self.sensors.is_empty() {
            return bad("no sensors".into());
        }
        if !(self.d_s > 0.0 && self.d_max > self.d_s) {
            return bad(format!("need 0 < d_s < d_max (d_s={}, d_max={})", self.d_s, self.d_max));
        }
        if !self.toa_distance_exponent.is_finite() {
            return bad("toa_distance_exponent must be finite".into());
        }
        let slack = 1e-9 * self.d_s;
        let mean = centroid(self.sensors.iter().map(|s| s.position));
        if mean.distance(&self.sensor_center) > slack {
            return bad(format!("sensor_center {:?} is not the sensor mean {:?}", self.sensor_center, mean));
        }
        for (m, s) in self.sensors.iter().enumerate() {
            if !s.position.is_finite() {
                return bad(format!("sensor {m} has a non-finite position"));
            }
            if !(s.sigma_t > 0.0 && s.sigma_r > 0.0 && s.sigma_t.is_finite() && s.sigma_r.is_finite()) {
                return bad(format!("sensor {m} needs positive finite sigma_t and sigma_r"));
            }
            if !(0.0..1.0).contains(&s.eta) {
                return bad(format!("sensor {m} has eta={} outside [0,1)", s.eta));
            }
            if s.position.distance(&self.sensor_center) > self.d_s + slack {
                return bad(format!("sensor {m} lies outside the sensor space radius d_s"));
            }
        }
        for (g, t) in self.targets.iter().enumerate() {
            let r = t.distance(&self.sensor_center);
            if !t.is_finite() || r <= self.d_s || r > self.d_max * (1.0 + 1e-12) {
                return bad(format!("target {g} at range {r} is outside (d_s, d_max]"));
            }
        }
        Ok(())
    }

    pub fn sensor_count(&self) -> usize {
        self.sensors.len()
    }

    pub fn target_count(&self) -> usize {
        self.targets.len()
    }

    /// Range-resolved `(sigma_t, sigma_r)` for sensor `m` at `distance`.
    pub fn noise_at(&self, m: usize, distance: f64) -> (f64, f64) {
        let s = &self.sensors[m];
        (s.sigma_t * distance.powf(self.toa_distance_exponent), s.sigma_r)
    }

    /// Distance, LOS vector and information weight of sensor `m` seen from `target`.
    pub fn geometry(&self, m: usize, target: &Point3) -> Result<SensorTargetGeometry> {
        let s = self.sensors.get(m).ok_or_else(|| {
            SelectError::InvalidArgument(format!("sensor index {m} out of range ({} sensors)", self.sensors.len()))
        })?;
        let delta = s.position.to_vec() - target.to_vec();
        let distance = delta.norm();
        if !(distance > 0.0) {
            return Err(SelectError::DegenerateGeometry { sensor: m });
        }
        let (sigma_t, sigma_r) = self.noise_at(m, distance);
        Ok(SensorTargetGeometry {
            distance,
            los: delta / distance,
            epsilon: information_weight(sigma_t, sigma_r, s.eta, distance),
        })
    }

    /// Geometry of every sensor seen from `target`, indexed by sensor.
    pub fn geometries(&self, target: &Point3) -> Result<Vec<SensorTargetGeometry>> {
        (0..self.sensors.len()).map(|m| self.geometry(m, target)).collect()
    }

    /// `table[g][m]` for every grid target.
    pub fn geometry_table(&self) -> Result<Vec<Vec<SensorTargetGeometry>>> {
        self.targets.iter().map(|t| self.geometries(t)).collect()
    }

    /// Same scene with every noise std dev multiplied by `factor` (> 0).
    pub fn with_noise_scale(&self, factor: f64) -> Scene {
        assert!(factor > 0.0, "noise scale must be positive");
        let mut out = self.clone();
        for s in &mut out.sensors {
            s.sigma_t *= factor;
            s.sigma_r *= factor;
        }
        out
    }

    /// Same geometry with a different target list (re-validated).
    pub fn with_targets(&self, targets: Vec<Point3>) -> Result<Scene> {
        let mut out = self.clone();
        out.targets = targets;
        out.validate()?;
        Ok(out)
    }
}

fn centroid(points: impl Iterator<Item = Point3>) -> Point3 {
    let (sum, n) = points.fold((Vec3::zeros(), 0usize), |(acc, n), p| (acc + p.to_vec(), n + 1));
    if n == 0 {
        return Point3::ORIGIN;
    }
    Point3::from_vec(&(sum / n as f64))
}

fn sensor_specs(positions: Vec<Point3>, noise: &NoiseParams) -> Result<Vec<SensorSpec>> {
    let (sigma_t, sigma_r) = default_noise(noise, 1.0)?;
    Ok(positions
        .into_iter()
        .map(|position| SensorSpec { position, sigma_t, sigma_r, eta: noise.eta })
        .collect())
}

/// Generator block for randomized scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGenerator {
    pub seed: u64,
    pub m_max: usize,
    pub d_s: f64,
    pub d_max: f64,
    pub g: usize,
    pub mode: TargetLayout,
    #[serde(default)]
    pub noise: NoiseParams,
}

impl SceneGenerator {
    /// The default simulation setup: 14 sensors, d_s = 4 m, d_max = 14 m.
    pub fn reference_default(seed: u64, mode: TargetLayout) -> Self {
        Self { seed, m_max: 14, d_s: 4.0, d_max: 14.0, g: 152, mode, noise: NoiseParams::default() }
    }

    pub fn generate(&self) -> Result<Scene> {
        random_scene(self.seed, self.m_max, self.d_s, self.d_max, self.g, self.mode, &self.noise)
    }
}

/// Random scene: `m_max` sensors uniform in the ball of radius `d_s`,
/// recentred on their mean, plus `g` targets in the shell `(d_s, d_max]`.
pub fn random_scene(
    seed: u64,
    m_max: usize,
    d_s: f64,
    d_max: f64,
    g: usize,
    mode: TargetLayout,
    noise: &NoiseParams,
) -> Result<Scene> {
    if m_max < 4 || g < 1 || !(d_s > 0.0 && d_max > d_s) {
        return Err(SelectError::InvalidArgument(format!(
            "random_scene needs m_max >= 4, g >= 1, 0 < d_s < d_max (got {m_max}, {g}, {d_s}, {d_max})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut pts: Vec<Vec3> = (0..m_max).map(|_| uniform_in_ball(&mut rng) * d_s).collect();
    let mean = pts.iter().fold(Vec3::zeros(), |a, p| a + p) / m_max as f64;
    pts.iter_mut().for_each(|p| *p -= mean);
    let far = pts.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if far > d_s {
        // scaling about the mean keeps it at the origin
        let k = d_s / far * (1.0 - 1e-12);
        pts.iter_mut().for_each(|p| *p *= k);
    }
    let positions: Vec<Point3> = pts.iter().map(Point3::from_vec).collect();
    let center = centroid(positions.iter().copied());
    let targets = match mode {
        TargetLayout::Random => (0..g).map(|_| random_shell_point(&mut rng, &center, d_s, d_max)).collect(),
        TargetLayout::Even => even_shell_grid(&center, d_s, d_max, g),
    };
    let exponent = noise.path_loss_exponent / 2.0;
    Scene::new(sensor_specs(positions, noise)?, d_s, d_max, targets, exponent)
}

fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    let r: f64 = rng.random::<f64>().cbrt();
    uniform_direction(rng) * r
}

/// Point uniform in the volume of the shell `(inner, outer]` around `center`.
pub fn random_shell_point<R: Rng + ?Sized>(rng: &mut R, center: &Point3, inner: f64, outer: f64) -> Point3 {
    // 1 - U is in (0, 1], so the radius is never exactly `inner`
    let u = 1.0 - rng.random::<f64>();
    let r = (inner.powi(3) + u * (outer.powi(3) - inner.powi(3))).cbrt();
    center.translate(&(uniform_direction(rng) * r))
}

fn van_der_corput(mut k: usize) -> f64 {
    let (mut out, mut denom) = (0.0, 1.0);
    while k > 0 {
        denom *= 2.0;
        out += (k & 1) as f64 / denom;
        k >>= 1;
    }
    out
}

/// Low-discrepancy grid filling the shell `(inner, outer]`: Fibonacci-sphere
/// directions paired with volume-uniform radii from a base-2 van der Corput
/// sequence.
pub fn even_shell_grid(center: &Point3, inner: f64, outer: f64, g: usize) -> Vec<Point3> {
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    (0..g)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / g as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden_angle * k as f64;
            let dir = Vec3::new(rho * phi.cos(), rho * phi.sin(), z);
            let h = van_der_corput(k + 1);
            let r = (inner.powi(3) + h * (outer.powi(3) - inner.powi(3))).cbrt();
            center.translate(&(dir * r))
        })
        .collect()
}

/// Prism-shaped deployment: two regular `sides`-gons stacked along z with
/// every vertex at distance `d_s` from the centre, plus an even target grid.
pub fn prism_scene(sides: usize, half_height: f64, d_s: f64, d_max: f64, g: usize, noise: &NoiseParams) -> Result<Scene> {
    if sides < 3 || !(half_height > 0.0 && half_height < d_s) {
        return Err(SelectError::InvalidArgument(format!(
            "prism needs >= 3 sides and 0 < half_height < d_s (got {sides}, {half_height})"
        )));
    }
    let radius = (d_s * d_s - half_height * half_height).sqrt();
    let mut positions = Vec::with_capacity(2 * sides);
    for &z in &[half_height, -half_height] {
        for k in 0..sides {
            let a = 2.0 * PI * k as f64 / sides as f64;
            positions.push(Point3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let targets = even_shell_grid(&Point3::ORIGIN, d_s, d_max, g);
    Scene::new(sensor_specs(positions, noise)?, d_s, d_max, targets, noise.path_loss_exponent / 2.0)
}
