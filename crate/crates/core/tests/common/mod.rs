//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the crate's numerical kernels.
#![allow(dead_code)]

use sensel::scene::{Point3, Scene, SceneGenerator, TargetLayout};

/// Information weight written out directly from the TOA/RSS noise model.
pub fn epsilon_oracle(sigma_t: f64, sigma_r: f64, eta: f64, d: f64) -> f64 {
    let a = 1.0 / (sigma_t * sigma_t);
    let b = 1.0 / (sigma_r * sigma_r * d * d);
    let c = 2.0 * eta / (sigma_t * sigma_r * d);
    (a + b - c) / (1.0 - eta * eta)
}

/// FIM accumulated entry by entry with scalar loops.
pub fn fim_oracle(scene: &Scene, subset: &[usize], target: &Point3) -> [[f64; 3]; 3] {
    let mut j = [[0.0; 3]; 3];
    let t = [target.x, target.y, target.z];
    for &m in subset {
        let s = &scene.sensors[m];
        let p = [s.position.x, s.position.y, s.position.z];
        let diff = [p[0] - t[0], p[1] - t[1], p[2] - t[2]];
        let d = (diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]).sqrt();
        let st = s.sigma_t * d.powf(scene.toa_distance_exponent);
        let eps = epsilon_oracle(st, s.sigma_r, s.eta, d);
        for r in 0..3 {
            for c in 0..3 {
                j[r][c] += eps * diff[r] * diff[c] / (d * d);
            }
        }
    }
    j
}

/// Gauss-Jordan inverse with partial pivoting; `None` when a pivot vanishes
/// relative to the matrix scale.
pub fn inverse_oracle(a: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut m = [[0.0; 6]; 3];
    for r in 0..3 {
        m[r][..3].copy_from_slice(&a[r]);
        m[r][3 + r] = 1.0;
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() <= 1e-12 * scale {
            return None;
        }
        m.swap(col, piv);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..3 {
            if r != col {
                let f = m[r][col];
                for k in 0..6 {
                    m[r][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        inv[r].copy_from_slice(&m[r][3..]);
    }
    Some(inv)
}

pub fn trace_inverse_oracle(scene: &Scene, subset: &[usize], target: &Point3) -> f64 {
    match inverse_oracle(fim_oracle(scene, subset, target)) {
        Some(inv) => inv[0][0] + inv[1][1] + inv[2][2],
        None => f64::INFINITY,
    }
}

/// All size-`k` subsets of `0..n` in lexicographic order, by recursion.
pub fn all_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Numerical rank of the Gram matrix of the LOS vectors (0..=3).
pub fn los_rank(scene: &Scene, subset: &[usize], target: &Point3) -> usize {
    let mut rows: Vec<[f64; 3]> = subset
        .iter()
        .map(|&m| {
            let p = scene.sensors[m].position;
            let v = [p.x - target.x, p.y - target.y, p.z - target.z];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        })
        .collect();
    let mut rank = 0;
    for col in 0..3 {
        let Some(piv) = (rank..rows.len()).max_by(|&a, &b| rows[a][col].abs().total_cmp(&rows[b][col].abs())) else {
            break;
        };
        if rows[piv][col].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, piv);
        for r in 0..rows.len() {
            if r != rank {
                let f = rows[r][col] / rows[rank][col];
                for c in 0..3 {
                    rows[r][c] -= f * rows[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

/// Random scene in the default 14-sensor setup.
pub fn default_scene(seed: u64, g: usize) -> Scene {
    SceneGenerator { g, ..SceneGenerator::reference_default(seed, TargetLayout::Random) }.generate().unwrap()
}

pub fn scene_with(seed: u64, m_max: usize, g: usize, mode: TargetLayout) -> Scene {
    SceneGenerator { m_max, g, ..SceneGenerator::reference_default(seed, mode) }.generate().unwrap()
}
