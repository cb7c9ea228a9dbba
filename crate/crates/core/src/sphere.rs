//! Sample sets on `S^{d-1}` with tangent bases.
//!
//! Every set is closed under `x -> -x`: the circle uses `M` uniform angles
//! with `M` a multiple of 4, the 2-sphere uses a Fibonacci lattice on the
//! upper hemisphere together with its antipodes.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

pub const MIN_CIRCLE_SAMPLES: usize = 256;
pub const MIN_SPHERE_SAMPLES: usize = 1024;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SphereSamples {
    pub d: usize,
    pub points: Vec<Vec<f64>>,
    /// orthonormal basis of the tangent space at each point
    pub tangents: Vec<Vec<Vec<f64>>>,
    /// largest nearest-neighbour geodesic distance
    pub mesh: f64,
    /// index of `-x` for each sample
    pub antipode: Vec<usize>,
}

impl SphereSamples {
    /// Default set: 256 angles on the circle, 1024 points on the 2-sphere.
    pub fn default_for(d: usize) -> Result<Self> {
        match d {
            1 => Self::new(1, 2),
            2 => Self::new(2, MIN_CIRCLE_SAMPLES),
            3 => Self::new(3, MIN_SPHERE_SAMPLES),
            _ => Err(domain(format!("no sphere sampling for d = {d}"))),
        }
    }

    pub fn new(d: usize, count: usize) -> Result<Self> {
        let (points, antipode) = match d {
            1 => (vec![vec![1.0], vec![-1.0]], vec![1, 0]),
            2 => {
                if count < 4 || count % 4 != 0 {
                    return Err(domain("circle sample count must be a positive multiple of 4"));
                }
                let pts = (0..count)
                    .map(|k| {
                        let a = std::f64::consts::TAU * k as f64 / count as f64;
                        vec![a.cos(), a.sin()]
                    })
                    .collect();
                let anti = (0..count).map(|k| (k + count / 2) % count).collect();
                (pts, anti)
            }
            3 => {
                if count < 2 || count % 2 != 0 {
                    return Err(domain("sphere sample count must be even"));
                }
                let half = count / 2;
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                let mut pts: Vec<Vec<f64>> = (0..half)
                    .map(|i| {
                        // z strictly inside (0, 1] so no point lies on the equator twice
                        let z = 1.0 - (i as f64 + 0.5) / half as f64;
                        let r = (1.0 - z * z).sqrt();
                        let a = golden * i as f64;
                        vec![r * a.cos(), r * a.sin(), z]
                    })
                    .collect();
                let neg: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| -v).collect()).collect();
                pts.extend(neg);
                let anti = (0..count).map(|k| (k + half) % count).collect();
                (pts, anti)
            }
            _ => return Err(domain(format!("no sphere sampling for d = {d}"))),
        };
        let tangents = points.iter().map(|p| tangent_basis(p)).collect();
        let mesh = mesh(&points);
        Ok(Self {
            d,
            points,
            tangents,
            mesh,
            antipode,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Point at geodesic distance `h` from sample `i` along tangent `v`.
    pub fn geodesic(&self, i: usize, v: usize, h: f64) -> Vec<f64> {
        geodesic(&self.points[i], &self.tangents[i][v], h)
    }
}

pub fn geodesic(x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let (s, c) = h.sin_cos();
    x.iter().zip(v).map(|(a, b)| c * a + s * b).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    (n > 0.0 && n.is_finite()).then(|| a.iter().map(|v| v / n).collect())
}

/// Orthonormal basis of `x^perp`, by Gram–Schmidt on the coordinate axes.
pub fn tangent_basis(x: &[f64]) -> Vec<Vec<f64>> {
    orthonormal_complement(&[x.to_vec()])
}

/// Orthonormal basis of the complement of the span of orthonormal `given`.
pub fn orthonormal_complement(given: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = given.first().map_or(0, Vec::len);
    let mut basis: Vec<Vec<f64>> = given.to_vec();
    let mut out = Vec::new();
    // axes least aligned with the given vectors first, for stability
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&a, &b| {
        let wa: f64 = given.iter().map(|g| g[a].abs()).sum();
        let wb: f64 = given.iter().map(|g| g[b].abs()).sum();
        wa.total_cmp(&wb).then(a.cmp(&b))
    });
    for a in axes {
        if basis.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[a] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= p * bi;
                }
            }
        }
        if let Some(u) = normalize(&v).filter(|_| norm(&v) > 1e-6) {
            basis.push(u.clone());
            out.push(u);
        }
    }
    out
}

fn mesh(points: &[Vec<f64>]) -> f64 {
    if points.len() < 2 {
        return std::f64::consts::PI;
    }
    let mut worst: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        let best = points
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, q)| dot(p, q))
            .fold(-1.0f64, f64::max);
        worst = worst.max(best.clamp(-1.0, 1.0).acos());
    }
    worst
}
