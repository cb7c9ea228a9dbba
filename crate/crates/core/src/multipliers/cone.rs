use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::sphere::{dot, norm, normalize, orthonormal_complement, SphereSamples};

use super::rotation::Rotation;

/// Smoothstep of order `m`: `S(0) = 0`, `S(1) = 1`, derivatives `1..=m` vanish
/// at both ends and `S(1 - x) = 1 - S(x)`. Clamped outside `[0, 1]`.
pub fn smoothstep(m: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let m = m as u64;
    let mut sum = 0.0;
    let mut binom = 1.0; // C(m + k, k)
    let mut pow = 1.0;
    for k in 0..=m {
        sum += binom * pow;
        binom = binom * (m + k + 1) as f64 / (k + 1) as f64;
        pow *= 1.0 - x;
    }
    x.powi(m as i32 + 1) * sum
}

/// Cone `{theta : theta.xi > 0, theta^perp in (theta.xi) Q}` where `Q` is the
/// cube of side `side` in `xi^perp` aligned with `axes`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub direction: Vec<f64>,
    pub axes: Vec<Vec<f64>>,
    pub side: f64,
}

impl Cone {
    /// Cone with aperture axes obtained from the coordinate axes.
    pub fn new(direction: &[f64], side: f64) -> Result<Self> {
        let dir = normalize(direction).ok_or_else(|| domain("cone direction must be nonzero"))?;
        let axes = orthonormal_complement(std::slice::from_ref(&dir));
        Self::with_axes(dir, axes, side)
    }

    pub fn with_axes(direction: Vec<f64>, axes: Vec<Vec<f64>>, side: f64) -> Result<Self> {
        let d = direction.len();
        if d == 0 || (norm(&direction) - 1.0).abs() > 1e-14 {
            return Err(domain("cone direction must be a unit vector"));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(domain("cone aperture side must be positive"));
        }
        if axes.len() != d - 1 {
            return Err(domain("cone needs d - 1 aperture axes"));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.len() != d || dot(a, &direction).abs() > 1e-12 {
                return Err(domain("aperture axes must be orthogonal to the direction"));
            }
            for (j, b) in axes.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(a, b) - target).abs() > 1e-12 {
                    return Err(domain("aperture axes must be orthonormal"));
                }
            }
        }
        Ok(Self {
            direction,
            axes,
            side,
        })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    /// The dilated cone `lambda C`: same direction, aperture scaled by `lambda`.
    pub fn dilate(&self, lambda: f64) -> Self {
        Self {
            side: self.side * lambda,
            ..self.clone()
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            direction: self.direction.iter().map(|v| -v).collect(),
            ..self.clone()
        }
    }

    pub fn rotated(&self, rho: &Rotation) -> Self {
        Self {
            direction: rho.apply(&self.direction),
            axes: self.axes.iter().map(|a| rho.apply(a)).collect(),
            side: self.side,
        }
    }

    /// Membership of any nonzero vector (not necessarily unit).
    pub fn contains(&self, xi: &[f64]) -> bool {
        let t = dot(xi, &self.direction);
        if !(t > 0.0) {
            return false;
        }
        let half = t * self.side / 2.0;
        self.axes.iter().all(|e| dot(xi, e).abs() <= half)
    }

    /// Largest normalized aperture coordinate `|xi.e_j| / (xi.dir side/2)`,
    /// `None` when `xi.dir <= 0`.
    pub fn aperture_ratios(&self, xi: &[f64]) -> Option<Vec<f64>> {
        let t = dot(xi, &self.direction);
        (t > 0.0).then(|| {
            let half = t * self.side / 2.0;
            self.axes.iter().map(|e| dot(xi, e).abs() / half).collect()
        })
    }

    /// The `2^{d-1}` extreme rays `dir + (side/2) sum +-e_j`, normalized.
    pub fn vertex_rays(&self) -> Vec<Vec<f64>> {
        let k = self.axes.len();
        (0..1usize << k)
            .map(|mask| {
                let mut v = self.direction.clone();
                for (j, e) in self.axes.iter().enumerate() {
                    let sign = if mask >> j & 1 == 1 { -1.0 } else { 1.0 };
                    for (vi, ei) in v.iter_mut().zip(e) {
                        *vi += sign * self.side / 2.0 * ei;
                    }
                }
                normalize(&v).unwrap()
            })
            .collect()
    }
}

/// Separable smoothed cone value: `1` on `D`, `0` outside `(1 + tau) D`.
pub fn smoothed_cone_value(cone: &Cone, tau: f64, order: u32, xi: &[f64]) -> f64 {
    match cone.aperture_ratios(xi) {
        None => 0.0,
        Some(r) => r
            .iter()
            .map(|&r| 1.0 - smoothstep(order, (r - 1.0) / tau))
            .product(),
    }
}

/// Inner cone `D`, outer cone `C`, smoothing margin and smoothness order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConePair {
    pub inner: Cone,
    pub outer: Cone,
    pub tau: f64,
    pub order: u32,
}

impl ConePair {
    pub fn new(inner: Cone, outer: Cone, tau: f64, order: u32) -> Result<Self> {
        if inner.dim() != outer.dim() {
            return Err(domain("cone pair dimensions differ"));
        }
        if !(tau > 0.0) {
            return Err(domain("smoothing margin must be positive"));
        }
        if order < 1 {
            return Err(domain("smoothness order must be at least 1"));
        }
        Ok(Self {
            inner,
            outer,
            tau,
            order,
        })
    }

    /// Sampled inclusion `D subset C`: every sample in `D` lies in `C`, and
    /// so do the extreme rays of `D`.
    pub fn inner_in_outer(&self, samples: &SphereSamples) -> bool {
        samples
            .points
            .iter()
            .filter(|p| self.inner.contains(p))
            .chain(self.inner.vertex_rays().iter())
            .all(|p| self.outer.contains(p))
    }
}

/// The target `h_{C,D}`: `1` on `C`, `0` where `x.xi_C <= 0` or `x.xi_D <= 0`.
///
/// `h = g_C * k_D`. `g_C` is a product over aperture axes of
/// `1 - S((atan t_j - atan h) / (pi/2 - atan h))` with `t_j = |x.e_j| / x.xi_C`
/// and `h` the half side of `C`, so it is `1` on `C` and falls to `0` at
/// `xi_C^perp`. `k_D = S(asin(x.xi_D) / alpha)`, where `alpha` is the smallest
/// elevation above `xi_D^perp` of an extreme ray of `C`; hence `k_D = 1` on `C`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeTarget {
    pub pair: ConePair,
    pub alpha: f64,
}

impl ConeTarget {
    pub fn new(pair: ConePair) -> Result<Self> {
        let alpha = pair
            .outer
            .vertex_rays()
            .iter()
            .map(|v| dot(v, &pair.inner.direction).clamp(-1.0, 1.0).asin())
            .fold(f64::INFINITY, f64::min);
        let alpha = if pair.outer.dim() == 1 {
            dot(&pair.outer.direction, &pair.inner.direction).asin()
        } else {
            alpha
        };
        if !(alpha > 0.0) {
            return Err(domain(
                "outer cone is not inside the open half space of the inner direction",
            ));
        }
        Ok(Self { pair, alpha })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let c = &self.pair.outer;
        let m = self.pair.order;
        let s = dot(x, &c.direction);
        if !(s > 0.0) {
            return 0.0;
        }
        let a0 = (c.side / 2.0).atan();
        let span = std::f64::consts::FRAC_PI_2 - a0;
        let mut g = 1.0;
        for e in &c.axes {
            let a = (dot(x, e).abs() / s).atan();
            g *= 1.0 - smoothstep(m, (a - a0) / span);
        }
        let z = dot(x, &self.pair.inner.direction).clamp(-1.0, 1.0);
        let k = if z <= 0.0 { 0.0 } else { smoothstep(m, z.asin() / self.alpha) };
        g * k
    }
}
