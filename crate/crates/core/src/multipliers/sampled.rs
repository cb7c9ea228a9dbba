use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::sphere::{dot, normalize, tangent_basis};

/// Symbol known only at sample directions.
///
/// Evaluation interpolates to first order: by angle on the circle, by a
/// weighted local linear fit in tangent coordinates on higher spheres, and by
/// sign on `S^0`. At a sample direction the stored value is returned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTable", into = "RawTable")]
pub struct SampleTable {
    d: usize,
    dirs: Vec<Vec<f64>>,
    values: Vec<Complex64>,
    /// circle only: sample angles in ascending order, with indices
    angles: Vec<(f64, usize)>,
}

#[derive(Serialize, Deserialize)]
struct RawTable {
    d: usize,
    dirs: Vec<Vec<f64>>,
    values: Vec<Complex64>,
}

impl TryFrom<RawTable> for SampleTable {
    type Error = Error;
    fn try_from(raw: RawTable) -> Result<Self> {
        if raw.dirs.len() != raw.values.len() {
            return Err(Error::Format("sample directions and values differ in count".into()));
        }
        SampleTable::new(raw.d, raw.dirs.into_iter().zip(raw.values).collect())
    }
}

impl From<SampleTable> for RawTable {
    fn from(t: SampleTable) -> Self {
        RawTable {
            d: t.d,
            dirs: t.dirs,
            values: t.values,
        }
    }
}

const NEIGHBOURS_PER_DIM: usize = 3;

impl SampleTable {
    pub fn new(d: usize, samples: Vec<(Vec<f64>, Complex64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(domain("a sampled symbol needs at least two samples"));
        }
        let mut dirs = Vec::with_capacity(samples.len());
        let mut values = Vec::with_capacity(samples.len());
        for (dir, v) in samples {
            if dir.len() != d {
                return Err(domain("sample direction has the wrong dimension"));
            }
            dirs.push(normalize(&dir).ok_or_else(|| domain("zero sample direction"))?);
            values.push(v);
        }
        let mut angles = Vec::new();
        if d == 2 {
            angles = dirs
                .iter()
                .enumerate()
                .map(|(i, p)| (p[1].atan2(p[0]), i))
                .collect();
            angles.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        Ok(Self {
            d,
            dirs,
            values,
            angles,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn eval(&self, u: &[f64]) -> Complex64 {
        match self.d {
            1 => {
                let i = self
                    .dirs
                    .iter()
                    .position(|p| p[0].signum() == u[0].signum())
                    .unwrap_or(0);
                self.values[i]
            }
            2 => self.eval_circle(u[1].atan2(u[0])),
            _ => self.eval_local_linear(u),
        }
    }

    fn eval_circle(&self, phi: f64) -> Complex64 {
        use std::f64::consts::TAU;
        let n = self.angles.len();
        let pos = self.angles.partition_point(|a| a.0 <= phi);
        let (lo, hi) = if pos == 0 || pos == n {
            (n - 1, 0)
        } else {
            (pos - 1, pos)
        };
        let (a0, i0) = self.angles[lo];
        let (a1, i1) = self.angles[hi];
        let mut span = a1 - a0;
        let mut off = phi - a0;
        if span <= 0.0 {
            span += TAU;
        }
        if off < 0.0 {
            off += TAU;
        }
        let w = (off / span).clamp(0.0, 1.0);
        self.values[i0] * (1.0 - w) + self.values[i1] * w
    }

    fn eval_local_linear(&self, u: &[f64]) -> Complex64 {
        let mut near: Vec<(f64, usize)> = self
            .dirs
            .iter()
            .enumerate()
            .map(|(i, p)| (1.0 - dot(p, u), i))
            .collect();
        let k = (NEIGHBOURS_PER_DIM * self.d).min(near.len());
        near.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        near.truncate(k);
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if near[0].0 <= 1e-15 {
            return self.values[near[0].1];
        }
        let tangents = tangent_basis(u);
        let cols = tangents.len() + 1;
        let mut a = DMatrix::<f64>::zeros(k, cols);
        let mut b_re = DVector::<f64>::zeros(k);
        let mut b_im = DVector::<f64>::zeros(k);
        for (row, &(gap, i)) in near.iter().enumerate() {
            let w = 1.0 / (gap + 1e-12).sqrt();
            a[(row, 0)] = w;
            let diff: Vec<f64> = self.dirs[i].iter().zip(u).map(|(p, q)| p - q).collect();
            for (c, t) in tangents.iter().enumerate() {
                a[(row, c + 1)] = w * dot(&diff, t);
            }
            b_re[row] = w * self.values[i].re;
            b_im[row] = w * self.values[i].im;
        }
        let svd = a.svd(true, true);
        let re = svd.solve(&b_re, 1e-12).map(|x| x[0]);
        let im = svd.solve(&b_im, 1e-12).map(|x| x[0]);
        match (re, im) {
            (Ok(re), Ok(im)) => Complex64::new(re, im),
            _ => self.values[near[0].1],
        }
    }
}
