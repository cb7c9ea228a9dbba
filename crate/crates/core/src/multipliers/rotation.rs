use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Element of `SO(d)`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    pub d: usize,
    pub matrix: Vec<f64>,
}

impl Rotation {
    pub fn new(d: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != d * d || d == 0 {
            return Err(domain("rotation matrix has the wrong size"));
        }
        let m = DMatrix::from_row_slice(d, d, &matrix);
        let gram = m.transpose() * &m;
        let off = (gram - DMatrix::<f64>::identity(d, d)).amax();
        if !(off <= 1e-12) {
            return Err(domain(format!("matrix is not orthogonal (deviation {off:e})")));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > 1e-12 {
            return Err(domain(format!("rotation must have determinant 1, got {det}")));
        }
        Ok(Self { d, matrix })
    }

    pub fn identity(d: usize) -> Self {
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            matrix[i * d + i] = 1.0;
        }
        Self { d, matrix }
    }

    /// Rotation by `angle` in the plane of axes `(i, j)`, from `e_i` towards `e_j`.
    pub fn planar(d: usize, i: usize, j: usize, angle: f64) -> Result<Self> {
        if i >= d || j >= d || i == j {
            return Err(domain("planar rotation needs two distinct axes"));
        }
        let mut r = Self::identity(d);
        let (s, c) = angle.sin_cos();
        r.matrix[i * d + i] = c;
        r.matrix[j * d + j] = c;
        r.matrix[j * d + i] = s;
        r.matrix[i * d + j] = -s;
        Ok(r)
    }

    /// Haar-uniform sample: QR of a Gaussian matrix with the sign of `R`'s
    /// diagonal folded into `Q`, then one column flipped if needed.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        if d == 1 {
            return Self::identity(1);
        }
        let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        if q.determinant() < 0.0 {
            q.column_mut(0).neg_mut();
        }
        let mut matrix = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                matrix.push(q[(i, j)]);
            }
        }
        Self { d, matrix }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.matrix[i * self.d + j] * x[j]).sum())
            .collect()
    }

    /// `rho^{-1} x = rho^T x`.
    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| self.matrix[j * self.d + i] * x[j]).sum())
            .collect()
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        let d = self.d;
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                matrix[i * d + j] = (0..d).map(|k| self.matrix[i * d + k] * other.matrix[k * d + j]).sum();
            }
        }
        Rotation { d, matrix }
    }
}
