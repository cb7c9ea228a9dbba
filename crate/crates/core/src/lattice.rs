//! Periodic product lattices and sampled functions on them.
//!
//! A [`ProductLattice`] discretizes the unit product torus
//! `T^{d_1} x ... x T^{d_t}` with a power-of-two number of samples per axis.
//! Axes are ordered parameter by parameter; the last axis varies fastest.
//! All norms use the probability (Riemann sum) normalization, so the constant
//! function `1` has unit norm for every `p`, and the discrete Fourier transform
//! is unitary so that Parseval holds exactly on both sides.

use std::cell::RefCell;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, structural, Result};

pub const MIN_AXIS_LEN: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProductLattice {
    dims: Vec<usize>,
    n_axis: Vec<usize>,
}

impl ProductLattice {
    pub fn new(dims: Vec<usize>, n_axis: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(structural("a lattice needs at least one parameter"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(structural("every parameter needs dimension >= 1"));
        }
        let axes: usize = dims.iter().sum();
        if n_axis.len() != axes {
            return Err(structural(format!(
                "expected {axes} axis lengths, got {}",
                n_axis.len()
            )));
        }
        for &n in &n_axis {
            if !n.is_power_of_two() || n < MIN_AXIS_LEN {
                return Err(structural(format!(
                    "axis length {n} is not a power of two >= {MIN_AXIS_LEN}"
                )));
            }
        }
        Ok(Self { dims, n_axis })
    }

    /// Every axis gets `n` samples.
    pub fn uniform(dims: &[usize], n: usize) -> Result<Self> {
        let axes: usize = dims.iter().sum();
        Self::new(dims.to_vec(), vec![n; axes])
    }

    /// Number of parameters `t`.
    pub fn params(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_axis(&self) -> &[usize] {
        &self.n_axis
    }

    pub fn axis_count(&self) -> usize {
        self.n_axis.len()
    }

    pub fn len(&self) -> usize {
        self.n_axis.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Axes belonging to parameter `s` (zero based).
    pub fn axis_range(&self, s: usize) -> Range<usize> {
        let start: usize = self.dims[..s].iter().sum();
        start..start + self.dims[s]
    }

    /// Common axis length of parameter `s`, if all its axes agree.
    pub fn param_n(&self, s: usize) -> Option<usize> {
        let axes = &self.n_axis[self.axis_range(s)];
        let n = axes[0];
        axes.iter().all(|&m| m == n).then_some(n)
    }

    /// Number of lattice points carried by parameter `s`.
    pub fn param_len(&self, s: usize) -> usize {
        self.n_axis[self.axis_range(s)].iter().product()
    }

    /// Row-major strides, last axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.n_axis.len()];
        for a in (0..self.n_axis.len().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.n_axis[a + 1];
        }
        strides
    }

    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let mut coords = vec![0; self.n_axis.len()];
        for a in (0..self.n_axis.len()).rev() {
            coords[a] = idx % self.n_axis[a];
            idx /= self.n_axis[a];
        }
        coords
    }

    pub fn ravel(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.n_axis)
            .fold(0, |acc, (&c, &n)| acc * n + c)
    }

    /// Splits a flat index into the flat sub-index of every parameter block.
    pub fn param_indices(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.params()];
        let mut rest = idx;
        for s in (0..self.params()).rev() {
            let len = self.param_len(s);
            out[s] = rest % len;
            rest /= len;
        }
        out
    }

    /// Volume of one lattice cell; the torus has unit volume.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self != other {
            return Err(structural(format!(
                "lattice mismatch: {:?}/{:?} vs {:?}/{:?}",
                self.dims, self.n_axis, other.dims, other.n_axis
            )));
        }
        Ok(())
    }
}

/// Signed representative of frequency index `k` on an axis of length `n`.
/// Nyquist maps to `-n/2`.
pub fn signed_frequency(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Complex samples on a product lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    lattice: ProductLattice,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(lattice: ProductLattice, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != lattice.len() {
            return Err(structural(format!(
                "expected {} samples, got {}",
                lattice.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(domain(format!("sample {i} is not finite")));
        }
        Ok(Self { lattice, values })
    }

    pub(crate) fn from_parts(lattice: ProductLattice, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), lattice.len());
        Self { lattice, values }
    }

    pub fn zeros(lattice: &ProductLattice) -> Self {
        Self::from_parts(lattice.clone(), vec![Complex64::new(0.0, 0.0); lattice.len()])
    }

    pub fn constant(lattice: &ProductLattice, c: Complex64) -> Self {
        Self::from_parts(lattice.clone(), vec![c; lattice.len()])
    }

    /// Builds a function from its value at each multi-index.
    pub fn from_fn(lattice: &ProductLattice, mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        let values = (0..lattice.len())
            .map(|i| f(&lattice.unravel(i)))
            .collect();
        Self::from_parts(lattice.clone(), values)
    }

    pub fn from_real(lattice: &ProductLattice, values: &[f64]) -> Result<Self> {
        Self::new(
            lattice.clone(),
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn lattice(&self) -> &ProductLattice {
        &self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_parts(self.lattice.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|v| v * c)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.lattice.check_same(&other.lattice)?;
        Ok(Self::from_parts(
            self.lattice.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product, i.e. the action of the multiplication operator.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    pub fn norm2(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.values.len() as f64).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.lattice.check_same(&other.lattice)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(self, p)
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        inner_product(self, other)
    }

    /// Reflects the axes of parameter `s`: `f(.., x_s, ..) -> f(.., -x_s, ..)`.
    pub fn reflect_param(&self, s: usize) -> Self {
        let range = self.lattice.axis_range(s);
        let n = self.lattice.n_axis().to_vec();
        let lattice = self.lattice.clone();
        let values = (0..lattice.len())
            .map(|i| {
                let mut c = lattice.unravel(i);
                for a in range.clone() {
                    c[a] = (n[a] - c[a]) % n[a];
                }
                self.values[lattice.ravel(&c)]
            })
            .collect();
        Self::from_parts(lattice, values)
    }
}

/// `Lp` norm with respect to the probability measure on the torus.
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(domain(format!("lp_norm needs p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let count = f.values.len() as f64;
    if p == 2.0 {
        return Ok(f.norm2());
    }
    let sum: f64 = f.values.iter().map(|v| v.norm().powf(p)).sum();
    Ok((sum / count).powf(1.0 / p))
}

/// `<f, g> = \int f \bar g`, conjugate-linear in the second slot.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    f.lattice.check_same(&g.lattice)?;
    let s: Complex64 = f
        .values
        .iter()
        .zip(&g.values)
        .map(|(a, b)| a * b.conj())
        .sum();
    Ok(s / f.values.len() as f64)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unitary FFT over the given axes, in place.
pub(crate) fn fft_axes_in_place(
    lattice: &ProductLattice,
    data: &mut [Complex64],
    axes: Range<usize>,
    inverse: bool,
) {
    let n_axis = lattice.n_axis();
    let strides = lattice.strides();
    let mut scratch = Vec::new();
    let mut block = Vec::new();
    for a in axes {
        let n = n_axis[a];
        let stride = strides[a];
        let fft = plan(n, inverse);
        let norm = 1.0 / (n as f64).sqrt();
        if scratch.len() < fft.get_inplace_scratch_len() {
            scratch.resize(fft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
        }
        if stride == 1 {
            fft.process_with_scratch(data, &mut scratch);
        } else {
            // each block of n*stride values is an n x stride matrix whose
            // columns are the lines of this axis
            let span = n * stride;
            block.resize(span, Complex64::new(0.0, 0.0));
            for chunk in data.chunks_mut(span) {
                for r in 0..n {
                    for c in 0..stride {
                        block[c * n + r] = chunk[r * stride + c];
                    }
                }
                fft.process_with_scratch(&mut block, &mut scratch);
                for r in 0..n {
                    for c in 0..stride {
                        chunk[r * stride + c] = block[c * n + r];
                    }
                }
            }
        }
        for v in data.iter_mut() {
            *v *= norm;
        }
    }
}

/// Unitary forward transform over every axis.
pub fn fft_forward(f: &GridFunction) -> GridFunction {
    let mut out = f.clone();
    let axes = 0..f.lattice.axis_count();
    fft_axes_in_place(&f.lattice, &mut out.values, axes, false);
    out
}

/// Inverse of [`fft_forward`].
pub fn fft_inverse(f: &GridFunction) -> GridFunction {
    let mut out = f.clone();
    let axes = 0..f.lattice.axis_count();
    fft_axes_in_place(&f.lattice, &mut out.values, axes, true);
    out
}

/// Trigonometric interpolant of `f` sampled on the lattice refined `factor`
/// times per axis (zero padding of the spectrum). Products of refined
/// functions carry no aliasing when `factor >= 2`.
pub fn spectral_refine(f: &GridFunction, factor: usize) -> Result<GridFunction> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(domain(format!("refinement factor {factor} is not a power of two")));
    }
    let lat = &f.lattice;
    let fine = ProductLattice::new(
        lat.dims().to_vec(),
        lat.n_axis().iter().map(|n| n * factor).collect(),
    )?;
    let hat = fft_forward(f);
    let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
    let gain = (factor as f64).powi(lat.axis_count() as i32).sqrt();
    let mut coords = vec![0usize; lat.axis_count()];
    for (i, v) in hat.values.iter().enumerate() {
        let src = lat.unravel(i);
        for (a, (&k, &n)) in src.iter().zip(lat.n_axis()).enumerate() {
            let m = n * factor;
            coords[a] = (signed_frequency(k, n) + m as i64) as usize % m;
        }
        out[fine.ravel(&coords)] = v * gain;
    }
    Ok(fft_inverse(&GridFunction::from_parts(fine, out)))
}
