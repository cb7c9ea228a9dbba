//! Constructive approximation of a target by polynomials in family members.
//!
//! Monomials are admitted degree by degree: every kept monomial of degree
//! `k - 1` is multiplied by every non-constant member, and a product is kept
//! when its design column is not (numerically) in the span of the columns
//! already kept. For each degree cap the weighted least-squares problem over
//! values and finite-difference tangential derivatives is solved by SVD.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::multipliers::{polynomial_symbol, Monomial, MultiplierSymbol};

use super::SymbolFamily;

/// Geodesic step for first-order difference quotients.
pub const FD_STEP: f64 = 1e-4;
/// Geodesic step for second-order difference quotients.
pub const FD_STEP_SECOND: f64 = 1e-3;

const INDEPENDENCE_TOL: f64 = 1e-9;
const RCOND: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SymbolPolynomial {
    pub members: Vec<MultiplierSymbol>,
    pub terms: Vec<Monomial>,
    pub degree: usize,
    pub symbol: MultiplierSymbol,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeReport {
    pub degree: usize,
    pub monomials: usize,
    /// sup error of the order-0, 1, ... derivatives
    pub order_errors: Vec<f64>,
    /// max over orders
    pub error: f64,
    pub ridge: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Approximation {
    pub polynomial: SymbolPolynomial,
    /// best C^m sup error over all degree caps up to the requested one
    pub error: f64,
    pub order_errors: Vec<f64>,
    pub ridge: Option<f64>,
    pub history: Vec<DegreeReport>,
}

/// Where each design row is evaluated.
struct Stencil {
    points: Vec<Vec<f64>>,
    base: usize,
    /// (plus, minus) point indices for first-order rows
    first: Vec<(usize, usize, usize)>,
    /// (center, plus, minus) point indices for second-order rows
    second: Vec<(usize, usize, usize)>,
}

impl Stencil {
    fn new(family: &SymbolFamily, m: usize) -> Self {
        let s = family.samples();
        let mut points = s.points.clone();
        let base = points.len();
        let mut first = Vec::new();
        let mut second = Vec::new();
        for i in 0..base {
            for t in 0..s.tangents[i].len() {
                if m >= 1 {
                    points.push(s.geodesic(i, t, FD_STEP));
                    points.push(s.geodesic(i, t, -FD_STEP));
                    first.push((i, points.len() - 2, points.len() - 1));
                }
                if m >= 2 {
                    points.push(s.geodesic(i, t, FD_STEP_SECOND));
                    points.push(s.geodesic(i, t, -FD_STEP_SECOND));
                    second.push((i, points.len() - 2, points.len() - 1));
                }
            }
        }
        Self {
            points,
            base,
            first,
            second,
        }
    }

    fn rows(&self) -> usize {
        self.base + self.first.len() + self.second.len()
    }

    /// Values, first and second difference quotients of a point vector.
    fn design(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.rows());
        out.extend_from_slice(&v[..self.base]);
        for &(_, p, q) in &self.first {
            out.push((v[p] - v[q]) / (2.0 * FD_STEP));
        }
        let h2 = FD_STEP_SECOND * FD_STEP_SECOND;
        for &(c, p, q) in &self.second {
            out.push((v[p] - 2.0 * v[c] + v[q]) / h2);
        }
        out
    }

    fn order_errors(&self, residual: &[Complex64], m: usize) -> Vec<f64> {
        let sup = |r: &[Complex64]| r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let b = self.base;
        let f = b + self.first.len();
        let mut out = vec![sup(&residual[..b])];
        if m >= 1 {
            out.push(sup(&residual[b..f]));
        }
        if m >= 2 {
            out.push(sup(&residual[f..]));
        }
        out
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

struct Candidate {
    exponents: Vec<u32>,
    /// largest member index used, to enumerate multisets once
    last: usize,
    at_points: Vec<Complex64>,
    column: Vec<Complex64>,
}

/// Least-squares approximation of `target` by polynomials of total degree at
/// most `degree` in the members of a closed family, fitting values and the
/// tangential derivatives of orders `1..=m` (`m <= 2`).
pub fn approximate_symbol(
    family: &SymbolFamily,
    target: &MultiplierSymbol,
    degree: usize,
    m: usize,
) -> Result<Approximation> {
    if !family.is_closed() {
        return Err(Error::Precondition("family must be closed (see close_family)".into()));
    }
    if m > 2 {
        return Err(Error::Precondition(format!("derivative order {m} exceeds 2")));
    }
    if target.dim() != family.dim() {
        return Err(Error::Structural("target dimension differs from family".into()));
    }
    let stencil = Stencil::new(family, m);
    let members = family.members();
    let at_points: Vec<Vec<Complex64>> = members
        .iter()
        .map(|s| stencil.points.iter().map(|p| s.eval_unit(p)).collect())
        .collect();
    let one = Complex64::new(1.0, 0.0);
    let constant: Vec<bool> = at_points.iter().map(|v| v.iter().all(|&z| z == one)).collect();
    let y = stencil.design(&target_at(target, &stencil.points));

    let mut kept: Vec<Candidate> = Vec::new();
    let mut ortho: Vec<Vec<Complex64>> = Vec::new();
    let mut admit = |c: Candidate, kept: &mut Vec<Candidate>| {
        let scale = norm(&c.column);
        let mut r = c.column.clone();
        for _ in 0..2 {
            for q in ortho.iter() {
                let p = inner(q, &r);
                for (ri, qi) in r.iter_mut().zip(q) {
                    *ri -= p * qi;
                }
            }
        }
        let rn = norm(&r);
        if scale > 0.0 && rn > INDEPENDENCE_TOL * scale {
            ortho.push(r.iter().map(|z| z / rn).collect());
            kept.push(c);
            true
        } else {
            false
        }
    };

    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Option<f64>, Vec<Monomial>, usize)> = None;
    let mut prev_start = 0;
    for k in 0..=degree {
        let start = kept.len();
        if k == 0 {
            let at = vec![one; stencil.points.len()];
            let column = stencil.design(&at);
            admit(
                Candidate {
                    exponents: vec![0; members.len()],
                    last: 0,
                    at_points: at,
                    column,
                },
                &mut kept,
            );
        } else {
            for idx in prev_start..start {
                for (j, vals) in at_points.iter().enumerate() {
                    if constant[j] || (k > 1 && j < kept[idx].last) {
                        continue;
                    }
                    let at: Vec<Complex64> =
                        kept[idx].at_points.iter().zip(vals).map(|(a, b)| a * b).collect();
                    let mut exponents = kept[idx].exponents.clone();
                    exponents[j] += 1;
                    let column = stencil.design(&at);
                    admit(
                        Candidate {
                            exponents,
                            last: j,
                            at_points: at,
                            column,
                        },
                        &mut kept,
                    );
                }
            }
        }
        prev_start = start;

        let (coeffs, ridge) = solve(&kept, &y);
        let mut fit = vec![Complex64::new(0.0, 0.0); stencil.rows()];
        for (c, cand) in coeffs.iter().zip(&kept) {
            for (f, col) in fit.iter_mut().zip(&cand.column) {
                *f += c * col;
            }
        }
        let residual: Vec<Complex64> = fit.iter().zip(&y).map(|(a, b)| a - b).collect();
        let order_errors = stencil.order_errors(&residual, m);
        let error = order_errors.iter().cloned().fold(0.0, f64::max);
        history.push(DegreeReport {
            degree: k,
            monomials: kept.len(),
            order_errors: order_errors.clone(),
            error,
            ridge,
        });
        if best.as_ref().is_none_or(|b| error < b.0) {
            let terms = kept
                .iter()
                .zip(&coeffs)
                .map(|(c, &coeff)| Monomial {
                    exponents: c.exponents.clone(),
                    coeff,
                })
                .collect();
            best = Some((error, order_errors, ridge, terms, k));
        }
    }
    let (error, order_errors, ridge, terms, deg) = best.expect("degree 0 always runs");
    let symbol = polynomial_symbol(members, terms.clone())?;
    Ok(Approximation {
        polynomial: SymbolPolynomial {
            members: members.to_vec(),
            terms,
            degree: deg,
            symbol,
        },
        error,
        order_errors,
        ridge,
        history,
    })
}

fn target_at(target: &MultiplierSymbol, points: &[Vec<f64>]) -> Vec<Complex64> {
    points.iter().map(|p| target.eval_unit(p)).collect()
}

/// SVD least squares; a ridge term is added when the design is numerically
/// rank deficient.
fn solve(kept: &[Candidate], y: &[Complex64]) -> (Vec<Complex64>, Option<f64>) {
    let rows = y.len();
    let cols = kept.len();
    let a = DMatrix::<Complex64>::from_fn(rows, cols, |r, c| kept[c].column[r]);
    let b = DVector::<Complex64>::from_column_slice(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let ridge = (smax == 0.0 || smin / smax < RCOND).then(|| (RCOND * smax).powi(2));
    let u = svd.u.as_ref().expect("requested");
    let v_t = svd.v_t.as_ref().expect("requested");
    let utb = u.adjoint() * &b;
    let lambda = ridge.unwrap_or(0.0);
    let mut z = DVector::<Complex64>::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        let denom = s * s + lambda;
        if denom > 0.0 {
            z[i] = utb[i] * (s / denom);
        }
    }
    let x = v_t.adjoint() * z;
    (x.iter().cloned().collect(), ridge)
}
