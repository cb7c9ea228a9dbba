//! Families of symbols on one parameter, the three criterion checks, closure
//! under conjugation and the cone target `h_{C,D}`.
//!
//! Checks look only at the sample set; every verdict carries the margin that
//! decided it and, on failure, a deterministic witness: the worst offender,
//! then the lexicographically first sample (pair). Margins are compared after
//! rounding to multiples of `1e-12`, so round-off does not pick the witness.

mod approx;

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, structural, Result};
use crate::multipliers::{identity_symbol, ConePair, ConeTarget, MultiplierSymbol, SymbolRule};
use crate::sphere::{dot, SphereSamples};

pub use approx::{approximate_symbol, Approximation, DegreeReport, SymbolPolynomial, FD_STEP, FD_STEP_SECOND};

/// Finite-difference step along geodesics for the tangential check.
pub const TANGENT_STEP: f64 = 1e-4;

const TIE_QUANTUM: f64 = 1e-12;

fn quantize(x: f64) -> i64 {
    (x / TIE_QUANTUM).round() as i64
}

#[derive(Clone, Debug)]
pub struct SymbolFamily {
    param: usize,
    d: usize,
    members: Vec<MultiplierSymbol>,
    samples: Arc<SphereSamples>,
    /// `values[k][i]`: member `k` at sample `i`
    values: Vec<Vec<Complex64>>,
}

impl SymbolFamily {
    pub fn new(
        param: usize,
        d: usize,
        members: Vec<MultiplierSymbol>,
        samples: Arc<SphereSamples>,
    ) -> Result<Self> {
        if samples.d != d {
            return Err(structural("sample set dimension differs from family dimension"));
        }
        if samples.is_empty() {
            return Err(domain("sample set is empty"));
        }
        if let Some(m) = members.iter().find(|m| m.dim() != d) {
            return Err(structural(format!(
                "member {m:?} has dimension {} in a family of dimension {d}",
                m.dim()
            )));
        }
        let values = members.iter().map(|m| m.sample(&samples)).collect();
        Ok(Self {
            param,
            d,
            members,
            samples,
            values,
        })
    }

    /// Family on the default sample set for `d`.
    pub fn with_default_samples(param: usize, d: usize, members: Vec<MultiplierSymbol>) -> Result<Self> {
        Self::new(param, d, members, Arc::new(SphereSamples::default_for(d)?))
    }

    pub fn param(&self) -> usize {
        self.param
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn members(&self) -> &[MultiplierSymbol] {
        &self.members
    }

    pub fn samples(&self) -> &Arc<SphereSamples> {
        &self.samples
    }

    pub fn member_values(&self, k: usize) -> &[Complex64] {
        &self.values[k]
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Contains a member equal to `1` and, for every member, its conjugate
    /// (exact comparison of sample values).
    pub fn is_closed(&self) -> bool {
        let has_one = self
            .values
            .iter()
            .any(|v| v.iter().all(|&z| z == Complex64::new(1.0, 0.0)));
        has_one
            && self.values.iter().all(|v| {
                let c: Vec<Complex64> = v.iter().map(|z| z.conj()).collect();
                self.values.iter().any(|w| *w == c)
            })
    }
}

/// Witness of a failed check.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Witness {
    Pair {
        i: usize,
        j: usize,
        x: Vec<f64>,
        y: Vec<f64>,
        separation: f64,
    },
    Point {
        i: usize,
        x: Vec<f64>,
        sum: f64,
    },
    Tangent {
        i: usize,
        x: Vec<f64>,
        tangent: usize,
        v: Vec<f64>,
        derivative: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: &'static str,
    pub pass: bool,
    pub tol: f64,
    /// smallest separation / sum / derivative over the sample set
    pub margin: f64,
    pub witness: Option<Witness>,
}

/// Full point separation on the sampled sphere.
///
/// A pair `x != y` is separated when some member differs by more than `tol`.
/// On failure the witness is the unseparated pair that lies farthest apart.
pub fn check_point_separation(family: &SymbolFamily, tol: f64) -> CheckResult {
    let s = &family.samples;
    let n = s.len();
    let mut margin = f64::INFINITY;
    // (quantized distance, i, j) of the best witness so far
    let mut best: Option<(i64, usize, usize, f64)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let sep = family
                .values
                .iter()
                .map(|v| (v[i] - v[j]).norm())
                .fold(0.0, f64::max);
            margin = margin.min(sep);
            if sep <= tol {
                let dist: f64 = s.points[i]
                    .iter()
                    .zip(&s.points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let q = quantize(dist);
                if best.is_none_or(|(bq, ..)| q > bq) {
                    best = Some((q, i, j, sep));
                }
            }
        }
    }
    if n < 2 {
        margin = f64::INFINITY;
    }
    CheckResult {
        check: "point_separation",
        pass: best.is_none(),
        tol,
        margin,
        witness: best.map(|(_, i, j, sep)| Witness::Pair {
            i,
            j,
            x: s.points[i].clone(),
            y: s.points[j].clone(),
            separation: sep,
        }),
    }
}

/// `sum_k |theta_k(x) - theta_k(-x)| > tol` at every sample.
pub fn check_antipodal_separation(family: &SymbolFamily, tol: f64) -> CheckResult {
    let s = &family.samples;
    let mut best: Option<(i64, usize, f64)> = None;
    for i in 0..s.len() {
        let a = s.antipode[i];
        let sum: f64 = family.values.iter().map(|v| (v[i] - v[a]).norm()).sum();
        let q = quantize(sum);
        if best.is_none_or(|(bq, ..)| q < bq) {
            best = Some((q, i, sum));
        }
    }
    let (_, i, sum) = best.expect("sample set is nonempty");
    let pass = sum > tol;
    CheckResult {
        check: "antipodal_separation",
        pass,
        tol,
        margin: sum,
        witness: (!pass).then(|| Witness::Point {
            i,
            x: s.points[i].clone(),
            sum,
        }),
    }
}

/// At every sample and tangent basis direction, some member has a central
/// geodesic difference quotient (step [`TANGENT_STEP`]) larger than `tol`.
pub fn check_tangential_derivatives(family: &SymbolFamily, tol: f64) -> CheckResult {
    let s = &family.samples;
    let h = TANGENT_STEP;
    let mut best: Option<(i64, usize, usize, f64)> = None;
    for i in 0..s.len() {
        for (t, _) in s.tangents[i].iter().enumerate() {
            let plus = s.geodesic(i, t, h);
            let minus = s.geodesic(i, t, -h);
            let g = family
                .members
                .iter()
                .map(|m| ((m.eval_unit(&plus) - m.eval_unit(&minus)) / (2.0 * h)).norm())
                .fold(0.0, f64::max);
            let q = quantize(g);
            if best.is_none_or(|(bq, ..)| q < bq) {
                best = Some((q, i, t, g));
            }
        }
    }
    match best {
        // no tangent directions (S^0): nothing to check
        None => CheckResult {
            check: "tangential_derivatives",
            pass: true,
            tol,
            margin: f64::INFINITY,
            witness: None,
        },
        Some((_, i, t, g)) => {
            let pass = g > tol;
            CheckResult {
                check: "tangential_derivatives",
                pass,
                tol,
                margin: g,
                witness: (!pass).then(|| Witness::Tangent {
                    i,
                    x: s.points[i].clone(),
                    tangent: t,
                    v: s.tangents[i][t].clone(),
                    derivative: g,
                }),
            }
        }
    }
}

/// `{1}` followed by the members and their conjugates, without repeats
/// (repeats judged by exact sample values).
pub fn close_family(family: &SymbolFamily) -> SymbolFamily {
    let mut members: Vec<MultiplierSymbol> = Vec::new();
    let mut seen: Vec<Vec<Complex64>> = Vec::new();
    let mut push = |m: MultiplierSymbol, v: Vec<Complex64>| {
        if !seen.contains(&v) {
            seen.push(v);
            members.push(m);
        }
    };
    let one = identity_symbol(family.d);
    let one_vals = one.sample(&family.samples);
    push(one, one_vals);
    for (m, v) in family.members.iter().zip(&family.values) {
        push(m.clone(), v.clone());
    }
    for (m, v) in family.members.iter().zip(&family.values) {
        push(m.conj(), v.iter().map(|z| z.conj()).collect());
    }
    SymbolFamily::new(family.param, family.d, members, family.samples.clone())
        .expect("closure keeps dimensions")
}

/// The smooth target `h_{C,D}` of a cone pair, as a symbol and on samples.
pub fn build_h_cd(pair: &ConePair, samples: &SphereSamples) -> Result<(MultiplierSymbol, Vec<f64>)> {
    if samples.d != pair.outer.dim() {
        return Err(structural("sample set dimension differs from cone dimension"));
    }
    if !pair.inner_in_outer(samples) {
        return Err(domain("inner cone D is not contained in outer cone C"));
    }
    let target = ConeTarget::new(pair.clone())?;
    let values = samples.points.iter().map(|p| target.value(p)).collect();
    let symbol = MultiplierSymbol::new(pair.outer.dim(), SymbolRule::ConeTarget { target })?;
    Ok((symbol, values))
}

/// Whether a sample lies in the closed opposing half space of `dir`.
pub fn in_opposing_half_space(x: &[f64], dir: &[f64]) -> bool {
    dot(x, dir) <= 0.0
}
