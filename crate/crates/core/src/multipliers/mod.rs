//! Degree-0 homogeneous Fourier multipliers and their action on grid functions.
//!
//! A symbol is a rule evaluated on unit vectors `u = xi/|xi|`. At `xi = 0`
//! every symbol is `0` (the operator kills per-parameter means) except the
//! identity and constants, which keep their value so that `m = 1` is the
//! identity operator.

mod apply;
mod cone;
mod rotation;
mod sampled;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{domain, structural, Error, Result};
use crate::sphere::{dot, normalize, SphereSamples};

pub use apply::{apply_multiplier, frequency_vector, TensorMultiplier};
pub use cone::{smoothed_cone_value, smoothstep, Cone, ConePair, ConeTarget};
pub use rotation::Rotation;
pub use sampled::SampleTable;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// One monomial `c * prod_i member_i^{e_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coeff: Complex64,
}

/// How a symbol is evaluated on the unit sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SymbolRule {
    Identity,
    Constant { value: Complex64 },
    /// `u_j`
    Coordinate { axis: usize },
    /// `-i u_j`
    Riesz { axis: usize },
    /// `1` iff `u.direction > 0`
    HalfSpace { direction: Vec<f64> },
    ConeProjection { cone: Cone },
    SmoothedCone { cone: Cone, tau: f64, order: u32 },
    ConeTarget { target: ConeTarget },
    /// `u -> inner(rho^{-1} u)`
    Rotated { inner: Box<SymbolRule>, rotation: Rotation },
    Conjugate { inner: Box<SymbolRule> },
    Polynomial { members: Vec<SymbolRule>, terms: Vec<Monomial> },
    Sampled { table: SampleTable },
}

impl SymbolRule {
    fn eval_unit(&self, u: &[f64]) -> Complex64 {
        match self {
            SymbolRule::Identity => Complex64::new(1.0, 0.0),
            SymbolRule::Constant { value } => *value,
            SymbolRule::Coordinate { axis } => Complex64::new(u[*axis], 0.0),
            SymbolRule::Riesz { axis } => -I * u[*axis],
            SymbolRule::HalfSpace { direction } => indicator(dot(u, direction) > 0.0),
            SymbolRule::ConeProjection { cone } => indicator(cone.contains(u)),
            SymbolRule::SmoothedCone { cone, tau, order } => {
                Complex64::new(smoothed_cone_value(cone, *tau, *order, u), 0.0)
            }
            SymbolRule::ConeTarget { target } => Complex64::new(target.value(u), 0.0),
            SymbolRule::Rotated { inner, rotation } => inner.eval_unit(&rotation.apply_inverse(u)),
            SymbolRule::Conjugate { inner } => inner.eval_unit(u).conj(),
            SymbolRule::Polynomial { members, terms } => {
                let vals: Vec<Complex64> = members.iter().map(|m| m.eval_unit(u)).collect();
                eval_polynomial(&vals, terms)
            }
            SymbolRule::Sampled { table } => table.eval(u),
        }
    }

    fn zero_value(&self) -> Complex64 {
        match self {
            SymbolRule::Identity => Complex64::new(1.0, 0.0),
            SymbolRule::Constant { value } => *value,
            SymbolRule::Rotated { inner, .. } => inner.zero_value(),
            SymbolRule::Conjugate { inner } => inner.zero_value().conj(),
            SymbolRule::Polynomial { members, terms } => {
                let vals: Vec<Complex64> = members.iter().map(SymbolRule::zero_value).collect();
                eval_polynomial(&vals, terms)
            }
            _ => ZERO,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            SymbolRule::Identity => "identity",
            SymbolRule::Constant { .. } => "constant",
            SymbolRule::Coordinate { .. } => "coordinate",
            SymbolRule::Riesz { .. } => "riesz",
            SymbolRule::HalfSpace { .. } => "half_space",
            SymbolRule::ConeProjection { .. } => "cone_projection",
            SymbolRule::SmoothedCone { .. } => "smoothed_cone",
            SymbolRule::ConeTarget { .. } => "cone_target",
            SymbolRule::Rotated { .. } => "rotated",
            SymbolRule::Conjugate { .. } => "conjugate",
            SymbolRule::Polynomial { .. } => "polynomial",
            SymbolRule::Sampled { .. } => "sampled",
        }
    }
}

fn indicator(b: bool) -> Complex64 {
    Complex64::new(if b { 1.0 } else { 0.0 }, 0.0)
}

pub(crate) fn eval_polynomial(vals: &[Complex64], terms: &[Monomial]) -> Complex64 {
    terms
        .iter()
        .map(|t| {
            t.exponents
                .iter()
                .zip(vals)
                .fold(t.coeff, |acc, (&e, v)| acc * v.powu(e))
        })
        .sum()
}

/// A degree-0 homogeneous symbol on `R^d`.
#[derive(Clone, PartialEq)]
pub struct MultiplierSymbol {
    d: usize,
    rule: Arc<SymbolRule>,
    /// number of certified derivatives on the sphere (`None` = smooth)
    smoothness: Option<u32>,
}

impl fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiplierSymbol(d={}, {})", self.d, self.rule.kind())
    }
}

impl MultiplierSymbol {
    pub fn new(d: usize, rule: SymbolRule) -> Result<Self> {
        if d == 0 {
            return Err(domain("symbol dimension must be positive"));
        }
        validate(d, &rule)?;
        let smoothness = smoothness(&rule);
        Ok(Self {
            d,
            rule: Arc::new(rule),
            smoothness,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rule(&self) -> &SymbolRule {
        &self.rule
    }

    pub fn kind(&self) -> &'static str {
        self.rule.kind()
    }

    pub fn smoothness(&self) -> Option<u32> {
        self.smoothness
    }

    /// Value at a unit vector (no normalization performed).
    pub fn eval_unit(&self, u: &[f64]) -> Complex64 {
        self.rule.eval_unit(u)
    }

    /// Value at any frequency vector; `xi = 0` uses the zero-frequency convention.
    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        match normalize(xi) {
            Some(u) => self.rule.eval_unit(&u),
            None => self.rule.zero_value(),
        }
    }

    pub fn zero_value(&self) -> Complex64 {
        self.rule.zero_value()
    }

    pub fn conj(&self) -> Self {
        let rule = match &*self.rule {
            SymbolRule::Conjugate { inner } => (**inner).clone(),
            SymbolRule::Identity => SymbolRule::Identity,
            other => SymbolRule::Conjugate {
                inner: Box::new(other.clone()),
            },
        };
        Self {
            d: self.d,
            rule: Arc::new(rule),
            smoothness: self.smoothness,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(*self.rule, SymbolRule::Identity)
    }

    /// Values on a sample set.
    pub fn sample(&self, samples: &SphereSamples) -> Vec<Complex64> {
        samples.points.iter().map(|p| self.eval_unit(p)).collect()
    }

    /// Symbol file: `{d, kind, params, sphere_samples: [{dir, re, im}]}`.
    pub fn to_json(&self, samples: Option<&SphereSamples>) -> Result<Value> {
        let tagged = serde_json::to_value(&*self.rule)?;
        let params = tagged.get("params").cloned().unwrap_or(Value::Null);
        let sphere: Vec<Value> = match samples {
            Some(s) => s
                .points
                .iter()
                .map(|p| {
                    let v = self.eval_unit(p);
                    json!({"dir": p, "re": v.re, "im": v.im})
                })
                .collect(),
            None => Vec::new(),
        };
        Ok(json!({
            "d": self.d,
            "kind": self.rule.kind(),
            "params": params,
            "sphere_samples": sphere,
        }))
    }

    /// Reads a symbol file. Kind `sampled` without params is rebuilt from
    /// its `sphere_samples`.
    pub fn from_json(v: &Value) -> Result<Self> {
        let d = v
            .get("d")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Format("symbol file lacks `d`".into()))? as usize;
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Format("symbol file lacks `kind`".into()))?;
        let params = v.get("params").cloned().unwrap_or(Value::Null);
        if kind == "sampled" && params.is_null() {
            #[derive(Deserialize)]
            struct Sample {
                dir: Vec<f64>,
                re: f64,
                im: f64,
            }
            let samples: Vec<Sample> =
                serde_json::from_value(v.get("sphere_samples").cloned().unwrap_or(Value::Null))?;
            let table = SampleTable::new(
                d,
                samples
                    .into_iter()
                    .map(|s| (s.dir, Complex64::new(s.re, s.im)))
                    .collect(),
            )?;
            return Self::new(d, SymbolRule::Sampled { table });
        }
        let mut tagged = serde_json::Map::new();
        tagged.insert("kind".into(), Value::String(kind.into()));
        if !params.is_null() {
            tagged.insert("params".into(), params);
        }
        let rule: SymbolRule = serde_json::from_value(Value::Object(tagged))?;
        Self::new(d, rule)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>, samples: Option<&SphereSamples>) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json(samples)?)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }
}

fn validate(d: usize, rule: &SymbolRule) -> Result<()> {
    let dir_ok = |v: &[f64]| v.len() == d;
    match rule {
        SymbolRule::Coordinate { axis } | SymbolRule::Riesz { axis } => {
            if *axis >= d {
                return Err(domain(format!("axis {axis} out of range for d = {d}")));
            }
        }
        SymbolRule::HalfSpace { direction } => {
            if !dir_ok(direction) || normalize(direction).is_none() {
                return Err(domain("half-space direction must be a nonzero vector of length d"));
            }
        }
        SymbolRule::ConeProjection { cone } | SymbolRule::SmoothedCone { cone, .. } => {
            if cone.dim() != d {
                return Err(structural("cone dimension differs from symbol dimension"));
            }
            if let SymbolRule::SmoothedCone { tau, order, .. } = rule {
                if !(*tau > 0.0) {
                    return Err(domain("smoothing margin must be positive"));
                }
                if *order < 1 {
                    return Err(domain("smoothness order must be at least 1"));
                }
            }
        }
        SymbolRule::ConeTarget { target } => {
            if target.pair.outer.dim() != d {
                return Err(structural("cone dimension differs from symbol dimension"));
            }
        }
        SymbolRule::Rotated { inner, rotation } => {
            if rotation.d != d {
                return Err(structural("rotation dimension differs from symbol dimension"));
            }
            Rotation::new(d, rotation.matrix.clone())?;
            validate(d, inner)?;
        }
        SymbolRule::Conjugate { inner } => validate(d, inner)?,
        SymbolRule::Polynomial { members, terms } => {
            for m in members {
                validate(d, m)?;
            }
            if terms.iter().any(|t| t.exponents.len() != members.len()) {
                return Err(structural("monomial exponent vector length differs from member count"));
            }
        }
        SymbolRule::Sampled { table } => {
            if table.dim() != d {
                return Err(structural("sample table dimension differs from symbol dimension"));
            }
        }
        SymbolRule::Identity | SymbolRule::Constant { .. } => {}
    }
    Ok(())
}

fn smoothness(rule: &SymbolRule) -> Option<u32> {
    match rule {
        SymbolRule::HalfSpace { .. } | SymbolRule::ConeProjection { .. } => Some(0),
        SymbolRule::SmoothedCone { order, .. } => Some(*order),
        SymbolRule::ConeTarget { target } => Some(target.pair.order),
        SymbolRule::Sampled { .. } => Some(0),
        SymbolRule::Rotated { inner, .. } | SymbolRule::Conjugate { inner } => smoothness(inner),
        SymbolRule::Polynomial { members, .. } => {
            members.iter().filter_map(smoothness).min()
        }
        _ => None,
    }
}

pub fn identity_symbol(d: usize) -> MultiplierSymbol {
    MultiplierSymbol::new(d, SymbolRule::Identity).expect("identity is valid for d > 0")
}

pub fn constant_symbol(d: usize, value: Complex64) -> Result<MultiplierSymbol> {
    MultiplierSymbol::new(d, SymbolRule::Constant { value })
}

/// `xi -> xi_j / |xi|`, with `j` 1-based.
pub fn coordinate_symbol(d: usize, j: usize) -> Result<MultiplierSymbol> {
    if j == 0 || j > d {
        return Err(domain(format!("axis {j} out of range 1..={d}")));
    }
    MultiplierSymbol::new(d, SymbolRule::Coordinate { axis: j - 1 })
}

/// Riesz transform `-i xi_j / |xi|`, with `j` 1-based. For `d = 1` this is
/// the Hilbert transform `-i sign(xi)`.
pub fn riesz_symbol(d: usize, j: usize) -> Result<MultiplierSymbol> {
    if j == 0 || j > d {
        return Err(domain(format!("axis {j} out of range 1..={d}")));
    }
    MultiplierSymbol::new(d, SymbolRule::Riesz { axis: j - 1 })
}

pub fn hilbert_symbol() -> MultiplierSymbol {
    riesz_symbol(1, 1).expect("valid")
}

pub fn half_space_symbol(direction: &[f64]) -> Result<MultiplierSymbol> {
    let u = normalize(direction).ok_or_else(|| domain("half-space direction must be nonzero"))?;
    if (crate::sphere::norm(direction) - 1.0).abs() > 1e-12 {
        return Err(domain("half-space direction must be a unit vector"));
    }
    MultiplierSymbol::new(u.len(), SymbolRule::HalfSpace { direction: u })
}

pub fn cone_projection_symbol(cone: &Cone) -> Result<MultiplierSymbol> {
    MultiplierSymbol::new(cone.dim(), SymbolRule::ConeProjection { cone: cone.clone() })
}

pub fn smoothed_cone_symbol(cone: &Cone, tau: f64, order: u32) -> Result<MultiplierSymbol> {
    if !(tau > 0.0) {
        return Err(domain("smoothing margin must be positive"));
    }
    if order < 1 {
        return Err(domain("smoothness order must be at least 1"));
    }
    MultiplierSymbol::new(
        cone.dim(),
        SymbolRule::SmoothedCone {
            cone: cone.clone(),
            tau,
            order,
        },
    )
}

/// `xi -> m(rho^{-1} xi)`. The inner symbol is evaluated at the rotated point
/// directly, so no interpolation error is incurred.
pub fn rotate_symbol(m: &MultiplierSymbol, rho: &Rotation) -> Result<MultiplierSymbol> {
    if rho.d != m.d {
        return Err(structural("rotation dimension differs from symbol dimension"));
    }
    let rho = Rotation::new(rho.d, rho.matrix.clone())?;
    let rule = match m.rule() {
        SymbolRule::Rotated { inner, rotation } => SymbolRule::Rotated {
            inner: inner.clone(),
            rotation: rho.compose(rotation),
        },
        other => SymbolRule::Rotated {
            inner: Box::new(other.clone()),
            rotation: rho,
        },
    };
    MultiplierSymbol::new(m.d, rule)
}

/// Polynomial in the given members.
pub fn polynomial_symbol(members: &[MultiplierSymbol], terms: Vec<Monomial>) -> Result<MultiplierSymbol> {
    let d = members.first().map_or(1, MultiplierSymbol::dim);
    if members.iter().any(|m| m.d != d) {
        return Err(structural("polynomial members have different dimensions"));
    }
    MultiplierSymbol::new(
        d,
        SymbolRule::Polynomial {
            members: members.iter().map(|m| m.rule().clone()).collect(),
            terms,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn riesz_examples() {
        let r1 = riesz_symbol(2, 1).unwrap();
        assert!(close(r1.eval(&[1.0, 0.0]), -I));
        assert!(close(r1.eval(&[0.0, 1.0]), ZERO));
        assert!(close(r1.eval(&[3.0, 4.0]), Complex64::new(0.0, -0.6)));
        assert!(close(r1.eval(&[0.0, 0.0]), ZERO));
        assert!(riesz_symbol(2, 3).is_err());
        assert!(riesz_symbol(2, 0).is_err());
        let h = hilbert_symbol();
        assert!(close(h.eval(&[-3.0]), I));
    }

    #[test]
    fn half_space_examples() {
        let h = half_space_symbol(&[0.6, 0.8]).unwrap();
        assert_eq!(h.eval(&[0.6, 0.8]).re, 1.0);
        assert_eq!(h.eval(&[-0.6, -0.8]).re, 0.0);
        assert_eq!(h.eval(&[4.0, -3.0]).re, 0.0);
        assert!(half_space_symbol(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn cone_projection_examples() {
        let c = Cone::new(&[1.0, 0.0], 2.0).unwrap();
        let p = cone_projection_symbol(&c).unwrap();
        assert_eq!(p.eval(&[2.0, 1.0]).re, 1.0);
        assert_eq!(p.eval(&[1.0, 3.0]).re, 0.0);
        assert_eq!(p.eval(&[-1.0, 0.0]).re, 0.0);
    }

    #[test]
    fn smoothed_cone_band() {
        let c = Cone::new(&[1.0, 0.0], 2.0).unwrap();
        let k = smoothed_cone_symbol(&c, 0.5, 2).unwrap();
        assert_eq!(k.eval(&[4.0, 1.0]).re, 1.0);
        assert_eq!(k.eval(&[1.0, 2.0]).re, 0.0);
        // ratio 1.25 is the middle of [1, 1.5]
        assert!((k.eval(&[1.0, 1.25]).re - 0.5).abs() < 1e-14);
        assert!(smoothed_cone_symbol(&c, 0.0, 2).is_err());
        assert!(smoothed_cone_symbol(&c, -1.0, 2).is_err());
    }

    #[test]
    fn rotation_examples() {
        let r1 = riesz_symbol(2, 1).unwrap();
        let r2 = riesz_symbol(2, 2).unwrap();
        let quarter = Rotation::planar(2, 0, 1, std::f64::consts::FRAC_PI_2).unwrap();
        let rot = rotate_symbol(&r1, &quarter).unwrap();
        let half = Rotation::planar(2, 0, 1, std::f64::consts::PI).unwrap();
        let twice = rotate_symbol(&rotate_symbol(&r1, &half).unwrap(), &half).unwrap();
        let id = rotate_symbol(&r1, &Rotation::identity(2)).unwrap();
        for k in 0..50 {
            let a = k as f64 * 0.37;
            let xi = [a.cos() * 3.0, a.sin() * 3.0];
            assert!((rot.eval(&xi) - r2.eval(&xi)).norm() < 1e-3);
            assert!((twice.eval(&xi) - r1.eval(&xi)).norm() < 1e-12);
            assert_eq!(id.eval(&xi), r1.eval(&xi));
        }
        let shear = Rotation {
            d: 2,
            matrix: vec![1.0, 0.5, 0.0, 1.0],
        };
        assert!(rotate_symbol(&r1, &shear).is_err());
    }

    #[test]
    fn symbol_file_round_trip() {
        let c = Cone::new(&[1.0, 1.0], 1.0).unwrap();
        let k = smoothed_cone_symbol(&c, 0.3, 3).unwrap();
        let s = SphereSamples::default_for(2).unwrap();
        let v = k.to_json(Some(&s)).unwrap();
        assert_eq!(v["kind"], "smoothed_cone");
        assert_eq!(v["sphere_samples"].as_array().unwrap().len(), 256);
        let back = MultiplierSymbol::from_json(&v).unwrap();
        assert_eq!(back, k);

        let mut sampled = v.clone();
        sampled["kind"] = "sampled".into();
        sampled["params"] = Value::Null;
        let t = MultiplierSymbol::from_json(&sampled).unwrap();
        for p in &s.points {
            assert!((t.eval_unit(p) - k.eval_unit(p)).norm() < 1e-12);
        }
    }

    #[test]
    fn conjugation_is_involutive() {
        let r1 = riesz_symbol(3, 2).unwrap();
        assert_eq!(r1.conj().conj(), r1);
        assert!(close(r1.conj().eval(&[0.0, 1.0, 0.0]), I));
    }
}
