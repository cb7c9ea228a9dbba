//! Iterated commutators `[T_1, [T_2, ... [T_t, M_b] ...]]` of one Fourier
//! multiplier per parameter with multiplication by `b`, their expanded form,
//! the dual bilinear form and the operator norm.

mod cones;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{domain, structural, Result};
use crate::lattice::{fft_axes_in_place, GridFunction, ProductLattice};
use crate::multipliers::{frequency_vector, MultiplierSymbol};
use crate::symbol_family::SymbolFamily;

pub use cones::{cone_gamma, cone_quantities, select_cones, select_cones_with, ConeQuantities, ConeSearch, ConeSelection};

/// One multiplier `T_s` per parameter, tabulated on that parameter's
/// frequencies and applied by FFTs along its axes only.
#[derive(Clone, Debug)]
pub struct OperatorChoice {
    lattice: ProductLattice,
    symbols: Vec<MultiplierSymbol>,
    tables: Vec<Vec<Complex64>>,
    /// `block[s]`: number of flat entries per step of parameter `s`
    block: Vec<usize>,
}

impl OperatorChoice {
    pub fn new(lattice: &ProductLattice, symbols: Vec<MultiplierSymbol>) -> Result<Self> {
        if symbols.len() != lattice.params() {
            return Err(structural(format!(
                "expected {} operators, got {}",
                lattice.params(),
                symbols.len()
            )));
        }
        let mut tables = Vec::with_capacity(symbols.len());
        for (s, m) in symbols.iter().enumerate() {
            if m.dim() != lattice.dims()[s] {
                return Err(structural(format!(
                    "operator for parameter {} has dimension {}, lattice has {}",
                    s + 1,
                    m.dim(),
                    lattice.dims()[s]
                )));
            }
            tables.push(
                (0..lattice.param_len(s))
                    .map(|sub| m.eval(&frequency_vector(lattice, s, sub)))
                    .collect(),
            );
        }
        let t = lattice.params();
        let mut block = vec![1; t];
        for s in (0..t.saturating_sub(1)).rev() {
            block[s] = block[s + 1] * lattice.param_len(s + 1);
        }
        Ok(Self {
            lattice: lattice.clone(),
            symbols,
            tables,
            block,
        })
    }

    /// Member `k[s]` of family `s`, for every parameter.
    pub fn from_families(lattice: &ProductLattice, families: &[SymbolFamily], k: &[usize]) -> Result<Self> {
        if families.len() != k.len() {
            return Err(structural("one index per family expected"));
        }
        let symbols = families
            .iter()
            .zip(k)
            .map(|(f, &i)| {
                f.members()
                    .get(i)
                    .cloned()
                    .ok_or_else(|| structural(format!("family has no member {i}")))
            })
            .collect::<Result<_>>()?;
        Self::new(lattice, symbols)
    }

    pub fn lattice(&self) -> &ProductLattice {
        &self.lattice
    }

    pub fn symbols(&self) -> &[MultiplierSymbol] {
        &self.symbols
    }

    pub fn params(&self) -> usize {
        self.symbols.len()
    }

    /// `T_s^*` in every parameter (conjugate symbols).
    pub fn adjoint(&self) -> Self {
        Self {
            lattice: self.lattice.clone(),
            symbols: self.symbols.iter().map(MultiplierSymbol::conj).collect(),
            tables: self
                .tables
                .iter()
                .map(|t| t.iter().map(|v| v.conj()).collect())
                .collect(),
            block: self.block.clone(),
        }
    }

    fn apply_in_place(&self, s: usize, data: &mut [Complex64]) {
        if self.symbols[s].is_identity() {
            return;
        }
        let axes = self.lattice.axis_range(s);
        fft_axes_in_place(&self.lattice, data, axes.clone(), false);
        let len = self.tables[s].len();
        let block = self.block[s];
        for (i, v) in data.iter_mut().enumerate() {
            *v *= self.tables[s][(i / block) % len];
        }
        fft_axes_in_place(&self.lattice, data, axes, true);
    }

    /// `T_s f`.
    pub fn apply(&self, s: usize, f: &GridFunction) -> Result<GridFunction> {
        self.lattice.check_same(f.lattice())?;
        if s >= self.params() {
            return Err(structural("parameter index out of range"));
        }
        let mut data = f.values().to_vec();
        self.apply_in_place(s, &mut data);
        Ok(GridFunction::from_parts(self.lattice.clone(), data))
    }

    /// `prod_{s: mask bit s set} T_s f`.
    fn apply_mask(&self, mask: usize, data: &mut [Complex64]) {
        for s in 0..self.params() {
            if mask >> s & 1 == 1 {
                self.apply_in_place(s, data);
            }
        }
    }
}

fn check(b: &GridFunction, f: &GridFunction, ops: &OperatorChoice) -> Result<()> {
    ops.lattice.check_same(b.lattice())?;
    ops.lattice.check_same(f.lattice())
}

fn times(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// `[T_1, [T_2, ... [T_t, M_b] ...]] f`, evaluated level by level from the
/// innermost commutator outwards.
pub fn iterated_commutator_apply(b: &GridFunction, f: &GridFunction, ops: &OperatorChoice) -> Result<GridFunction> {
    check(b, f, ops)?;
    // C_t = M_b, C_s g = T_s C_{s+1} g - C_{s+1} T_s g
    fn level(s: usize, g: &[Complex64], b: &[Complex64], ops: &OperatorChoice) -> Vec<Complex64> {
        if s == ops.params() {
            return times(b, g);
        }
        let mut outer = level(s + 1, g, b, ops);
        ops.apply_in_place(s, &mut outer);
        let mut tg = g.to_vec();
        ops.apply_in_place(s, &mut tg);
        let inner = level(s + 1, &tg, b, ops);
        outer.iter().zip(&inner).map(|(x, y)| x - y).collect()
    }
    let out = level(0, f.values(), b.values(), ops);
    Ok(GridFunction::from_parts(ops.lattice.clone(), out))
}

/// The `2^t` signed terms `(-1)^{|S|} T_{S^c}(b . T_S f)`, indexed by the
/// bit mask of `S` (bit `s` for parameter `s`).
pub fn expanded_terms(b: &GridFunction, f: &GridFunction, ops: &OperatorChoice) -> Result<Vec<(usize, GridFunction)>> {
    check(b, f, ops)?;
    let t = ops.params();
    let full = (1usize << t) - 1;
    Ok((0..=full)
        .map(|mask| {
            let mut g = f.values().to_vec();
            ops.apply_mask(mask, &mut g);
            let mut h = times(b.values(), &g);
            ops.apply_mask(full & !mask, &mut h);
            if mask.count_ones() % 2 == 1 {
                h.iter_mut().for_each(|v| *v = -*v);
            }
            (mask, GridFunction::from_parts(ops.lattice.clone(), h))
        })
        .collect())
}

/// Sum of [`expanded_terms`]; equals [`iterated_commutator_apply`].
pub fn expanded_commutator_apply(b: &GridFunction, f: &GridFunction, ops: &OperatorChoice) -> Result<GridFunction> {
    let terms = expanded_terms(b, f, ops)?;
    let mut out = vec![Complex64::new(0.0, 0.0); ops.lattice.len()];
    for (_, g) in &terms {
        for (o, v) in out.iter_mut().zip(g.values()) {
            *o += v;
        }
    }
    Ok(GridFunction::from_parts(ops.lattice.clone(), out))
}

/// `Pi(f, g)` with `<C(b, f), g> = <b, Pi(f, g)>` for every `b`:
/// `sum_S (-1)^{|S|} conj(T_S f) . T_{S^c}^* g`.
pub fn pi_form(f: &GridFunction, g: &GridFunction, ops: &OperatorChoice) -> Result<GridFunction> {
    check(f, g, ops)?;
    let t = ops.params();
    let full = (1usize << t) - 1;
    let adj = ops.adjoint();
    let mut out = vec![Complex64::new(0.0, 0.0); ops.lattice.len()];
    for mask in 0..=full {
        let mut tf = f.values().to_vec();
        ops.apply_mask(mask, &mut tf);
        let mut tg = g.values().to_vec();
        adj.apply_mask(full & !mask, &mut tg);
        let sign = if mask.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        for ((o, a), c) in out.iter_mut().zip(&tf).zip(&tg) {
            *o += sign * a.conj() * c;
        }
    }
    Ok(GridFunction::from_parts(ops.lattice.clone(), out))
}

/// `C(b, .)^* g = (-1)^t C^*(conj b, g)`, the commutator of the adjoint
/// operators with `M_{conj b}`.
pub fn commutator_adjoint_apply(b: &GridFunction, g: &GridFunction, ops: &OperatorChoice) -> Result<GridFunction> {
    let out = iterated_commutator_apply(&b.conj(), g, &ops.adjoint())?;
    Ok(if ops.params() % 2 == 1 {
        out.scale(Complex64::new(-1.0, 0.0))
    } else {
        out
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NormEstimate {
    /// largest `||C v|| / ||v||` seen; a lower bound for the norm
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// relative change at the last step
    pub last_change: f64,
}

/// Largest singular value of `f -> C(b, f)` by power iteration on `C^* C`.
///
/// The start vector is complex Gaussian from `seed`; iteration stops when
/// the estimate changes by less than `tol` relatively. Every iterate gives a
/// valid lower bound `||C v||` for unit `v`, and the best one is returned.
pub fn operator_norm(b: &GridFunction, ops: &OperatorChoice, tol: f64, max_iter: usize, seed: u64) -> Result<NormEstimate> {
    if !(tol > 0.0) {
        return Err(domain("tolerance must be positive"));
    }
    ops.lattice.check_same(b.lattice())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = GridFunction::from_fn(&ops.lattice, |_| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    v = v.scale(Complex64::new(1.0 / v.norm2(), 0.0));
    let mut best = 0.0f64;
    let mut prev = 0.0f64;
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        let cv = iterated_commutator_apply(b, &v, ops)?;
        let sigma = cv.norm2();
        best = best.max(sigma);
        if sigma == 0.0 {
            return Ok(NormEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
                last_change: 0.0,
            });
        }
        last_change = (sigma - prev).abs() / sigma;
        if it > 1 && last_change < tol {
            return Ok(NormEstimate {
                value: best,
                iterations: it,
                converged: true,
                last_change,
            });
        }
        prev = sigma;
        let w = commutator_adjoint_apply(b, &cv, ops)?;
        let wn = w.norm2();
        if wn == 0.0 {
            break;
        }
        v = w.scale(Complex64::new(1.0 / wn, 0.0));
    }
    Ok(NormEstimate {
        value: best,
        iterations: max_iter,
        converged: false,
        last_change,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SupNorm {
    pub value: f64,
    pub argmax: Vec<usize>,
    /// every choice vector with its estimate, in lexicographic order
    pub per_choice: Vec<(Vec<usize>, NormEstimate)>,
    pub converged: bool,
}

/// `max_k ||[T_{1,k_1}, ... [T_{t,k_t}, M_b] ...]||` over all choice vectors.
pub fn sup_commutator_norm(
    b: &GridFunction,
    families: &[SymbolFamily],
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SupNorm> {
    let lattice = b.lattice();
    if families.len() != lattice.params() {
        return Err(structural("one family per parameter expected"));
    }
    if families.iter().any(SymbolFamily::is_empty) {
        return Err(domain("empty operator family"));
    }
    let sizes: Vec<usize> = families.iter().map(SymbolFamily::len).collect();
    let mut k = vec![0usize; sizes.len()];
    let mut per_choice = Vec::new();
    loop {
        let ops = OperatorChoice::from_families(lattice, families, &k)?;
        per_choice.push((k.clone(), operator_norm(b, &ops, tol, max_iter, seed)?));
        let mut s = k.len();
        loop {
            if s == 0 {
                let (argmax, best) = per_choice
                    .iter()
                    .fold((Vec::new(), -1.0), |acc, (k, e)| if e.value > acc.1 { (k.clone(), e.value) } else { acc });
                let converged = per_choice.iter().all(|(_, e)| e.converged);
                return Ok(SupNorm {
                    value: best.max(0.0),
                    argmax,
                    per_choice,
                    converged,
                });
            }
            s -= 1;
            k[s] += 1;
            if k[s] < sizes[s] {
                break;
            }
            k[s] = 0;
        }
    }
}
