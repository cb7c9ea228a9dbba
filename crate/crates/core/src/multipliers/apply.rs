use num_complex::Complex64;

use crate::error::{structural, Result};
use crate::lattice::{fft_axes_in_place, signed_frequency, GridFunction, ProductLattice};

use super::{identity_symbol, MultiplierSymbol};

/// Signed frequency vector of sub-index `sub` within parameter `s`.
pub fn frequency_vector(lattice: &ProductLattice, s: usize, sub: usize) -> Vec<f64> {
    let range = lattice.axis_range(s);
    let ns = &lattice.n_axis()[range];
    let mut out = vec![0.0; ns.len()];
    let mut rest = sub;
    for j in (0..ns.len()).rev() {
        out[j] = signed_frequency(rest % ns[j], ns[j]) as f64;
        rest /= ns[j];
    }
    out
}

/// `T_1 (x) ... (x) T_t` tabulated on the frequency lattice.
#[derive(Clone, Debug)]
pub struct TensorMultiplier {
    lattice: ProductLattice,
    symbols: Vec<MultiplierSymbol>,
    table: Vec<Complex64>,
    /// every factor is the identity
    trivial: bool,
}

impl TensorMultiplier {
    pub fn new(lattice: &ProductLattice, symbols: &[MultiplierSymbol]) -> Result<Self> {
        if symbols.len() != lattice.params() {
            return Err(structural(format!(
                "expected {} symbols, got {}",
                lattice.params(),
                symbols.len()
            )));
        }
        let mut per_param = Vec::with_capacity(symbols.len());
        for (s, m) in symbols.iter().enumerate() {
            if m.dim() != lattice.dims()[s] {
                return Err(structural(format!(
                    "symbol for parameter {} has dimension {}, lattice has {}",
                    s + 1,
                    m.dim(),
                    lattice.dims()[s]
                )));
            }
            per_param.push(
                (0..lattice.param_len(s))
                    .map(|sub| m.eval(&frequency_vector(lattice, s, sub)))
                    .collect::<Vec<_>>(),
            );
        }
        let table = (0..lattice.len())
            .map(|i| {
                lattice
                    .param_indices(i)
                    .iter()
                    .zip(&per_param)
                    .map(|(&sub, t)| t[sub])
                    .product()
            })
            .collect();
        Ok(Self {
            lattice: lattice.clone(),
            symbols: symbols.to_vec(),
            table,
            trivial: symbols.iter().all(MultiplierSymbol::is_identity),
        })
    }

    /// `symbol` in parameter `s`, identity elsewhere.
    pub fn single(lattice: &ProductLattice, s: usize, symbol: &MultiplierSymbol) -> Result<Self> {
        if s >= lattice.params() {
            return Err(structural("parameter index out of range"));
        }
        let symbols: Vec<MultiplierSymbol> = (0..lattice.params())
            .map(|r| {
                if r == s {
                    symbol.clone()
                } else {
                    identity_symbol(lattice.dims()[r])
                }
            })
            .collect();
        Self::new(lattice, &symbols)
    }

    pub fn identity(lattice: &ProductLattice) -> Self {
        let symbols: Vec<_> = lattice.dims().iter().map(|&d| identity_symbol(d)).collect();
        Self::new(lattice, &symbols).expect("identity symbols match the lattice")
    }

    pub fn lattice(&self) -> &ProductLattice {
        &self.lattice
    }

    pub fn symbols(&self) -> &[MultiplierSymbol] {
        &self.symbols
    }

    pub fn table(&self) -> &[Complex64] {
        &self.table
    }

    /// Operator with the conjugate symbol.
    pub fn adjoint(&self) -> Self {
        Self {
            lattice: self.lattice.clone(),
            symbols: self.symbols.iter().map(MultiplierSymbol::conj).collect(),
            table: self.table.iter().map(|v| v.conj()).collect(),
            trivial: self.trivial,
        }
    }

    /// Product of two tabulated operators on the same lattice.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.lattice.check_same(&other.lattice)?;
        Ok(Self {
            lattice: self.lattice.clone(),
            symbols: self.symbols.clone(),
            table: self.table.iter().zip(&other.table).map(|(a, b)| a * b).collect(),
            trivial: self.trivial && other.trivial,
        })
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.lattice.check_same(f.lattice())?;
        if self.trivial {
            return Ok(f.clone());
        }
        let mut data = f.values().to_vec();
        self.apply_in_place(&mut data);
        Ok(GridFunction::from_parts(self.lattice.clone(), data))
    }

    pub(crate) fn apply_in_place(&self, data: &mut [Complex64]) {
        if self.trivial {
            return;
        }
        let axes = 0..self.lattice.axis_count();
        fft_axes_in_place(&self.lattice, data, axes.clone(), false);
        for (v, m) in data.iter_mut().zip(&self.table) {
            *v *= m;
        }
        fft_axes_in_place(&self.lattice, data, axes, true);
    }
}

/// Applies `m_1(xi_1) ... m_t(xi_t)` to `f`.
pub fn apply_multiplier(symbols: &[MultiplierSymbol], f: &GridFunction) -> Result<GridFunction> {
    TensorMultiplier::new(f.lattice(), symbols)?.apply(f)
}
