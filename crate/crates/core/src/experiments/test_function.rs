use serde::Serialize;

use crate::bmo::{product_bmo_lower, project_inside, BmoEstimate, RectangleCollection};
use crate::commutator::{cone_gamma, iterated_commutator_apply, select_cones, ConeSelection, OperatorChoice};
use crate::dyadic::{haar_inverse, haar_transform};
use crate::error::{Error, Result};
use crate::lattice::{fft_forward, spectral_refine, GridFunction, ProductLattice};
use crate::multipliers::{half_space_symbol, smoothed_cone_symbol, ConePair, MultiplierSymbol, TensorMultiplier};
use crate::Complex64;

use super::{stream_seed, streams, ExperimentConfig};

/// Frequencies below this fraction of the largest coefficient count as
/// outside the Fourier support.
const SUPPORT_TOL: f64 = 1e-10;

/// `T = T_{C_1} ... T_{C_t}` applied to the three pieces of `beta * conj(gamma)`.
#[derive(Clone, Debug, Serialize)]
pub struct ThreeTerms {
    /// `||T(gamma conj(gamma))||_2`
    pub main: f64,
    /// `||T((H_D - T_D) beta conj(gamma))||_2`
    pub cone_error: f64,
    /// `||T((I - H_D) beta conj(gamma))||_2`
    pub far: f64,
    /// `||T(beta conj(gamma))||_2`
    pub total: f64,
    pub gamma_l2: f64,
    pub gamma_l4: f64,
    /// `||(H_D - T_D) beta||_4`
    pub h_minus_t_l4: f64,
    /// `||(I - H_D) beta||_4`
    pub far_l4: f64,
    /// largest `|m_T|` on the Fourier support of `(I - H_D) beta conj(gamma)`
    pub far_symbol_sup: f64,
    /// `far_symbol_sup * ||(I - H_D) beta||_4 * ||gamma||_4`
    pub far_bound: f64,
    /// `||(H_D - T_D) beta||_4 * ||gamma||_4`
    pub cone_error_bound: f64,
}

/// Products are formed on the lattice refined this many times per axis.
const REFINE: usize = 2;

fn apply_each(symbols: Vec<MultiplierSymbol>, f: &GridFunction) -> Result<GridFunction> {
    TensorMultiplier::new(f.lattice(), &symbols)?.apply(f)
}

/// Splits `beta = gamma + (H_D - T_D) beta + (I - H_D) beta` with
/// `gamma = T_D beta` and measures `T` on each piece times `conj(gamma)`.
///
/// The pieces are multipliers of `beta` and are formed on its lattice; the
/// products and everything after them live on the lattice refined twice, so
/// the frequencies of a product do not wrap around.
pub fn three_term_split(beta: &GridFunction, pairs: &[ConePair]) -> Result<ThreeTerms> {
    let lattice = beta.lattice();
    if pairs.len() != lattice.params() {
        return Err(Error::Structural("one cone pair per parameter expected".into()));
    }
    let gamma = cone_gamma(beta, pairs)?;
    let h_beta = apply_each(
        pairs
            .iter()
            .map(|p| half_space_symbol(&p.inner.direction))
            .collect::<Result<_>>()?,
        beta,
    )?;
    let fine = |f: &GridFunction| spectral_refine(f, REFINE);
    let near = fine(&h_beta.sub(&gamma)?)?;
    let far = fine(&beta.sub(&h_beta)?)?;
    let beta = fine(beta)?;
    let gamma = fine(&gamma)?;
    let gbar = gamma.conj();
    let far_product = far.mul(&gbar)?;
    let t_c = outer_cones(gamma.lattice(), pairs)?;

    let spectrum = fft_forward(&far_product);
    let top = spectrum.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let far_symbol_sup = spectrum
        .values()
        .iter()
        .zip(t_c.table())
        .filter(|(z, _)| top > 0.0 && z.norm() > SUPPORT_TOL * top)
        .map(|(_, m)| m.norm())
        .fold(0.0, f64::max);

    let gamma_l4 = gamma.lp_norm(4.0)?;
    let h_minus_t_l4 = near.lp_norm(4.0)?;
    let far_l4 = far.lp_norm(4.0)?;
    Ok(ThreeTerms {
        main: t_c.apply(&gamma.mul(&gbar)?)?.norm2(),
        cone_error: t_c.apply(&near.mul(&gbar)?)?.norm2(),
        far: t_c.apply(&far_product)?.norm2(),
        total: t_c.apply(&beta.mul(&gbar)?)?.norm2(),
        gamma_l2: gamma.norm2(),
        gamma_l4,
        h_minus_t_l4,
        far_l4,
        far_symbol_sup,
        far_bound: far_symbol_sup * far_l4 * gamma_l4,
        cone_error_bound: h_minus_t_l4 * gamma_l4,
    })
}

fn outer_symbols(pairs: &[ConePair]) -> Result<Vec<MultiplierSymbol>> {
    pairs
        .iter()
        .map(|p| smoothed_cone_symbol(&p.outer, p.tau, p.order))
        .collect()
}

/// `T_{C_1} ... T_{C_t}` with the smoothed outer cones.
fn outer_cones(lattice: &ProductLattice, pairs: &[ConePair]) -> Result<TensorMultiplier> {
    TensorMultiplier::new(lattice, &outer_symbols(pairs)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct TestFunctionReport {
    /// `product_bmo_lower(b)`, which must be 1
    pub proxy: f64,
    pub collection: usize,
    pub shadow_measure: f64,
    /// `||P_U b||_2` before `beta` is normalized in `L^2`
    pub projection_l2: f64,
    pub selection: ConeSelection,
    pub terms: ThreeTerms,
    /// `||[T_{C_1}, ... [T_{C_t}, M_b] ...] conj(gamma)||_2` for the
    /// interpolants of `b` and `gamma` on the refined lattice
    pub commutator: f64,
    /// the cone selection failed; terms use its best attempt
    pub failed: bool,
}

/// `beta = P b / ||P b||_2`, `P` keeping the wavelets inside the union
/// found by `product_bmo_lower`; `b` must be normalized by that estimate.
pub(crate) fn normalized_beta(b: &GridFunction, config: &ExperimentConfig) -> Result<(BmoEstimate, GridFunction, f64)> {
    let c = haar_transform(b)?;
    let est = product_bmo_lower(&c, &config.search_budget())?;
    if (est.value - 1.0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "b must be normalized to product_bmo_lower = 1, has {}",
            est.value
        )));
    }
    let u = RectangleCollection::new(b.lattice(), est.collection.clone())?;
    let projected = haar_inverse(&project_inside(&c, &u)?)?;
    let norm = projected.norm2();
    Ok((est, projected.scale(Complex64::new(1.0 / norm, 0.0)), norm))
}

/// Builds the test function of a normalized symbol and measures the split.
///
/// `beta` is the projection of `b` onto the wavelets inside the union found
/// by `product_bmo_lower`, normalized in `L^2`; cones are selected with the
/// configured `kappa`, apertures and tries.
pub fn test_function_experiment(b: &GridFunction, config: &ExperimentConfig) -> Result<TestFunctionReport> {
    let config = &config.validated()?;
    let (est, beta, projection_l2) = normalized_beta(b, config)?;
    let selection = select_cones(
        &beta,
        config.kappa,
        &config.apertures,
        stream_seed(config.seed, streams::CONES, 0),
        config.cone_tries,
    )?;
    let terms = three_term_split(&beta, &selection.pairs)?;
    // on the refined lattice as well, for the same reason as the split
    let gamma = spectral_refine(&cone_gamma(&beta, &selection.pairs)?, REFINE)?;
    let ops = OperatorChoice::new(gamma.lattice(), outer_symbols(&selection.pairs)?)?;
    let commutator = iterated_commutator_apply(&spectral_refine(b, REFINE)?, &gamma.conj(), &ops)?.norm2();
    Ok(TestFunctionReport {
        proxy: est.value,
        collection: est.collection.len(),
        shadow_measure: est.shadow_measure,
        projection_l2,
        failed: !selection.success,
        selection,
        terms,
        commutator,
    })
}
