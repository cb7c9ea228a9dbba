use serde::Serialize;
use serde_json::Value;

use crate::bmo::{coefficient_mass, damped_projection, journe_enlarge, product_bmo_lower, RectangleCollection};
use crate::commutator::{select_cones, ConeSelection};
use crate::dyadic::{haar_transform, DyadicRectangle};
use crate::error::Result;
use crate::lattice::GridFunction;
use crate::symbol_family::{approximate_symbol, build_h_cd, close_family, DegreeReport};

use super::test_function::normalized_beta;
use super::{stream_seed, streams, ExperimentConfig};

#[derive(Clone, Debug, Serialize)]
pub struct ParamApprox {
    pub param: usize,
    /// best `C^m` sup error of `h_{C,D}` up to the degree cap
    pub error: f64,
    pub degree_cap: usize,
    /// smallest degree whose best error is at most `epsilon`
    pub degree_within_epsilon: Option<usize>,
    pub history: Vec<DegreeReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeApproxReport {
    pub selection: ConeSelection,
    pub epsilon: f64,
    pub derivative_order: usize,
    pub params: Vec<ParamApprox>,
    /// every parameter reached `epsilon`
    pub reached: bool,
}

/// Selects cones for the test function of `b`, then approximates each
/// `h_{C_s,D_s}` by polynomials in the closed configured family.
pub fn cone_approx(b: &GridFunction, config: &ExperimentConfig) -> Result<ConeApproxReport> {
    let config = &config.validated()?;
    let (_, beta, _) = normalized_beta(b, config)?;
    let selection = select_cones(
        &beta,
        config.kappa,
        &config.apertures,
        stream_seed(config.seed, streams::CONES, 0),
        config.cone_tries,
    )?;
    let mut params = Vec::new();
    for (s, pair) in selection.pairs.iter().enumerate() {
        let family = close_family(&config.family(s)?);
        let (target, _) = build_h_cd(pair, family.samples())?;
        let approx = approximate_symbol(&family, &target, config.degree_cap, config.derivative_order)?;
        // history errors are raw per degree; the running minimum is what a
        // cap of that degree achieves
        let mut best = f64::INFINITY;
        let degree_within_epsilon = approx.history.iter().find_map(|h| {
            best = best.min(h.error);
            (best <= config.epsilon).then_some(h.degree)
        });
        params.push(ParamApprox {
            param: s,
            error: approx.error,
            degree_cap: config.degree_cap,
            degree_within_epsilon,
            history: approx.history,
        });
    }
    Ok(ConeApproxReport {
        reached: params.iter().all(|p| p.error <= config.epsilon),
        selection,
        epsilon: config.epsilon,
        derivative_order: config.derivative_order,
        params,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct JourneReport {
    pub proxy: f64,
    pub collection: Vec<DyadicRectangle>,
    pub a: f64,
    pub damping: f64,
    pub v_measure: f64,
    pub shadow_measure: f64,
    /// `sum_{R in U} |<b, w_R>|^2`
    pub projection_mass: f64,
    /// the same mass after damping by `E(R)^{-damping}`
    pub damped_mass: f64,
    pub enlargement: Value,
}

/// Enlarges the union found by `product_bmo_lower` and damps the projection
/// of `b` onto its rectangles.
pub fn journe_experiment(b: &GridFunction, config: &ExperimentConfig) -> Result<JourneReport> {
    let config = &config.validated()?;
    let c = haar_transform(b)?;
    let est = product_bmo_lower(&c, &config.search_budget())?;
    let u = RectangleCollection::new(b.lattice(), est.collection.clone())?;
    let enl = journe_enlarge(&u, config.journe_a)?;
    let damped = damped_projection(&c, &u, &enl.factors, config.damping)?;
    Ok(JourneReport {
        proxy: est.value,
        collection: est.collection,
        a: config.journe_a,
        damping: config.damping,
        v_measure: enl.v_measure(),
        shadow_measure: enl.shadow_measure(),
        projection_mass: coefficient_mass(&c, &u)?,
        damped_mass: damped.wavelet_mass(),
        enlargement: enl.to_json(),
    })
}
