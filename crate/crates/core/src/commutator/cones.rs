//! Randomized choice of cone pairs `D_s subset C_s` adapted to a normalized
//! function `beta`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{domain, structural, Error, Result};
use crate::lattice::GridFunction;
use crate::multipliers::{cone_projection_symbol, half_space_symbol, smoothed_cone_symbol, Cone, ConePair, Rotation};

use super::OperatorChoice;

/// Settings for [`select_cones_with`].
#[derive(Clone, Debug, Serialize)]
pub struct ConeSearch {
    pub kappa: f64,
    /// aperture side of `D_s` per parameter
    pub apertures: Vec<f64>,
    /// `C_s` is `D_s` with aperture scaled by this factor
    pub outer_factor: f64,
    /// smoothing margin of `T_D`
    pub tau: f64,
    pub order: u32,
    pub seed: u64,
    pub max_tries: usize,
}

impl ConeSearch {
    pub fn new(kappa: f64, apertures: Vec<f64>, seed: u64, max_tries: usize) -> Self {
        Self {
            kappa,
            apertures,
            outer_factor: 2.0,
            tau: 0.5,
            order: 2,
            seed,
            max_tries,
        }
    }
}

/// The three measured quantities of a cone-pair vector, plus `D_s subset C_s`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConeQuantities {
    /// `||T_D beta||_2`
    pub t_d_norm: f64,
    /// `||(H_D - T_D) beta||_4`
    pub h_minus_t_l4: f64,
    /// `||(H_C - P_C) |T_D beta|^2||_2`
    pub h_minus_p_l2: f64,
    pub contained: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConeSelection {
    pub success: bool,
    /// the successful pairs, or the attempt closest to success
    pub pairs: Vec<ConePair>,
    pub quantities: ConeQuantities,
    /// `4^{-t}`
    pub threshold: f64,
    pub kappa: f64,
    pub seed: u64,
    /// rotation draws used (each tries all `2^t` direction signs)
    pub tries: usize,
}

fn apply_all(ops: &OperatorChoice, f: &GridFunction) -> Result<GridFunction> {
    let mut g = f.clone();
    for s in 0..ops.params() {
        g = ops.apply(s, &g)?;
    }
    Ok(g)
}

/// `gamma = T_D beta` with the smoothed inner cones.
pub fn cone_gamma(beta: &GridFunction, pairs: &[ConePair]) -> Result<GridFunction> {
    let t_d = OperatorChoice::new(
        beta.lattice(),
        pairs
            .iter()
            .map(|p| smoothed_cone_symbol(&p.inner, p.tau, p.order))
            .collect::<Result<_>>()?,
    )?;
    apply_all(&t_d, beta)
}

/// Recomputes every quantity of a selection from `beta` and the pairs.
pub fn cone_quantities(beta: &GridFunction, pairs: &[ConePair]) -> Result<ConeQuantities> {
    let lattice = beta.lattice();
    if pairs.len() != lattice.params() {
        return Err(structural("one cone pair per parameter expected"));
    }
    let ops = |f: &dyn Fn(&ConePair) -> Result<_>| -> Result<OperatorChoice> {
        OperatorChoice::new(lattice, pairs.iter().map(f).collect::<Result<_>>()?)
    };
    let h_d = ops(&|p| half_space_symbol(&p.inner.direction))?;
    let h_c = ops(&|p| half_space_symbol(&p.outer.direction))?;
    let p_c = ops(&|p| cone_projection_symbol(&p.outer))?;
    let gamma = cone_gamma(beta, pairs)?;
    let diff = apply_all(&h_d, beta)?.sub(&gamma)?;
    let sq = gamma.map(|v| Complex64::new(v.norm_sqr(), 0.0));
    let far = apply_all(&h_c, &sq)?.sub(&apply_all(&p_c, &sq)?)?;
    let contained = pairs
        .iter()
        .all(|p| p.inner.vertex_rays().iter().all(|r| p.outer.contains(r)));
    Ok(ConeQuantities {
        t_d_norm: gamma.norm2(),
        h_minus_t_l4: diff.lp_norm(4.0)?,
        h_minus_p_l2: far.norm2(),
        contained,
    })
}

/// [`select_cones_with`] with outer factor 2, `tau = 0.5` and order 2.
pub fn select_cones(beta: &GridFunction, kappa: f64, apertures: &[f64], seed: u64, max_tries: usize) -> Result<ConeSelection> {
    select_cones_with(beta, &ConeSearch::new(kappa, apertures.to_vec(), seed, max_tries))
}

/// Draws independent uniform rotations per parameter, turning the cone of
/// direction `e_1` and the given aperture into `D_s`, with `C_s` the same
/// cone widened by `outer_factor`. Each draw is tried with all `2^t` sign
/// choices of the directions. Returns the first vector of pairs meeting
/// `||T_D beta||_2 >= 4^{-t}`, `||(H_D - T_D) beta||_4 <= kappa`,
/// `||(H_C - P_C)|T_D beta|^2||_2 <= kappa` and `D_s subset C_s`; otherwise
/// the attempt with the smallest total relative violation, flagged.
pub fn select_cones_with(beta: &GridFunction, search: &ConeSearch) -> Result<ConeSelection> {
    let lattice = beta.lattice();
    let t = lattice.params();
    if (beta.norm2() - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "beta must have unit L2 norm, has {}",
            beta.norm2()
        )));
    }
    if !(search.kappa > 0.0) {
        return Err(domain("kappa must be positive"));
    }
    if search.apertures.len() != t {
        return Err(structural("one aperture per parameter expected"));
    }
    if !(search.outer_factor >= 1.0) {
        return Err(domain("outer cone factor must be at least 1"));
    }
    let threshold = 4f64.powi(-(t as i32));
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let mut best: Option<(f64, Vec<ConePair>, ConeQuantities)> = None;
    for attempt in 1..=search.max_tries {
        let mut base = Vec::with_capacity(t);
        for s in 0..t {
            let d = lattice.dims()[s];
            let mut e1 = vec![0.0; d];
            e1[0] = 1.0;
            let rho = Rotation::random(d, &mut rng);
            base.push(Cone::new(&e1, search.apertures[s])?.rotated(&rho));
        }
        for signs in 0..1usize << t {
            let pairs: Vec<ConePair> = base
                .iter()
                .enumerate()
                .map(|(s, c)| {
                    let inner = if signs >> s & 1 == 1 { c.reversed() } else { c.clone() };
                    let outer = inner.dilate(search.outer_factor);
                    ConePair::new(inner, outer, search.tau, search.order)
                })
                .collect::<Result<_>>()?;
            let q = cone_quantities(beta, &pairs)?;
            let violation = (threshold - q.t_d_norm).max(0.0) / threshold
                + (q.h_minus_t_l4 - search.kappa).max(0.0) / search.kappa
                + (q.h_minus_p_l2 - search.kappa).max(0.0) / search.kappa
                + if q.contained { 0.0 } else { 1.0 };
            if violation == 0.0 {
                return Ok(ConeSelection {
                    success: true,
                    pairs,
                    quantities: q,
                    threshold,
                    kappa: search.kappa,
                    seed: search.seed,
                    tries: attempt,
                });
            }
            if best.as_ref().is_none_or(|b| violation < b.0) {
                best = Some((violation, pairs, q));
            }
        }
    }
    let (_, pairs, quantities) = best.ok_or_else(|| domain("max_tries must be positive"))?;
    Ok(ConeSelection {
        success: false,
        pairs,
        quantities,
        threshold,
        kappa: search.kappa,
        seed: search.seed,
        tries: search.max_tries,
    })
}
