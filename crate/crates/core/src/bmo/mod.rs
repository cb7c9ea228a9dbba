//! Product BMO, rectangular BMO and BMO₋₁ from wavelet coefficients, and the
//! Journé-type enlargement with its damped projection.
//!
//! The product norm is a supremum over open sets, so it is only estimated from
//! below: every value returned here is attained by an explicit collection of
//! dyadic rectangles whose union is reported alongside.

mod journe;
mod search;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicCube, DyadicRectangle, RectangleIndex, WaveletCoefficients};
use crate::error::{domain, structural, Error, Result};
use crate::lattice::ProductLattice;

use search::{descendant_sums, RectSystem, SummedArea};

pub use journe::{damped_projection, dilated_box, journe_enlarge, strong_maximal, EnlargementResult};

/// A finite collection of dyadic rectangles with its shadow (union) cached as
/// a lattice point set.
#[derive(Clone, Debug)]
pub struct RectangleCollection {
    lattice: ProductLattice,
    rects: Vec<DyadicRectangle>,
    shadow: Vec<bool>,
    shadow_cells: usize,
    fixed: Option<(usize, DyadicCube)>,
}

impl RectangleCollection {
    /// Repeated rectangles are dropped; cell-sized cubes are allowed.
    pub fn new(lattice: &ProductLattice, rects: Vec<DyadicRectangle>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut kept = Vec::new();
        for r in rects {
            r.validate(lattice)?;
            if seen.insert(r.clone()) {
                kept.push(r);
            }
        }
        let strides = lattice.strides();
        let mut shadow = vec![false; lattice.len()];
        for r in &kept {
            search::for_each_in_box(&strides, &r.cell_box(lattice), |i| shadow[i] = true);
        }
        let shadow_cells = shadow.iter().filter(|&&b| b).count();
        let fixed = if lattice.params() < 2 || kept.is_empty() {
            None
        } else {
            (0..lattice.params())
                .find(|&s| kept.iter().all(|r| r.cubes[s] == kept[0].cubes[s]))
                .map(|s| (s, kept[0].cubes[s].clone()))
        };
        Ok(Self {
            lattice: lattice.clone(),
            rects: kept,
            shadow,
            shadow_cells,
            fixed,
        })
    }

    pub fn empty(lattice: &ProductLattice) -> Self {
        Self::new(lattice, Vec::new()).expect("empty collection is valid")
    }

    pub fn lattice(&self) -> &ProductLattice {
        &self.lattice
    }

    pub fn rectangles(&self) -> &[DyadicRectangle] {
        &self.rects
    }

    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    pub fn contains(&self, r: &DyadicRectangle) -> bool {
        self.rects.contains(r)
    }

    /// Indicator of the union, in lattice order.
    pub fn shadow(&self) -> &[bool] {
        &self.shadow
    }

    pub fn shadow_cells(&self) -> usize {
        self.shadow_cells
    }

    pub fn shadow_measure(&self) -> f64 {
        self.shadow_cells as f64 / self.lattice.len() as f64
    }

    pub fn is_single_rectangle(&self) -> bool {
        self.rects.len() == 1
    }

    /// Smallest `s` such that all rectangles share their `s`-th cube, with
    /// that cube; `None` for one parameter or an empty collection.
    pub fn fixed_coordinate(&self) -> Option<(usize, &DyadicCube)> {
        self.fixed.as_ref().map(|(s, c)| (*s, c))
    }

    pub fn has_t_minus_1_parameters(&self) -> bool {
        self.fixed.is_some()
    }
}

/// `sum_{R in U} sum_eps |<b, w_R^eps>|^2`. Rectangles finer than the wavelet
/// resolution carry no coefficients and contribute nothing.
pub fn coefficient_mass(b: &WaveletCoefficients, u: &RectangleCollection) -> Result<f64> {
    b.lattice().check_same(u.lattice())?;
    let energy = b.rectangle_energy();
    let index = b.index();
    Ok(u.rects
        .iter()
        .filter_map(|r| index.rect_id(r).ok())
        .map(|id| energy[id])
        .sum())
}

/// Keeps the wavelet coefficients of every rectangle contained in the shadow
/// of `u` (members or not), the projection whose mass the product norm uses.
pub fn project_inside(b: &WaveletCoefficients, u: &RectangleCollection) -> Result<WaveletCoefficients> {
    b.lattice().check_same(u.lattice())?;
    let sat = SummedArea::new(u.lattice(), u.shadow());
    let index = b.index();
    let mut inside: Vec<Option<bool>> = vec![None; index.rect_count()];
    Ok(b.retain_rectangles(|id| {
        let keep = *inside[id].get_or_insert_with(|| {
            let bx = index.rectangle(id).cell_box(u.lattice());
            let cells: u64 = bx.iter().map(|r| (r.end - r.start) as u64).product();
            sat.count(&bx) == cells
        });
        keep.then_some(1.0)
    }))
}

/// Exact supremum over single dyadic rectangles of
/// `(|R|^{-1} sum_{R' subset R} sum_eps |<b, w_{R'}^eps>|^2)^{1/2}`.
pub fn rectangular_bmo(b: &WaveletCoefficients) -> f64 {
    rectangular_argmax(b).map_or(0.0, |(_, v)| v)
}

/// The maximizing rectangle of [`rectangular_bmo`] with the value.
pub fn rectangular_argmax(b: &WaveletCoefficients) -> Option<(DyadicRectangle, f64)> {
    let energy = b.rectangle_energy();
    let sys = RectSystem::new(b.lattice(), b.index(), &energy);
    sys.best_single()
        .filter(|&(_, v)| v > 0.0)
        .map(|(r, v)| (b.index().rectangle(r), v.sqrt()))
}

/// Search settings for the lower estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    /// greedy restarts; restart 0 is deterministic
    pub restarts: usize,
    /// rectangles per union
    pub max_rects: usize,
    /// randomized restarts draw among this many best candidates
    pub top_k: usize,
    pub seed: u64,
    /// also evaluate the shadow of the best BMO₋₁ collection
    pub include_minus_one: bool,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_rects: 12,
            top_k: 3,
            seed: 0,
            include_minus_one: true,
        }
    }
}

/// Lower estimate of the product BMO norm with the union that attains it.
#[derive(Clone, Debug, Serialize)]
pub struct BmoEstimate {
    pub value: f64,
    /// rectangles whose union is the optimizing open set
    pub collection: Vec<DyadicRectangle>,
    /// coefficient mass of all rectangles inside the union
    pub mass: f64,
    pub shadow_measure: f64,
    pub rectangular: f64,
    /// "single", "greedy", "minus_one" or "exhaustive"
    pub source: &'static str,
}

fn estimate_from(
    sys: &RectSystem,
    rects: &[usize],
    rectangular: f64,
    source: &'static str,
) -> BmoEstimate {
    let (mass, area, _) = sys.evaluate(&sys.shadow(rects));
    BmoEstimate {
        value: if area > 0.0 { (mass / area).sqrt() } else { 0.0 },
        collection: rects.iter().map(|&r| sys.index.rectangle(r)).collect(),
        mass,
        shadow_measure: area,
        rectangular,
        source,
    }
}

/// Certified lower bound for the product BMO norm.
///
/// Candidates are every single rectangle, greedy unions grown by
/// mass-to-area ratio (restarted with seeded randomization) and, when
/// requested, the shadow of the best BMO₋₁ collection. Each candidate's value
/// is computed exactly: all rectangles contained in the union count.
pub fn product_bmo_lower(b: &WaveletCoefficients, budget: &SearchBudget) -> Result<BmoEstimate> {
    let energy = b.rectangle_energy();
    let sys = RectSystem::new(b.lattice(), b.index(), &energy);
    let rectangular = sys.best_single().map_or(0.0, |(_, v)| v.sqrt());
    if rectangular == 0.0 {
        return Ok(BmoEstimate {
            value: 0.0,
            collection: Vec::new(),
            mass: 0.0,
            shadow_measure: 0.0,
            rectangular,
            source: "single",
        });
    }
    let single = sys.best_single().expect("nonempty").0;
    let (_, greedy) = sys.greedy(budget.restarts, budget.max_rects.max(1), budget.top_k, budget.seed);
    let mut best = estimate_from(&sys, &[single], rectangular, "single");
    let g = estimate_from(&sys, &greedy, rectangular, "greedy");
    if g.value > best.value {
        best = g;
    }
    if budget.include_minus_one && b.lattice().params() >= 2 {
        let m = bmo_minus_one_with(b, budget)?;
        let ids: Vec<usize> = m
            .collection
            .iter()
            .map(|r| b.index().rect_id(r))
            .collect::<Result<_>>()?;
        let c = estimate_from(&sys, &ids, rectangular, "minus_one");
        if c.value > best.value {
            best = c;
        }
    }
    Ok(best)
}

/// Most wavelet rectangles a lattice may have for [`product_bmo_exhaustive`].
pub const EXHAUSTIVE_MAX_RECTS: usize = 128;

/// Exhaustive maximum over all unions of at most `max_union` wavelet-resolution
/// rectangles; an oracle for small lattices such as `N = 8`, `d = (1, 1)`.
pub fn product_bmo_exhaustive(b: &WaveletCoefficients, max_union: usize) -> Result<BmoEstimate> {
    let index = b.index();
    let lattice = b.lattice();
    let count = index.rect_count();
    if count > EXHAUSTIVE_MAX_RECTS || lattice.len() > 4096 {
        return Err(Error::Precondition(format!(
            "exhaustive search needs at most {EXHAUSTIVE_MAX_RECTS} rectangles, lattice has {count}"
        )));
    }
    if max_union == 0 || max_union > 3 {
        return Err(domain("exhaustive unions must have 1 to 3 rectangles"));
    }
    let energy = b.rectangle_energy();
    let words = lattice.len().div_ceil(64);
    let strides = lattice.strides();
    let masks: Vec<Vec<u64>> = (0..count)
        .map(|r| {
            let mut m = vec![0u64; words];
            search::for_each_in_box(&strides, &index.rectangle(r).cell_box(lattice), |i| {
                m[i / 64] |= 1 << (i % 64)
            });
            m
        })
        .collect();
    let heavy: Vec<usize> = (0..count).filter(|&r| energy[r] > 0.0).collect();
    let rectangular = rectangular_bmo(b);
    let n = lattice.len() as f64;
    let mut best: (f64, Vec<usize>) = (0.0, Vec::new());
    let mut union = vec![0u64; words];
    let mut visit = |members: &[usize]| {
        union.iter_mut().for_each(|w| *w = 0);
        for &r in members {
            for (u, m) in union.iter_mut().zip(&masks[r]) {
                *u |= m;
            }
        }
        let mass: f64 = heavy
            .iter()
            .filter(|&&r| masks[r].iter().zip(union.iter()).all(|(m, u)| m & !u == 0))
            .map(|&r| energy[r])
            .sum();
        let area = union.iter().map(|w| w.count_ones()).sum::<u32>() as f64 / n;
        let ratio = mass / area;
        if ratio > best.0 {
            best = (ratio, members.to_vec());
        }
    };
    for i in 0..count {
        visit(&[i]);
        if max_union < 2 {
            continue;
        }
        for j in i + 1..count {
            visit(&[i, j]);
            if max_union < 3 {
                continue;
            }
            for k in j + 1..count {
                visit(&[i, j, k]);
            }
        }
    }
    let sys = RectSystem::new(lattice, index, &energy);
    let mut out = estimate_from(&sys, &best.1, rectangular, "exhaustive");
    if best.1.is_empty() {
        out.value = 0.0;
    }
    Ok(out)
}

/// Result of the BMO₋₁ estimate.
#[derive(Clone, Debug, Serialize)]
pub struct MinusOneEstimate {
    /// attained by `collection`, hence a certified lower bound
    pub value: f64,
    /// the inner maximization was solved exactly (always for two parameters)
    pub exact: bool,
    /// fixed parameter `s` and its cube
    pub coordinate: Option<(usize, DyadicCube)>,
    pub collection: Vec<DyadicRectangle>,
}

/// BMO₋₁ with the default search budget.
pub fn bmo_minus_one(b: &WaveletCoefficients) -> Result<MinusOneEstimate> {
    bmo_minus_one_with(b, &SearchBudget::default())
}

/// `sup_U (|sh U|^{-1} sum_{R in U} sum_eps |<b, w_R^eps>|^2)^{1/2}` over
/// collections whose rectangles all share the cube `Q_s` in one parameter.
///
/// With `Q_s` fixed, adding every rectangle `Q_s x R'` with `R'` inside the
/// current shadow only adds mass, so the inner problem is a product-BMO
/// problem in the remaining parameters with masses `e(Q_s x R')`. For two
/// parameters that problem has one parameter: optimal unions of dyadic cubes
/// reduce to disjoint maximal cubes, and a mediant is never larger than its
/// largest term, so the best single cube is optimal. For more parameters the
/// greedy search of [`product_bmo_lower`] runs on the reduced problem and the
/// result is flagged inexact.
pub fn bmo_minus_one_with(b: &WaveletCoefficients, budget: &SearchBudget) -> Result<MinusOneEstimate> {
    let lattice = b.lattice();
    let t = lattice.params();
    if t < 2 {
        return Err(domain("BMO_-1 needs at least two parameters"));
    }
    let index = b.index();
    let energy = b.rectangle_energy();
    let mut best = MinusOneEstimate {
        value: 0.0,
        exact: t == 2,
        coordinate: None,
        collection: Vec::new(),
    };
    // best ratio^2 so far; for two parameters also its (s, rectangle id)
    let mut best_sq = 0.0;
    let mut arg: Option<(usize, usize)> = None;
    for s in 0..t {
        let others: Vec<usize> = (0..t).filter(|&p| p != s).collect();
        if t == 2 {
            let below = descendant_sums(index, &energy, &others);
            for r in 0..index.rect_count() {
                let v = below[r] / index.rect_volume(r);
                if v > best_sq {
                    best_sq = v;
                    arg = Some((s, r));
                }
            }
            continue;
        }
        let reduced = ProductLattice::new(
            others.iter().map(|&p| lattice.dims()[p]).collect(),
            others
                .iter()
                .flat_map(|&p| lattice.axis_range(p).map(|a| lattice.n_axis()[a]))
                .collect(),
        )?;
        let rindex = RectangleIndex::for_lattice(&reduced)?;
        let layout = index.param(s);
        for q in 0..layout.cube_count() {
            let full_id = |r2: usize| {
                let mut parts = rindex.rect_parts(r2);
                parts.insert(s, q);
                index.rect_from_parts(&parts)
            };
            let mass: Vec<f64> = (0..rindex.rect_count()).map(|r2| energy[full_id(r2)]).collect();
            if mass.iter().all(|&m| m == 0.0) {
                continue;
            }
            let sys = RectSystem::new(&reduced, &rindex, &mass);
            let (ratio, chosen) = sys.greedy(budget.restarts, budget.max_rects.max(1), budget.top_k, budget.seed);
            let v = ratio / layout.cube(q).volume();
            if v > best_sq {
                best_sq = v;
                let (_, _, inside) = sys.evaluate(&sys.shadow(&chosen));
                let mut members: Vec<usize> = chosen.clone();
                members.extend((0..rindex.rect_count()).filter(|&r2| inside[r2] && mass[r2] > 0.0 && !chosen.contains(&r2)));
                best.coordinate = Some((s, layout.cube(q).clone()));
                best.collection = members.into_iter().map(|r2| index.rectangle(full_id(r2))).collect();
            }
        }
    }
    if let Some((s, r)) = arg {
        let top = index.rectangle(r);
        let mut members = vec![top.clone()];
        for r2 in 0..index.rect_count() {
            if r2 == r || energy[r2] == 0.0 {
                continue;
            }
            let rect = index.rectangle(r2);
            if rect.cubes[s] == top.cubes[s] && top.contains(&rect) {
                members.push(rect);
            }
        }
        best.coordinate = Some((s, top.cubes[s].clone()));
        best.collection = members;
    }
    best.value = best_sq.sqrt();
    if best.collection.is_empty() && best_sq > 0.0 {
        return Err(structural("BMO_-1 optimum without a collection"));
    }
    Ok(best)
}
