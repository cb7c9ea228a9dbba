//! Journé-type enlargement: a superlevel set `V` of the strong dyadic maximal
//! function of the shadow, and the embeddedness factors `E(R)`.

use std::collections::BTreeMap;
use std::ops::Range;

use serde_json::{json, Value};

use crate::dyadic::{DyadicRectangle, WaveletCoefficients};
use crate::error::{domain, structural, Result};
use crate::lattice::ProductLattice;

use super::search::{for_each_in_box, SummedArea};
use super::RectangleCollection;

#[derive(Clone, Debug)]
pub struct EnlargementResult {
    /// indicator of `V`, in lattice order
    pub v: Vec<bool>,
    pub v_cells: usize,
    pub shadow_cells: usize,
    /// `E(R)` for every rectangle of the collection; `+inf` when every
    /// dilate stays inside `V`
    pub factors: BTreeMap<DyadicRectangle, f64>,
    pub a: f64,
    /// threshold: `V = {M 1_sh >= lambda}`
    pub lambda: f64,
    /// the shadow is the whole torus, so `V = sh` and `E = 1`
    pub degenerate: bool,
    total_cells: usize,
}

impl EnlargementResult {
    pub fn v_measure(&self) -> f64 {
        self.v_cells as f64 / self.total_cells as f64
    }

    pub fn shadow_measure(&self) -> f64 {
        self.shadow_cells as f64 / self.total_cells as f64
    }

    pub fn factor(&self, r: &DyadicRectangle) -> Option<f64> {
        self.factors.get(r).copied()
    }

    /// JSON summary; infinite factors are written as `null`.
    pub fn to_json(&self) -> Value {
        let factors: Vec<Value> = self
            .factors
            .iter()
            .map(|(r, &e)| json!({"rect": r, "e": e.is_finite().then_some(e)}))
            .collect();
        let cells: Vec<usize> = (0..self.v.len()).filter(|&i| self.v[i]).collect();
        json!({
            "a": self.a,
            "lambda": self.lambda,
            "degenerate": self.degenerate,
            "v_measure": self.v_measure(),
            "shadow_measure": self.shadow_measure(),
            "v_cells": cells,
            "factors": factors,
        })
    }
}

/// Strong dyadic maximal function of an indicator: the largest density of the
/// set in any dyadic rectangle (cells included) containing the point.
pub fn strong_maximal(lattice: &ProductLattice, set: &[bool]) -> Result<Vec<f64>> {
    let t = lattice.params();
    let mut levels = Vec::with_capacity(t);
    for s in 0..t {
        let n = lattice
            .param_n(s)
            .ok_or_else(|| structural("parameter with unequal axis lengths"))?;
        levels.push(n.trailing_zeros());
    }
    let sat = SummedArea::new(lattice, set);
    let strides = lattice.strides();
    let n_axis = lattice.n_axis();
    let mut out = vec![0.0f64; lattice.len()];
    let mut scales = vec![0u32; t];
    loop {
        // block widths per axis for this scale vector
        let widths: Vec<usize> = (0..lattice.axis_count())
            .map(|a| {
                let s = (0..t).find(|&s| lattice.axis_range(s).contains(&a)).expect("axis in range");
                n_axis[a] >> scales[s]
            })
            .collect();
        let counts: Vec<Range<usize>> = widths.iter().zip(n_axis).map(|(w, n)| 0..n / w).collect();
        let cells: f64 = widths.iter().map(|&w| w as f64).product();
        let mut block = vec![0usize; counts.len()];
        loop {
            let bx: Vec<Range<usize>> = block.iter().zip(&widths).map(|(b, w)| b * w..(b + 1) * w).collect();
            let density = sat.count(&bx) as f64 / cells;
            if density > 0.0 {
                for_each_in_box(&strides, &bx, |i| out[i] = out[i].max(density));
            }
            if !advance(&mut block, &counts) {
                break;
            }
        }
        if !advance_scales(&mut scales, &levels) {
            break;
        }
    }
    Ok(out)
}

fn advance(idx: &mut [usize], bounds: &[Range<usize>]) -> bool {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < bounds[a].end {
            return true;
        }
        idx[a] = bounds[a].start;
    }
    false
}

fn advance_scales(scales: &mut [u32], levels: &[u32]) -> bool {
    for s in (0..scales.len()).rev() {
        scales[s] += 1;
        if scales[s] <= levels[s] {
            return true;
        }
        scales[s] = 0;
    }
    false
}

/// Builds `V` and `E` for a collection.
///
/// `V = {M 1_sh >= lambda}` with the smallest attained value `lambda` of the
/// strong maximal function for which `|V| < (1 + a)|sh|` (found by bisection
/// over the sorted values). `E(R)` is the supremum of `mu >= 1` such that the
/// open box obtained by dilating every cube of `R` by `mu` about its center,
/// clipped to the torus, lies in `V`.
pub fn journe_enlarge(u: &RectangleCollection, a: f64) -> Result<EnlargementResult> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(domain(format!("enlargement parameter must be positive, got {a}")));
    }
    let lattice = u.lattice();
    let total = lattice.len();
    let sh = u.shadow();
    let shadow_cells = u.shadow_cells();
    let base = |v: Vec<bool>, lambda: f64, degenerate: bool| EnlargementResult {
        v_cells: v.iter().filter(|&&b| b).count(),
        v,
        shadow_cells,
        factors: u.rectangles().iter().map(|r| (r.clone(), 1.0)).collect(),
        a,
        lambda,
        degenerate,
        total_cells: total,
    };
    if shadow_cells == 0 {
        return Ok(base(vec![false; total], 1.0, false));
    }
    if shadow_cells == total {
        return Ok(base(sh.to_vec(), 1.0, true));
    }
    let m = strong_maximal(lattice, sh)?;
    let mut levels: Vec<f64> = m.iter().copied().filter(|&x| x > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let limit = (1.0 + a) * shadow_cells as f64;
    let fits = |lambda: f64| (m.iter().filter(|&&x| x >= lambda).count() as f64) < limit;
    // smallest index whose threshold fits; the top value (1) always fits
    let (mut lo, mut hi) = (0usize, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if fits(levels[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let lambda = levels[lo];
    let v: Vec<bool> = m.iter().map(|&x| x >= lambda).collect();
    let mut out = base(v, lambda, false);
    let sat = SummedArea::new(lattice, &out.v);
    for r in u.rectangles() {
        out.factors.insert(r.clone(), dilation_limit(lattice, &sat, r));
    }
    Ok(out)
}

/// Cells met by the open dilate `mu R` on each axis, clipped to the torus.
pub fn dilated_box(lattice: &ProductLattice, r: &DyadicRectangle, mu: f64) -> Vec<Range<usize>> {
    r.cell_box(lattice)
        .into_iter()
        .zip(lattice.n_axis())
        .map(|(b, &n)| {
            let w = (b.end - b.start) as f64;
            let c = b.start as f64 + w / 2.0;
            let half = mu * w / 2.0;
            // cell i meets (c - half, c + half) iff i + 1 > c - half and i < c + half
            let lo = (c - half).floor().max(0.0) as usize;
            let hi = ((c + half).ceil() as usize).min(n);
            lo..hi
        })
        .collect()
}

fn dilation_limit(lattice: &ProductLattice, sat: &SummedArea, r: &DyadicRectangle) -> f64 {
    let bx = r.cell_box(lattice);
    let n = lattice.n_axis();
    let widths: Vec<usize> = bx.iter().map(|b| b.end - b.start).collect();
    // each axis gains one cell per side at mu = 1 + 2m / w, m = 0, 1, ...
    let mut breaks: Vec<f64> = Vec::new();
    for (a, b) in bx.iter().enumerate() {
        let reach = b.start.max(n[a] - b.end);
        for m in 0..reach {
            breaks.push(1.0 + 2.0 * m as f64 / widths[a] as f64);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    for &mu in &breaks {
        // configuration just above mu
        let grown: Vec<Range<usize>> = bx
            .iter()
            .enumerate()
            .map(|(a, b)| {
                let m = ((mu - 1.0) * widths[a] as f64 / 2.0).floor() as usize + 1;
                b.start.saturating_sub(m)..(b.end + m).min(n[a])
            })
            .collect();
        let cells: u64 = grown.iter().map(|g| (g.end - g.start) as u64).product();
        if sat.count(&grown) != cells {
            return mu;
        }
    }
    f64::INFINITY
}

/// `sum_{R in U} sum_eps E(R)^{-cexp} <b, w_R^eps> w_R^eps`, as coefficients.
///
/// `E = inf` gives weight `0` unless `cexp = 0`.
pub fn damped_projection(
    b: &WaveletCoefficients,
    u: &RectangleCollection,
    e: &BTreeMap<DyadicRectangle, f64>,
    cexp: f64,
) -> Result<WaveletCoefficients> {
    b.lattice().check_same(u.lattice())?;
    if !(cexp >= 0.0) {
        return Err(domain(format!("damping exponent must be nonnegative, got {cexp}")));
    }
    let index = b.index();
    let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
    for r in u.rectangles() {
        let &er = e
            .get(r)
            .ok_or_else(|| structural(format!("no enlargement factor for {r:?}")))?;
        if !(er >= 1.0) {
            return Err(domain(format!("enlargement factor {er} is below 1")));
        }
        let w = if cexp == 0.0 {
            1.0
        } else if er.is_infinite() {
            0.0
        } else {
            er.powf(-cexp)
        };
        if let Ok(id) = index.rect_id(r) {
            weights.insert(id, w);
        }
    }
    Ok(b.retain_rectangles(|id| weights.get(&id).copied()))
}
