//! Shadow search: lower bounds for `sup_V |V|^{-1} sum_{R subset V} mass(R)`
//! over unions `V` of dyadic rectangles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dyadic::RectangleIndex;
use crate::lattice::ProductLattice;

/// Per-parameter descendant sums: `out[R] = sum_{R' subset R} values[R']`,
/// restricted to the parameters in `params`.
pub(crate) fn descendant_sums(index: &RectangleIndex, values: &[f64], params: &[usize]) -> Vec<f64> {
    let mut out = values.to_vec();
    let radix = index.rect_radix();
    for &s in params {
        let layout = index.param(s);
        let k = layout.cube_count();
        let r = radix[s];
        let block = r * k;
        for c in (0..k).rev() {
            let Some(p) = layout.parent(c) else { continue };
            for o in (0..out.len()).step_by(block) {
                for i in 0..r {
                    let from = o + c * r + i;
                    let to = o + p * r + i;
                    out[to] += out[from];
                }
            }
        }
    }
    out
}

/// Calls `f` with the flat index of every cell of a nonempty box.
pub(crate) fn for_each_in_box(strides: &[usize], bx: &[std::ops::Range<usize>], mut f: impl FnMut(usize)) {
    if bx.iter().any(|r| r.is_empty()) {
        return;
    }
    let mut idx: Vec<usize> = bx.iter().map(|r| r.start).collect();
    loop {
        f(idx.iter().zip(strides).map(|(i, s)| i * s).sum());
        let mut a = idx.len();
        loop {
            if a == 0 {
                return;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < bx[a].end {
                break;
            }
            idx[a] = bx[a].start;
        }
    }
}

/// Cumulative cell counts of a lattice point set, for box queries.
pub(crate) struct SummedArea {
    sums: Vec<u32>,
    strides: Vec<usize>,
}

impl SummedArea {
    pub(crate) fn new(lattice: &ProductLattice, set: &[bool]) -> Self {
        let strides = lattice.strides();
        let n = lattice.n_axis();
        let mut sums: Vec<u32> = set.iter().map(|&b| b as u32).collect();
        for (a, &st) in strides.iter().enumerate() {
            let span = st * n[a];
            for i in 0..sums.len() {
                if i % span >= st {
                    sums[i] += sums[i - st];
                }
            }
        }
        Self { sums, strides }
    }

    /// Number of set cells in the half-open box.
    pub(crate) fn count(&self, bx: &[std::ops::Range<usize>]) -> u64 {
        let a = bx.len();
        let mut total: i64 = 0;
        'corners: for mask in 0..1usize << a {
            let mut idx = 0;
            let mut sign = 1i64;
            for (j, r) in bx.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    if r.start == 0 {
                        continue 'corners;
                    }
                    idx += (r.start - 1) * self.strides[j];
                    sign = -sign;
                } else {
                    idx += (r.end - 1) * self.strides[j];
                }
            }
            total += sign * self.sums[idx] as i64;
        }
        total as u64
    }
}

/// A rectangle system: every rectangle of `index` with its mass and cell box.
pub(crate) struct RectSystem<'a> {
    pub lattice: &'a ProductLattice,
    pub index: &'a RectangleIndex,
    pub mass: &'a [f64],
    pub boxes: Vec<Vec<std::ops::Range<usize>>>,
    pub cells: Vec<u64>,
    /// `sum_{R' subset R} mass(R')`
    pub below: Vec<f64>,
}

impl<'a> RectSystem<'a> {
    pub(crate) fn new(lattice: &'a ProductLattice, index: &'a RectangleIndex, mass: &'a [f64]) -> Self {
        let boxes: Vec<_> = (0..index.rect_count())
            .map(|r| index.rectangle(r).cell_box(lattice))
            .collect();
        let cells = boxes
            .iter()
            .map(|b| b.iter().map(|r| (r.end - r.start) as u64).product())
            .collect();
        let all: Vec<usize> = (0..lattice.params()).collect();
        let below = descendant_sums(index, mass, &all);
        Self {
            lattice,
            index,
            mass,
            boxes,
            cells,
            below,
        }
    }

    pub(crate) fn total_cells(&self) -> u64 {
        self.lattice.len() as u64
    }

    /// Best single rectangle by `below / |R|`; ties by mass, then larger
    /// volume, then smaller id.
    pub(crate) fn best_single(&self) -> Option<(usize, f64)> {
        let n = self.total_cells() as f64;
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.boxes.len() {
            let ratio = self.below[r] / (self.cells[r] as f64 / n);
            let better = match best {
                None => true,
                Some((b, v)) => {
                    ratio > v
                        || (ratio == v
                            && (self.below[r] > self.below[b]
                                || (self.below[r] == self.below[b] && self.cells[r] > self.cells[b])))
                }
            };
            if better {
                best = Some((r, ratio));
            }
        }
        best
    }

    fn paint(&self, set: &mut [bool], r: usize) {
        for_each_in_box(&self.lattice.strides(), &self.boxes[r], |i| set[i] = true);
    }

    /// Exact `(mass inside, measure)` of a point set.
    pub(crate) fn evaluate(&self, set: &[bool]) -> (f64, f64, Vec<bool>) {
        let sat = SummedArea::new(self.lattice, set);
        let inside: Vec<bool> = (0..self.boxes.len())
            .map(|r| sat.count(&self.boxes[r]) == self.cells[r])
            .collect();
        let mass = inside
            .iter()
            .zip(self.mass)
            .filter(|(&i, _)| i)
            .map(|(_, m)| m)
            .sum();
        let area = set.iter().filter(|&&b| b).count() as f64 / self.total_cells() as f64;
        (mass, area, inside)
    }

    pub(crate) fn shadow(&self, rects: &[usize]) -> Vec<bool> {
        let mut set = vec![false; self.lattice.len()];
        for &r in rects {
            self.paint(&mut set, r);
        }
        set
    }

    /// Greedy growth of a union, restarted with randomized choices.
    ///
    /// Candidates are scored by `(mass(V) + gain) / (|V| + |R \ V|)` with the
    /// lower-bound gain `below(R) - (part of below(R) already inside V)`.
    /// Restart 0 always takes the top candidate; later restarts draw among the
    /// `top_k` best. Returns the best ratio with its rectangles.
    pub(crate) fn greedy(&self, restarts: usize, max_rects: usize, top_k: usize, seed: u64) -> (f64, Vec<usize>) {
        let mut best = match self.best_single() {
            Some((r, v)) => (v, vec![r]),
            None => return (0.0, Vec::new()),
        };
        if best.0 == 0.0 {
            return (0.0, Vec::new());
        }
        let n = self.total_cells() as f64;
        let candidates: Vec<usize> = (0..self.boxes.len()).filter(|&r| self.below[r] > 0.0).collect();
        let all: Vec<usize> = (0..self.lattice.params()).collect();
        for restart in 0..restarts {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
            let mut set = vec![false; self.lattice.len()];
            let mut chosen: Vec<usize> = Vec::new();
            let mut current = 0.0;
            while chosen.len() < max_rects {
                let (mass_v, area_v, inside) = self.evaluate(&set);
                let sat = SummedArea::new(self.lattice, &set);
                let inside_mass: Vec<f64> = inside
                    .iter()
                    .zip(self.mass)
                    .map(|(&i, &m)| if i { m } else { 0.0 })
                    .collect();
                let inside_below = descendant_sums(self.index, &inside_mass, &all);
                let mut scored: Vec<(f64, f64, usize)> = candidates
                    .iter()
                    .filter(|&&r| !inside[r])
                    .map(|&r| {
                        let inc = (self.cells[r] - sat.count(&self.boxes[r])) as f64 / n;
                        let gain = self.below[r] - inside_below[r];
                        ((mass_v + gain) / (area_v + inc), gain, r)
                    })
                    .collect();
                if scored.is_empty() {
                    break;
                }
                scored.sort_by(|a, b| {
                    b.0.total_cmp(&a.0)
                        .then(b.1.total_cmp(&a.1))
                        .then(self.cells[b.2].cmp(&self.cells[a.2]))
                        .then(a.2.cmp(&b.2))
                });
                let pick = if restart == 0 {
                    0
                } else {
                    rng.random_range(0..top_k.min(scored.len()).max(1))
                };
                let (score, _, r) = scored[pick];
                if !chosen.is_empty() && score <= current {
                    break;
                }
                self.paint(&mut set, r);
                chosen.push(r);
                let (mass, area, _) = self.evaluate(&set);
                current = mass / area;
                if current > best.0 {
                    best = (current, chosen.clone());
                }
            }
        }
        best
    }
}
