//! Dyadic cubes and rectangles, signatures and the exact product Haar
//! transform on a [`ProductLattice`].
//!
//! Within one parameter the transform is the isotropic (cube) multiresolution
//! decomposition: every level applies one Haar step along each axis of the
//! parameter, producing the `2^d - 1` signatures of that level. Parameters are
//! transformed independently, so the basis is the tensor product of the
//! per-parameter bases. Entries where every parameter carries a wavelet are the
//! product wavelets `w_R^eps`; entries where some parameter carries the
//! coarsest scaling function form the stored scaling part.
//!
//! Coefficients are taken against `L^2`-normalized basis functions on the unit
//! torus, so a Haar function on the whole torus has values `+-1`.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{structural, Result};
use crate::lattice::{GridFunction, ProductLattice};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Dyadic cube `2^{-k}(j + [0,1)^d)` in one parameter.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub scale: u32,
    pub position: Vec<u32>,
}

impl DyadicCube {
    pub fn new(scale: u32, position: Vec<u32>) -> Self {
        Self { scale, position }
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(0, vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    pub fn side(&self) -> f64 {
        (-(self.scale as f64)).exp2()
    }

    pub fn volume(&self) -> f64 {
        (-((self.scale as usize * self.dim()) as f64)).exp2()
    }

    /// Whether `other` is contained in (or equal to) `self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        if other.scale < self.scale || other.dim() != self.dim() {
            return false;
        }
        let shift = other.scale - self.scale;
        self.position
            .iter()
            .zip(&other.position)
            .all(|(&p, &q)| q >> shift == p)
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        (self.scale > 0).then(|| {
            DyadicCube::new(self.scale - 1, self.position.iter().map(|p| p >> 1).collect())
        })
    }

    /// Lattice cells covered on one axis of length `n`.
    pub fn cell_range(&self, axis: usize, n: usize) -> std::ops::Range<usize> {
        let width = n >> self.scale;
        let lo = self.position[axis] as usize * width;
        lo..lo + width
    }

    fn valid_for(&self, n: usize, max_scale: u32) -> bool {
        self.scale <= max_scale
            && self
                .position
                .iter()
                .all(|&p| (p as u64) < (1u64 << self.scale) && (1usize << self.scale) <= n)
    }
}

/// Product `Q_1 x ... x Q_t` of dyadic cubes, one per parameter.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicRectangle {
    pub cubes: Vec<DyadicCube>,
}

impl DyadicRectangle {
    pub fn new(cubes: Vec<DyadicCube>) -> Self {
        Self { cubes }
    }

    pub fn unit(dims: &[usize]) -> Self {
        Self::new(dims.iter().map(|&d| DyadicCube::unit(d)).collect())
    }

    pub fn volume(&self) -> f64 {
        self.cubes.iter().map(DyadicCube::volume).product()
    }

    pub fn contains(&self, other: &DyadicRectangle) -> bool {
        self.cubes.len() == other.cubes.len()
            && self.cubes.iter().zip(&other.cubes).all(|(a, b)| a.contains(b))
    }

    pub fn scales(&self) -> Vec<u32> {
        self.cubes.iter().map(|c| c.scale).collect()
    }

    /// Half-open cell range on every lattice axis.
    pub fn cell_box(&self, lattice: &ProductLattice) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(lattice.axis_count());
        for (s, cube) in self.cubes.iter().enumerate() {
            for (j, a) in lattice.axis_range(s).enumerate() {
                out.push(cube.cell_range(j, lattice.n_axis()[a]));
            }
        }
        out
    }

    /// Structural error unless the rectangle lives on `lattice` (cells allowed).
    pub(crate) fn validate(&self, lattice: &ProductLattice) -> Result<()> {
        if self.cubes.len() != lattice.params() {
            return Err(structural("rectangle has the wrong number of parameters"));
        }
        for (s, cube) in self.cubes.iter().enumerate() {
            let n = lattice
                .param_n(s)
                .ok_or_else(|| structural("parameter with unequal axis lengths"))?;
            if cube.dim() != lattice.dims()[s] || !cube.valid_for(n, n.trailing_zeros()) {
                return Err(structural(format!("cube {cube:?} is not valid on this lattice")));
            }
        }
        Ok(())
    }

    pub fn contains_point(&self, lattice: &ProductLattice, coords: &[usize]) -> bool {
        self.cell_box(lattice)
            .iter()
            .zip(coords)
            .all(|(r, c)| r.contains(c))
    }
}

/// Per-parameter selection of wavelet (`0`) or scaling (`1`) factor on each axis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Signature(pub Vec<Vec<u8>>);

impl Signature {
    /// All product signatures for the given dimensions, in lexicographic order.
    pub fn all(dims: &[usize]) -> Vec<Signature> {
        let per: Vec<Vec<Vec<u8>>> = dims.iter().map(|&d| signatures(d)).collect();
        let mut out = vec![Vec::new()];
        for options in &per {
            let mut next = Vec::with_capacity(out.len() * options.len());
            for prefix in &out {
                for eps in options {
                    let mut p: Vec<Vec<u8>> = prefix.clone();
                    p.push(eps.clone());
                    next.push(p);
                }
            }
            out = next;
        }
        out.into_iter().map(Signature).collect()
    }
}

/// `{0,1}^d` without the all-ones vector, in lexicographic order.
pub fn signatures(d: usize) -> Vec<Vec<u8>> {
    (0..(1usize << d) - 1).map(|code| eps_from_code(code, d)).collect()
}

fn eps_from_code(code: usize, d: usize) -> Vec<u8> {
    (0..d).map(|j| ((code >> (d - 1 - j)) & 1) as u8).collect()
}

fn eps_code(eps: &[u8]) -> Option<usize> {
    let d = eps.len();
    let mut code = 0;
    for &e in eps {
        if e > 1 {
            return None;
        }
        code = (code << 1) | e as usize;
    }
    (code != (1 << d) - 1).then_some(code)
}

/// Decoding tables for one parameter of a lattice.
#[derive(Debug)]
pub struct ParamLayout {
    pub dim: usize,
    pub n: usize,
    pub levels: u32,
    cubes: Vec<DyadicCube>,
    level_offsets: Vec<usize>,
    parent: Vec<Option<usize>>,
    /// by sub-index within the parameter block: `(cube id, eps code)`
    decode: Vec<Option<(usize, usize)>>,
    /// by `cube id * eps_count + eps code`: sub-index
    encode: Vec<usize>,
}

impl ParamLayout {
    fn new(dim: usize, n: usize) -> Self {
        let levels = n.trailing_zeros();
        let mut cubes = Vec::new();
        let mut level_offsets = Vec::new();
        for k in 0..levels {
            level_offsets.push(cubes.len());
            let side = 1usize << k;
            for lin in 0..side.pow(dim as u32) {
                let mut pos = vec![0u32; dim];
                let mut rest = lin;
                for j in (0..dim).rev() {
                    pos[j] = (rest % side) as u32;
                    rest /= side;
                }
                cubes.push(DyadicCube::new(k, pos));
            }
        }
        level_offsets.push(cubes.len());
        let parent = cubes
            .iter()
            .map(|c| {
                c.parent().map(|p| {
                    let side = 1usize << p.scale;
                    level_offsets[p.scale as usize]
                        + p.position.iter().fold(0, |acc, &q| acc * side + q as usize)
                })
            })
            .collect();

        let eps_count = (1usize << dim) - 1;
        let block = n.pow(dim as u32);
        let mut decode = vec![None; block];
        let mut encode = vec![0; cubes.len() * eps_count];
        for (sub, slot) in decode.iter_mut().enumerate() {
            let mut idx = vec![0usize; dim];
            let mut rest = sub;
            for j in (0..dim).rev() {
                idx[j] = rest % n;
                rest /= n;
            }
            if idx.iter().all(|&i| i == 0) {
                continue;
            }
            let k = idx
                .iter()
                .filter(|&&i| i > 0)
                .map(|&i| usize::BITS - 1 - i.leading_zeros())
                .max()
                .unwrap();
            let h = 1usize << k;
            let mut code = 0;
            let mut lin = 0;
            for &i in &idx {
                let (e, p) = if i >= h { (0, i - h) } else { (1, i) };
                code = (code << 1) | e;
                lin = lin * h + p;
            }
            let cube_id = level_offsets[k as usize] + lin;
            *slot = Some((cube_id, code));
            encode[cube_id * eps_count + code] = sub;
        }
        Self {
            dim,
            n,
            levels,
            cubes,
            level_offsets,
            parent,
            decode,
            encode,
        }
    }

    pub fn cube_count(&self) -> usize {
        self.cubes.len()
    }

    pub fn eps_count(&self) -> usize {
        (1 << self.dim) - 1
    }

    pub fn cube(&self, id: usize) -> &DyadicCube {
        &self.cubes[id]
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.parent[id]
    }

    pub fn cube_id(&self, cube: &DyadicCube) -> Option<usize> {
        if cube.dim() != self.dim || cube.scale >= self.levels || !cube.valid_for(self.n, self.levels) {
            return None;
        }
        let side = 1usize << cube.scale;
        Some(
            self.level_offsets[cube.scale as usize]
                + cube.position.iter().fold(0, |acc, &q| acc * side + q as usize),
        )
    }
}

/// Index of all product wavelets of a lattice.
///
/// Rectangles and signatures get dense ids (mixed radix over the parameters,
/// parameter 1 most significant) so that per-rectangle quantities can live in
/// flat arrays.
#[derive(Debug)]
pub struct RectangleIndex {
    lattice: ProductLattice,
    params: Vec<ParamLayout>,
    rect_radix: Vec<usize>,
    sig_radix: Vec<usize>,
    param_stride: Vec<usize>,
    rect_count: usize,
    sig_count: usize,
}

impl RectangleIndex {
    /// Shared index for a lattice; errors when a parameter has unequal axes.
    pub fn for_lattice(lattice: &ProductLattice) -> Result<Arc<RectangleIndex>> {
        static CACHE: OnceLock<Mutex<HashMap<ProductLattice, Arc<RectangleIndex>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(ix) = cache.lock().unwrap().get(lattice) {
            return Ok(ix.clone());
        }
        let ix = Arc::new(Self::build(lattice)?);
        cache.lock().unwrap().insert(lattice.clone(), ix.clone());
        Ok(ix)
    }

    fn build(lattice: &ProductLattice) -> Result<Self> {
        let mut params = Vec::new();
        for s in 0..lattice.params() {
            let n = lattice.param_n(s).ok_or_else(|| {
                structural(format!("parameter {s} has unequal axis lengths"))
            })?;
            params.push(ParamLayout::new(lattice.dims()[s], n));
        }
        let t = params.len();
        let mut rect_radix = vec![1; t];
        let mut sig_radix = vec![1; t];
        let mut param_stride = vec![1; t];
        for s in (0..t.saturating_sub(1)).rev() {
            rect_radix[s] = rect_radix[s + 1] * params[s + 1].cube_count();
            sig_radix[s] = sig_radix[s + 1] * params[s + 1].eps_count();
            param_stride[s] = param_stride[s + 1] * lattice.param_len(s + 1);
        }
        let rect_count = params.iter().map(ParamLayout::cube_count).product();
        let sig_count = params.iter().map(ParamLayout::eps_count).product();
        Ok(Self {
            lattice: lattice.clone(),
            params,
            rect_radix,
            sig_radix,
            param_stride,
            rect_count,
            sig_count,
        })
    }

    pub fn lattice(&self) -> &ProductLattice {
        &self.lattice
    }

    pub fn param(&self, s: usize) -> &ParamLayout {
        &self.params[s]
    }

    pub fn rect_count(&self) -> usize {
        self.rect_count
    }

    pub fn sig_count(&self) -> usize {
        self.sig_count
    }

    /// Per-parameter cube ids of a rectangle id.
    pub fn rect_parts(&self, id: usize) -> Vec<usize> {
        self.rect_radix
            .iter()
            .zip(&self.params)
            .map(|(&r, p)| (id / r) % p.cube_count())
            .collect()
    }

    pub fn rect_from_parts(&self, parts: &[usize]) -> usize {
        parts.iter().zip(&self.rect_radix).map(|(p, r)| p * r).sum()
    }

    pub fn rect_radix(&self) -> &[usize] {
        &self.rect_radix
    }

    pub fn rectangle(&self, id: usize) -> DyadicRectangle {
        DyadicRectangle::new(
            self.rect_parts(id)
                .iter()
                .enumerate()
                .map(|(s, &c)| self.params[s].cube(c).clone())
                .collect(),
        )
    }

    pub fn rect_volume(&self, id: usize) -> f64 {
        self.rect_parts(id)
            .iter()
            .enumerate()
            .map(|(s, &c)| self.params[s].cube(c).volume())
            .product()
    }

    /// Dense id of a rectangle at wavelet resolution.
    pub fn rect_id(&self, rect: &DyadicRectangle) -> Result<usize> {
        if rect.cubes.len() != self.params.len() {
            return Err(structural("rectangle has the wrong number of parameters"));
        }
        let mut id = 0;
        for (s, cube) in rect.cubes.iter().enumerate() {
            let c = self.params[s].cube_id(cube).ok_or_else(|| {
                structural(format!(
                    "cube {cube:?} is not a wavelet cube of parameter {s} (finest scale {})",
                    self.params[s].levels.saturating_sub(1)
                ))
            })?;
            id += c * self.rect_radix[s];
        }
        Ok(id)
    }

    pub fn sig_id(&self, sig: &Signature) -> Result<usize> {
        if sig.0.len() != self.params.len() {
            return Err(structural("signature has the wrong number of parameters"));
        }
        let mut id = 0;
        for (s, eps) in sig.0.iter().enumerate() {
            if eps.len() != self.params[s].dim {
                return Err(structural("signature component has the wrong dimension"));
            }
            let code = eps_code(eps).ok_or_else(|| structural(format!("invalid signature {eps:?}")))?;
            id += code * self.sig_radix[s];
        }
        Ok(id)
    }

    pub fn signature(&self, id: usize) -> Signature {
        Signature(
            self.sig_radix
                .iter()
                .zip(&self.params)
                .map(|(&r, p)| eps_from_code((id / r) % p.eps_count(), p.dim))
                .collect(),
        )
    }

    /// Flat coefficient index of a product wavelet.
    pub fn flat_index(&self, rect_id: usize, sig_id: usize) -> usize {
        let mut flat = 0;
        for (s, p) in self.params.iter().enumerate() {
            let c = (rect_id / self.rect_radix[s]) % p.cube_count();
            let e = (sig_id / self.sig_radix[s]) % p.eps_count();
            flat += p.encode[c * p.eps_count() + e] * self.param_stride[s];
        }
        flat
    }

    /// `(rect id, sig id)` of a flat coefficient index, `None` for the scaling part.
    pub fn decode_flat(&self, flat: usize) -> Option<(usize, usize)> {
        let mut rect = 0;
        let mut sig = 0;
        for (s, p) in self.params.iter().enumerate() {
            let sub = (flat / self.param_stride[s]) % self.lattice.param_len(s);
            let (c, e) = p.decode[sub]?;
            rect += c * self.rect_radix[s];
            sig += e * self.sig_radix[s];
        }
        Some((rect, sig))
    }
}

/// Product Haar coefficients of a grid function.
#[derive(Clone, Debug)]
pub struct WaveletCoefficients {
    index: Arc<RectangleIndex>,
    data: Vec<Complex64>,
}

impl PartialEq for WaveletCoefficients {
    fn eq(&self, other: &Self) -> bool {
        self.index.lattice == other.index.lattice && self.data == other.data
    }
}

/// One product wavelet coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub rect: DyadicRectangle,
    pub signature: Signature,
    pub value: Complex64,
}

impl WaveletCoefficients {
    pub fn zeros(lattice: &ProductLattice) -> Result<Self> {
        let index = RectangleIndex::for_lattice(lattice)?;
        Ok(Self {
            data: vec![Complex64::new(0.0, 0.0); lattice.len()],
            index,
        })
    }

    /// Builds coefficients from product-wavelet entries; the scaling part is zero.
    pub fn from_entries(
        lattice: &ProductLattice,
        entries: impl IntoIterator<Item = (DyadicRectangle, Signature, Complex64)>,
    ) -> Result<Self> {
        let mut c = Self::zeros(lattice)?;
        for (rect, sig, v) in entries {
            c.set(&rect, &sig, v)?;
        }
        Ok(c)
    }

    pub fn lattice(&self) -> &ProductLattice {
        &self.index.lattice
    }

    pub fn index(&self) -> &Arc<RectangleIndex> {
        &self.index
    }

    pub fn get(&self, rect: &DyadicRectangle, sig: &Signature) -> Result<Complex64> {
        let r = self.index.rect_id(rect)?;
        let e = self.index.sig_id(sig)?;
        Ok(self.data[self.index.flat_index(r, e)])
    }

    pub fn set(&mut self, rect: &DyadicRectangle, sig: &Signature, value: Complex64) -> Result<()> {
        let r = self.index.rect_id(rect)?;
        let e = self.index.sig_id(sig)?;
        let flat = self.index.flat_index(r, e);
        self.data[flat] = value;
        Ok(())
    }

    pub fn get_by_id(&self, rect_id: usize, sig_id: usize) -> Complex64 {
        self.data[self.index.flat_index(rect_id, sig_id)]
    }

    /// Visits every product wavelet coefficient as `(rect id, sig id, value)`.
    pub fn for_each_wavelet(&self, mut f: impl FnMut(usize, usize, Complex64)) {
        for (flat, &v) in self.data.iter().enumerate() {
            if let Some((r, e)) = self.index.decode_flat(flat) {
                f(r, e, v);
            }
        }
    }

    /// Nonzero product wavelet coefficients in flat order.
    pub fn entries(&self) -> Vec<CoefficientEntry> {
        let mut out = Vec::new();
        self.for_each_wavelet(|r, e, v| {
            if v != Complex64::new(0.0, 0.0) {
                out.push(CoefficientEntry {
                    rect: self.index.rectangle(r),
                    signature: self.index.signature(e),
                    value: v,
                });
            }
        });
        out
    }

    /// `sum_eps |<b, w_R^eps>|^2` for every rectangle id.
    pub fn rectangle_energy(&self) -> Vec<f64> {
        let mut energy = vec![0.0; self.index.rect_count()];
        self.for_each_wavelet(|r, _, v| energy[r] += v.norm_sqr());
        energy
    }

    pub fn wavelet_mass(&self) -> f64 {
        let mut m = 0.0;
        self.for_each_wavelet(|_, _, v| m += v.norm_sqr());
        m
    }

    /// Mass of the stored scaling part (entries where some parameter is coarsest scaling).
    pub fn scaling_mass(&self) -> f64 {
        self.data
            .iter()
            .enumerate()
            .filter(|(flat, _)| self.index.decode_flat(*flat).is_none())
            .map(|(_, v)| v.norm_sqr())
            .sum()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            index: self.index.clone(),
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Zeroes the scaling part and every rectangle for which `keep` is false.
    pub fn retain_rectangles(&self, mut keep: impl FnMut(usize) -> Option<f64>) -> Self {
        let mut out = self.clone();
        for flat in 0..out.data.len() {
            match self.index.decode_flat(flat) {
                Some((r, _)) => match keep(r) {
                    Some(w) => out.data[flat] *= w,
                    None => out.data[flat] = Complex64::new(0.0, 0.0),
                },
                None => out.data[flat] = Complex64::new(0.0, 0.0),
            }
        }
        out
    }

    /// JSON-lines dump of product wavelet coefficients, one object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W, skip_zeros: bool) -> Result<()> {
        let mut err = None;
        self.for_each_wavelet(|r, e, v| {
            if err.is_some() || (skip_zeros && v == Complex64::new(0.0, 0.0)) {
                return;
            }
            let rect = self.index.rectangle(r);
            let line = serde_json::json!({
                "scales": rect.scales(),
                "positions": rect.cubes.iter().map(|c| c.position.clone()).collect::<Vec<_>>(),
                "signature": self.index.signature(e).0,
                "re": v.re,
                "im": v.im,
            });
            if let Err(e) = writeln!(w, "{line}") {
                err = Some(e);
            }
        });
        match err {
            Some(e) => Err(e.into()),
            None => Ok(()),
        }
    }

    pub fn read_jsonl<R: BufRead>(lattice: &ProductLattice, r: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Line {
            scales: Vec<u32>,
            positions: Vec<Vec<u32>>,
            signature: Vec<Vec<u8>>,
            re: f64,
            im: f64,
        }
        let mut c = Self::zeros(lattice)?;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: Line = serde_json::from_str(&line)?;
            if l.scales.len() != l.positions.len() {
                return Err(structural("scales and positions disagree in length"));
            }
            let rect = DyadicRectangle::new(
                l.scales
                    .into_iter()
                    .zip(l.positions)
                    .map(|(k, p)| DyadicCube::new(k, p))
                    .collect(),
            );
            c.set(&rect, &Signature(l.signature), Complex64::new(l.re, l.im))?;
        }
        Ok(c)
    }
}

fn for_each_line(d: usize, n: usize, m: usize, axis: usize, mut f: impl FnMut(usize)) {
    // odometer over [0,m)^d with the coordinate on `axis` fixed to 0
    let mut idx = vec![0usize; d];
    let strides: Vec<usize> = (0..d).map(|j| n.pow((d - 1 - j) as u32)).collect();
    loop {
        f(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
        let mut j = d;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            if j == axis {
                continue;
            }
            idx[j] += 1;
            if idx[j] < m {
                break;
            }
            idx[j] = 0;
        }
        if (0..d).all(|j| j == axis || idx[j] == 0) {
            return;
        }
    }
}

fn haar_block(buf: &mut [Complex64], d: usize, n: usize, inverse: bool, tmp: &mut Vec<Complex64>) {
    let strides: Vec<usize> = (0..d).map(|j| n.pow((d - 1 - j) as u32)).collect();
    let mut sizes = Vec::new();
    let mut m = n;
    while m >= 2 {
        sizes.push(m);
        m /= 2;
    }
    if inverse {
        sizes.reverse();
    }
    tmp.resize(n, Complex64::new(0.0, 0.0));
    for m in sizes {
        let half = m / 2;
        let axes: Vec<usize> = if inverse { (0..d).rev().collect() } else { (0..d).collect() };
        for axis in axes {
            let st = strides[axis];
            for_each_line(d, n, m, axis, |base| {
                if inverse {
                    for i in 0..half {
                        let a = buf[base + i * st];
                        let w = buf[base + (half + i) * st];
                        tmp[2 * i] = (a - w) * FRAC_1_SQRT_2;
                        tmp[2 * i + 1] = (a + w) * FRAC_1_SQRT_2;
                    }
                } else {
                    for i in 0..half {
                        let x0 = buf[base + 2 * i * st];
                        let x1 = buf[base + (2 * i + 1) * st];
                        tmp[i] = (x0 + x1) * FRAC_1_SQRT_2;
                        tmp[half + i] = (x1 - x0) * FRAC_1_SQRT_2;
                    }
                }
                for i in 0..m {
                    buf[base + i * st] = tmp[i];
                }
            });
        }
    }
    let scale = (n.pow(d as u32) as f64).sqrt();
    let factor = if inverse { scale } else { 1.0 / scale };
    for v in buf.iter_mut() {
        *v *= factor;
    }
}

fn haar_in_place(lattice: &ProductLattice, data: &mut [Complex64], inverse: bool) -> Result<()> {
    let strides = lattice.strides();
    let mut block = Vec::new();
    let mut tmp = Vec::new();
    for s in 0..lattice.params() {
        let n = lattice
            .param_n(s)
            .ok_or_else(|| structural(format!("parameter {s} has unequal axis lengths")))?;
        let d = lattice.dims()[s];
        let range = lattice.axis_range(s);
        let inner = if range.end < lattice.axis_count() { strides[range.end - 1] } else { 1 };
        let inner = if range.end == lattice.axis_count() { 1 } else { inner };
        let block_len = lattice.param_len(s);
        let outer = lattice.len() / (block_len * inner);
        block.resize(block_len, Complex64::new(0.0, 0.0));
        for o in 0..outer {
            for i in 0..inner {
                for b in 0..block_len {
                    block[b] = data[(o * block_len + b) * inner + i];
                }
                haar_block(&mut block, d, n, inverse, &mut tmp);
                for b in 0..block_len {
                    data[(o * block_len + b) * inner + i] = block[b];
                }
            }
        }
    }
    Ok(())
}

/// Exact orthonormal product Haar expansion of `f`.
pub fn haar_transform(f: &GridFunction) -> Result<WaveletCoefficients> {
    let mut c = WaveletCoefficients::zeros(f.lattice())?;
    c.data.copy_from_slice(f.values());
    haar_in_place(f.lattice(), &mut c.data, false)?;
    Ok(c)
}

/// Reconstructs the function with the given coefficients.
pub fn haar_inverse(c: &WaveletCoefficients) -> Result<GridFunction> {
    let mut data = c.data.clone();
    haar_in_place(c.lattice(), &mut data, true)?;
    GridFunction::new(c.lattice().clone(), data)
}

/// Explicit product Haar function `w_R^eps`, built from its definition.
///
/// Wavelet factors are allowed down to scale `levels - 1`; scaling factors
/// (`eps = 1`) down to single cells.
pub fn wavelet_function(
    lattice: &ProductLattice,
    rect: &DyadicRectangle,
    sig: &Signature,
) -> Result<GridFunction> {
    if rect.cubes.len() != lattice.params() || sig.0.len() != lattice.params() {
        return Err(structural("rectangle or signature has the wrong number of parameters"));
    }
    let mut per_axis: Vec<(u32, u32, u8, u32)> = Vec::new();
    for s in 0..lattice.params() {
        let cube = &rect.cubes[s];
        let eps = &sig.0[s];
        if cube.dim() != lattice.dims()[s] || eps.len() != lattice.dims()[s] {
            return Err(structural("dimension mismatch in rectangle or signature"));
        }
        for (j, a) in lattice.axis_range(s).enumerate() {
            let levels = lattice.n_axis()[a].trailing_zeros();
            let limit = if eps[j] == 0 { levels.saturating_sub(1) } else { levels };
            if cube.scale > limit || eps[j] > 1 || cube.position[j] >= (1 << cube.scale) {
                return Err(structural(format!("cube {cube:?} is finer than the lattice")));
            }
            per_axis.push((cube.scale, cube.position[j], eps[j], levels));
        }
    }
    Ok(GridFunction::from_fn(lattice, |x| {
        let mut v = 1.0;
        for (&xi, &(k, p, e, levels)) in x.iter().zip(&per_axis) {
            let xi = xi as u32;
            if xi >> (levels - k) != p {
                return Complex64::new(0.0, 0.0);
            }
            let amp = (k as f64 / 2.0).exp2();
            v *= if e == 1 {
                amp
            } else if (xi >> (levels - k - 1)) & 1 == 0 {
                -amp
            } else {
                amp
            };
        }
        Complex64::new(v, 0.0)
    }))
}

/// Wavelet projection of `b` onto the rectangles in `collection` (all signatures).
pub fn project_onto_collection(
    b: &GridFunction,
    collection: &[DyadicRectangle],
) -> Result<GridFunction> {
    let c = haar_transform(b)?;
    let ids: HashSet<usize> = collection
        .iter()
        .map(|r| c.index.rect_id(r))
        .collect::<Result<_>>()?;
    haar_inverse(&c.retain_rectangles(|r| ids.contains(&r).then_some(1.0)))
}

/// The part of `f` carried by wavelets strictly coarser than `J`, seen on `J`.
///
/// On `J` the sum `sum_{I strictly containing J} <f, w_I> w_I`, together with
/// the coarsest scaling term, collapses to `<f, w^1_J> w^1_J`, i.e. the mean of
/// `f` over `J` times the indicator of `J`. `J` may be as fine as one cell.
pub fn scaling_projection(f: &GridFunction, j: &DyadicRectangle) -> Result<GridFunction> {
    let lattice = f.lattice();
    j.validate(lattice)?;
    let cells = j.cell_box(lattice);
    let inside = |x: &[usize]| cells.iter().zip(x).all(|(r, c)| r.contains(c));
    let mut sum = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for (i, v) in f.values().iter().enumerate() {
        if inside(&lattice.unravel(i)) {
            sum += v;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    Ok(GridFunction::from_fn(lattice, |x| {
        if inside(x) {
            mean
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    }

    fn random_fn(lat: &ProductLattice, seed: u64) -> GridFunction {
        let mut s = seed;
        GridFunction::from_fn(lat, |_| Complex64::new(lcg(&mut s), lcg(&mut s)))
    }

    #[test]
    fn signature_order_is_lexicographic() {
        assert_eq!(signatures(1), vec![vec![0]]);
        assert_eq!(signatures(2), vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(signatures(3).len(), 7);
        assert_eq!(Signature::all(&[2, 1]).len(), 3);
    }

    #[test]
    fn layout_is_a_bijection() {
        let lat = ProductLattice::uniform(&[2, 1], 8).unwrap();
        let ix = RectangleIndex::for_lattice(&lat).unwrap();
        let mut seen = HashSet::new();
        for r in 0..ix.rect_count() {
            for e in 0..ix.sig_count() {
                let flat = ix.flat_index(r, e);
                assert_eq!(ix.decode_flat(flat), Some((r, e)));
                assert!(seen.insert(flat));
            }
        }
        // the rest is the scaling part
        let scaling = lat.len() - seen.len();
        assert_eq!(scaling, 8 + 64 - 1);
    }

    #[test]
    fn unit_wavelet_has_single_coefficient() {
        let lat = ProductLattice::uniform(&[2, 1], 8).unwrap();
        let rect = DyadicRectangle::unit(&[2, 1]);
        let sig = Signature(vec![vec![0, 1], vec![0]]);
        let w = wavelet_function(&lat, &rect, &sig).unwrap();
        assert!((w.norm2() - 1.0).abs() < 1e-14);
        let c = haar_transform(&w).unwrap();
        assert!((c.get(&rect, &sig).unwrap() - 1.0).norm() < 1e-13);
        assert!((c.wavelet_mass() - 1.0).abs() < 1e-13);
        assert!(c.scaling_mass() < 1e-26);
    }

    #[test]
    fn constant_lives_in_scaling_part() {
        let lat = ProductLattice::uniform(&[1, 2], 8).unwrap();
        let f = GridFunction::constant(&lat, Complex64::new(2.0, 1.0));
        let c = haar_transform(&f).unwrap();
        assert!(c.wavelet_mass() < 1e-24);
        assert!((c.scaling_mass() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn unequal_axes_are_rejected() {
        let lat = ProductLattice::new(vec![2], vec![8, 16]).unwrap();
        assert!(haar_transform(&GridFunction::zeros(&lat)).is_err());
    }

    #[test]
    fn inverse_rejects_too_fine_rectangle() {
        let lat = ProductLattice::uniform(&[1], 8).unwrap();
        let rect = DyadicRectangle::new(vec![DyadicCube::new(3, vec![0])]);
        let r = WaveletCoefficients::from_entries(&lat, [(rect, Signature(vec![vec![0]]), Complex64::new(1.0, 0.0))]);
        assert!(matches!(r, Err(crate::Error::Structural(_))));
    }

    #[test]
    fn round_trip_and_parseval() {
        let lat = ProductLattice::new(vec![1, 2], vec![16, 8, 8]).unwrap();
        let f = random_fn(&lat, 3);
        let c = haar_transform(&f).unwrap();
        let mass = c.wavelet_mass() + c.scaling_mass();
        assert!((mass - f.norm2().powi(2)).abs() < 1e-12);
        let g = haar_inverse(&c).unwrap();
        assert!(g.max_abs_diff(&f).unwrap() < 1e-12);
    }

    #[test]
    fn empty_and_full_projection() {
        let lat = ProductLattice::uniform(&[1, 1], 8).unwrap();
        let f = random_fn(&lat, 9);
        let zero = project_onto_collection(&f, &[]).unwrap();
        assert!(zero.norm2() < 1e-14);
        let ix = RectangleIndex::for_lattice(&lat).unwrap();
        let all: Vec<_> = (0..ix.rect_count()).map(|r| ix.rectangle(r)).collect();
        let p = project_onto_collection(&f, &all).unwrap();
        // b minus its scaling part
        let c = haar_transform(&f).unwrap();
        let mut s = c.clone();
        for flat in 0..s.data.len() {
            if c.index().decode_flat(flat).is_some() {
                s.data[flat] = Complex64::new(0.0, 0.0);
            }
        }
        let expected = f.sub(&haar_inverse(&s).unwrap()).unwrap();
        assert!(p.max_abs_diff(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn scaling_projection_edge_cases() {
        let lat = ProductLattice::uniform(&[1], 16).unwrap();
        let f = GridFunction::constant(&lat, Complex64::new(3.0, 0.0));
        let j = DyadicRectangle::new(vec![DyadicCube::new(2, vec![1])]);
        let p = scaling_projection(&f, &j).unwrap();
        for (i, v) in p.values().iter().enumerate() {
            let expect = if (4..8).contains(&i) { 3.0 } else { 0.0 };
            assert!((v.re - expect).abs() < 1e-15);
        }
        let sig = Signature(vec![vec![0]]);
        let w = wavelet_function(&lat, &j, &sig).unwrap();
        assert!(scaling_projection(&w, &j).unwrap().norm2() < 1e-15);
    }

    #[test]
    fn jsonl_round_trip() {
        let lat = ProductLattice::uniform(&[1, 1], 8).unwrap();
        let f = random_fn(&lat, 11);
        let c = haar_transform(&f).unwrap();
        let mut buf = Vec::new();
        c.write_jsonl(&mut buf, false).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 49);
        let back = WaveletCoefficients::read_jsonl(&lat, &buf[..]).unwrap();
        assert!((back.wavelet_mass() - c.wavelet_mass()).abs() < 1e-14);
        assert_eq!(back.scaling_mass(), 0.0);
    }
}
