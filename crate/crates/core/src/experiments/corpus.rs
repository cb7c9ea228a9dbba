use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bmo::{bmo_minus_one_with, product_bmo_lower};
use crate::dyadic::{haar_inverse, signatures, DyadicCube, DyadicRectangle, Signature, WaveletCoefficients};
use crate::error::Result;
use crate::lattice::{GridFunction, ProductLattice};
use crate::Complex64;

use super::{stream_rng, streams, CoefficientLaw, ExperimentConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    SingleWavelet,
    /// random coefficients on the rectangles inside one rectangle
    Cluster,
    /// equal-size coefficients on every rectangle of one total scale; each
    /// fixed cube sees few of them, so the BMO₋₁ norm is comparatively small
    HyperbolicCross,
    Random,
}

impl MemberKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SingleWavelet => "single_wavelet",
            Self::Cluster => "cluster",
            Self::HyperbolicCross => "hyperbolic_cross",
            Self::Random => "random",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CorpusMember {
    pub id: usize,
    pub kind: MemberKind,
    /// the normalized symbol
    pub b: GridFunction,
    pub coefficients: WaveletCoefficients,
    /// factor applied to the raw draw
    pub scale: f64,
    /// `product_bmo_lower` re-estimated on the normalized symbol
    pub proxy: f64,
    /// BMO₋₁ estimate of the normalized symbol (`t >= 2`)
    pub delta_minus_one: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SkippedDraw {
    pub id: usize,
    pub kind: MemberKind,
    pub reason: String,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub lattice: ProductLattice,
    pub members: Vec<CorpusMember>,
    pub skipped: Vec<SkippedDraw>,
}

/// A draw as coefficients, independent of the lattice size.
pub(crate) struct Draft {
    pub id: usize,
    pub kind: MemberKind,
    pub entries: Vec<(DyadicRectangle, Signature, f64)>,
}

/// The corpus on the lattice of `config.n`.
pub fn generate_corpus(config: &ExperimentConfig) -> Result<Corpus> {
    generate_corpus_on(config, &config.lattice()?)
}

/// The corpus realized on `lattice`. The draws depend only on the
/// configuration, so the same symbols appear at every resolution that
/// resolves `config.corpus_max_scale()`.
pub fn generate_corpus_on(config: &ExperimentConfig, lattice: &ProductLattice) -> Result<Corpus> {
    let budget = config.search_budget();
    let mut members = Vec::new();
    let mut skipped = Vec::new();
    for draft in drafts(config) {
        let c = WaveletCoefficients::from_entries(
            lattice,
            draft.entries.iter().map(|(r, e, v)| (r.clone(), e.clone(), Complex64::new(*v, 0.0))),
        )?;
        let raw = product_bmo_lower(&c, &budget)?.value;
        if !(raw > 0.0 && raw.is_finite()) {
            eprintln!("corpus: skipping draw {} ({}): zero symbol", draft.id, draft.kind.as_str());
            skipped.push(SkippedDraw {
                id: draft.id,
                kind: draft.kind,
                reason: "zero symbol".into(),
            });
            continue;
        }
        let scale = 1.0 / raw;
        let c = c.scale(Complex64::new(scale, 0.0));
        let proxy = product_bmo_lower(&c, &budget)?.value;
        let delta_minus_one = if lattice.params() >= 2 {
            Some(bmo_minus_one_with(&c, &budget)?.value)
        } else {
            None
        };
        members.push(CorpusMember {
            id: draft.id,
            kind: draft.kind,
            b: haar_inverse(&c)?,
            coefficients: c,
            scale,
            proxy,
            delta_minus_one,
        });
    }
    Ok(Corpus {
        lattice: lattice.clone(),
        members,
        skipped,
    })
}

pub(crate) fn drafts(config: &ExperimentConfig) -> Vec<Draft> {
    let k = config.corpus_max_scale();
    let dims = &config.dims;
    let structured = [
        MemberKind::SingleWavelet,
        MemberKind::SingleWavelet,
        MemberKind::Cluster,
        MemberKind::Cluster,
        MemberKind::HyperbolicCross,
        MemberKind::HyperbolicCross,
    ];
    (0..config.corpus.count)
        .map(|id| {
            let kind = if config.corpus.structured && id < structured.len() {
                structured[id]
            } else {
                MemberKind::Random
            };
            let mut rng = stream_rng(config.seed, streams::CORPUS, id as u64);
            let entries = match kind {
                MemberKind::SingleWavelet => {
                    let r = random_rect(dims, k, &mut rng);
                    vec![(r, random_signature(dims, &mut rng), 1.0)]
                }
                MemberKind::Cluster => {
                    let j = random_rect(dims, k.saturating_sub(1), &mut rng);
                    let rects = rects_inside(&j, k);
                    dense_draw(&rects, dims, config, &mut rng)
                }
                MemberKind::HyperbolicCross => {
                    let level = if id % 2 == 0 { k } else { k.saturating_sub(1) };
                    hyperbolic_cross(dims, level)
                        .into_iter()
                        .map(|r| {
                            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                            (r, random_signature(dims, &mut rng), sign)
                        })
                        .collect()
                }
                MemberKind::Random => {
                    let rects = all_rects(dims, k);
                    dense_draw(&rects, dims, config, &mut rng)
                }
            };
            Draft { id, kind, entries }
        })
        .collect()
}

fn draw(law: CoefficientLaw, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        CoefficientLaw::Gaussian => rng.sample(StandardNormal),
        CoefficientLaw::Rademacher => {
            if rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            }
        }
        CoefficientLaw::Uniform => rng.random_range(-1.0..1.0),
    }
}

fn dense_draw(
    rects: &[DyadicRectangle],
    dims: &[usize],
    config: &ExperimentConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<(DyadicRectangle, Signature, f64)> {
    let sigs = Signature::all(dims);
    let mut out = Vec::new();
    for r in rects {
        for e in &sigs {
            if rng.random_bool(config.corpus.density) {
                out.push((r.clone(), e.clone(), draw(config.corpus.law, rng)));
            }
        }
    }
    out
}

fn random_cube(d: usize, max_scale: u32, rng: &mut ChaCha8Rng) -> DyadicCube {
    let scale = rng.random_range(0..=max_scale);
    DyadicCube::new(scale, (0..d).map(|_| rng.random_range(0..1u32 << scale)).collect())
}

fn random_rect(dims: &[usize], max_scale: u32, rng: &mut ChaCha8Rng) -> DyadicRectangle {
    DyadicRectangle::new(dims.iter().map(|&d| random_cube(d, max_scale, rng)).collect())
}

fn random_signature(dims: &[usize], rng: &mut ChaCha8Rng) -> Signature {
    Signature(
        dims.iter()
            .map(|&d| {
                let all = signatures(d);
                all[rng.random_range(0..all.len())].clone()
            })
            .collect(),
    )
}

/// All cubes of dimension `d` at exactly `scale`, positions in row-major order.
fn cubes_at(d: usize, scale: u32) -> Vec<DyadicCube> {
    let side = 1u32 << scale;
    (0..(side as usize).pow(d as u32))
        .map(|mut i| {
            let mut pos = vec![0u32; d];
            for p in pos.iter_mut().rev() {
                *p = (i % side as usize) as u32;
                i /= side as usize;
            }
            DyadicCube::new(scale, pos)
        })
        .collect()
}

fn product(per: Vec<Vec<DyadicCube>>) -> Vec<DyadicRectangle> {
    let mut out = vec![Vec::new()];
    for options in per {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<DyadicCube>| {
                options.iter().map(move |q| {
                    let mut p = prefix.clone();
                    p.push(q.clone());
                    p
                })
            })
            .collect();
    }
    out.into_iter().map(DyadicRectangle::new).collect()
}

fn all_rects(dims: &[usize], max_scale: u32) -> Vec<DyadicRectangle> {
    product(
        dims.iter()
            .map(|&d| (0..=max_scale).flat_map(|j| cubes_at(d, j)).collect())
            .collect(),
    )
}

fn rects_inside(j: &DyadicRectangle, max_scale: u32) -> Vec<DyadicRectangle> {
    all_rects(&j.cubes.iter().map(DyadicCube::dim).collect::<Vec<_>>(), max_scale)
        .into_iter()
        .filter(|r| j.contains(r))
        .collect()
}

/// Every rectangle whose scales add up to `level`.
fn hyperbolic_cross(dims: &[usize], level: u32) -> Vec<DyadicRectangle> {
    let t = dims.len();
    let mut out = Vec::new();
    let mut scales = vec![0u32; t];
    loop {
        if scales.iter().sum::<u32>() == level {
            out.extend(product(
                dims.iter().zip(&scales).map(|(&d, &j)| cubes_at(d, j)).collect(),
            ));
        }
        let mut s = t;
        loop {
            if s == 0 {
                return out;
            }
            s -= 1;
            scales[s] += 1;
            if scales[s] <= level {
                break;
            }
            scales[s] = 0;
        }
    }
}
