//! Reproducible experiment drivers: corpus generation, the norm-equivalence
//! sweep, the test-function split and the cone/enlargement runners.
//!
//! Every run is determined by an [`ExperimentConfig`]; all randomness is drawn
//! from ChaCha8 streams keyed by the single master seed.

mod corpus;
mod runners;
mod sweep;
mod test_function;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bmo::SearchBudget;
use crate::error::{Error, Result};
use crate::lattice::ProductLattice;
use crate::multipliers::{hilbert_symbol, riesz_symbol, smoothed_cone_symbol, Cone};
use crate::symbol_family::SymbolFamily;

pub use corpus::{generate_corpus, generate_corpus_on, Corpus, CorpusMember, MemberKind, SkippedDraw};
pub use runners::{cone_approx, journe_experiment, ConeApproxReport, JourneReport, ParamApprox};
pub use sweep::{equivalence_sweep, ConeDiagnostics, Stability, SweepRecord, SweepReport, SweepSummary};
pub use test_function::{test_function_experiment, three_term_split, TestFunctionReport, ThreeTerms};

/// Tolerance of the family criterion checks run before a sweep.
pub const CHECK_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `{R_1, ..., R_d}`, or `{H}` when `d = 1`
    Riesz,
    /// smoothed cones of aperture `cone_aperture` around `e_1, -e_1, e_2, ...`
    Cone,
}

impl FamilyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Riesz => "riesz",
            Self::Cone => "cone",
        }
    }
}

impl FromStr for FamilyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riesz" => Ok(Self::Riesz),
            "cone" => Ok(Self::Cone),
            _ => Err(Error::Format(format!("unknown family `{s}` (riesz|cone)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientLaw {
    Gaussian,
    Rademacher,
    Uniform,
}

impl CoefficientLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Rademacher => "rademacher",
            Self::Uniform => "uniform",
        }
    }
}

impl FromStr for CoefficientLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            "uniform" => Ok(Self::Uniform),
            _ => Err(Error::Format(format!("unknown coefficient law `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl OutputFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Json => "json",
            Self::Csv => "csv",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::Format(format!("unknown format `{s}` (json|csv)"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CorpusSpec {
    pub count: usize,
    pub law: CoefficientLaw,
    /// probability that a wavelet coefficient is drawn at all
    pub density: f64,
    /// finest wavelet scale used; defaults to the finest one available at the
    /// coarsest resolution
    pub max_scale: Option<u32>,
    /// start with single wavelets, clusters and hyperbolic crosses
    pub structured: bool,
}

/// Everything a run depends on. Read from `key = value` lines; `#` starts a
/// comment. Keys not given keep their defaults.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    pub n: usize,
    /// lattice sizes compared by the sweep
    pub resolutions: Vec<usize>,
    pub families: Vec<FamilyKind>,
    pub corpus: CorpusSpec,
    pub kappa: f64,
    pub epsilon: f64,
    pub tau: f64,
    /// aperture side of the inner cones `D_s`
    pub apertures: Vec<f64>,
    pub cone_aperture: f64,
    pub cone_count: usize,
    pub degree_cap: usize,
    pub derivative_order: usize,
    pub seed: u64,
    pub budget: SearchBudget,
    pub norm_tol: f64,
    pub norm_max_iter: usize,
    pub cone_tries: usize,
    pub journe_a: f64,
    pub damping: f64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: vec![2, 2],
            n: 16,
            resolutions: vec![8, 16],
            families: vec![FamilyKind::Riesz],
            corpus: CorpusSpec {
                count: 30,
                law: CoefficientLaw::Gaussian,
                density: 0.5,
                max_scale: None,
                structured: true,
            },
            kappa: 0.5,
            epsilon: 0.05,
            tau: 0.5,
            apertures: vec![1.0],
            cone_aperture: 2.0,
            cone_count: 2,
            degree_cap: 24,
            derivative_order: 1,
            seed: 0,
            budget: SearchBudget::default(),
            norm_tol: 1e-3,
            norm_max_iter: 60,
            cone_tries: 20,
            journe_a: 1.0,
            damping: 1.0,
            out: None,
            format: OutputFormat::Json,
        }
    }
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, T::Err> {
    v.split(',').map(|x| x.trim().parse()).collect()
}

fn bad(key: &str, value: &str) -> Error {
    Error::Format(format!("bad value `{value}` for `{key}`"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: expected key = value", no + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key. Single values given for per-parameter lists are
    /// broadcast when the configuration is validated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = || bad(key, value);
        match key {
            "dims" => self.dims = list(value).map_err(|_| e())?,
            "n" => self.n = value.parse().map_err(|_| e())?,
            "resolutions" => self.resolutions = list(value).map_err(|_| e())?,
            "families" | "family" => self.families = list(value)?,
            "count" | "corpus_count" => self.corpus.count = value.parse().map_err(|_| e())?,
            "law" | "coefficient_law" => self.corpus.law = value.parse()?,
            "density" => self.corpus.density = value.parse().map_err(|_| e())?,
            "max_scale" => self.corpus.max_scale = Some(value.parse().map_err(|_| e())?),
            "structured" => self.corpus.structured = value.parse().map_err(|_| e())?,
            "kappa" => self.kappa = value.parse().map_err(|_| e())?,
            "epsilon" => self.epsilon = value.parse().map_err(|_| e())?,
            "tau" => self.tau = value.parse().map_err(|_| e())?,
            "apertures" | "aperture" => self.apertures = list(value).map_err(|_| e())?,
            "cone_aperture" => self.cone_aperture = value.parse().map_err(|_| e())?,
            "cone_count" => self.cone_count = value.parse().map_err(|_| e())?,
            "degree_cap" => self.degree_cap = value.parse().map_err(|_| e())?,
            "derivative_order" => self.derivative_order = value.parse().map_err(|_| e())?,
            "seed" => self.seed = value.parse().map_err(|_| e())?,
            "restarts" => self.budget.restarts = value.parse().map_err(|_| e())?,
            "max_rects" => self.budget.max_rects = value.parse().map_err(|_| e())?,
            "top_k" => self.budget.top_k = value.parse().map_err(|_| e())?,
            "include_minus_one" => self.budget.include_minus_one = value.parse().map_err(|_| e())?,
            "norm_tol" => self.norm_tol = value.parse().map_err(|_| e())?,
            "norm_max_iter" => self.norm_max_iter = value.parse().map_err(|_| e())?,
            "cone_tries" => self.cone_tries = value.parse().map_err(|_| e())?,
            "journe_a" => self.journe_a = value.parse().map_err(|_| e())?,
            "damping" => self.damping = value.parse().map_err(|_| e())?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            _ => return Err(Error::Format(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Checks ranges and broadcasts per-parameter lists of length one.
    /// A checked copy with per-parameter lists broadcast; every experiment
    /// runs on one.
    pub fn validated(&self) -> Result<Self> {
        let mut c = self.clone();
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&mut self) -> Result<()> {
        let t = self.dims.len();
        if t == 0 {
            return Err(Error::Structural("dims must list at least one parameter".into()));
        }
        for (name, v) in [("families", self.families.len()), ("apertures", self.apertures.len())] {
            if v != t && v != 1 {
                return Err(Error::Structural(format!("{name} needs 1 or {t} entries, has {v}")));
            }
        }
        if self.families.len() == 1 {
            self.families = vec![self.families[0]; t];
        }
        if self.apertures.len() == 1 {
            self.apertures = vec![self.apertures[0]; t];
        }
        if self.resolutions.is_empty() {
            self.resolutions = vec![self.n];
        }
        for &n in self.resolutions.iter().chain([&self.n]) {
            ProductLattice::uniform(&self.dims, n)?;
        }
        if self.budget.restarts == 0 || self.budget.top_k == 0 || self.budget.max_rects == 0 {
            return Err(Error::Domain("restarts, top_k and max_rects must be positive".into()));
        }
        let positive = [
            ("kappa", self.kappa),
            ("epsilon", self.epsilon),
            ("tau", self.tau),
            ("cone_aperture", self.cone_aperture),
            ("norm_tol", self.norm_tol),
            ("journe_a", self.journe_a),
        ];
        for (name, v) in positive.into_iter().chain(self.apertures.iter().map(|&a| ("apertures", a))) {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.corpus.density) {
            return Err(Error::Domain("density must lie in [0, 1]".into()));
        }
        if !(self.damping >= 0.0) {
            return Err(Error::Domain("damping exponent must be nonnegative".into()));
        }
        if self.derivative_order > 2 {
            return Err(Error::Domain("derivative_order must be at most 2".into()));
        }
        if self.norm_max_iter == 0 || self.cone_tries == 0 || self.cone_count == 0 {
            return Err(Error::Domain("iteration, try and cone counts must be positive".into()));
        }
        if let Some(k) = self.corpus.max_scale {
            let finest = self.min_resolution().trailing_zeros();
            if k >= finest {
                return Err(Error::Domain(format!(
                    "max_scale {k} has no wavelets at resolution {}",
                    self.min_resolution()
                )));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` text; parsing it gives the same configuration.
    pub fn to_text(&self) -> String {
        fn join<T: ToString>(v: &[T]) -> String {
            v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("dims", join(&self.dims));
        kv("n", self.n.to_string());
        kv("resolutions", join(&self.resolutions));
        kv("families", self.families.iter().map(|f| f.as_str()).collect::<Vec<_>>().join(","));
        kv("count", self.corpus.count.to_string());
        kv("law", self.corpus.law.as_str().into());
        kv("density", self.corpus.density.to_string());
        if let Some(k) = self.corpus.max_scale {
            kv("max_scale", k.to_string());
        }
        kv("structured", self.corpus.structured.to_string());
        kv("kappa", self.kappa.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("tau", self.tau.to_string());
        kv("apertures", join(&self.apertures));
        kv("cone_aperture", self.cone_aperture.to_string());
        kv("cone_count", self.cone_count.to_string());
        kv("degree_cap", self.degree_cap.to_string());
        kv("derivative_order", self.derivative_order.to_string());
        kv("seed", self.seed.to_string());
        kv("restarts", self.budget.restarts.to_string());
        kv("max_rects", self.budget.max_rects.to_string());
        kv("top_k", self.budget.top_k.to_string());
        kv("include_minus_one", self.budget.include_minus_one.to_string());
        kv("norm_tol", self.norm_tol.to_string());
        kv("norm_max_iter", self.norm_max_iter.to_string());
        kv("cone_tries", self.cone_tries.to_string());
        kv("journe_a", self.journe_a.to_string());
        kv("damping", self.damping.to_string());
        if let Some(p) = &self.out {
            kv("out", p.display().to_string());
        }
        kv("format", self.format.as_str().into());
        s
    }

    /// The search budget with its seed drawn from the master seed.
    pub fn search_budget(&self) -> SearchBudget {
        SearchBudget {
            seed: stream_seed(self.seed, streams::BUDGET, 0),
            ..self.budget.clone()
        }
    }

    pub fn lattice(&self) -> Result<ProductLattice> {
        ProductLattice::uniform(&self.dims, self.n)
    }

    pub fn min_resolution(&self) -> usize {
        self.resolutions.iter().copied().chain([self.n]).min().unwrap_or(self.n)
    }

    /// Finest wavelet scale drawn by the corpus.
    pub fn corpus_max_scale(&self) -> u32 {
        self.corpus
            .max_scale
            .unwrap_or(self.min_resolution().trailing_zeros() - 1)
    }

    /// The operator family of parameter `s`.
    pub fn family(&self, s: usize) -> Result<SymbolFamily> {
        build_family(self.families[s], s, self.dims[s], self)
    }

    /// The fixed-aperture cone family of parameter `s`.
    pub fn cone_family(&self, s: usize) -> Result<SymbolFamily> {
        build_family(FamilyKind::Cone, s, self.dims[s], self)
    }
}

fn build_family(kind: FamilyKind, s: usize, d: usize, c: &ExperimentConfig) -> Result<SymbolFamily> {
    let members = match kind {
        FamilyKind::Riesz if d == 1 => vec![hilbert_symbol()],
        FamilyKind::Riesz => (1..=d).map(|j| riesz_symbol(d, j)).collect::<Result<_>>()?,
        FamilyKind::Cone => (0..c.cone_count)
            .map(|k| {
                let mut dir = vec![0.0; d];
                dir[(k / 2) % d] = if k % 2 == 0 { 1.0 } else { -1.0 };
                smoothed_cone_symbol(&Cone::new(&dir, c.cone_aperture)?, c.tau, 2)
            })
            .collect::<Result<_>>()?,
    };
    SymbolFamily::with_default_samples(s, d, members)
}

/// A generator for one purpose (`stream`) and item (`index`) of a run.
pub(crate) fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream << 32 | index);
    rng
}

pub(crate) fn stream_seed(seed: u64, stream: u64, index: u64) -> u64 {
    stream_rng(seed, stream, index).next_u64()
}

pub(crate) mod streams {
    pub const CORPUS: u64 = 1;
    pub const NORMS: u64 = 2;
    pub const CONES: u64 = 3;
    pub const BUDGET: u64 = 4;
}
