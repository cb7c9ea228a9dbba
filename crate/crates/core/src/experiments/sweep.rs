use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::bmo::rectangular_bmo;
use crate::commutator::{select_cones, sup_commutator_norm, SupNorm};
use crate::error::Result;
use crate::lattice::ProductLattice;
use crate::symbol_family::{
    check_antipodal_separation, check_point_separation, check_tangential_derivatives, close_family, CheckResult,
    SymbolFamily,
};

use super::corpus::{generate_corpus_on, MemberKind, SkippedDraw};
use super::test_function::normalized_beta;
use super::{stream_seed, streams, ExperimentConfig, OutputFormat, CHECK_TOL};

#[derive(Clone, Debug, Serialize)]
pub struct ConeDiagnostics {
    pub success: bool,
    pub tries: usize,
    pub t_d_norm: f64,
    pub h_minus_t_l4: f64,
    pub h_minus_p_l2: f64,
}

/// One symbol at one resolution. Ratios are the sup norms divided by
/// `product_lower`.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    pub symbol_id: usize,
    pub kind: MemberKind,
    pub n: usize,
    pub rect: f64,
    pub minus_one: Option<f64>,
    pub product_lower: f64,
    pub family_sup: f64,
    pub family_argmax: Vec<usize>,
    /// per choice vector, lexicographic order
    pub family_norms: Vec<f64>,
    pub family_converged: bool,
    pub cone_sup: f64,
    pub cone_argmax: Vec<usize>,
    pub cone_norms: Vec<f64>,
    pub cone_converged: bool,
    pub cone_selection: ConeDiagnostics,
    pub family_ratio: f64,
    pub cone_ratio: f64,
    /// `family_sup > 0`
    pub positive: bool,
}

impl SweepRecord {
    pub fn converged(&self) -> bool {
        self.family_converged && self.cone_converged
    }
}

/// Extremes of the ratios at one resolution: `c1 = min`, `c2 = max`.
#[derive(Clone, Debug, Serialize)]
pub struct SweepSummary {
    pub n: usize,
    pub records: usize,
    pub c1: f64,
    pub c2: f64,
    pub spread: f64,
    pub cone_c1: f64,
    pub cone_c2: f64,
    pub cone_spread: f64,
    pub all_positive: bool,
    pub nonconverged: usize,
}

/// `spread = c2 / c1` at the finest resolution against the coarsest.
#[derive(Clone, Debug, Serialize)]
pub struct Stability {
    pub coarse_n: usize,
    pub fine_n: usize,
    pub coarse_spread: f64,
    pub fine_spread: f64,
    pub factor: f64,
    pub within_factor_2: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub config: String,
    pub family_checks: Vec<Vec<CheckResult>>,
    pub families_pass: bool,
    pub skipped: Vec<SkippedDraw>,
    pub records: Vec<SweepRecord>,
    pub summaries: Vec<SweepSummary>,
    pub stability: Option<Stability>,
}

fn summarize(n: usize, records: &[&SweepRecord]) -> SweepSummary {
    let fold = |f: fn(&SweepRecord) -> f64| {
        records
            .iter()
            .map(|r| f(r))
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (c1, c2) = fold(|r| r.family_ratio);
    let (cone_c1, cone_c2) = fold(|r| r.cone_ratio);
    SweepSummary {
        n,
        records: records.len(),
        c1,
        c2,
        spread: c2 / c1,
        cone_c1,
        cone_c2,
        cone_spread: cone_c2 / cone_c1,
        all_positive: records.iter().all(|r| r.positive),
        nonconverged: records.iter().filter(|r| !r.converged()).count(),
    }
}

fn norms(s: &SupNorm) -> Vec<f64> {
    s.per_choice.iter().map(|(_, e)| e.value).collect()
}

/// Runs the corpus at every configured resolution against the configured
/// families and the fixed-aperture cone families.
///
/// Families failing the criterion checks are reported and the sweep goes on.
/// Records are computed one symbol at a time in id order.
pub fn equivalence_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    let config = &config.validated()?;
    let t = config.dims.len();
    let families: Vec<SymbolFamily> = (0..t).map(|s| config.family(s)).collect::<Result<_>>()?;
    let cones: Vec<SymbolFamily> = (0..t).map(|s| config.cone_family(s)).collect::<Result<_>>()?;
    let family_checks: Vec<Vec<CheckResult>> = families
        .iter()
        .map(|f| {
            let closed = close_family(f);
            vec![
                check_point_separation(&closed, CHECK_TOL),
                check_antipodal_separation(&closed, CHECK_TOL),
                check_tangential_derivatives(&closed, CHECK_TOL),
            ]
        })
        .collect();
    let families_pass = family_checks.iter().flatten().all(|c| c.pass);
    if !families_pass {
        eprintln!("sweep: operator families fail the criterion checks; results are flagged");
    }

    let mut resolutions = config.resolutions.clone();
    resolutions.sort_unstable();
    resolutions.dedup();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for &n in &resolutions {
        let lattice = ProductLattice::uniform(&config.dims, n)?;
        let corpus = generate_corpus_on(config, &lattice)?;
        if skipped.is_empty() {
            skipped = corpus.skipped.clone();
        }
        for m in &corpus.members {
            let id = m.id as u64;
            let seed = stream_seed(config.seed, streams::NORMS, id);
            let fam = sup_commutator_norm(&m.b, &families, config.norm_tol, config.norm_max_iter, seed)?;
            let cone = sup_commutator_norm(&m.b, &cones, config.norm_tol, config.norm_max_iter, seed)?;
            let (_, beta, _) = normalized_beta(&m.b, config)?;
            let sel = select_cones(
                &beta,
                config.kappa,
                &config.apertures,
                stream_seed(config.seed, streams::CONES, id),
                config.cone_tries,
            )?;
            records.push(SweepRecord {
                symbol_id: m.id,
                kind: m.kind,
                n,
                rect: rectangular_bmo(&m.coefficients),
                minus_one: m.delta_minus_one,
                product_lower: m.proxy,
                family_ratio: fam.value / m.proxy,
                cone_ratio: cone.value / m.proxy,
                positive: fam.value > 0.0,
                family_sup: fam.value,
                family_norms: norms(&fam),
                family_argmax: fam.argmax.clone(),
                family_converged: fam.converged,
                cone_sup: cone.value,
                cone_norms: norms(&cone),
                cone_argmax: cone.argmax.clone(),
                cone_converged: cone.converged,
                cone_selection: ConeDiagnostics {
                    success: sel.success,
                    tries: sel.tries,
                    t_d_norm: sel.quantities.t_d_norm,
                    h_minus_t_l4: sel.quantities.h_minus_t_l4,
                    h_minus_p_l2: sel.quantities.h_minus_p_l2,
                },
            });
        }
    }
    let summaries: Vec<SweepSummary> = resolutions
        .iter()
        .map(|&n| summarize(n, &records.iter().filter(|r| r.n == n).collect::<Vec<_>>()))
        .collect();
    let stability = (summaries.len() >= 2).then(|| {
        let (a, b) = (&summaries[0], &summaries[summaries.len() - 1]);
        let factor = b.spread / a.spread;
        Stability {
            coarse_n: a.n,
            fine_n: b.n,
            coarse_spread: a.spread,
            fine_spread: b.spread,
            factor,
            within_factor_2: (0.5..=2.0).contains(&factor),
        }
    });
    Ok(SweepReport {
        config: config.to_text(),
        family_checks,
        families_pass,
        skipped,
        records,
        summaries,
        stability,
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

impl SweepReport {
    pub fn nonconverged(&self) -> usize {
        self.records.iter().filter(|r| !r.converged()).count()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per record, plot-ready.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "symbol_id,kind,n,rect,minus_one,product_lower,family_sup,family_argmax,family_norms,\
             family_converged,cone_sup,cone_argmax,cone_norms,cone_converged,cone_success,cone_tries,\
             t_d_norm,h_minus_t_l4,h_minus_p_l2,family_ratio,cone_ratio,positive\n",
        );
        for r in &self.records {
            let c = &r.cone_selection;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.symbol_id,
                r.kind.as_str(),
                r.n,
                r.rect,
                r.minus_one.map_or(String::new(), |v| v.to_string()),
                r.product_lower,
                r.family_sup,
                join(&r.family_argmax),
                join(&r.family_norms),
                r.family_converged,
                r.cone_sup,
                join(&r.cone_argmax),
                join(&r.cone_norms),
                r.cone_converged,
                c.success,
                c.tries,
                c.t_d_norm,
                c.h_minus_t_l4,
                c.h_minus_p_l2,
                r.family_ratio,
                r.cone_ratio,
                r.positive,
            );
        }
        s
    }

    pub fn render(&self, format: OutputFormat) -> Result<String> {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => Ok(self.to_csv()),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>, format: OutputFormat) -> Result<()> {
        Ok(std::fs::write(path, self.render(format)?)?)
    }
}
