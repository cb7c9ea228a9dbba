use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use czlab::bmo::{bmo_minus_one_with, product_bmo_lower, rectangular_argmax, SearchBudget};
use czlab::commutator::sup_commutator_norm;
use czlab::dyadic::haar_transform;
use czlab::experiments::{
    cone_approx, equivalence_sweep, generate_corpus, journe_experiment, test_function_experiment, ExperimentConfig,
    OutputFormat,
};
use czlab::multipliers::MultiplierSymbol;
use czlab::sphere::SphereSamples;
use czlab::symbol_family::{
    check_antipodal_separation, check_point_separation, check_tangential_derivatives, close_family, SymbolFamily,
};
use czlab::{Error, GridFunction};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "czlab", version, about = "Multi-parameter commutator laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a symbol family (closed under conjugation, with 1 added) against the criterion.
    CriterionCheck {
        /// symbol files (JSON), all of one dimension
        #[arg(required = true)]
        symbols: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        tol: f64,
        /// sphere sample count (multiple of 4 on the circle)
        #[arg(long)]
        samples: Option<usize>,
        #[command(flatten)]
        output: Output,
    },
    /// Estimate a BMO norm of a symbol stored as a CZL1 grid.
    BmoEstimate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Norm::Product)]
        norm: Norm,
        /// greedy restarts
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Sup of the iterated commutator norm over choice vectors.
    CommutatorNorm {
        #[arg(long)]
        b: PathBuf,
        /// comma-separated symbol files of one parameter; repeat per parameter
        #[arg(long, required = true)]
        family: Vec<String>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Corpus against the configured and the cone families at every resolution.
    EquivalenceSweep {
        #[command(flatten)]
        run: Run,
    },
    /// Approximate the selected cone targets by polynomials in the family.
    ConeApprox {
        #[command(flatten)]
        run: Run,
        #[command(flatten)]
        symbol: SymbolInput,
    },
    /// Journé enlargement of the collection found by the BMO estimator.
    Journe {
        #[command(flatten)]
        run: Run,
        #[command(flatten)]
        symbol: SymbolInput,
    },
    /// Test function and three-term split of a normalized symbol.
    TestFunction {
        #[command(flatten)]
        run: Run,
        #[command(flatten)]
        symbol: SymbolInput,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Norm {
    Product,
    Rect,
    Minus1,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Output {
    /// write here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct Run {
    /// key = value experiment configuration
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct SymbolInput {
    /// symbol as a CZL1 grid, normalized by the caller where required
    #[arg(long, conflicts_with = "member")]
    input: Option<PathBuf>,
    /// corpus member id instead of a file
    #[arg(long)]
    member: Option<usize>,
}

/// Exit status beyond success and failure.
const NOT_CONVERGED: u8 = 2;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(NOT_CONVERGED),
        Err(e) => {
            eprintln!("czlab: {e}");
            ExitCode::FAILURE
        }
    }
}

/// `Ok(false)` when the output carries a non-convergence flag.
fn run(cli: Cli) -> czlab::Result<bool> {
    match cli.command {
        Command::CriterionCheck {
            symbols,
            tol,
            samples,
            output,
        } => {
            let members = symbols.iter().map(MultiplierSymbol::load).collect::<czlab::Result<Vec<_>>>()?;
            let d = members[0].dim();
            if members.iter().any(|m| m.dim() != d) {
                return Err(Error::Structural("symbols of different dimensions".into()));
            }
            let sphere = match samples {
                Some(n) => SphereSamples::new(d, n)?,
                None => SphereSamples::default_for(d)?,
            };
            let family = close_family(&SymbolFamily::new(0, d, members, Arc::new(sphere))?);
            let checks = [
                check_point_separation(&family, tol),
                check_antipodal_separation(&family, tol),
                check_tangential_derivatives(&family, tol),
            ];
            let verdict = json!({
                "d": d,
                "members": family.len(),
                "samples": family.samples().len(),
                "tol": tol,
                "pass": checks.iter().all(|c| c.pass),
                "checks": checks,
            });
            emit(&output, &verdict)?;
            Ok(true)
        }
        Command::BmoEstimate {
            input,
            norm,
            budget,
            seed,
            output,
        } => {
            let c = haar_transform(&czlab::czl::load(&input)?)?;
            let budget = SearchBudget {
                restarts: budget,
                seed,
                ..SearchBudget::default()
            };
            let value = match norm {
                Norm::Product => json!({ "norm": "product", "estimate": product_bmo_lower(&c, &budget)? }),
                Norm::Rect => {
                    let arg = rectangular_argmax(&c);
                    json!({
                        "norm": "rect",
                        "value": arg.as_ref().map_or(0.0, |a| a.1),
                        "rectangle": arg.map(|a| a.0),
                    })
                }
                Norm::Minus1 => json!({ "norm": "minus1", "estimate": bmo_minus_one_with(&c, &budget)? }),
            };
            emit(&output, &value)?;
            Ok(true)
        }
        Command::CommutatorNorm {
            b,
            family,
            tol,
            max_iter,
            seed,
            output,
        } => {
            let b = czlab::czl::load(&b)?;
            let families = load_families(&family, &b)?;
            let sup = sup_commutator_norm(&b, &families, tol, max_iter, seed)?;
            emit(&output, &serde_json::to_value(&sup)?)?;
            Ok(sup.converged)
        }
        Command::EquivalenceSweep { run } => {
            let config = load_config(&run)?;
            let report = equivalence_sweep(&config)?;
            let format = run.output.format.map_or(config.format, to_format);
            let text = report.render(format)?;
            write_text(run.output.out.as_deref().or(config.out.as_deref()), &text)?;
            Ok(report.nonconverged() == 0)
        }
        Command::ConeApprox { run, symbol } => {
            let config = load_config(&run)?;
            let report = cone_approx(&load_symbol(&symbol, &config)?, &config)?;
            emit_run(&run, &config, &serde_json::to_value(&report)?)?;
            Ok(report.reached)
        }
        Command::Journe { run, symbol } => {
            let config = load_config(&run)?;
            let report = journe_experiment(&load_symbol(&symbol, &config)?, &config)?;
            emit_run(&run, &config, &serde_json::to_value(&report)?)?;
            Ok(true)
        }
        Command::TestFunction { run, symbol } => {
            let config = load_config(&run)?;
            let report = test_function_experiment(&load_symbol(&symbol, &config)?, &config)?;
            emit_run(&run, &config, &serde_json::to_value(&report)?)?;
            Ok(true)
        }
    }
}

fn load_families(groups: &[String], b: &GridFunction) -> czlab::Result<Vec<SymbolFamily>> {
    let lattice = b.lattice();
    if groups.len() != lattice.params() {
        return Err(Error::Structural(format!(
            "{} --family groups for {} parameters",
            groups.len(),
            lattice.params()
        )));
    }
    groups
        .iter()
        .enumerate()
        .map(|(s, files)| {
            let members = files
                .split(',')
                .map(MultiplierSymbol::load)
                .collect::<czlab::Result<Vec<_>>>()?;
            SymbolFamily::with_default_samples(s, lattice.dims()[s], members)
        })
        .collect()
}

fn to_format(f: Format) -> OutputFormat {
    match f {
        Format::Json => OutputFormat::Json,
        Format::Csv => OutputFormat::Csv,
    }
}

fn load_config(run: &Run) -> czlab::Result<ExperimentConfig> {
    let mut config = match &run.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = run.seed {
        config.seed = s;
    }
    config.validated()
}

fn load_symbol(input: &SymbolInput, config: &ExperimentConfig) -> czlab::Result<GridFunction> {
    if let Some(p) = &input.input {
        return czlab::czl::load(p);
    }
    let id = input.member.unwrap_or(0);
    generate_corpus(config)?
        .members
        .into_iter()
        .find(|m| m.id == id)
        .map(|m| m.b)
        .ok_or_else(|| Error::Domain(format!("corpus has no member {id}")))
}

fn emit_run(run: &Run, config: &ExperimentConfig, value: &Value) -> czlab::Result<()> {
    let format = run.output.format.map_or(config.format, to_format);
    let text = render(value, format)?;
    write_text(run.output.out.as_deref().or(config.out.as_deref()), &text)
}

fn emit(output: &Output, value: &Value) -> czlab::Result<()> {
    let format = output.format.map_or(OutputFormat::Json, to_format);
    write_text(output.out.as_deref(), &render(value, format)?)
}

/// JSON as is, or CSV with one `path,value` row per leaf.
fn render(value: &Value, format: OutputFormat) -> czlab::Result<String> {
    Ok(match format {
        OutputFormat::Json => serde_json::to_string_pretty(value)? + "\n",
        OutputFormat::Csv => {
            let mut rows = vec!["path,value".to_string()];
            flatten(value, String::new(), &mut rows);
            rows.join("\n") + "\n"
        }
    })
}

fn flatten(v: &Value, path: String, rows: &mut Vec<String>) {
    let join = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(x, join(k), rows)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| flatten(x, join(&i.to_string()), rows)),
        Value::String(s) => rows.push(format!("{path},{}", csv_field(s))),
        other => rows.push(format!("{path},{other}")),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_text(out: Option<&Path>, text: &str) -> czlab::Result<()> {
    match out {
        Some(p) => Ok(std::fs::write(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
