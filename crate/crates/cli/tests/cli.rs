use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use czlab::dyadic::{wavelet_function, DyadicCube, DyadicRectangle, Signature};
use czlab::multipliers::{hilbert_symbol, riesz_symbol, MultiplierSymbol};
use czlab::{Complex64, GridFunction, ProductLattice};
use serde_json::Value;
use tempfile::TempDir;

fn czlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_czlab")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn save_symbol(dir: &Path, name: &str, s: &MultiplierSymbol) -> String {
    let p = dir.join(name);
    s.save(&p, None).unwrap();
    p.to_str().unwrap().to_string()
}

fn save_grid(dir: &Path, name: &str, f: &GridFunction) -> String {
    let p = dir.join(name);
    czlab::czl::save(&p, f).unwrap();
    p.to_str().unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p: PathBuf = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

/// Unit-coefficient wavelet on the lattice `(1, 1)`, `N = 8`.
fn wavelet(scales: [u32; 2]) -> GridFunction {
    let lat = ProductLattice::uniform(&[1, 1], 8).unwrap();
    let r = DyadicRectangle::new(scales.iter().map(|&k| DyadicCube::new(k, vec![0])).collect());
    wavelet_function(&lat, &r, &Signature(vec![vec![0], vec![0]])).unwrap()
}

#[test]
fn criterion_check_reports_verdict_and_witness() {
    let dir = TempDir::new().unwrap();
    let r1 = save_symbol(dir.path(), "r1.json", &riesz_symbol(2, 1).unwrap());
    let r2 = save_symbol(dir.path(), "r2.json", &riesz_symbol(2, 2).unwrap());
    let v = json(&czlab(&["criterion-check", &r1, &r2]));
    assert_eq!(v["pass"], true);
    assert_eq!(v["d"], 2);
    assert_eq!(v["checks"].as_array().unwrap().len(), 3);

    let v = json(&czlab(&["criterion-check", &r1, "--samples", "64", "--tol", "1e-6"]));
    assert_eq!(v["pass"], false);
    assert_eq!(v["samples"], 64);
    assert_eq!(v["checks"][0]["pass"], false);
    assert!(v["checks"][0]["witness"].is_object());

    let h = save_symbol(dir.path(), "h.json", &hilbert_symbol());
    assert_eq!(czlab(&["criterion-check", &r1, &h]).status.code(), Some(1));
    assert_eq!(czlab(&["criterion-check", "missing.json"]).status.code(), Some(1));
}

#[test]
fn bmo_estimate_norms() {
    let dir = TempDir::new().unwrap();
    let b = save_grid(dir.path(), "b.czl", &wavelet([1, 2]));
    // unit coefficient on a rectangle of volume 1/8
    let expected = 8f64.sqrt();
    let v = json(&czlab(&["bmo-estimate", "--input", &b]));
    assert!((v["estimate"]["value"].as_f64().unwrap() - expected).abs() < 1e-12);
    let v = json(&czlab(&["bmo-estimate", "--input", &b, "--norm", "rect"]));
    assert!((v["value"].as_f64().unwrap() - expected).abs() < 1e-12);
    let v = json(&czlab(&["bmo-estimate", "--input", &b, "--norm", "minus1", "--budget", "2", "--seed", "5"]));
    assert!((v["estimate"]["value"].as_f64().unwrap() - expected).abs() < 1e-12);

    let out = dir.path().join("e.csv");
    let o = czlab(&["bmo-estimate", "--input", &b, "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("path,value\n"));
    assert!(csv.contains("estimate.value,"));

    let junk = write(dir.path(), "junk.czl", "not a grid");
    assert_eq!(czlab(&["bmo-estimate", "--input", &junk]).status.code(), Some(1));
}

#[test]
fn commutator_norm_groups_families_by_parameter() {
    let dir = TempDir::new().unwrap();
    let lat = ProductLattice::uniform(&[1, 1], 8).unwrap();
    let b = GridFunction::from_fn(&lat, |x| Complex64::new((x[0] * 3 + x[1] * x[1]) as f64 % 5.0, 0.0));
    let b = save_grid(dir.path(), "b.czl", &b);
    let h = save_symbol(dir.path(), "h.json", &hilbert_symbol());
    let id = save_symbol(dir.path(), "id.json", &czlab::multipliers::identity_symbol(1));
    let v = json(&czlab(&["commutator-norm", "--b", &b, "--family", &h, "--family", &format!("{h},{id}")]));
    assert_eq!(v["converged"], true);
    assert!(v["value"].as_f64().unwrap() > 0.0);
    // two choice vectors; the identity kills the commutator
    let per = v["per_choice"].as_array().unwrap();
    assert_eq!(per.len(), 2);
    assert!(per[1][1]["value"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["argmax"], serde_json::json!([0, 0]));

    // one group for two parameters
    assert_eq!(czlab(&["commutator-norm", "--b", &b, "--family", &h]).status.code(), Some(1));
    // iteration cap reached: flagged
    let o = czlab(&["commutator-norm", "--b", &b, "--family", &h, "--family", &h, "--tol", "1e-15", "--max-iter", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["converged"], false);
}

const SMALL: &str = "dims = 1, 1\nn = 8\nresolutions = 8\ncount = 3\n";

#[test]
fn sweep_is_reproducible_and_writes_csv() {
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "small.cfg", SMALL);
    let a = czlab(&["equivalence-sweep", "--config", &config]);
    let b = czlab(&["equivalence-sweep", "--config", &config]);
    let v = json(&a);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(v["records"].as_array().unwrap().len(), 3);
    assert!(v["records"].as_array().unwrap().iter().all(|r| r["positive"] == true));

    let other = json(&czlab(&["equivalence-sweep", "--config", &config, "--seed", "9"]));
    assert_ne!(other["records"], v["records"]);
    assert!(other["config"].as_str().unwrap().contains("seed = 9"));

    let out = dir.path().join("sweep.csv");
    let o = czlab(&["equivalence-sweep", "--config", &config, "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out).unwrap();
    assert!(csv.starts_with("symbol_id,kind,n,"));
    assert_eq!(csv.lines().count(), 4);

    let bad = write(dir.path(), "bad.cfg", "colour = blue\n");
    let o = czlab(&["equivalence-sweep", "--config", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn sweep_flags_unconverged_norms() {
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "tight.cfg", &format!("{SMALL}norm_tol = 1e-15\nnorm_max_iter = 2\n"));
    let o = czlab(&["equivalence-sweep", "--config", &config]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["summaries"][0]["nonconverged"].as_u64().unwrap() > 0);
}

#[test]
fn experiment_runners_on_corpus_members_and_files() {
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "one.cfg", "dims = 2\nn = 16\nresolutions = 16\ncount = 2\n");
    let v = json(&czlab(&["test-function", "--config", &config, "--member", "0"]));
    assert!((v["proxy"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!(v["terms"]["main"].as_f64().unwrap() > 0.0);

    let v = json(&czlab(&["journe", "--config", &config, "--member", "1"]));
    assert!(v["v_measure"].as_f64().unwrap() >= v["shadow_measure"].as_f64().unwrap());

    let o = czlab(&["cone-approx", "--config", &config]);
    assert!(matches!(o.status.code(), Some(0 | 2)));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["params"].as_array().unwrap().len(), 1);
    assert_eq!(o.status.code() == Some(0), v["reached"] == true);

    // a file that is not normalized is refused by the test function
    let lat = ProductLattice::uniform(&[2], 16).unwrap();
    let r = DyadicRectangle::new(vec![DyadicCube::new(1, vec![0, 1])]);
    let w = wavelet_function(&lat, &r, &Signature(vec![vec![0, 1]])).unwrap();
    let f = save_grid(dir.path(), "w.czl", &w.scale(Complex64::new(3.0, 0.0)));
    let o = czlab(&["test-function", "--config", &config, "--input", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("normalized"));

    assert_eq!(czlab(&["journe", "--config", &config, "--member", "7"]).status.code(), Some(1));
}
