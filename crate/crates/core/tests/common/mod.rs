#![allow(dead_code)]

use czlab::{Complex64, GridFunction, ProductLattice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_fn(lat: &ProductLattice, rng: &mut impl Rng) -> GridFunction {
    GridFunction::from_fn(lat, |_| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn random_real(lat: &ProductLattice, rng: &mut impl Rng) -> GridFunction {
    GridFunction::from_fn(lat, |_| Complex64::new(rng.sample(StandardNormal), 0.0))
}

/// Random function whose spectrum is confined to `|k| < n/4` on every axis.
pub fn band_limited(lat: &ProductLattice, rng: &mut impl Rng, real: bool) -> GridFunction {
    let g = if real { random_real(lat, rng) } else { random_fn(lat, rng) };
    let mut hat = czlab::lattice::fft_forward(&g);
    let n = lat.n_axis().to_vec();
    let vals: Vec<Complex64> = hat
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let keep = lat
                .unravel(i)
                .iter()
                .zip(&n)
                .all(|(&k, &m)| czlab::lattice::signed_frequency(k, m).unsigned_abs() < (m / 4) as u64);
            if keep { v } else { Complex64::new(0.0, 0.0) }
        })
        .collect();
    hat = GridFunction::new(lat.clone(), vals).unwrap();
    czlab::lattice::fft_inverse(&hat)
}

pub fn rel_err(a: &GridFunction, b: &GridFunction) -> f64 {
    a.sub(b).unwrap().norm2() / b.norm2().max(1e-300)
}

/// Sparse random product-wavelet coefficients: each (rectangle, signature)
/// is nonzero with probability `density`.
pub fn random_coeffs(
    lat: &ProductLattice,
    rng: &mut impl Rng,
    density: f64,
) -> czlab::dyadic::WaveletCoefficients {
    let mut c = czlab::dyadic::WaveletCoefficients::zeros(lat).unwrap();
    let index = c.index().clone();
    for r in 0..index.rect_count() {
        for e in 0..index.sig_count() {
            if rng.random::<f64>() < density {
                let v = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                c.set(&index.rectangle(r), &index.signature(e), v).unwrap();
            }
        }
    }
    c
}

/// Coefficients with one unit entry per rectangle (first signature).
pub fn unit_wavelets(
    lat: &ProductLattice,
    rects: &[czlab::dyadic::DyadicRectangle],
) -> czlab::dyadic::WaveletCoefficients {
    let mut c = czlab::dyadic::WaveletCoefficients::zeros(lat).unwrap();
    let sig = czlab::dyadic::Signature::all(lat.dims())[0].clone();
    for r in rects {
        c.set(r, &sig, Complex64::new(1.0, 0.0)).unwrap();
    }
    c
}

/// `DyadicRectangle` from `(scale, position)` per parameter.
pub fn rect(parts: &[(u32, &[u32])]) -> czlab::dyadic::DyadicRectangle {
    czlab::dyadic::DyadicRectangle::new(
        parts
            .iter()
            .map(|(k, p)| czlab::dyadic::DyadicCube::new(*k, p.to_vec()))
            .collect(),
    )
}

/// Golden value `name` from `tests/golden/<name>.json`. With `CZLAB_BLESS`
/// set, `fresh` is written there first.
pub fn golden(name: &str, fresh: &serde_json::Value) -> serde_json::Value {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let path = dir.join(format!("{name}.json"));
    if std::env::var_os("CZLAB_BLESS").is_some() {
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(&path, serde_json::to_string_pretty(fresh).unwrap() + "\n").unwrap();
    }
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e}; rerun with CZLAB_BLESS=1 to create it", path.display()));
    serde_json::from_str(&text).unwrap()
}

/// Structural equality of JSON values, numbers to relative `tol`.
pub fn json_close(a: &serde_json::Value, b: &serde_json::Value, tol: f64) -> bool {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            (x - y).abs() <= tol * x.abs().max(y.abs())
        }
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(x, y)| json_close(x, y, tol)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| json_close(v, w, tol)))
        }
        _ => a == b,
    }
}
