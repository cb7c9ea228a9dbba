mod common;

use std::collections::BTreeMap;

use czlab::bmo::*;
use czlab::dyadic::{haar_inverse, haar_transform, project_onto_collection, DyadicCube, DyadicRectangle, WaveletCoefficients};
use czlab::{Complex64, ProductLattice};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn lat8() -> ProductLattice {
    ProductLattice::uniform(&[1, 1], 8).unwrap()
}

/// `|R|^{-1} sum_{R' subset R} e(R')` maximized by plain enumeration.
fn rectangular_oracle(b: &WaveletCoefficients) -> f64 {
    let index = b.index();
    let energy = b.rectangle_energy();
    let mut best = 0.0f64;
    for r in 0..index.rect_count() {
        let big = index.rectangle(r);
        let mass: f64 = (0..index.rect_count())
            .filter(|&q| big.contains(&index.rectangle(q)))
            .map(|q| energy[q])
            .sum();
        best = best.max(mass / big.volume());
    }
    best.sqrt()
}

/// BMO_-1 for t = 2 by enumerating every sub-collection with a fixed cube.
fn minus_one_oracle(b: &WaveletCoefficients) -> f64 {
    let index = b.index();
    let lat = b.lattice();
    let energy = b.rectangle_energy();
    let mut best = 0.0f64;
    for s in 0..2 {
        let o = 1 - s;
        let qs = index.param(s).cubes().to_vec();
        let ps = index.param(o).cubes().to_vec();
        let n = lat.n_axis()[lat.axis_range(o).start];
        for q in &qs {
            for mask in 1u32..(1 << ps.len()) {
                let mut mass = 0.0;
                let mut cells = vec![false; n.pow(lat.dims()[o] as u32)];
                for (i, p) in ps.iter().enumerate() {
                    if mask >> i & 1 == 0 {
                        continue;
                    }
                    let mut cubes = vec![q.clone(), p.clone()];
                    if s == 1 {
                        cubes.swap(0, 1);
                    }
                    mass += energy[index.rect_id(&DyadicRectangle::new(cubes)).unwrap()];
                    let r = p.cell_range(0, n);
                    for c in r {
                        cells[c] = true;
                    }
                }
                let area = q.volume() * cells.iter().filter(|&&c| c).count() as f64 / n as f64;
                best = best.max(mass / area);
            }
        }
    }
    best.sqrt()
}

#[test]
fn coefficient_mass_examples() {
    let lat = lat8();
    let r = rect(&[(1, &[0]), (2, &[3])]);
    let b = unit_wavelets(&lat, std::slice::from_ref(&r));
    let u = RectangleCollection::new(&lat, vec![r.clone(), rect(&[(0, &[0]), (0, &[0])])]).unwrap();
    assert_eq!(coefficient_mass(&b, &u).unwrap(), 1.0);
    let far = RectangleCollection::new(&lat, vec![rect(&[(1, &[1]), (2, &[3])])]).unwrap();
    assert_eq!(coefficient_mass(&b, &far).unwrap(), 0.0);

    let f = random_fn(&lat, &mut rng(3));
    let c = haar_transform(&f).unwrap();
    let index = c.index().clone();
    let all = RectangleCollection::new(&lat, (0..index.rect_count()).map(|r| index.rectangle(r)).collect()).unwrap();
    let expected = f.norm2().powi(2) - c.scaling_mass();
    assert!((coefficient_mass(&c, &all).unwrap() - expected).abs() < 1e-12 * f.norm2().powi(2));
}

#[test]
fn collection_shadow_and_flags() {
    let lat = lat8();
    let a = rect(&[(1, &[0]), (1, &[0])]);
    let b = rect(&[(1, &[0]), (2, &[2])]);
    let u = RectangleCollection::new(&lat, vec![a.clone(), b.clone(), a.clone()]).unwrap();
    assert_eq!(u.len(), 2);
    // [0,1/2)x[0,1/2) and [0,1/2)x[1/2,3/4)
    assert_eq!(u.shadow_measure(), 0.375);
    assert_eq!(u.fixed_coordinate(), Some((0, &DyadicCube::new(1, vec![0]))));
    assert!(!u.is_single_rectangle());
    let v = RectangleCollection::new(&lat, vec![a, rect(&[(1, &[1]), (2, &[2])])]).unwrap();
    assert!(!v.has_t_minus_1_parameters());
    // cells are allowed, coarser-than-lattice positions are not
    assert!(RectangleCollection::new(&lat, vec![rect(&[(3, &[7]), (3, &[0])])]).is_ok());
    assert!(RectangleCollection::new(&lat, vec![rect(&[(4, &[0]), (0, &[0])])]).is_err());
    assert!(RectangleCollection::new(&lat, vec![rect(&[(1, &[2]), (0, &[0])])]).is_err());
}

#[test]
fn single_wavelet_values() {
    let lat = lat8();
    let unit = DyadicRectangle::unit(&[1, 1]);
    let b = unit_wavelets(&lat, std::slice::from_ref(&unit));
    assert_eq!(rectangular_bmo(&b), 1.0);
    assert_eq!(bmo_minus_one(&b).unwrap().value, 1.0);
    assert_eq!(bmo_minus_one(&b).unwrap().collection, vec![unit.clone()]);
    let p = product_bmo_lower(&b, &SearchBudget::default()).unwrap();
    assert_eq!(p.value, 1.0);

    let quarter = rect(&[(1, &[1]), (1, &[0])]);
    let b = unit_wavelets(&lat, &[quarter]);
    assert_eq!(rectangular_bmo(&b), 2.0);
    assert_eq!(bmo_minus_one(&b).unwrap().value, 2.0);
    assert_eq!(product_bmo_lower(&b, &SearchBudget::default()).unwrap().value, 2.0);

    let zero = WaveletCoefficients::zeros(&lat).unwrap();
    assert_eq!(rectangular_bmo(&zero), 0.0);
    assert_eq!(bmo_minus_one(&zero).unwrap().value, 0.0);
    let p = product_bmo_lower(&zero, &SearchBudget::default()).unwrap();
    assert_eq!(p.value, 0.0);
    assert!(p.collection.is_empty());
}

#[test]
fn rectangular_matches_enumeration() {
    for seed in 0..5 {
        let b = random_coeffs(&lat8(), &mut rng(seed), 0.2);
        assert!((rectangular_bmo(&b) - rectangular_oracle(&b)).abs() < 1e-12);
    }
    let lat = ProductLattice::uniform(&[2, 1], 8).unwrap();
    let b = random_coeffs(&lat, &mut rng(9), 0.05);
    assert!((rectangular_bmo(&b) - rectangular_oracle(&b)).abs() < 1e-12);
}

#[test]
fn minus_one_needs_two_parameters() {
    let lat = ProductLattice::uniform(&[2], 8).unwrap();
    let b = WaveletCoefficients::zeros(&lat).unwrap();
    assert!(matches!(bmo_minus_one(&b), Err(czlab::Error::Domain(_))));
}

#[test]
fn minus_one_two_halves() {
    // both halves of the torus in parameter 2, under the same unit cube in
    // parameter 1: shadows are disjoint and cover measure 1
    let lat = lat8();
    let b = unit_wavelets(&lat, &[rect(&[(0, &[0]), (1, &[0])]), rect(&[(0, &[0]), (1, &[1])])]);
    let m = bmo_minus_one(&b).unwrap();
    assert!(m.exact);
    assert!((m.value - 2f64.sqrt()).abs() < 1e-15);
    assert!((minus_one_oracle(&b) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn minus_one_is_exact_for_two_parameters() {
    for seed in 0..10 {
        let b = random_coeffs(&lat8(), &mut rng(100 + seed), 0.3);
        let m = bmo_minus_one(&b).unwrap();
        let oracle = minus_one_oracle(&b);
        assert!((m.value - oracle).abs() < 1e-12 * oracle.max(1.0), "seed {seed}: {} vs {oracle}", m.value);
        // the reported collection attains the value
        let u = RectangleCollection::new(&lat8(), m.collection.clone()).unwrap();
        assert!(u.has_t_minus_1_parameters());
        let v = (coefficient_mass(&b, &u).unwrap() / u.shadow_measure()).sqrt();
        assert!((v - m.value).abs() < 1e-12 * m.value.max(1.0));
    }
}

#[test]
fn minus_one_three_parameters_is_attained() {
    let lat = ProductLattice::uniform(&[1, 1, 1], 4).unwrap();
    for seed in 0..3 {
        let b = random_coeffs(&lat, &mut rng(200 + seed), 0.3);
        let m = bmo_minus_one(&b).unwrap();
        assert!(!m.exact);
        let u = RectangleCollection::new(&lat, m.collection.clone()).unwrap();
        assert!(u.has_t_minus_1_parameters());
        let v = (coefficient_mass(&b, &u).unwrap() / u.shadow_measure()).sqrt();
        assert!((v - m.value).abs() < 1e-12 * m.value.max(1.0));
        let p = product_bmo_lower(&b, &SearchBudget::default()).unwrap();
        assert!(p.value >= m.value * (1.0 - 1e-12));
    }
}

#[test]
fn disjoint_pair_of_small_rectangles() {
    // two unit wavelets on disjoint quarter-volume rectangles: every union
    // containing both has ratio 2 / (1/2) = 4, as does each alone
    let lat = lat8();
    let b = unit_wavelets(&lat, &[rect(&[(1, &[0]), (1, &[0])]), rect(&[(1, &[1]), (1, &[1])])]);
    let oracle = product_bmo_exhaustive(&b, 3).unwrap();
    assert!((oracle.value - 2.0).abs() < 1e-15);
    let p = product_bmo_lower(&b, &SearchBudget::default()).unwrap();
    assert!((p.value - 2.0).abs() < 1e-15);
}

#[test]
fn greedy_finds_an_l_shaped_union() {
    // R1 = left half, R2 = bottom half; their union has measure 3/4 and
    // contains both, so the product norm is at least (2 / (3/4))^{1/2}
    let lat = lat8();
    let b = unit_wavelets(&lat, &[rect(&[(1, &[0]), (0, &[0])]), rect(&[(0, &[0]), (1, &[0])])]);
    assert!((rectangular_bmo(&b) - 2f64.sqrt()).abs() < 1e-15);
    let p = product_bmo_lower(&b, &SearchBudget::default()).unwrap();
    assert!((p.value - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert_eq!(p.collection.len(), 2);
    let oracle = product_bmo_exhaustive(&b, 3).unwrap();
    assert!((oracle.value - p.value).abs() < 1e-12);
}

#[test]
fn greedy_is_below_exhaustive_and_above_rectangular() {
    let budget = SearchBudget {
        max_rects: 3,
        include_minus_one: false,
        ..SearchBudget::default()
    };
    for seed in 0..8 {
        let b = random_coeffs(&lat8(), &mut rng(300 + seed), 0.25);
        let rect = rectangular_bmo(&b);
        let g = product_bmo_lower(&b, &budget).unwrap();
        let o = product_bmo_exhaustive(&b, 3).unwrap();
        assert!(g.value <= o.value * (1.0 + 1e-12), "seed {seed}");
        assert!(g.value >= rect * (1.0 - 1e-12));
        assert!(o.value >= rect * (1.0 - 1e-12));
        assert!(g.collection.len() <= 3);
    }
}

#[test]
fn exhaustive_refuses_large_lattices() {
    let lat = ProductLattice::uniform(&[1, 1], 16).unwrap();
    let b = WaveletCoefficients::zeros(&lat).unwrap();
    assert!(matches!(product_bmo_exhaustive(&b, 3), Err(czlab::Error::Precondition(_))));
}

#[test]
fn estimates_are_attained_by_their_collections() {
    let lat = ProductLattice::uniform(&[1, 1], 16).unwrap();
    for seed in 0..4 {
        let b = random_coeffs(&lat, &mut rng(400 + seed), 0.1);
        let p = product_bmo_lower(&b, &SearchBudget::default()).unwrap();
        // everything inside the union counts
        let u = RectangleCollection::new(&lat, p.collection.clone()).unwrap();
        let index = b.index();
        let inside: Vec<DyadicRectangle> = (0..index.rect_count())
            .map(|r| index.rectangle(r))
            .filter(|r| {
                (0..lat.len()).all(|i| !r.contains_point(&lat, &lat.unravel(i)) || u.shadow()[i])
            })
            .collect();
        let all = RectangleCollection::new(&lat, inside).unwrap();
        let v = (coefficient_mass(&b, &all).unwrap() / u.shadow_measure()).sqrt();
        assert!((v - p.value).abs() < 1e-12 * p.value);
        let m = bmo_minus_one(&b).unwrap();
        assert!(m.value <= p.value * (1.0 + 1e-12));
        assert!(p.value >= p.rectangular * (1.0 - 1e-12));
    }
}

#[test]
fn search_is_deterministic() {
    let lat = ProductLattice::uniform(&[1, 1], 16).unwrap();
    let b = random_coeffs(&lat, &mut rng(7), 0.1);
    let budget = SearchBudget {
        seed: 42,
        restarts: 6,
        ..SearchBudget::default()
    };
    let p = product_bmo_lower(&b, &budget).unwrap();
    let q = product_bmo_lower(&b, &budget).unwrap();
    assert_eq!(p.value, q.value);
    assert_eq!(p.collection, q.collection);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn estimators_are_absolutely_homogeneous(seed in 0u64..1000, re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let c = Complex64::new(re, im);
        prop_assume!(c.norm() > 1e-3);
        let b = random_coeffs(&lat8(), &mut rng(seed), 0.25);
        let cb = b.scale(c);
        let tol = |x: f64| 1e-12 * x.max(1.0);
        let r = rectangular_bmo(&b);
        prop_assert!((rectangular_bmo(&cb) - c.norm() * r).abs() < tol(c.norm() * r));
        let m = bmo_minus_one(&b).unwrap().value;
        prop_assert!((bmo_minus_one(&cb).unwrap().value - c.norm() * m).abs() < tol(c.norm() * m));
        let budget = SearchBudget::default();
        let p = product_bmo_lower(&b, &budget).unwrap().value;
        prop_assert!((product_bmo_lower(&cb, &budget).unwrap().value - c.norm() * p).abs() < tol(c.norm() * p));
    }
}

fn random_collection(lat: &ProductLattice, rng: &mut impl Rng, count: usize) -> RectangleCollection {
    let mut rects = Vec::new();
    for _ in 0..count {
        let cubes = (0..lat.params())
            .map(|s| {
                let n = lat.param_n(s).unwrap();
                let k = rng.random_range(0..=n.trailing_zeros());
                let pos = (0..lat.dims()[s]).map(|_| rng.random_range(0..1u32 << k)).collect();
                DyadicCube::new(k, pos)
            })
            .collect();
        rects.push(DyadicRectangle::new(cubes));
    }
    RectangleCollection::new(lat, rects).unwrap()
}

/// Cells met by the open dilate, from first principles: cell `i` is `[i, i+1)`.
fn dilate_oracle(lat: &ProductLattice, r: &DyadicRectangle, mu: f64) -> Vec<Vec<usize>> {
    r.cell_box(lat)
        .into_iter()
        .zip(lat.n_axis())
        .map(|(b, &n)| {
            let center = (b.start + b.end) as f64 / 2.0;
            let half = mu * (b.end - b.start) as f64 / 2.0;
            (0..n)
                .filter(|&i| (i + 1) as f64 > center - half && (i as f64) < center + half)
                .collect()
        })
        .collect()
}

fn box_inside(lat: &ProductLattice, cells: &[Vec<usize>], v: &[bool]) -> bool {
    let mut idx = vec![0usize; cells.len()];
    loop {
        let coords: Vec<usize> = idx.iter().zip(cells).map(|(&i, c)| c[i]).collect();
        if !v[lat.ravel(&coords)] {
            return false;
        }
        let mut a = cells.len();
        loop {
            if a == 0 {
                return true;
            }
            a -= 1;
            idx[a] += 1;
            if idx[a] < cells[a].len() {
                break;
            }
            idx[a] = 0;
        }
    }
}

/// Checks the three enlargement invariants by enumeration.
fn check_enlargement(u: &RectangleCollection, e: &EnlargementResult) {
    let lat = u.lattice();
    for (i, &s) in u.shadow().iter().enumerate() {
        assert!(!s || e.v[i], "V must contain the shadow");
    }
    assert_eq!(e.v_cells, e.v.iter().filter(|&&x| x).count());
    assert!((e.v_cells as f64) < (1.0 + e.a) * u.shadow_cells() as f64);
    for r in u.rectangles() {
        let er = e.factor(r).expect("factor for every rectangle");
        assert!(er >= 1.0);
        let mu = if er.is_finite() { er } else { 1e6 };
        assert!(box_inside(lat, &dilate_oracle(lat, r, mu), &e.v), "E(R) R not inside V for {r:?}");
        if er.is_finite() && !e.degenerate {
            // the supremum is sharp
            assert!(!box_inside(lat, &dilate_oracle(lat, r, er * (1.0 + 1e-9)), &e.v));
        }
    }
}

#[test]
fn enlargement_invariants_on_random_collections() {
    let mut g = rng(11);
    for lat in [ProductLattice::uniform(&[1, 1], 16).unwrap(), ProductLattice::uniform(&[2, 1], 8).unwrap()] {
        for trial in 0..10 {
            let u = random_collection(&lat, &mut g, 1 + trial % 5);
            for a in [0.5, 1.0, 3.0] {
                let e = journe_enlarge(&u, a).unwrap();
                check_enlargement(&u, &e);
            }
        }
    }
}

#[test]
fn enlargement_edge_cases() {
    let lat = lat8();
    let empty = RectangleCollection::empty(&lat);
    let e = journe_enlarge(&empty, 1.0).unwrap();
    assert_eq!(e.v_cells, 0);
    assert!(e.factors.is_empty());

    let one = RectangleCollection::new(&lat, vec![rect(&[(1, &[1]), (2, &[1])])]).unwrap();
    for a in [0.1, 1.0, 10.0] {
        let e = journe_enlarge(&one, a).unwrap();
        check_enlargement(&one, &e);
        assert!(e.v_measure() <= (1.0 + a) * 0.125);
    }

    let full = RectangleCollection::new(&lat, vec![DyadicRectangle::unit(&[1, 1])]).unwrap();
    let e = journe_enlarge(&full, 0.5).unwrap();
    assert!(e.degenerate);
    assert_eq!(e.factor(&DyadicRectangle::unit(&[1, 1])), Some(1.0));

    assert!(matches!(journe_enlarge(&one, 0.0), Err(czlab::Error::Domain(_))));
}

#[test]
fn strong_maximal_matches_enumeration() {
    let lat = ProductLattice::uniform(&[2, 1], 8).unwrap();
    let u = random_collection(&lat, &mut rng(5), 3);
    let m = strong_maximal(&lat, u.shadow()).unwrap();
    let mut cubes: Vec<Vec<DyadicCube>> = vec![Vec::new(); 2];
    for (s, list) in cubes.iter_mut().enumerate() {
        let d = lat.dims()[s];
        for k in 0..=3u32 {
            let side = 1u32 << k;
            for p in 0..side.pow(d as u32) {
                let pos = (0..d).map(|j| (p / side.pow(j as u32)) % side).collect();
                list.push(DyadicCube::new(k, pos));
            }
        }
    }
    for i in 0..lat.len() {
        let x = lat.unravel(i);
        let mut best = 0.0f64;
        for q0 in &cubes[0] {
            for q1 in &cubes[1] {
                let r = DyadicRectangle::new(vec![q0.clone(), q1.clone()]);
                if !r.contains_point(&lat, &x) {
                    continue;
                }
                let (mut hit, mut all) = (0, 0);
                for j in 0..lat.len() {
                    if r.contains_point(&lat, &lat.unravel(j)) {
                        all += 1;
                        hit += u.shadow()[j] as usize;
                    }
                }
                best = best.max(hit as f64 / all as f64);
            }
        }
        assert_eq!(m[i], best);
    }
}

#[test]
fn damped_projection_examples() {
    let lat = lat8();
    let f = random_fn(&lat, &mut rng(21));
    let b = haar_transform(&f).unwrap();
    let rs = vec![rect(&[(1, &[0]), (0, &[0])]), rect(&[(2, &[3]), (1, &[1])])];
    let u = RectangleCollection::new(&lat, rs.clone()).unwrap();
    let ones: BTreeMap<DyadicRectangle, f64> = rs.iter().map(|r| (r.clone(), 1.0)).collect();
    let expected = project_onto_collection(&f, &rs).unwrap();
    let got = haar_inverse(&damped_projection(&b, &u, &ones, 3.0).unwrap()).unwrap();
    assert!(got.max_abs_diff(&expected).unwrap() < 1e-12);

    let mut e = ones.clone();
    e.insert(rs[1].clone(), 2.0);
    let same = haar_inverse(&damped_projection(&b, &u, &e, 0.0).unwrap()).unwrap();
    assert!(same.max_abs_diff(&expected).unwrap() < 1e-12);

    let damped = damped_projection(&b, &u, &e, 2.0).unwrap();
    let sig = czlab::dyadic::Signature::all(&[1, 1])[0].clone();
    assert_eq!(damped.get(&rs[1], &sig).unwrap(), b.get(&rs[1], &sig).unwrap() * 0.25);
    assert_eq!(damped.get(&rs[0], &sig).unwrap(), b.get(&rs[0], &sig).unwrap());

    let mut missing = ones;
    missing.remove(&rs[0]);
    assert!(matches!(damped_projection(&b, &u, &missing, 1.0), Err(czlab::Error::Structural(_))));
}
