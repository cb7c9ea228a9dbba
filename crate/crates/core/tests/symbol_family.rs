use std::sync::Arc;

use czlab::multipliers::*;
use czlab::sphere::SphereSamples;
use czlab::symbol_family::*;
use czlab::Complex64;

fn riesz_family(d: usize) -> SymbolFamily {
    let members = (1..=d).map(|j| riesz_symbol(d, j).unwrap()).collect();
    SymbolFamily::with_default_samples(0, d, members).unwrap()
}

fn pair_witness(r: &CheckResult) -> (Vec<f64>, Vec<f64>) {
    match r.witness.as_ref().unwrap() {
        Witness::Pair { x, y, .. } => (x.clone(), y.clone()),
        w => panic!("unexpected witness {w:?}"),
    }
}

fn approx_eq(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
}

#[test]
fn coordinates_separate_points() {
    let members = vec![coordinate_symbol(2, 1).unwrap(), coordinate_symbol(2, 2).unwrap()];
    let f = SymbolFamily::with_default_samples(0, 2, members).unwrap();
    let r = check_point_separation(&f, 1e-6);
    assert!(r.pass);
    assert!(r.witness.is_none());
}

#[test]
fn first_coordinate_alone_fails_with_poles() {
    let f = SymbolFamily::with_default_samples(0, 2, vec![coordinate_symbol(2, 1).unwrap()]).unwrap();
    let r = check_point_separation(&f, 1e-6);
    assert!(!r.pass);
    let (x, y) = pair_witness(&r);
    assert!(approx_eq(&x, &[0.0, 1.0]) && approx_eq(&y, &[0.0, -1.0]), "{x:?} {y:?}");
}

/// Brute force over all pairs, independent of the checker.
#[test]
fn first_coordinate_witness_matches_brute_force() {
    let s = SphereSamples::default_for(2).unwrap();
    let mut best = (0.0, 0, 0);
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if (s.points[i][0] - s.points[j][0]).abs() <= 1e-6 {
                let dist = ((s.points[i][1] - s.points[j][1]).powi(2)
                    + (s.points[i][0] - s.points[j][0]).powi(2))
                .sqrt();
                if dist > best.0 + 1e-12 {
                    best = (dist, i, j);
                }
            }
        }
    }
    let f = SymbolFamily::with_default_samples(0, 2, vec![coordinate_symbol(2, 1).unwrap()]).unwrap();
    match check_point_separation(&f, 1e-6).witness.unwrap() {
        Witness::Pair { i, j, .. } => assert_eq!((i, j), (best.1, best.2)),
        w => panic!("{w:?}"),
    }
}

#[test]
fn constant_family_fails_everything_but_antipodes_report_first_sample() {
    let one = identity_symbol(2);
    let f = SymbolFamily::with_default_samples(0, 2, vec![one]).unwrap();
    let r = check_point_separation(&f, 1e-6);
    match r.witness.unwrap() {
        // every pair is unseparated; the farthest ones are antipodal and the
        // lexicographically first of those is (0, M/2)
        Witness::Pair { i, j, .. } => assert_eq!((i, j), (0, 128)),
        w => panic!("{w:?}"),
    }
    let t = check_tangential_derivatives(&f, 1e-6);
    assert!(!t.pass);
    match t.witness.unwrap() {
        Witness::Tangent { i, tangent, .. } => assert_eq!((i, tangent), (0, 0)),
        w => panic!("{w:?}"),
    }
}

#[test]
fn riesz_families_pass_all_checks() {
    for d in [2, 3] {
        let f = close_family(&riesz_family(d));
        let tol = 1e-3;
        assert!(check_point_separation(&f, tol).pass, "d={d}");
        let a = check_antipodal_separation(&f, tol);
        assert!(a.pass, "d={d}");
        // sum over members of |theta(x) - theta(-x)| >= 2 sum_j |x_j| * 2 (member and conjugate)
        assert!(a.margin >= 2.0 / (d as f64).sqrt() - 1e-12);
        assert!(check_tangential_derivatives(&f, tol).pass, "d={d}");
    }
}

#[test]
fn even_and_empty_families_fail_antipodal_check() {
    let c1 = coordinate_symbol(2, 1).unwrap();
    let sq = polynomial_symbol(
        &[c1],
        vec![Monomial {
            exponents: vec![2],
            coeff: Complex64::new(1.0, 0.0),
        }],
    )
    .unwrap();
    let even = SymbolFamily::with_default_samples(0, 2, vec![sq]).unwrap();
    let r = check_antipodal_separation(&even, 1e-6);
    assert!(!r.pass);
    assert!(matches!(r.witness, Some(Witness::Point { i: 0, .. })));

    let empty = SymbolFamily::with_default_samples(0, 2, vec![]).unwrap();
    let r = check_antipodal_separation(&empty, 1e-6);
    assert!(matches!(r.witness, Some(Witness::Point { i: 0, .. })));
}

#[test]
fn tangential_witness_for_first_coordinate() {
    let f = SymbolFamily::with_default_samples(0, 2, vec![coordinate_symbol(2, 1).unwrap()]).unwrap();
    let r = check_tangential_derivatives(&f, 1e-6);
    assert!(!r.pass);
    match r.witness.unwrap() {
        Witness::Tangent { x, v, derivative, .. } => {
            assert!(approx_eq(&x, &[1.0, 0.0]));
            assert!(approx_eq(&v, &[0.0, 1.0]));
            assert!(derivative < 1e-10);
        }
        w => panic!("{w:?}"),
    }
    // Riesz family: |(-sin, cos)| never vanishes; brute-force difference quotients
    let s = SphereSamples::default_for(2).unwrap();
    for i in 0..s.len() {
        let p = s.geodesic(i, 0, 1e-4);
        let q = s.geodesic(i, 0, -1e-4);
        let g = ((p[0] - q[0]).abs()).max((p[1] - q[1]).abs()) / 2e-4;
        assert!(g > 0.7);
    }
    assert!(check_tangential_derivatives(&riesz_family(2), 0.5).pass);
}

#[test]
fn closure_examples() {
    let r1 = SymbolFamily::with_default_samples(0, 2, vec![riesz_symbol(2, 1).unwrap()]).unwrap();
    let c = close_family(&r1);
    assert_eq!(c.len(), 3);
    assert!(c.is_closed());
    let s = c.samples().clone();
    let conj = c.member_values(2);
    for (i, p) in s.points.iter().enumerate() {
        assert_eq!(conj[i], Complex64::new(0.0, p[0]));
    }
    let cc = close_family(&c);
    assert_eq!(cc.len(), c.len());
    for k in 0..c.len() {
        assert_eq!(cc.member_values(k), c.member_values(k));
    }
    let empty = SymbolFamily::with_default_samples(0, 2, vec![]).unwrap();
    let e = close_family(&empty);
    assert_eq!(e.len(), 1);
    assert!(e.is_closed());
    assert!(!r1.is_closed());
}

fn quarter_pair() -> ConePair {
    let dir = [1.0, 1.0];
    ConePair::new(Cone::new(&dir, 1.0).unwrap(), Cone::new(&dir, 2.0).unwrap(), 0.5, 3).unwrap()
}

#[test]
fn h_cd_values() {
    let s = SphereSamples::default_for(2).unwrap();
    let pair = quarter_pair();
    let (_, vals) = build_h_cd(&pair, &s).unwrap();
    let mut strict = 0;
    for (p, &v) in s.points.iter().zip(&vals) {
        assert!((0.0..=1.0).contains(&v));
        if pair.outer.contains(p) {
            assert_eq!(v, 1.0, "{p:?}");
        }
        if in_opposing_half_space(p, &pair.outer.direction) || in_opposing_half_space(p, &pair.inner.direction) {
            assert_eq!(v, 0.0);
        }
        if v > 0.0 && v < 1.0 {
            strict += 1;
        }
    }
    assert!(strict > 0);
    // transition midpoint: angle 67.5 degrees from the diagonal
    let a = std::f64::consts::FRAC_PI_4 + 3.0 * std::f64::consts::PI / 8.0;
    let t = ConeTarget::new(pair.clone()).unwrap();
    let mid = t.value(&[a.cos(), a.sin()]);
    // g = 1 - S(1/2) = 1/2, and k_D = S(asin(cos 67.5) / (pi/4)) by direct evaluation
    let k = smoothstep(3, (67.5f64.to_radians().cos()).asin() / std::f64::consts::FRAC_PI_4);
    assert!((mid - 0.5 * k).abs() < 1e-12, "{mid}");
    assert!(mid > 0.0 && mid < 1.0);
}

#[test]
fn h_cd_rejects_inner_outside_outer() {
    let s = SphereSamples::default_for(2).unwrap();
    let pair = ConePair::new(
        Cone::new(&[1.0, 0.0], 1.0).unwrap(),
        Cone::new(&[0.0, 1.0], 1.0).unwrap(),
        0.5,
        2,
    )
    .unwrap();
    assert!(matches!(build_h_cd(&pair, &s), Err(czlab::Error::Domain(_))));
}

#[test]
fn member_is_reproduced_exactly() {
    let f = close_family(&riesz_family(2));
    let target = riesz_symbol(2, 2).unwrap();
    let a = approximate_symbol(&f, &target, 1, 1).unwrap();
    assert!(a.error <= 1e-10, "{}", a.error);
    // realized symbol equals the polynomial at every sample
    let s = f.samples();
    for p in &s.points {
        assert!((a.polynomial.symbol.eval_unit(p) - target.eval_unit(p)).norm() < 1e-10);
    }
}

#[test]
fn constants_only_leave_half_the_oscillation() {
    let f = close_family(&SymbolFamily::with_default_samples(0, 2, vec![]).unwrap());
    let (target, vals) = build_h_cd(&quarter_pair(), f.samples()).unwrap();
    let a = approximate_symbol(&f, &target, 5, 0).unwrap();
    let osc = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
    assert!(a.error >= osc / 2.0 - 1e-12);
}

#[test]
fn error_is_monotone_and_decays_for_smooth_targets() {
    let f = close_family(&riesz_family(2));
    // a smooth target that is not a polynomial of low degree
    let c1 = coordinate_symbol(2, 1).unwrap();
    let target = MultiplierSymbol::new(
        2,
        SymbolRule::Polynomial {
            members: vec![c1.rule().clone()],
            terms: (0..12)
                .map(|k| Monomial {
                    exponents: vec![k],
                    coeff: Complex64::new(0.5f64.powi(k as i32), 0.0),
                })
                .collect(),
        },
    )
    .unwrap();
    let low = approximate_symbol(&f, &target, 2, 0).unwrap();
    let high = approximate_symbol(&f, &target, 24, 0).unwrap();
    assert!(high.error * 10.0 <= low.error, "{} vs {}", high.error, low.error);
    let h = &high.history;
    let mut best = f64::INFINITY;
    for r in h {
        best = best.min(r.error);
    }
    assert_eq!(best, high.error);
}

#[test]
fn approximation_requires_closed_family() {
    let f = riesz_family(2);
    let r = approximate_symbol(&f, &riesz_symbol(2, 1).unwrap(), 2, 0);
    assert!(matches!(r, Err(czlab::Error::Precondition(_))));
}

#[test]
fn quarter_plane_target_is_reached_below_degree_24() {
    let f = close_family(&riesz_family(2));
    let (target, _) = build_h_cd(&quarter_pair(), f.samples()).unwrap();
    let a = approximate_symbol(&f, &target, 24, 1).unwrap();
    assert!(a.error <= 0.05, "{}", a.error);
    assert!(a.polynomial.degree <= 24);
    // trigonometric polynomials of degree k have 2k + 1 independent terms
    for r in &a.history {
        assert_eq!(r.monomials, 2 * r.degree + 1);
        assert!(r.ridge.is_none());
    }
}

#[test]
fn samples_are_shared() {
    let s = Arc::new(SphereSamples::default_for(3).unwrap());
    let f = SymbolFamily::new(1, 3, vec![riesz_symbol(3, 3).unwrap()], s.clone()).unwrap();
    assert!(Arc::ptr_eq(f.samples(), &s));
    assert!(SymbolFamily::new(1, 2, vec![], s).is_err());
}
