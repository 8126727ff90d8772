use gl3lab::coeffs::*;
use gl3lab::numtheory::{gcd, primes_up_to};
use gl3lab::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn seeds_for(m_max: usize, f: impl Fn(u64) -> (Complex64, Complex64)) -> BTreeMap<u64, (Complex64, Complex64)> {
    primes_up_to(m_max).into_iter().map(|p| (p, f(p))).collect()
}

/// Naive product of the three geometric series in the Satake parameters.
fn satake_power(roots: [Complex64; 3], n: usize) -> Complex64 {
    let mut total = c(0.0, 0.0);
    for i in 0..=n {
        for j in 0..=n - i {
            total += roots[0].powu(i as u32) * roots[1].powu(j as u32) * roots[2].powu((n - i - j) as u32);
        }
    }
    total
}

#[test]
fn spec_validation() {
    let z = c(0.0, 0.0);
    assert!(CuspFormSpec::new([c(0.1, 0.0), z, z], 0.0, "x", SourceKind::Synthetic).is_err());
    assert!(CuspFormSpec::new([c(0.6, 0.0), c(-0.6, 0.0), z], 0.0, "x", SourceKind::Synthetic).is_err());
    assert!(CuspFormSpec::new([z, z, z], 0.4, "x", SourceKind::Synthetic).is_err());
    assert!(CuspFormSpec::new([z, z, z], THETA_PROVED, "x", SourceKind::Synthetic).is_ok());
    let s = CuspFormSpec::sym2(9.5336952613535575);
    s.validate().unwrap();
    let p = s.params();
    assert!((p[0] + p[1] + p[2]).norm() < 1e-12);
    assert!(s.is_conjugation_closed());
}

#[test]
fn zero_seeds_give_zero_square_coefficient() {
    let z = c(0.0, 0.0);
    let t = hecke_extend(&seeds_for(50, |_| (z, z)), 50, CuspFormSpec::trivial("zero", SourceKind::Synthetic)).unwrap();
    assert_eq!(t.a_m1[4], z);
    assert_eq!(t.a_m1[8], c(1.0, 0.0));
    assert_eq!(t.a_m1[1], c(1.0, 0.0));
}

#[test]
fn euler_factor_matches_satake_expansion() {
    let roots = [c(0.3, 0.8), c(-0.7, 0.2), c(0.0, 0.0)];
    let r3 = c(1.0, 0.0) / (roots[0] * roots[1]);
    let roots = [roots[0], roots[1], r3];
    let a = roots[0] + roots[1] + roots[2];
    let b = roots[0] * roots[1] + roots[0] * roots[2] + roots[1] * roots[2];
    let series = euler_series(a, b, 8);
    for (n, v) in series.iter().enumerate() {
        let want = satake_power(roots, n);
        assert!((v - want).norm() < 1e-9 * (1.0 + want.norm()), "n={n}");
    }
    assert!((series[2] - (a * a - b)).norm() < 1e-14);
}

#[test]
fn seeded_square_and_multiplicativity() {
    let (a, b) = (c(1.25, -0.5), c(0.75, 0.25));
    let t = hecke_extend(&seeds_for(40, |_| (a, b)), 40, CuspFormSpec::trivial("s", SourceKind::Synthetic)).unwrap();
    assert!((t.a_m1[4] - (a * a - b)).norm() < 1e-14);
    assert!((t.a_1m[4] - (b * b - a)).norm() < 1e-14);
    assert_eq!(t.a_m1[6], t.a_m1[2] * t.a_m1[3]);
    assert_eq!(t.a_m1[2], a);
    assert_eq!(t.a_1m[2], b);
}

#[test]
fn missing_seed_is_reported() {
    let mut seeds = seeds_for(30, |_| (c(1.0, 0.0), c(1.0, 0.0)));
    seeds.remove(&17);
    let err = hecke_extend(&seeds, 30, CuspFormSpec::trivial("s", SourceKind::Synthetic)).unwrap_err();
    assert_eq!(err, Error::MissingSeed(17));
}

#[test]
fn coefficient_formula() {
    let t = synthetic_table(200, 7);
    for m in 1..=200u64 {
        assert_eq!(t.coefficient(m, 1).unwrap(), t.a_m1[m as usize]);
        assert_eq!(t.coefficient(1, m).unwrap(), t.a_1m[m as usize]);
    }
    for p in primes_up_to(200) {
        let want = t.a_1m[p as usize] * t.a_m1[p as usize] - 1.0;
        assert!((t.coefficient(p, p).unwrap() - want).norm() < 1e-12);
    }
    assert!(matches!(t.coefficient(201, 1), Err(Error::OutOfRange { .. })));
    assert!(matches!(t.coefficient(1, 300), Err(Error::OutOfRange { .. })));
}

#[test]
fn coefficient_satisfies_hecke_relation() {
    // A(p,1) A(m,d) = A(pm,d) + A(m,d/p) + A(m/p... ) for p coprime to md reduces to
    // A(pm, d) = A(p,1) A(m,d).
    let t = synthetic_table(400, 3);
    for (m, d) in [(4u64, 6u64), (9, 3), (8, 12), (5, 25)] {
        for p in [7u64, 11, 13] {
            let lhs = t.coefficient(p * m, d).unwrap();
            let rhs = t.a_m1[p as usize] * t.coefficient(m, d).unwrap();
            assert!((lhs - rhs).norm() < 1e-10, "m={m} d={d} p={p}");
        }
    }
}

#[test]
fn d3_table_values_and_restriction() {
    let t = d3_sieve(1000);
    assert_eq!(t.a_m1[1].re, 1.0);
    assert_eq!(t.a_m1[4].re, 6.0);
    for p in primes_up_to(1000) {
        assert_eq!(t.a_m1[p as usize].re, 3.0);
    }
    assert_eq!(t.spec.source_kind, SourceKind::D3);
    assert!(matches!(t.coefficient(4, 2), Err(Error::UnsupportedSource(_))));
    assert_eq!(t.coefficient(12, 1).unwrap().re, 18.0);
}

#[test]
fn gl2_parsing() {
    let e = parse_gl2_eigenvalues("r 9.5\n2 0\n").unwrap();
    assert_eq!(e.r, 9.5);
    assert_eq!(e.sym2_seeds()[&2].0, c(-1.0, 0.0));
    let e = parse_gl2_eigenvalues("# comment\nr 1\n5 2\n").unwrap();
    assert_eq!(e.sym2_seeds()[&5].0, c(3.0, 0.0));
    assert_eq!(parse_gl2_eigenvalues("2 0.5\n"), Err(Error::MissingParameter("r")));
    assert_eq!(parse_gl2_eigenvalues(""), Err(Error::MissingParameter("r")));
    assert!(matches!(parse_gl2_eigenvalues("r 1\n2 abc\n"), Err(Error::Parse { line: 2, .. })));
    assert!(matches!(parse_gl2_eigenvalues("r 1\n2 1\n4 1\n"), Err(Error::Parse { line: 3, .. })));
    let e = parse_gl2_eigenvalues("r 1\n2 1\n3 1\n").unwrap();
    assert_eq!(e.sym2_table(10).unwrap_err(), Error::MissingSeed(5));
}

#[test]
fn sym2_table_is_real_and_self_dual() {
    let mut text = String::from("r 9.53369526135355755\n");
    for (i, p) in primes_up_to(500).into_iter().enumerate() {
        text.push_str(&format!("{p} {}\n", ((i as f64) * 0.37).sin() * 1.8));
    }
    let t = parse_gl2_eigenvalues(&text).unwrap().sym2_table(500).unwrap();
    assert_eq!(t.a_m1[1], c(1.0, 0.0));
    for m in 1..=500 {
        assert_eq!(t.a_m1[m].im, 0.0);
        assert_eq!(t.a_m1[m], t.a_1m[m].conj());
    }
}

#[test]
fn rankin_selberg_examples() {
    let r = rankin_selberg_check(&CoefficientTable::constant(1000, 1.0), 1).unwrap();
    assert!((r.first_moment_slope - 1.0).abs() < 1e-12, "{r:?}");
    assert!((r.second_moment_slope - 1.0).abs() < 1e-12);
    let r = rankin_selberg_check(&d3_sieve(100_000), 1).unwrap();
    assert!((1.0..=1.35).contains(&r.first_moment_slope), "{}", r.first_moment_slope);
    assert!(matches!(
        rankin_selberg_check(&CoefficientTable::unit(99), 1),
        Err(Error::InsufficientData { .. })
    ));
}

#[test]
fn sym2_table_from_shipped_eigenvalues() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/maass_r9.5337.txt");
    let e = load_gl2_eigenvalues(std::path::Path::new(path)).unwrap();
    let t = e.sym2_table(100_000).unwrap();
    // A(p,1) = lambda(p)^2 - 1 for the symmetric square.
    for p in [2u64, 3, 97, 99_991] {
        let l = e.lambda[&p];
        assert!((t.a_m1[p as usize].re - (l * l - 1.0)).abs() < 1e-12);
    }
    // sum |A(m,1)|^2 grows linearly; the first moment sits well below it.
    let r = rankin_selberg_check(&t, 1).unwrap();
    assert!((r.second_moment_slope - 1.0).abs() < 0.1, "{r:?}");
    assert!(r.first_moment_slope < r.second_moment_slope, "{r:?}");
}

#[test]
fn cache_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("syn.cache");
    let t = synthetic_table(300, 11);
    write_cache(&path, &t).unwrap();
    let back = read_cache(&path).unwrap();
    assert_eq!(back.m_max, 300);
    assert_eq!(back.a_m1, t.a_m1);
    assert_eq!(back.spec.label, t.spec.label);
    assert_eq!(back.spec.source_kind, SourceKind::Synthetic);

    let text = std::fs::read_to_string(&path).unwrap();
    let tampered = text.replacen("\n7 ", "\n7 1", 1);
    assert!(matches!(cache_from_str(&tampered), Err(Error::Cache(_))));
    let truncated: String = text.lines().filter(|l| !l.starts_with("# sha256")).collect::<Vec<_>>().join("\n");
    assert!(matches!(cache_from_str(&truncated), Err(Error::Cache(_))));
}

#[test]
fn every_provider_has_unit_first_coefficient() {
    assert_eq!(CoefficientTable::unit(10).a_m1[1], c(1.0, 0.0));
    assert_eq!(d3_sieve(10).a_m1[1], c(1.0, 0.0));
    assert_eq!(synthetic_table(10, 1).a_m1[1], c(1.0, 0.0));
    assert_eq!(synthetic_table(10, 1).a_1m[1], c(1.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn coprime_multiplicativity(seed in 0u64..1000) {
        let t = synthetic_table(5000, seed);
        let mut rng = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 33) % 70 + 1
        };
        let mut checked = 0;
        while checked < 1000 {
            let (m, n) = (next(), next());
            if gcd(m, n) != 1 {
                continue;
            }
            let lhs = t.a_m1[(m * n) as usize];
            let rhs = t.a_m1[m as usize] * t.a_m1[n as usize];
            prop_assert!((lhs - rhs).norm() <= 1e-9 * lhs.norm().max(1e-300) + 1e-15);
            checked += 1;
        }
    }

    #[test]
    fn degree_one_coefficient_recovers_seed(re in -3.0f64..3.0, im in -3.0f64..3.0, bre in -3.0f64..3.0) {
        let a = c(re, im);
        let b = c(bre, -im);
        let s = euler_series(a, b, 5);
        prop_assert_eq!(s[0], c(1.0, 0.0));
        prop_assert_eq!(s[1], a);
    }
}
