use gl3lab::coeffs::{d3_sieve, synthetic_table, CoefficientTable, CuspFormSpec, SourceKind};
use gl3lab::numtheory::{e_frac, KloostermanModulus, Twist};
use gl3lab::riesz::*;
use gl3lab::special::g_factor;
use gl3lab::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn twist(h: i64, k: u64) -> Twist {
    Twist::new(h, k).unwrap()
}

fn means(table: &CoefficientTable, variant: Variant, t: Twist, n: usize, seed: u64) -> RieszMeans {
    let series = TwistedSeries::new(variant, t, table, n).unwrap();
    RieszMeans::new(series, LValueSet::placeholder(5, &t, seed)).unwrap()
}

#[test]
fn sharp_sum_examples() {
    let table = synthetic_table(2000, 5);
    let t = twist(2, 7);
    assert_eq!(sharp_sum(0.5, &t, &table).unwrap(), c(0.0, 0.0));
    let v = sharp_sum(1.0, &t, &table).unwrap();
    assert!((v - e_frac(2, 7) * 0.5).norm() < 1e-15);

    let d3 = d3_sieve(1000);
    let one = twist(0, 1);
    let mut naive = 0.0;
    for m in 1..1000 {
        naive += d3.a_m1[m].re;
    }
    naive += 0.5 * d3.a_m1[1000].re;
    let v = sharp_sum(1000.0, &one, &d3).unwrap();
    assert!((v.re - naive).abs() < 1e-10 * naive);
    assert!(matches!(sharp_sum(2001.0, &t, &table), Err(Error::OutOfRange { .. })));
}

#[test]
fn sharp_sum_takes_midpoint_at_integers() {
    let table = synthetic_table(500, 9);
    let t = twist(3, 11);
    for n in [1.0, 17.0, 250.0, 499.0] {
        let mid = 0.5 * (sharp_sum(n - 1e-9, &t, &table).unwrap() + sharp_sum(n + 1e-9, &t, &table).unwrap());
        assert!((sharp_sum(n, &t, &table).unwrap() - mid).norm() < 1e-12);
    }
}

#[test]
fn raw_sum_examples() {
    let table = synthetic_table(1000, 2);
    let t = twist(4, 9);
    for a in 1..4 {
        assert_eq!(riesz_raw(a, Variant::Even, 1.0, &t, &table).unwrap(), c(0.0, 0.0));
    }
    for x in [3.0, 10.5, 99.0] {
        let s = sharp_sum(x, &t, &table).unwrap();
        let sym = riesz_raw(0, Variant::Even, x, &t, &table).unwrap();
        let mut direct = c(0.0, 0.0);
        let tc = twist(-4, 9);
        direct += sharp_sum(x, &tc, &table).unwrap();
        assert!((sym - (s + direct)).norm() < 1e-10);
    }
    let x = 500.37;
    let h = 1e-4;
    for variant in [Variant::Even, Variant::Odd] {
        let d = (riesz_raw(2, variant, x + h, &t, &table).unwrap() - riesz_raw(2, variant, x - h, &t, &table).unwrap())
            / (2.0 * h);
        let r1 = riesz_raw(1, variant, x, &t, &table).unwrap();
        assert!((d - r1).norm() < 1e-6 * r1.norm().max(1.0), "{d} vs {r1}");
    }
}

#[test]
fn raw_sums_are_continuous_at_integers() {
    let table = synthetic_table(400, 4);
    let t = twist(5, 13);
    for a in 1..4 {
        for n in [2.0, 57.0, 300.0] {
            let l = riesz_raw(a, Variant::Averaged, n - 1e-12, &t, &table).unwrap();
            let r = riesz_raw(a, Variant::Averaged, n + 1e-12, &t, &table).unwrap();
            let m = riesz_raw(a, Variant::Averaged, n, &t, &table).unwrap();
            let scale = m.norm().max(1.0);
            assert!((l - r).norm() < 1e-10 * scale);
            assert!((l - m).norm() < 1e-10 * scale);
        }
    }
}

#[test]
fn averaged_raw_is_mean_of_parities() {
    let table = synthetic_table(800, 6);
    let t = twist(3, 10);
    for a in 0..4 {
        for x in [12.25, 400.0, 777.7] {
            let even = riesz_raw(a, Variant::Even, x, &t, &table).unwrap();
            let odd = riesz_raw(a, Variant::Odd, x, &t, &table).unwrap();
            let avg = riesz_raw(a, Variant::Averaged, x, &t, &table).unwrap();
            assert!((0.5 * (even + odd) - avg).norm() < 1e-10 * avg.norm().max(1.0));
        }
    }
}

#[test]
fn residue_polynomial_examples() {
    let t = twist(2, 5);
    let lv = LValueSet::placeholder(4, &t, 1);
    for a in 0..4u32 {
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        let fact: f64 = (1..=a).map(|i| i as f64).product();
        for variant in [Variant::Even, Variant::Odd] {
            let want = lv.get(a, variant).unwrap() * (sign / fact);
            assert!((residue_polynomial(a, variant, 0.0, &lv).unwrap() - want).norm() < 1e-15);
        }
    }
    let want = 0.5 * (lv.values[0][0] + lv.values[0][1]);
    assert!((residue_polynomial(0, Variant::Averaged, 123.0, &lv).unwrap() - want).norm() < 1e-15);
    assert!(residue_polynomial(5, Variant::Even, 1.0, &lv).is_err());
}

#[test]
fn residue_polynomial_derivative_chain() {
    let t = twist(1, 3);
    let lv = LValueSet::placeholder(5, &t, 8);
    for a in 0..4u32 {
        let hi = residue_coefficients(a + 1, Variant::Odd, &lv).unwrap();
        let lo = residue_coefficients(a, Variant::Odd, &lv).unwrap();
        for p in 0..=a as usize {
            let d = hi[p + 1] * (p + 1) as f64;
            assert!((d - lo[p]).norm() <= 1e-15 * lo[p].norm().max(1e-300), "a={a} p={p}");
        }
    }
}

#[test]
fn a_tilde_splits_into_raw_and_residue() {
    let table = synthetic_table(600, 12);
    let t = twist(1, 4);
    let lv = LValueSet::placeholder(3, &t, 3);
    for a in 0..4 {
        let s = a_tilde(a, Variant::Averaged, 333.3, &t, &table, &lv).unwrap();
        assert_eq!(s.value, s.raw - s.residue);
        let zero = a_tilde(a, Variant::Averaged, 0.0, &t, &table, &lv).unwrap();
        assert_eq!(zero.raw, c(0.0, 0.0));
        assert_eq!(zero.value, -residue_polynomial(a, Variant::Averaged, 0.0, &lv).unwrap());
    }
}

#[test]
fn integral_examples() {
    let table = synthetic_table(300, 1);
    let m = means(&table, Variant::Even, twist(2, 9), 300, 4);
    assert_eq!(m.integrate_a_tilde(1, 17.5, 17.5).unwrap(), c(0.0, 0.0));
    assert!(m.integrate_a_tilde(1, 18.0, 17.0).is_err());

    let one = twist(0, 1);
    let unit = CoefficientTable::unit(10);
    let series = TwistedSeries::new(Variant::Even, one, &unit, 10).unwrap();
    let raw = series.raw_integral(0, 1.25, 1.75, 0).unwrap();
    assert!((raw - c(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn interval_polynomials_reproduce_raw_sums() {
    let table = synthetic_table(3000, 21);
    let series = TwistedSeries::new(Variant::Averaged, twist(3, 8), &table, 3000).unwrap();
    for a in 0..4u32 {
        let mut worst: f64 = 0.0;
        series
            .for_each_interval(a, 1000, 1300, |n, p| {
                let u = 0.37;
                let v = p.iter().rev().fold(c(0.0, 0.0), |acc, &q| acc * u + q);
                let want = series.raw(a, n as f64 + u).unwrap();
                let scale = series.raw_scale(a, n as f64 + u).unwrap();
                worst = worst.max((v - want).norm() / scale);
            })
            .unwrap();
        assert!(worst < 1e-12, "a={a}: {worst:e}");
    }
}

#[test]
fn key_property_is_exact_for_placeholder_values() {
    let table = synthetic_table(10_000, 77);
    for (i, (h, k)) in [(1i64, 1u64), (2, 3), (5, 7), (4, 13)].into_iter().enumerate() {
        for variant in [Variant::Even, Variant::Odd, Variant::Averaged] {
            let m = means(&table, variant, twist(h, k), 10_000, i as u64);
            for a in 0..4 {
                let r = m.key_property(a, 1234.56, 9876.5).unwrap();
                assert!(r.relative() < 1e-10, "a={a} k={k} {:e}", r.relative());
            }
        }
    }
}

#[test]
fn h_average_identity_holds() {
    let table = synthetic_table(5000, 31);
    let m = means(&table, Variant::Averaged, twist(3, 5), 5000, 2);
    let mut state = 12345u64;
    let mut uniform = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..50 {
        let x = 1.0 + 3000.0 * uniform();
        let h = 1000.0 * uniform();
        for a in 0..2 {
            let r = m.h_average(a, x, h).unwrap();
            assert!(r.relative() < 1e-9, "a={a} x={x} H={h}: {:e}", r.relative());
        }
    }
    for h in [1e-3, 1e-6, 1e-9, 0.0] {
        let r = m.h_average(1, 2500.5, h).unwrap();
        assert!(r.relative() < 1e-9, "H={h}: {:e}", r.relative());
    }
}

#[test]
fn l_value_for_modulus_one_uses_plain_dual_series() {
    let table = synthetic_table(2000, 13);
    let one = twist(0, 1);
    let v = twisted_l_value_truncated(1, 0, &one, &table, 2000).unwrap();
    let g = g_factor(c(-1.0, 0.0), 0, &table.spec).unwrap();
    let mut dual = c(0.0, 0.0);
    for m in 1..=2000 {
        dual += table.a_1m[m] * (2.0 / (m as f64 * m as f64));
    }
    let want = g * dual * PI.powf(-4.5);
    assert!((v.value - want).norm() < 1e-12 * want.norm());
    // Trivial zeros: G_0(0) and G_1(0) vanish when a Langlands parameter is 0.
    assert_eq!(twisted_l_value_truncated(0, 0, &one, &table, 100).unwrap().value, c(0.0, 0.0));
    assert_eq!(twisted_l_value_truncated(1, 1, &one, &table, 100).unwrap().value, c(0.0, 0.0));
}

#[test]
fn l_value_dual_series_for_prime_modulus() {
    let table = synthetic_table(3000, 17);
    let t = twist(2, 5);
    let v = twisted_l_value_truncated(1, 0, &t, &table, 3000).unwrap();
    let g = g_factor(c(-1.0, 0.0), 0, &table.spec).unwrap();
    let km5 = KloostermanModulus::new(5);
    let mut dual = c(0.0, 0.0);
    for m in 1..=3000u64 {
        let s5 = km5.sum(t.h_bar as i64, m as i64).unwrap() + km5.sum(t.h_bar as i64, -(m as i64)).unwrap();
        dual += table.coefficient(1, m).unwrap() * (s5 / (m * m) as f64);
        dual += table.coefficient(5, m).unwrap() * (2.0 / (125.0 * (m * m) as f64));
    }
    let want = g * dual * 5f64.powi(4) * PI.powf(-4.5);
    assert!((v.value - want).norm() < 1e-11 * want.norm());
}

#[test]
fn l_value_doubling_stays_within_error() {
    let table = synthetic_table(8000, 19);
    for (h, k) in [(1i64, 1u64), (1, 3), (2, 7)] {
        let t = twist(h, k);
        for (nu, j) in [(1u32, 0u32), (2, 1), (3, 0)] {
            let a = twisted_l_value_truncated(nu, j, &t, &table, 4000).unwrap();
            let b = twisted_l_value_truncated(nu, j, &t, &table, 8000).unwrap();
            assert!((a.value - b.value).norm() <= a.est_error, "nu={nu} j={j} k={k}");
            assert!(b.est_error <= a.est_error);
        }
    }
}

#[test]
fn l_value_at_edge_scales_like_three_halves_power() {
    let table = synthetic_table(20_000, 23);
    let mut ratios = Vec::new();
    for k in [3u64, 5, 7, 11] {
        let mut worst: f64 = 0.0;
        for t in Twist::all(k) {
            let v = twisted_l_value_truncated(0, 1, &t, &table, 20_000).unwrap();
            assert!(v.est_error < 0.05 * v.value.norm().max(1.0), "k={k}: {:?}", v);
            worst = worst.max(v.value.norm());
        }
        ratios.push(worst / (k as f64).powf(1.51));
    }
    let first = ratios[0];
    assert!(ratios.iter().all(|&r| r <= 10.0 * first), "{ratios:?}");
    let two = twisted_l_value_truncated(0, 1, &twist(1, 2), &table, 1000).unwrap();
    assert!(two.value.norm() < 1e-12);
}

#[test]
fn l_value_errors() {
    let table = synthetic_table(100, 3);
    let t = twist(1, 3);
    assert!(matches!(
        twisted_l_value(1, 0, &t, &table, 1e-30),
        Err(Error::SlowConvergence { .. })
    ));
    let mut spec = CuspFormSpec::trivial("bad", SourceKind::Synthetic);
    spec.alpha = c(-3.0, 0.0);
    spec.beta = c(1.5, 0.0);
    spec.gamma = c(1.5, 0.0);
    let bad = CoefficientTable { spec, ..table };
    assert!(matches!(twisted_l_value_truncated(0, 0, &t, &bad, 50), Err(Error::GammaPole(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn key_property_random(seed in 0u64..1000, a in 0u32..4, x in 0.0f64..4000.0, len in 0.0f64..1000.0,
                           k in 1u64..14, h in 0i64..14, variant in 0usize..3) {
        let t = match Twist::new(h, k) {
            Ok(t) => t,
            Err(_) => Twist::new(1, k).unwrap(),
        };
        let table = synthetic_table(5000, seed);
        let v = [Variant::Even, Variant::Odd, Variant::Averaged][variant];
        let m = means(&table, v, t, 5000, seed + 1);
        let r = m.key_property(a, x, x + len).unwrap();
        prop_assert!(r.relative() < 1e-9, "{:e}", r.relative());
    }
}
