use gl3lab::coeffs::*;
use gl3lab::numtheory::Twist;
use gl3lab::riesz::{a_tilde, residue_polynomial, LValueSet, Variant};
use gl3lab::special::{meijer, meijer_asymptotic, AsymptoticConfig};
use gl3lab::voronoi::*;
use gl3lab::Error;
use num_complex::Complex64;
use proptest::prelude::*;
use std::f64::consts::PI;

fn tw(h: i64, k: u64) -> Twist {
    Twist::new(h, k).unwrap()
}

#[test]
fn modulus_one_collapses_to_a_single_divisor() {
    let t = synthetic_table(200, 4);
    let x = 50.0;
    let a = 2;
    let got = dual_full(a, 0, x, &tw(0, 1), &t, 40, TermMethod::Contour).unwrap();
    let mut want = Complex64::new(0.0, 0.0);
    for m in 1..=40u64 {
        let y = PI.powi(6) * (m * m) as f64 * x * x;
        let j = meijer(a, 0, y, &t.spec).unwrap().value.re;
        want += t.coefficient(1, m).unwrap() / m as f64 * 2.0 * j;
    }
    want *= -PI.powf(-1.5) * x * x / 4.0;
    assert!((got.value - want).norm() <= 1e-12 * want.norm(), "{} vs {want}", got.value);
    let odd = dual_full(a, 1, x, &tw(0, 1), &t, 40, TermMethod::Contour).unwrap();
    assert_eq!(odd.value, Complex64::new(0.0, 0.0));
}

#[test]
fn odd_parity_flips_with_the_twist_sign() {
    let t = synthetic_table(200, 9);
    for (h, k) in [(1i64, 5u64), (2, 7), (3, 4)] {
        let p = dual_full(2, 1, 300.0, &tw(h, k), &t, 60, TermMethod::Contour).unwrap().value;
        let n = dual_full(2, 1, 300.0, &tw(-h, k), &t, 60, TermMethod::Contour).unwrap().value;
        assert!((p + n).norm() <= 1e-12 * p.norm().max(1e-300), "k={k}: {p} {n}");
        let pe = dual_full(2, 0, 300.0, &tw(h, k), &t, 60, TermMethod::Contour).unwrap().value;
        let ne = dual_full(2, 0, 300.0, &tw(-h, k), &t, 60, TermMethod::Contour).unwrap().value;
        assert!((pe - ne).norm() <= 1e-12 * pe.norm().max(1e-300));
    }
}

#[test]
fn difference_operator_kills_the_residue_polynomial() {
    let tw = tw(2, 7);
    for a in 1..=4u32 {
        let lv = LValueSet::placeholder(a, &tw, 17 + a as u64);
        let x = 1234.5;
        let delta = 3.25;
        let vals: Vec<Complex64> = (0..=a + 1)
            .map(|i| residue_polynomial(a, Variant::Averaged, x + i as f64 * delta, &lv).unwrap())
            .collect();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(forward_difference(&vals).norm() <= 1e-12 * scale * 2f64.powi(a as i32 + 1), "a={a}");
    }
    let cubes: Vec<Complex64> = (0..4).map(|i| Complex64::new((i * i * i) as f64, 0.0)).collect();
    assert_eq!(forward_difference(&cubes), Complex64::new(6.0, 0.0));
}

#[test]
fn zero_table_gives_zero_residual() {
    let t = CoefficientTable::zero(2000);
    let r = voronoi_residual(
        2,
        Variant::Averaged,
        1000.0,
        &tw(1, 3),
        &t,
        100,
        ResidualMode::FiniteDifference { delta: 10.0 },
        TermMethod::Contour,
    )
    .unwrap();
    assert_eq!(r.residual, 0.0);
    let lv = LValueSet::zero(2, &tw(1, 3));
    let r = voronoi_residual(2, Variant::Even, 1000.0, &tw(1, 3), &t, 100, ResidualMode::Direct(&lv), TermMethod::Contour)
        .unwrap();
    assert_eq!(r.residual, 0.0);
}

#[test]
fn leading_form_is_the_averaged_main_term_series() {
    let t = synthetic_table(500, 21);
    for (a, h, k, x) in [(2u32, 1i64, 3u64, 1e4), (3, 2, 5, 2e5), (2, 1, 1, 1e3), (4, 3, 4, 1e4)] {
        let lead = dual_leading(a, x, &tw(h, k), &t, 300, &Calibration::default()).unwrap();
        let series = dual_full_variant(a, Variant::Averaged, x, &tw(h, k), &t, 300, TermMethod::Asymptotic).unwrap();
        let rel = (lead.value - series.value).norm() / lead.value.norm();
        assert!(rel < 1e-10, "a={a} k={k}: {rel}");
        assert!(lead.budget > 0.0);
    }
}

#[test]
fn a1_averaged_is_the_cosine_form() {
    let t = synthetic_table(500, 5);
    let x = 2e4;
    let v = dual_a1(x, Variant::Averaged, &tw(1, 3), &t, 300.0, &Calibration::default()).unwrap();
    let series = dual_expansion(1, Variant::Averaged, &[x], &tw(1, 3), &t, 300, TermMethod::Asymptotic).unwrap();
    let s = series.partial(300)[0];
    assert!((v.value - s).norm() < 1e-10 * s.norm());
    assert_eq!(v.terms, 300);
}

#[test]
fn leading_phase_increments() {
    let x: f64 = 8000.0;
    for k in [1u64, 2, 3] {
        for m in [1u64, 7, 100] {
            let step = leading_phase(1, m + 1, x, k) - leading_phase(1, m, x, k);
            let want = (3.0 * x.cbrt() * ((m + 1) as f64).cbrt() - 3.0 * x.cbrt() * (m as f64).cbrt()) / k as f64;
            assert!((step - want).abs() < 1e-12);
        }
    }
    assert!((leading_phase(8, 1, 1.0, 1) - 12.0).abs() < 1e-12);
}

#[test]
fn budgets_shrink_at_the_predicted_rate() {
    let cal = Calibration::default();
    let r = budget_a1_averaged(2, 1e4, 2e3, &cal) / budget_a1_averaged(2, 1e4, 1e3, &cal);
    assert!((r - 2f64.powf(EPSILON - 1.0 / 3.0)).abs() < 1e-12);
    // The x^{5/3} term dominates here, so the ratio sits just above 2^{-1/3}.
    let r = budget_a1(2, 1e4, 2e3, &cal) / budget_a1(2, 1e4, 1e3, &cal);
    let dominant = 2f64.powf(EPSILON - 1.0 / 3.0);
    assert!(r > dominant && r < dominant * 1.01, "{r}");
    let c = Calibration {
        leading: 3.0,
        ..cal
    };
    assert_eq!(budget_leading(2, 3, 1e4, &c), 3.0 * budget_leading(2, 3, 1e4, &cal));
}

#[test]
fn preconditions() {
    let t = synthetic_table(3000, 1);
    let cal = Calibration::default();
    assert!(matches!(dual_leading(2, 20.0, &tw(1, 3), &t, 10, &cal), Err(Error::RangeViolation(_))));
    assert!(matches!(dual_a1(1e4, Variant::Even, &tw(1, 3), &t, 20.0, &cal), Err(Error::RangeViolation(_))));
    assert!(matches!(dual_a1(30.0, Variant::Averaged, &tw(1, 3), &t, 2000.0, &cal), Err(Error::RangeViolation(_))));
    assert!(matches!(dual_a1(1e4, Variant::Averaged, &tw(1, 2), &t, 1e12, &cal), Err(Error::RangeViolation(_))));
    assert!(matches!(dual_full(1, 0, 10.0, &tw(1, 3), &t, 10, TermMethod::Contour), Err(Error::RangeViolation(_))));
    assert!(matches!(dual_full(2, 2, 10.0, &tw(1, 3), &t, 10, TermMethod::Contour), Err(Error::RangeViolation(_))));
    assert!(matches!(dual_full(2, 0, 10.0, &tw(1, 3), &t, 6000, TermMethod::Contour), Err(Error::OutOfRange { .. })));
    let fd = ResidualMode::FiniteDifference { delta: 100.0 };
    assert!(matches!(
        voronoi_residual(2, Variant::Even, 2900.0, &tw(1, 3), &t, 10, fd, TermMethod::Contour),
        Err(Error::RangeViolation(_))
    ));
    let d3 = d3_sieve(500);
    assert!(matches!(dual_full(2, 0, 100.0, &tw(1, 3), &d3, 10, TermMethod::Contour), Err(Error::UnsupportedSource(_))));
    assert!(dual_full(2, 0, 100.0, &tw(0, 1), &d3, 10, TermMethod::Contour).is_ok());
}

#[test]
fn partial_sums_stay_inside_the_tail_envelope() {
    let t = synthetic_table(2000, 33);
    for a in [2u32, 3] {
        for (h, k) in [(0i64, 1u64), (1, 3), (2, 5)] {
            let x = 2000.0;
            let e = dual_expansion(a, Variant::Averaged, &[x], &tw(h, k), &t, 800, TermMethod::Contour).unwrap();
            for m in [50usize, 100, 200, 400] {
                let diff = (e.partial(2 * m)[0] - e.partial(m)[0]).norm();
                assert!(diff <= e.tail_estimate(0, m), "a={a} k={k} m={m}: {diff} > {}", e.tail_estimate(0, m));
            }
        }
    }
}

#[test]
fn contour_and_main_term_agree_within_the_envelope() {
    let t = CoefficientTable::constant(100, 1.0);
    let cfg = AsymptoticConfig::default();
    for a in [2u32, 3] {
        for x in [3.0, 30.0, 300.0] {
            let c = dual_expansion(a, Variant::Even, &[x], &tw(0, 1), &t, 60, TermMethod::Contour).unwrap();
            let s = dual_expansion(a, Variant::Even, &[x], &tw(0, 1), &t, 60, TermMethod::Asymptotic).unwrap();
            for m in 1..=60usize {
                let y = PI.powi(6) * (m * m) as f64 * x * x;
                let env = meijer_asymptotic(a, 0, y, &cfg).unwrap().est_error;
                let scale = PI.powf(-1.5) * x.powi(a as i32) * 0.5f64.powi(a as i32) * 2.0 / m as f64;
                let gap = (c.terms[m - 1][0] - s.terms[m - 1][0]).norm();
                assert!(gap <= scale * env, "a={a} x={x} m={m}: {gap} > {}", scale * env);
            }
        }
    }
}

#[test]
fn hybrid_switches_on_y() {
    let t = synthetic_table(100, 2);
    let x = 10.0;
    let c = dual_expansion(2, Variant::Even, &[x], &tw(0, 1), &t, 20, TermMethod::Contour).unwrap();
    let s = dual_expansion(2, Variant::Even, &[x], &tw(0, 1), &t, 20, TermMethod::Asymptotic).unwrap();
    let h = dual_expansion(2, Variant::Even, &[x], &tw(0, 1), &t, 20, TermMethod::Hybrid { threshold: 1e10 }).unwrap();
    for m in 1..=20usize {
        let y = PI.powi(6) * (m * m) as f64 * x * x;
        let want = if y >= 1e10 { &s } else { &c };
        assert_eq!(h.terms[m - 1][0], want.terms[m - 1][0], "m={m}");
    }
}

#[test]
fn finite_difference_matches_differenced_direct_residuals() {
    let t = synthetic_table(3000, 8);
    let twist = tw(2, 5);
    let lv = LValueSet::placeholder(2, &twist, 3);
    let (x, delta, a) = (1500.0, 7.5, 2u32);
    let fd = voronoi_residual(a, Variant::Averaged, x, &twist, &t, 200, ResidualMode::FiniteDifference { delta }, TermMethod::Contour)
        .unwrap();
    let xs: Vec<f64> = (0..=a + 1).map(|i| x + i as f64 * delta).collect();
    let dual = dual_expansion(a, Variant::Averaged, &xs, &twist, &t, 200, TermMethod::Contour).unwrap().partial(200);
    let diffs: Vec<Complex64> = xs
        .iter()
        .zip(&dual)
        .map(|(&u, d)| a_tilde(a, Variant::Averaged, u, &twist, &t, &lv).unwrap().value - d)
        .collect();
    let via_direct = forward_difference(&diffs).norm();
    assert!((via_direct - fd.residual).abs() <= 1e-9 * fd.reference.max(fd.residual));
}

#[test]
fn scan_reports_every_checkpoint() {
    let t = synthetic_table(3000, 8);
    let fd = ResidualMode::FiniteDifference { delta: 5.0 };
    let scan =
        voronoi_residual_scan(2, Variant::Even, 1000.0, &tw(1, 3), &t, &[40, 10, 20], fd, TermMethod::Contour).unwrap();
    assert_eq!(scan.iter().map(|r| r.m_max).collect::<Vec<_>>(), vec![40, 10, 20]);
    let single = voronoi_residual(2, Variant::Even, 1000.0, &tw(1, 3), &t, 20, fd, TermMethod::Contour).unwrap();
    assert_eq!(scan[2], single);
    assert!(scan[0].tail_estimate < scan[1].tail_estimate);
}

#[test]
fn default_delta_values() {
    assert_eq!(default_delta(500.0), 1.0);
    assert_eq!(default_delta(5000.0), 5.0);
}

#[test]
fn thread_count_does_not_change_results() {
    let t = synthetic_table(1000, 12);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            dual_full_variant(2, Variant::Averaged, 700.0, &tw(3, 7), &t, 300, TermMethod::Contour).unwrap().value
        })
    };
    let one = run(1);
    for threads in [2, 4, 8] {
        let v = run(threads);
        assert_eq!(v.re.to_bits(), one.re.to_bits());
        assert_eq!(v.im.to_bits(), one.im.to_bits());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn averaged_value_is_periodic_in_h(h in 1i64..40, seed in 0u64..50) {
        let k = 7u64;
        prop_assume!(h % 7 != 0);
        let t = synthetic_table(300, seed);
        let a = dual_full_variant(2, Variant::Averaged, 400.0, &tw(h, k), &t, 50, TermMethod::Contour).unwrap().value;
        let b = dual_full_variant(2, Variant::Averaged, 400.0, &tw(h + k as i64, k), &t, 50, TermMethod::Contour).unwrap().value;
        prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
        prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
    }
}

fn sym2() -> CoefficientTable {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/maass_r9.5337.txt");
    load_gl2_eigenvalues(std::path::Path::new(path))
        .unwrap()
        .sym2_table(100_000)
        .unwrap()
}

#[test]
fn sym2_direct_identity_at_modulus_one() {
    let t = sym2();
    let one = tw(0, 1);
    let lv = LValueSet::compute(2, &one, &t, 1e-3).unwrap();
    let reports = voronoi_residual_scan(
        2,
        Variant::Averaged,
        1000.0,
        &one,
        &t,
        &[100, 10_000],
        ResidualMode::Direct(&lv),
        TermMethod::Contour,
    )
    .unwrap();
    let last = &reports[1];
    assert!(last.relative() < 1e-3, "{:?}", last);
    assert!(last.residual < reports[0].residual);
}

#[test]
fn sym2_truncated_forms_within_budget() {
    let t = sym2();
    let cal = Calibration::default();
    let h = tw(1, 3);
    let lv = LValueSet::compute(2, &h, &t, 1e-2).unwrap();
    let direct = a_tilde(2, Variant::Averaged, 1e4, &h, &t, &lv).unwrap().value;
    let lead = dual_leading(2, 1e4, &h, &t, 2000, &cal).unwrap();
    assert!((direct - lead.value).norm() <= lead.budget, "{direct} {:?}", lead);

    let h = tw(1, 2);
    let lv = LValueSet::compute(1, &h, &t, 1e-2).unwrap();
    let direct = a_tilde(1, Variant::Averaged, 1e4, &h, &t, &lv).unwrap().value;
    let a1 = dual_a1(1e4, Variant::Averaged, &h, &t, 1000.0, &cal).unwrap();
    assert!((direct - a1.value).norm() <= a1.budget, "{direct} {:?}", a1);
}
