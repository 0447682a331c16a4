use num_complex::Complex64;
use proptest::prelude::*;

use fracadrc::stability::{build_char_poly, rationalize_order, sector_test, CharPoly, LoopParams, Polynomial};

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn params() -> impl Strategy<Value = LoopParams> {
    (0.5f64..2.0, any::<bool>(), -50.0f64..50.0, 10.0f64..400.0, 100.0f64..1000.0).prop_map(|(mag, neg, a_o, k, wo)| {
        LoopParams { b: if neg { -mag } else { mag }, b_o: 1.0, a_o, gain: k, beta1: 2.0 * wo, beta2: wo * wo }
    })
}

fn order() -> impl Strategy<Value = (u32, u32)> {
    prop_oneof![Just((1, 2)), Just((3, 5)), Just((4, 5)), Just((9, 10)), Just((1, 3)), Just((7, 10))]
}

/// Roots sorted by (re, im) for comparison.
fn sorted(mut r: Vec<Complex64>) -> Vec<Complex64> {
    r.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rationalization_is_exact_and_reduced(p in 1u32..100, q in 2u32..=100) {
        prop_assume!(p < q);
        let (pp, qq) = rationalize_order(p as f64 / q as f64, 1e-9).unwrap();
        prop_assert_eq!(gcd(pp, qq), 1);
        prop_assert_eq!(pp * q, p * qq);
    }

    #[test]
    fn roots_count_and_conjugate_symmetry(lp in params(), (p, q) in order()) {
        let cp = build_char_poly(&lp, p, q).unwrap();
        let rep = sector_test(&cp).unwrap();
        prop_assert_eq!(rep.roots.len(), (2 * q + p) as usize);
        prop_assert!(rep.residual_max < 1e-8);
        let roots = rep.complex_roots();
        for w in &roots {
            let partner = roots.iter().map(|v| (v - w.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(partner <= 1e-8 * w.norm().max(1.0));
        }
        prop_assert_eq!(rep.stable, rep.margin > 1e-9);
    }

    #[test]
    fn verdict_invariant_under_positive_scaling(lp in params(), (p, q) in order(), c in 1e-3f64..1e3) {
        let cp = build_char_poly(&lp, p, q).unwrap();
        let scaled = CharPoly { poly: Polynomial::new(cp.coeffs().iter().map(|x| x * c).collect()), ..cp.clone() };
        let (a, b) = (sector_test(&cp).unwrap(), sector_test(&scaled).unwrap());
        prop_assert_eq!(a.stable, b.stable);
        prop_assert!((a.margin - b.margin).abs() < 1e-10);
        for (x, y) in sorted(a.complex_roots()).iter().zip(sorted(b.complex_roots())) {
            prop_assert!((x - y).norm() <= 1e-10 * x.norm().max(1.0));
        }
    }

    #[test]
    fn recovers_planted_roots(re in prop::collection::vec(-3.0f64..3.0, 1..6), im in prop::collection::vec(0.1f64..3.0, 1..6)) {
        // Distinct planted roots: reals plus conjugate pairs.
        let mut planted: Vec<Complex64> = re.iter().enumerate().map(|(i, r)| Complex64::new(r + 7.0 * i as f64, 0.0)).collect();
        for (i, y) in im.iter().enumerate() {
            let c = Complex64::new(-1.0 - 5.0 * i as f64, *y);
            planted.push(c);
            planted.push(c.conj());
        }
        let mut coeffs = vec![Complex64::new(1.0, 0.0)];
        for r in &planted {
            let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
            for (k, c) in coeffs.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            coeffs = next;
        }
        let poly = Polynomial::new(coeffs.iter().map(|c| c.re).collect());
        let (found, _) = poly.roots().unwrap();
        for r in &planted {
            let best = found.iter().map(|w| (w - r).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-6 * r.norm().max(1.0), "root {} missed by {}", r, best);
        }
    }
}

#[test]
fn matched_gain_is_stable_over_reference_neighbourhood() {
    for k in [10.0, 150.0, 1e3, 1e5] {
        for wo in [50.0, 400.0, 5000.0] {
            for (p, q) in [(1, 2), (4, 5), (9, 10)] {
                let lp = LoopParams { gain: k, beta1: 2.0 * wo, beta2: wo * wo, ..LoopParams::reference() };
                let rep = sector_test(&build_char_poly(&lp, p, q).unwrap()).unwrap();
                assert!(rep.stable, "K {k} omega_o {wo} mu {p}/{q}: margin {}", rep.margin);
            }
        }
    }
}

#[test]
fn report_round_trips_through_json() {
    let rep = sector_test(&build_char_poly(&LoopParams::reference(), 4, 5).unwrap()).unwrap();
    let back: fracadrc::StabilityReport = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    assert_eq!(back.roots, rep.roots);
    assert_eq!(back.margin, rep.margin);
    assert_eq!(back.stable, rep.stable);
}
