use num_complex::Complex64;
use proptest::prelude::*;

use fracadrc::fracops::{frac_pow, gl_coefficients, oustaloup_design, FractionalOperator, GlOperator};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gl_is_linear(mu in -0.9f64..0.99, a in -5.0f64..5.0, b in -5.0f64..5.0, seed in 0u64..1000) {
        let x: Vec<f64> = (0..200).map(|k| ((k as f64 + seed as f64) * 0.37).sin()).collect();
        let y: Vec<f64> = (0..200).map(|k| ((k as f64) * 0.11 + seed as f64).cos()).collect();
        let (mut gx, mut gy, mut gz) = (GlOperator::new(mu, 1e-2).unwrap(), GlOperator::new(mu, 1e-2).unwrap(), GlOperator::new(mu, 1e-2).unwrap());
        for k in 0..200 {
            let (p, q) = (gx.push(x[k]), gy.push(y[k]));
            let r = gz.push(a * x[k] + b * y[k]);
            prop_assert!((r - (a * p + b * q)).abs() <= 1e-9 * (1.0 + r.abs()));
        }
    }

    #[test]
    fn gl_weights_compose(a in -0.9f64..0.9, b in -0.9f64..0.9) {
        // (1 - z)^a (1 - z)^b = (1 - z)^(a + b).
        let n = 60;
        let (wa, wb, wab) = (gl_coefficients(a, n), gl_coefficients(b, n), gl_coefficients(a + b, n));
        for k in 0..n {
            let conv: f64 = (0..=k).map(|j| wa[j] * wb[k - j]).sum();
            prop_assert!((conv - wab[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn gl_weights_recur(mu in -0.99f64..1.0) {
        let w = gl_coefficients(mu, 40);
        prop_assert_eq!(w[0], 1.0);
        for k in 1..40 {
            let expect = w[k - 1] * (1.0 - (mu + 1.0) / k as f64);
            prop_assert!((w[k] - expect).abs() <= 1e-15 * expect.abs().max(1e-300));
        }
    }

    #[test]
    fn solve_next_inverts_the_operator(mu in 0.1f64..1.0, diag in 0.0f64..50.0) {
        let mut op = GlOperator::new(mu, 1e-3).unwrap();
        op.push(0.0);
        let mut check = GlOperator::new(mu, 1e-3).unwrap();
        check.push(0.0);
        for k in 0..100 {
            let rhs = (k as f64 * 0.05).sin();
            let x = op.solve_next(rhs, diag).unwrap();
            let dx = check.push(x);
            prop_assert!((dx + diag * x - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn frac_pow_polar(mu in -0.99f64..0.99, re in -100.0f64..100.0, im in -100.0f64..100.0) {
        let s = Complex64::new(re, im);
        prop_assume!(s.norm() > 1e-6);
        let p = frac_pow(s, mu).unwrap();
        prop_assert!((p.norm() - s.norm().powf(mu)).abs() <= 1e-12 * p.norm());
        prop_assert!((p.arg() - mu * s.arg()).abs() < 1e-12);
        let c = frac_pow(s.conj(), mu).unwrap();
        prop_assert!((c - p.conj()).norm() <= 1e-12 * p.norm());
    }

    #[test]
    fn oustaloup_tracks_ideal_in_band(mu in 0.1f64..0.9, lw in -1.0f64..3.0) {
        let f = oustaloup_design(mu, 1e-2, 1e4, 5).unwrap();
        let w = 10f64.powf(lw);
        let h = f.response(Complex64::new(0.0, w));
        let mag_err = 20.0 * (h.norm() / w.powf(mu)).log10();
        let phase_err = h.arg().to_degrees() - 90.0 * mu;
        prop_assert!(mag_err.abs() < 0.5, "magnitude error {} dB", mag_err);
        prop_assert!(phase_err.abs() < 5.0, "phase error {} deg", phase_err);
    }
}

#[test]
fn gl_derivative_of_power_law() {
    // D^mu t^2 = 2 t^(2 - mu) / Gamma(3 - mu).
    let ts = 1.0 / 8000.0;
    for mu in [0.3, 0.6, 0.9] {
        let mut op = GlOperator::new(mu, ts).unwrap();
        let mut last = 0.0;
        for k in 0..=8000 {
            let t = k as f64 * ts;
            last = op.push(t * t);
        }
        let exact = 2.0 / statrs::function::gamma::gamma(3.0 - mu);
        assert!((last - exact).abs() < 1e-3 * exact, "mu {mu}: {last} vs {exact}");
    }
}

#[test]
fn short_memory_forgets_old_input() {
    let mut op = GlOperator::with_memory(0.5, 1e-3, 50).unwrap();
    op.push(1000.0);
    for _ in 0..60 {
        op.push(0.0);
    }
    assert_eq!(op.push(0.0), 0.0);
    assert_eq!(op.history().len(), 50);
}
