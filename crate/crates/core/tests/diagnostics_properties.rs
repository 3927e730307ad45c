use proptest::prelude::*;
use qmac_core::diagnostics::{potential_derivative, potential_f, potential_f_cached, LogScalar};
use qmac_core::protocol::{g_inverse, g_of, GParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn potential_is_monotone_and_convex(lx in 1.0f64..20.0, lh in -3.0f64..1.0) {
        let x = lx.exp();
        let h = lh.exp();
        let (a, b, c) = (potential_f(x - h), potential_f(x), potential_f(x + h));
        prop_assert!(a <= b + 1e-9 && b <= c + 1e-9);
        // midpoint convexity, since the derivative is nondecreasing
        prop_assert!(2.0 * b <= a + c + 1e-8 * c.max(1.0));
    }

    #[test]
    fn potential_derivative_by_central_differences(lx in 2.0f64..25.0) {
        let x = lx.exp();
        let h = 1e-4 * x;
        let fd = (potential_f(x + h) - potential_f(x - h)) / (2.0 * h);
        let exact = potential_derivative(x);
        prop_assert!((fd - exact).abs() <= 1e-5 * exact.max(1e-3), "x {} fd {} exact {}", x, fd, exact);
    }

    #[test]
    fn cached_potential_matches_quadrature(lx in 0.0f64..27.0) {
        let x = lx.exp();
        let direct = potential_f(x);
        prop_assert!((potential_f_cached(x) - direct).abs() <= 1e-8 * direct.max(1.0));
    }

    #[test]
    fn g_round_trip(lx in 0.0f64..(1e12f64).ln(), alpha in 2.5f64..6.0) {
        let params = GParams::new(alpha).unwrap();
        let x = lx.exp();
        let back = g_of(g_inverse(x, &params), &params);
        // g^{-1} is clamped to e where g is flat at 1
        let target = x.max(1.0);
        prop_assert!((back - target).abs() <= 1e-9 * target, "x {} back {}", x, back);
    }

    #[test]
    fn log_scalar_round_trip(ln in -700.0f64..700.0) {
        let s = LogScalar::from_ln(ln);
        prop_assert!((s.log10() * std::f64::consts::LN_10 - ln).abs() <= 1e-12 * ln.abs().max(1.0));
        prop_assert!((LogScalar::from_value(s.value()).ln() - ln).abs() <= 1e-12 * ln.abs().max(1.0));
    }
}

#[test]
fn potential_vanishes_below_e() {
    assert_eq!(potential_f(1.0), 0.0);
    assert_eq!(potential_f(std::f64::consts::E), 0.0);
    assert!(potential_f(10.0) > 0.0);
}
