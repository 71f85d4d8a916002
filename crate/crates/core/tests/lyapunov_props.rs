use proptest::prelude::*;
use transportlab::lyapunov::moment_lyapunov_from_samples;

fn samples() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-30.0f64..60.0, 5..200)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn empirical_moment_function_vanishes_at_zero(l in samples(), t in 1.0f64..500.0) {
        prop_assert_eq!(moment_lyapunov_from_samples(&l, 0.0, t).0, 0.0);
    }

    #[test]
    fn empirical_moment_function_is_concave(l in samples(), t in 1.0f64..500.0, p in -0.9f64..0.8, h in 0.01f64..0.1) {
        let f = |q: f64| moment_lyapunov_from_samples(&l, q, t).0;
        let second = f(p + h) - 2.0 * f(p) + f(p - h);
        prop_assert!(second <= 1e-9 * (1.0 + f(p).abs()));
    }

    #[test]
    fn jensen_bound_holds_exactly(l in samples(), t in 1.0f64..500.0, p in 0.01f64..1.0) {
        let mean = l.iter().sum::<f64>() / l.len() as f64;
        let lam = moment_lyapunov_from_samples(&l, p, t).0;
        prop_assert!(lam <= p * mean / t + 1e-12);
    }
}
