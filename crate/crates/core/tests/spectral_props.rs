use proptest::prelude::*;
use transportlab::fields::VelocityModel;
use transportlab::noise::NoiseRealization;
use transportlab::spectral::{sobolev_norm, SpdeParams, SpdeSolver, SpectralField, TransportScheme};

/// Mean-zero trigonometric polynomial with coefficients `c` on modes up to 3.
fn field(n: usize, c: &[f64]) -> SpectralField {
    SpectralField::from_fn(n, |x, y| {
        let mut v = 0.0;
        let mut k = 0;
        for a in 0..3i32 {
            for b in -2..3i32 {
                if a == 0 && b <= 0 {
                    continue;
                }
                let arg = a as f64 * x + b as f64 * y;
                v += c[k] * arg.cos() + c[k + 1] * arg.sin();
                k += 2;
            }
        }
        v
    })
    .unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, 24)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dual_sobolev_norms_bound_l2(c in coeffs(), s in 0.1f64..3.0) {
        let f = field(16, &c);
        let l2 = f.l2_norm();
        let prod = sobolev_norm(&f, s).unwrap() * sobolev_norm(&f, -s).unwrap();
        prop_assert!(prod >= l2 * l2 * (1.0 - 1e-12));
        prop_assert_eq!(sobolev_norm(&f, 0.0).unwrap(), l2);
    }

    #[test]
    fn grid_round_trip_and_reality(c in coeffs()) {
        let f = field(16, &c);
        let g = SpectralField::from_values(16, &f.values()).unwrap();
        for (a, b) in f.coeffs.iter().zip(&g.coeffs) {
            prop_assert!((a - b).norm() <= 1e-14);
        }
        prop_assert!(f.conjugate_defect() <= 1e-15);
        prop_assert!(f.mean().norm() <= 1e-15);
    }

    #[test]
    fn transport_steps_preserve_reality_mean_and_dealiasing(c in coeffs(), seed in any::<u64>()) {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let params = SpdeParams { amplitude: 1.0, kappa: 0.01, c: 0.0, dt: 1e-2, scheme: TransportScheme::Heun };
        let mut solver = SpdeSolver::new(&m, 32, params).unwrap();
        let noise = NoiseRealization::new(seed, params.dt, m.n_modes(), 2);
        let mut f = field(32, &c);
        for s in 0..20 {
            solver.step(&mut f, &noise.increments(s)).unwrap();
            prop_assert!(f.conjugate_defect() <= 1e-13);
            prop_assert!(f.mean().norm() <= 1e-14);
            prop_assert!(f.aliased_energy() <= 1e-28);
        }
    }

    #[test]
    fn exponential_transport_is_an_isometry(c in coeffs(), seed in any::<u64>(), a in 0.5f64..4.0) {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let params = SpdeParams { amplitude: a, kappa: 0.0, c: 0.0, dt: 1e-2, scheme: TransportScheme::Exponential };
        let mut solver = SpdeSolver::new(&m, 32, params).unwrap();
        let noise = NoiseRealization::new(seed, params.dt, m.n_modes(), 2);
        let mut f = field(32, &c);
        let l0 = f.l2_norm();
        for s in 0..10 {
            solver.step(&mut f, &noise.increments(s)).unwrap();
        }
        prop_assert!((f.l2_norm() / l0 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn heat_step_is_exact_for_any_dt(c in coeffs(), dt in 1e-3f64..0.5) {
        let m = VelocityModel::baxendale_rozovskii();
        let params = SpdeParams { amplitude: 0.0, kappa: 0.1, c: 0.0, dt, scheme: TransportScheme::Heun };
        let mut solver = SpdeSolver::new(&m, 16, params).unwrap();
        let f0 = field(16, &c);
        let mut f = f0.clone();
        solver.step(&mut f, &NoiseRealization::new(1, dt, 4, 2).increments(0)).unwrap();
        for z1 in -3i64..4 {
            for z2 in -3i64..4 {
                let decay = (-0.1 * ((z1 * z1 + z2 * z2) as f64) * dt).exp();
                let want = f0.coefficient([z1, z2]) * decay;
                prop_assert!((f.coefficient([z1, z2]) - want).norm() <= 1e-15);
            }
        }
    }
}
