use proptest::prelude::*;
use transportlab::fields::{covariance_closed_form, VelocityModel};
use transportlab::torus::TWO_PI;

fn point() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..TWO_PI, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kraichnan_modes_are_divergence_free_and_self_transverse(x in point(), zmax in 1usize..5) {
        let m = VelocityModel::kraichnan(2, 4.0, zmax).unwrap();
        for k in 0..m.n_modes() {
            let j = m.eval_jacobian(k, &x).unwrap();
            let s = m.eval_sigma(k, &x).unwrap();
            prop_assert!(j.trace().abs() <= 1e-12);
            let adv = &j * nalgebra::DVector::from_column_slice(&s);
            prop_assert!(adv.amax() <= 1e-12);
        }
    }

    #[test]
    fn polarizations_are_unit_and_transverse(zmax in 1usize..4, d in 2usize..4) {
        let m = VelocityModel::kraichnan(d, 4.0, zmax).unwrap();
        for mode in m.modes() {
            let norm: f64 = mode.polarization.iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-14);
            prop_assert!(mode.transversality() <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences(x in point(), k in 0usize..80) {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let j = m.eval_jacobian(k, &x).unwrap();
        let h = 1e-6;
        for c in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let sp = m.eval_sigma(k, &xp).unwrap();
            let sm = m.eval_sigma(k, &xm).unwrap();
            for i in 0..2 {
                prop_assert!(((sp[i] - sm[i]) / (2.0 * h) - j[(i, c)]).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn covariance_matches_closed_form_and_is_stationary(x in point(), y in point(), s in point()) {
        let m = VelocityModel::kraichnan(2, 4.0, 3).unwrap();
        let r = [x[0] - y[0], x[1] - y[1]];
        let dxy = m.covariance(&x, &y);
        prop_assert!((&dxy - covariance_closed_form(2, 4.0, 3, &r)).amax() <= 1e-12);
        let xs = [x[0] + s[0], x[1] + s[1]];
        let ys = [y[0] + s[0], y[1] + s[1]];
        prop_assert!((m.covariance(&xs, &ys) - &dxy).amax() <= 1e-12);
        prop_assert!((m.covariance(&y, &x) - dxy.transpose()).amax() <= 1e-12);
    }

    #[test]
    fn br_fields_match_their_formulas(x in point()) {
        let m = VelocityModel::baxendale_rozovskii();
        let want = [
            [0.0, x[0].sin()],
            [0.0, x[0].cos()],
            [x[1].sin(), 0.0],
            [x[1].cos(), 0.0],
        ];
        for (k, w) in want.iter().enumerate() {
            let s = m.eval_sigma(k, &x).unwrap();
            prop_assert!((s[0] - w[0]).abs() <= 1e-15 && (s[1] - w[1]).abs() <= 1e-15);
        }
    }
}

#[test]
fn mode_counts_and_rejections() {
    assert_eq!(VelocityModel::kraichnan(2, 4.0, 1).unwrap().n_modes(), 8);
    assert_eq!(VelocityModel::kraichnan(2, 4.0, 4).unwrap().n_modes(), 80);
    assert!(VelocityModel::kraichnan(2, 2.0, 4).is_err());
    assert!(VelocityModel::kraichnan(1, 4.0, 4).is_err());
    let m = VelocityModel::kraichnan(2, 4.0, 1).unwrap();
    let d = m.covariance(&[0.4, 0.9], &[0.4, 0.9]);
    assert!((d[(0, 0)] - 0.28125).abs() < 1e-14);
}
