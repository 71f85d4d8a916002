use proptest::prelude::*;
use std::f64::consts::PI;
use transportlab::conditions::{check_br_two_point_span, sigma_tilde, two_point_span, Generators};
use transportlab::fields::VelocityModel;
use transportlab::torus::TWO_PI;

fn point() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0..TWO_PI, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn br_brackets_span_off_the_diagonal(x in point(), y in point()) {
        prop_assume!(transportlab::torus::distance(&x, &y) > 1e-3);
        prop_assert_eq!(check_br_two_point_span(&x, &y).unwrap().rank, 4);
    }

    #[test]
    fn br_raw_span_drops_on_the_lattice(x in point(), k1 in 0i32..2, k2 in 0i32..2) {
        let m = VelocityModel::baxendale_rozovskii();
        let y = vec![x[0] + k1 as f64 * PI, x[1] + k2 as f64 * PI];
        let raw = two_point_span(&m, &x, &y, Generators::RawFields).unwrap();
        prop_assert_eq!(raw.rank, 2);
    }

    #[test]
    fn projected_tangent_field_is_orthogonal(x in point(), theta in 0.0..TWO_PI, k in 0usize..80) {
        let m = VelocityModel::kraichnan(2, 4.0, 4).unwrap();
        let v = [theta.cos(), theta.sin()];
        let t = sigma_tilde(&m, k, &x, &v).unwrap();
        prop_assert!((t[0] * v[0] + t[1] * v[1]).abs() <= 1e-14);
    }
}
