use proptest::prelude::*;

use fracgrad::constants::{c_ns, c_ns_defining_form, Dimension};
use fracgrad::grid::{lp_norm, pairing, relative_l2, Grid, ScalarField, VectorField};
use fracgrad::minors::{cof, det};
use fracgrad::quadrature::{fractional_gradient_direct, QuadratureScheme};
use fracgrad::spectral;
use fracgrad::testfn::random_smooth;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn constant_forms_agree(n in 1usize..=4, s in 0.001f64..0.999) {
        let d = Dimension::new(n).unwrap();
        let a = c_ns(d, s).unwrap();
        let b = c_ns_defining_form(d, s).unwrap();
        prop_assert!(a > 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn spectral_adjointness(seed in any::<u64>(), s in 0.05f64..1.0, n in 1usize..=2) {
        let grid = Grid::new(n, 16.0, 64).unwrap();
        let u = random_smooth(&grid, seed, 4).unwrap();
        let phi = VectorField::from_scalars(
            (0..n as u64).map(|i| random_smooth(&grid, seed ^ (i + 17), 4).unwrap()).collect(),
        )
        .unwrap();
        let lhs = pairing(&spectral::fractional_gradient(&u, s).unwrap(), &phi).unwrap();
        let rhs = pairing(&u, &spectral::fractional_divergence(&phi, s).unwrap()).unwrap();
        let scale = lp_norm(&u, 2.0).unwrap() * lp_norm(&phi, 2.0).unwrap();
        prop_assert!((lhs + rhs).abs() <= 1e-11 * scale);
    }

    #[test]
    fn ftc_roundtrip(seed in any::<u64>(), s in 0.05f64..0.95) {
        let grid = Grid::new(1, 16.0, 64).unwrap();
        let u = random_smooth(&grid, seed, 5).unwrap();
        let back = spectral::ftc_reconstruct(&spectral::fractional_gradient(&u, s).unwrap(), s).unwrap();
        // The reconstruction has no mean and no Nyquist component.
        let v = u.values();
        let nyquist = v.iter().enumerate().map(|(j, x)| if j % 2 == 0 { *x } else { -*x }).sum::<f64>() / v.len() as f64;
        let mean = u.mean();
        let expected = ScalarField::new(
            grid,
            v.iter().enumerate().map(|(j, x)| x - mean - if j % 2 == 0 { nyquist } else { -nyquist }).collect(),
        )
        .unwrap();
        let err = relative_l2(&back, &expected).unwrap();
        prop_assert!(err <= 1e-10, "err {err}");
    }

    #[test]
    fn direct_gradient_is_linear(seed in any::<u64>(), lambda in -3.0f64..3.0, s in 0.1f64..0.95) {
        let grid = Grid::new(1, 16.0, 64).unwrap();
        let u = random_smooth(&grid, seed, 4).unwrap();
        let scheme = QuadratureScheme::default();
        let d = fractional_gradient_direct(&u, s, &scheme).unwrap();
        let scaled = fractional_gradient_direct(&u.scaled(lambda), s, &scheme).unwrap();
        for (a, b) in scaled.component(0).iter().zip(d.component(0)) {
            prop_assert!((a - lambda * b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn cofactor_identity(entries in prop::collection::vec(-2.0f64..2.0, 9)) {
        let c = cof(&entries, 3);
        let d = det(&entries, 3);
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| entries[i * 3 + k] * c[j * 3 + k]).sum();
                let expected = if i == j { d } else { 0.0 };
                prop_assert!((dot - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn localization_error_shrinks_toward_one(seed in any::<u64>()) {
        let grid = Grid::new(1, 16.0, 64).unwrap();
        let u = random_smooth(&grid, seed, 3).unwrap();
        let du = spectral::classical_gradient(&u).unwrap();
        let far = relative_l2(&spectral::fractional_gradient(&u, 0.9).unwrap(), &du).unwrap();
        let near = relative_l2(&spectral::fractional_gradient(&u, 0.999).unwrap(), &du).unwrap();
        prop_assert!(near < far);
    }
}
