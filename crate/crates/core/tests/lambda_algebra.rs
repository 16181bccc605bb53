use obrb_core::nonlocal::{from_cal_t, lambda_apply, lambda_inner, lambda_inverse, mean, to_cal_t};
use obrb_core::{build_grid, BoundaryClosure, Grid, ScalarField, ThetaBSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn field(grid: Grid, values: Vec<f64>) -> ScalarField {
    ScalarField::from_values(grid, values).unwrap()
}

fn grid_and_fields() -> impl Strategy<Value = (Grid, Vec<f64>, Vec<f64>)> {
    (4usize..12, 4usize..12, 0.5f64..3.0, 0.5f64..3.0).prop_flat_map(|(nx, ny, lx, ly)| {
        let g = build_grid(nx, ny, lx, ly).unwrap();
        let n = nx * ny;
        (
            Just(g),
            prop::collection::vec(-10.0f64..10.0, n),
            prop::collection::vec(-10.0f64..10.0, n),
        )
    })
}

proptest! {
    #[test]
    fn lambda_is_symmetric((g, z, w) in grid_and_fields(), alpha in 0.0f64..0.999) {
        let (z, w) = (field(g, z), field(g, w));
        let a = lambda_apply(&z, alpha).dot(&w);
        let b = z.dot(&lambda_apply(&w, alpha));
        let scale = 1.0 + z.l2_norm() * w.l2_norm();
        prop_assert!((a - b).abs() <= 1e-12 * scale);
        prop_assert!((lambda_inner(&z, &w, alpha) - a).abs() <= 1e-12 * scale);
    }

    #[test]
    fn lambda_energy_is_between_bounds((g, z, _) in grid_and_fields(), alpha in 0.0f64..0.999) {
        let z = field(g, z);
        let e = lambda_apply(&z, alpha).dot(&z);
        let n2 = z.dot(&z);
        prop_assert!(e >= n2 / (1.0 + alpha) - 1e-12 * (1.0 + n2));
        prop_assert!(e <= n2 + 1e-12 * (1.0 + n2));
    }

    #[test]
    fn lambda_inverse_round_trip((g, z, _) in grid_and_fields(), alpha in 0.0f64..0.999) {
        let z = field(g, z);
        let back = lambda_apply(&lambda_inverse(&z, alpha), alpha);
        let fwd = lambda_inverse(&lambda_apply(&z, alpha), alpha);
        prop_assert!(back.axpy(-1.0, &z).max_abs() <= 1e-13 * (1.0 + z.max_abs()));
        prop_assert!(fwd.axpy(-1.0, &z).max_abs() <= 1e-13 * (1.0 + z.max_abs()));
    }

    #[test]
    fn transform_round_trip((g, z, _) in grid_and_fields(), alpha in 0.0f64..0.999, b in -2.0f64..2.0) {
        let cl = BoundaryClosure::new(&g, &ThetaBSpec::LinearY { a: 1.0, b }, alpha, 1e-12).unwrap();
        let t = field(g, z);
        let back = to_cal_t(&from_cal_t(&t, &cl), &cl);
        prop_assert!(back.axpy(-1.0, &t).max_abs() <= 1e-13 * (1.0 + t.max_abs()));
    }
}

#[test]
fn hundred_random_fields() {
    let g = build_grid(16, 12, 1.0, 0.75).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut draw = |shift: f64| {
        let v: Vec<f64> = (0..g.cells()).map(|_| shift + rng.gen_range(-1.0..1.0)).collect();
        field(g, v)
    };
    for k in 0..100 {
        let alpha = [0.1, 0.5, 0.9][k % 3];
        let z = draw(if k % 2 == 0 { 0.0 } else { 3.0 });
        let w = draw(-1.0);
        let sym = lambda_apply(&z, alpha).dot(&w) - z.dot(&lambda_apply(&w, alpha));
        assert!(sym.abs() <= 1e-12, "field {k}: asymmetry {sym:e}");
        let e = lambda_apply(&z, alpha).dot(&z);
        let n2 = z.dot(&z);
        assert!(n2 / (1.0 + alpha) - e <= 1e-12 && e - n2 <= 1e-12, "field {k}");
        let id = lambda_apply(&lambda_inverse(&z, alpha), alpha).axpy(-1.0, &z).max_abs();
        assert!(id <= 1e-13, "field {k}: {id:e}");
    }
}

#[test]
fn constants_are_the_contracted_direction() {
    let g = build_grid(8, 8, 1.0, 1.0).unwrap();
    let one = ScalarField::constant(g, 1.0);
    let alpha = 0.5;
    let e = lambda_apply(&one, alpha).dot(&one);
    assert!((e - one.dot(&one) / (1.0 + alpha)).abs() < 1e-14);
    let zero_mean = ScalarField::from_fn(g, |x, _| x - 0.5);
    assert!(mean(&zero_mean).abs() < 1e-15);
    assert!(lambda_apply(&zero_mean, alpha).axpy(-1.0, &zero_mean).max_abs() < 1e-15);
}
