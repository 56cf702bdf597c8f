use chks_core::grid::{div, face_inner, grad, inner, integrate, inv_neumann_laplacian, laplacian, FaceField};
use chks_core::{Field, GridSpec};
use chks_core::wsu::restrict;
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        (2usize..40, 0.1f64..10.0).prop_map(|(n, l)| GridSpec::new_1d(n, l).unwrap()),
        (2usize..12, 2usize..12, 0.1f64..5.0, 0.1f64..5.0).prop_map(|(nx, ny, lx, ly)| GridSpec::new_2d(nx, ny, lx, ly).unwrap()),
    ]
}

fn field_on(g: GridSpec) -> impl Strategy<Value = Field> {
    prop::collection::vec(-1.0f64..1.0, g.num_cells()).prop_map(move |v| Field::from_values(g, v).unwrap())
}

fn two_fields() -> impl Strategy<Value = (Field, Field)> {
    grid_strategy().prop_flat_map(|g| (field_on(g), field_on(g)))
}

proptest! {
    #[test]
    fn summation_by_parts((u, v) in two_fields()) {
        let lhs = inner(&laplacian(&u), &v);
        let rhs = -face_inner(&grad(&u), &grad(&v));
        let scale = 1.0 + face_inner(&grad(&u), &grad(&u)).sqrt() * face_inner(&grad(&v), &grad(&v)).sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn laplacian_is_symmetric((u, v) in two_fields()) {
        let a = inner(&laplacian(&u), &v);
        let b = inner(&u, &laplacian(&v));
        prop_assert!((a - b).abs() <= 1e-11 * (1.0 + a.abs()));
    }

    #[test]
    fn laplacian_is_negative_semidefinite(u in grid_strategy().prop_flat_map(field_on)) {
        prop_assert!(inner(&laplacian(&u), &u) <= 1e-12);
    }

    #[test]
    fn divergence_conserves(seed in any::<u64>(), g in grid_strategy()) {
        let mut x = seed;
        let vals = (0..g.num_faces()).map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }).collect();
        let flux = FaceField::from_values(g, vals).unwrap();
        prop_assert!(integrate(&div(&flux)).abs() <= 1e-12 * g.measure().max(1.0) * g.num_faces() as f64);
    }

    #[test]
    fn inverse_laplacian_roundtrip(u in grid_strategy().prop_flat_map(field_on)) {
        let f = u.centered();
        prop_assume!(f.max_abs() > 1e-6);
        let w = inv_neumann_laplacian(&f).unwrap();
        prop_assert!(w.mean().abs() <= 1e-10 * (1.0 + w.max_abs()));
        let back = laplacian(&w).scaled(-1.0);
        prop_assert!(back.sub(&f).max_abs() <= 1e-8 * f.max_abs());
    }

    #[test]
    fn restriction_preserves_mass(n in 1usize..16, r in 1usize..5, l in 0.5f64..4.0, vals in prop::collection::vec(0.0f64..3.0, 64)) {
        let coarse = GridSpec::new_1d(n, l).unwrap();
        let fine = GridSpec::new_1d(n * r, l).unwrap();
        let u = Field::from_fn(fine, |x, _| vals[((x / l) * 63.0) as usize] + x);
        let c = restrict(&u, &coarse).unwrap();
        prop_assert!((integrate(&c) - integrate(&u)).abs() <= 1e-13 * (1.0 + integrate(&u).abs()));
    }
}

#[test]
fn hand_averaged_restriction() {
    let fine = GridSpec::new_1d(2, 1.0).unwrap();
    let coarse = GridSpec::new_1d(1, 1.0).unwrap();
    let c = restrict(&Field::from_values(fine, vec![1.0, 3.0]).unwrap(), &coarse).unwrap();
    assert_eq!(c.values(), &[2.0]);
}
