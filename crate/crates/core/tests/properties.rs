use levy_drift::analysis::cone_membership;
use levy_drift::matrix::{l1_norm, nuclear_norm, singular_value_threshold, soft_threshold, svd, TangentSpaces};
use levy_drift::Mat;
use proptest::prelude::*;

fn mat_strategy(max: usize) -> impl Strategy<Value = Mat> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0f64..3.0, r * c).prop_map(move |v| Mat::from_vec(r, c, v))
    })
}

fn square(d: usize) -> impl Strategy<Value = Mat> {
    prop::collection::vec(-3.0f64..3.0, d * d).prop_map(move |v| Mat::from_vec(d, d, v))
}

fn prox_value(x: &Mat, m: &Mat, lam: f64, pen: impl Fn(&Mat) -> f64) -> f64 {
    0.5 * (x - m).norm_squared() + lam * pen(x)
}

proptest! {
    #[test]
    fn soft_threshold_minimizes_its_prox_objective(m in mat_strategy(5), lam in 0.0f64..2.0, dir in square(5), t in -0.1f64..0.1) {
        let x = soft_threshold(&m, lam).unwrap();
        let pert = &x + dir.view((0, 0), x.shape()).into_owned() * t;
        let f = |y: &Mat| prox_value(y, &m, lam, l1_norm);
        prop_assert!(f(&x) <= f(&pert) + 1e-12);
    }

    #[test]
    fn svt_minimizes_its_prox_objective(m in mat_strategy(5), lam in 0.0f64..2.0, dir in square(5), t in -0.1f64..0.1) {
        let x = singular_value_threshold(&m, lam).unwrap();
        let pert = &x + dir.view((0, 0), x.shape()).into_owned() * t;
        let f = |y: &Mat| prox_value(y, &m, lam, |z| nuclear_norm(z).unwrap());
        prop_assert!(f(&x) <= f(&pert) + 1e-10);
    }

    #[test]
    fn svt_shrinks_each_singular_value(m in mat_strategy(6), lam in 0.0f64..2.0) {
        let before = svd(&m).unwrap().singular_values;
        let after = svd(&singular_value_threshold(&m, lam).unwrap()).unwrap().singular_values;
        for (b, a) in before.iter().zip(after.iter()) {
            prop_assert!((a - (b - lam).max(0.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn tangent_projections_are_complementary_and_idempotent(
        u in square(5), v in square(5), m in square(5), mask in prop::collection::vec(any::<bool>(), 25)
    ) {
        let l0 = u.columns(0, 2) * v.columns(0, 2).transpose();
        let s0 = Mat::from_fn(5, 5, |i, j| if mask[i * 5 + j] { 1.0 } else { 0.0 });
        prop_assume!(svd(&l0).unwrap().rank(1e-6) == 2);
        let ts = TangentSpaces::from_components(&l0, &s0, 1e-8, 0.0).unwrap();
        let pl = ts.project_tl(&m).unwrap();
        prop_assert!((ts.project_tl(&pl).unwrap() - &pl).amax() < 1e-9);
        prop_assert!((&pl + ts.project_tl_perp(&m).unwrap() - &m).amax() < 1e-12);
        let ps = ts.project_ts(&m).unwrap();
        prop_assert!((ts.project_ts(&ps).unwrap() - &ps).amax() == 0.0);
        prop_assert!((&ps + ts.project_ts_perp(&m).unwrap() - &m).amax() < 1e-12);
    }

    #[test]
    fn cone_ratios_are_scale_free(u in square(4), dl in square(4), ds in square(4), c in 0.01f64..100.0) {
        let l0 = u.columns(0, 1) * u.columns(1, 1).transpose();
        prop_assume!(svd(&l0).unwrap().rank(1e-6) == 1);
        let ts = TangentSpaces::from_components(&l0, &Mat::identity(4, 4), 1e-8, 0.0).unwrap();
        let a = cone_membership(&ts, &dl, &ds).unwrap();
        let b = cone_membership(&ts, &(&dl * c), &(&ds * c)).unwrap();
        prop_assert!((a.lowrank_ratio - b.lowrank_ratio).abs() <= 1e-9 * a.lowrank_ratio.max(1.0));
        prop_assert!((a.sparse_ratio - b.sparse_ratio).abs() <= 1e-9 * a.sparse_ratio.max(1.0));
        prop_assert_eq!(a.in_cone, b.in_cone);
    }
}
