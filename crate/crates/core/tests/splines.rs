use proptest::prelude::*;
use stiga::splines::{k_refine, k_refined_spans, KnotVector};

/// Open knot vector on `[0, 1]` with the given interior knots, sorted, and
/// repeated interior knots kept below `degree + 1` copies.
fn random_knots() -> impl Strategy<Value = KnotVector<f64>> {
    (1usize..=4, prop::collection::vec(0.01f64..0.99, 0..12), any::<bool>()).prop_map(|(p, mut interior, dup)| {
        interior.sort_by(f64::total_cmp);
        if dup && !interior.is_empty() && p > 1 {
            let k = interior[interior.len() / 2];
            interior.push(k);
            interior.sort_by(f64::total_cmp);
        }
        let mut knots = vec![0.0; p + 1];
        knots.extend(interior);
        knots.extend(std::iter::repeat(1.0).take(p + 1));
        KnotVector::from_knots(knots, p).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn partition_of_unity(k in random_knots(), x in 0.0f64..=1.0) {
        let s: f64 = (0..k.num_basis()).map(|i| k.eval_basis(i, x).unwrap()).sum();
        prop_assert!((s - 1.0).abs() <= 1e-13, "sum {s}");
    }

    #[test]
    fn nonnegative_with_compact_support(k in random_knots(), x in 0.0f64..=1.0) {
        let p = k.degree();
        let t = k.knots();
        for i in 0..k.num_basis() {
            let v = k.eval_basis(i, x).unwrap();
            prop_assert!(v >= 0.0);
            if x < t[i] || x > t[i + p + 1] {
                prop_assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn greville_reproduces_linears(k in random_knots(), x in 0.0f64..=1.0, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = k.greville();
        let v: f64 = g.iter().enumerate().map(|(i, xi)| (a + b * xi) * k.eval_basis(i, x).unwrap()).sum();
        prop_assert!((v - (a + b * x)).abs() <= 1e-13 * (1.0 + a.abs() + b.abs()), "{v} vs {}", a + b * x);
    }

    #[test]
    fn span_functions_are_the_nonzero_ones(k in random_knots(), x in 0.0f64..1.0) {
        let p = k.degree();
        let s = k.find_span(x);
        for i in 0..k.num_basis() {
            if i + p < s || i > s {
                prop_assert_eq!(k.eval_basis(i, x).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn k_refinement_control_point_counts() {
    // control points grow like the nodes of a Lagrangian mesh of degree p
    for base in [4usize, 10, 19] {
        for p in 1..=4 {
            let k = k_refine(1.0f64, base, p).unwrap();
            assert_eq!(k.spans(), (base - 1) * p + 1);
            assert_eq!(k.num_basis(), base * p + 1);
            assert_eq!(k_refined_spans(base, p), k.spans());
        }
    }
}

#[test]
fn single_precision_partition_of_unity() {
    let k = KnotVector::<f32>::open_uniform(2.0, 7, 3).unwrap();
    for n in 0..=50 {
        let x = 2.0 * n as f32 / 50.0;
        let s: f32 = (0..k.num_basis()).map(|i| k.eval_basis(i, x).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-5);
    }
}
