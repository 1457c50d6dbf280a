use nstree::expand::dilate;
use nstree::field::snapshot::{decode, encode};
use nstree::field::{
    divergence_defect, heat_propagate, hermitian_defect, inner, l2_norm, leray_project,
    random_divfree, sobolev_norm, GridSpec, WaveVector,
};
use nstree::freqkernel::{
    heat_identity_residual, kernel_scalar, one_vertex_closed_form, GammaAssignment,
    MomentumAssignment, TauQuadrature,
};
use nstree::hierarchy::consistency_check;
use nstree::interact::vertex_bilinear;
use nstree::treecomb::{forest_count_bound, forest_count_formula, MarkedBinaryTree};
use nstree::verify::random_field;
use proptest::prelude::*;

fn grid() -> GridSpec {
    GridSpec::new(8).unwrap()
}

fn arb_tree() -> impl Strategy<Value = MarkedBinaryTree> {
    Just(MarkedBinaryTree::Leaf).prop_recursive(5, 24, 2, |inner| {
        (inner.clone(), inner).prop_map(|(m, u)| MarkedBinaryTree::vertex(m, u))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_strings_round_trip(t in arb_tree()) {
        let s = t.canonical_string();
        prop_assert_eq!(MarkedBinaryTree::parse(&s).unwrap(), t.clone());
        prop_assert_eq!(t.leaf_count(), t.vertex_count() + 1);
        prop_assert_eq!(t.edge_count(), 2 * t.vertex_count() + 1);
    }

    #[test]
    fn forest_formula_respects_bound(n in 0usize..14, k in 1usize..7) {
        prop_assert!(forest_count_formula(n, k) <= forest_count_bound(n, k));
    }

    #[test]
    fn leray_is_an_orthogonal_projection(a in 0u64..10_000, b in 0u64..10_000) {
        let u = random_field(grid(), a).unwrap();
        let v = random_field(grid(), b.wrapping_add(1 << 20)).unwrap();
        let pu = leray_project(&u);
        let scale = l2_norm(&u) * l2_norm(&v);
        prop_assert!(l2_norm(&leray_project(&pu).sub(&pu).unwrap()) <= 1e-13 * l2_norm(&u));
        prop_assert!(divergence_defect(&pu) < 1e-13);
        let lhs = inner(&pu, &v).unwrap();
        let rhs = inner(&u, &leray_project(&v)).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-13 * scale);
        prop_assert!(l2_norm(&pu) <= l2_norm(&u) * (1.0 + 1e-14));
    }

    #[test]
    fn heat_flow_is_a_contracting_semigroup(seed in 0u64..10_000, s in 0.0f64..1.0, t in 0.0f64..1.0, alpha in -2.0f64..2.0) {
        let u = random_field(grid(), seed).unwrap();
        let once = heat_propagate(&u, s + t).unwrap();
        let twice = heat_propagate(&heat_propagate(&u, s).unwrap(), t).unwrap();
        prop_assert!(l2_norm(&once.sub(&twice).unwrap()) <= 1e-14 * l2_norm(&u));
        prop_assert!(sobolev_norm(&once, alpha) <= sobolev_norm(&u, alpha) * (1.0 + 1e-14));
    }

    #[test]
    fn vertex_output_is_real_and_divergence_free(a in 0u64..1000, b in 0u64..1000, decay in 2.6f64..5.0) {
        let u = random_divfree(grid(), a, decay, 1.0).unwrap();
        let v = random_divfree(grid(), b + 5000, decay, 1.0).unwrap();
        let w = vertex_bilinear(&u, &v).unwrap();
        prop_assert!(divergence_defect(&w) < 1e-12);
        prop_assert!(hermitian_defect(&w) < 1e-12);
    }

    #[test]
    fn divergence_free_data_is_consistent(seed in 0u64..10_000, decay in 2.6f64..5.0, norm in 0.1f64..2.0) {
        let u = random_divfree(grid(), seed, decay, norm).unwrap();
        prop_assert!(consistency_check(&u).unwrap() < 1e-11 * l2_norm(&u).powi(3));
    }

    #[test]
    fn snapshots_round_trip_bit_exactly(seed in 0u64..10_000) {
        let u = random_divfree(grid(), seed, 3.0, 1.0).unwrap();
        let back = decode(&encode(&u), true, u.flags).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn dilation_scales_the_norm_and_keeps_structure(seed in 0u64..1000, lambda in 1usize..4) {
        let u = random_divfree(grid(), seed, 3.0, 1.0).unwrap();
        let d = dilate(&u, lambda).unwrap();
        prop_assert_eq!(d.grid().n(), 8 * lambda);
        let expect = lambda as f64 * l2_norm(&u);
        prop_assert!((l2_norm(&d) - expect).abs() <= 1e-12 * expect);
        prop_assert!(divergence_defect(&d) < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn cauchy_representation_of_the_heat_factor(s in 0.05f64..2.0, q2 in 0u32..6, gamma in -2.0f64..-0.2) {
        let r = heat_identity_residual(s, q2 as f64, gamma, &TauQuadrature::default()).unwrap();
        prop_assert!(r.residual < 1e-6, "{:?}", r);
        let r = heat_identity_residual(-s, q2 as f64, gamma, &TauQuadrature::default()).unwrap();
        prop_assert!(r.residual < 1e-6, "{:?}", r);
    }

    #[test]
    fn one_vertex_kernel_is_gamma_free(t in 0.01f64..0.2, g1 in -2.0f64..-0.2, g2 in -2.0f64..-0.2, a in -2i64..3, b in -2i64..3) {
        prop_assume!(a != 0 || b != 0);
        let tree = MarkedBinaryTree::cherry();
        let q1 = WaveVector::new(a, b, 1);
        let q2 = WaveVector::new(1, -b, 0);
        let m = MomentumAssignment::new(vec![q1, q2]);
        let g = GammaAssignment::from_leaves(&tree, &[g1, g2]).unwrap();
        let v = kernel_scalar(&tree, t, &g, &m, &TauQuadrature::default()).unwrap();
        let p = q1 + q2;
        let exact = one_vertex_closed_form(t, p.norm2() as f64, q1.norm2() as f64, q2.norm2() as f64);
        prop_assert!((v.value.re - exact).abs() < 1e-7 && v.value.im.abs() < 1e-7, "{:?} vs {}", v, exact);
    }
}
