//! Property tests for the geometric and gap-arithmetic invariants.

use bayalign::domain::{apply_transform, GapParams, Matching, TransformState};
use bayalign::gapmodel;
use bayalign::oracle;
use nalgebra::Vector3;
use proptest::prelude::*;

fn angle() -> impl Strategy<Value = f64> {
    -std::f64::consts::PI..std::f64::consts::PI
}

fn coord() -> impl Strategy<Value = f64> {
    -100.0..100.0f64
}

fn monotone_matching(m: usize, n: usize) -> impl Strategy<Value = Matching> {
    let l_max = m.min(n);
    (0..=l_max)
        .prop_flat_map(move |l| {
            (
                proptest::sample::subsequence((1..=m as u32).collect::<Vec<_>>(), l),
                proptest::sample::subsequence((1..=n as u32).collect::<Vec<_>>(), l),
            )
        })
        .prop_map(move |(js, ks)| {
            Matching::new(js.into_iter().zip(ks).collect(), m, n).expect("sorted subsequences")
        })
}

proptest! {
    #[test]
    fn transform_preserves_pairwise_distances(
        e12 in angle(), e13 in angle(), e23 in angle(),
        tx in coord(), ty in coord(), tz in coord(),
        ax in coord(), ay in coord(), az in coord(),
        bx in coord(), by in coord(), bz in coord(),
    ) {
        let t = TransformState::new([e12, e13, e23], Vector3::new(tx, ty, tz), 1.0).unwrap();
        let a = Vector3::new(ax, ay, az);
        let b = Vector3::new(bx, by, bz);
        let before = (a - b).norm();
        let after = (apply_transform(&t, &a) - apply_transform(&t, &b)).norm();
        prop_assert!((before - after).abs() < 1e-9, "{before} vs {after}");
    }

    #[test]
    fn penalty_is_transpose_symmetric(
        mt in monotone_matching(9, 7),
        g in 0.0..6.0f64,
        h in 0.0..2.0f64,
    ) {
        let gp = GapParams { g, h };
        let a = gapmodel::total_penalty(&mt, &gp);
        let b = gapmodel::total_penalty(&mt.transposed(), &gp);
        prop_assert_eq!(a.s, b.s);
        prop_assert_eq!(a.ext, b.ext);
        prop_assert!((a.u - b.u).abs() < 1e-12);
    }

    #[test]
    fn normalizer_matches_enumeration_for_random_penalties(
        m in 1usize..=5,
        n in 1usize..=5,
        g in 0.0..6.0f64,
        h in 0.0..2.0f64,
    ) {
        let gp = GapParams { g, h };
        let direct: f64 = oracle::enumerate_matchings(m, n)
            .unwrap()
            .iter()
            .map(|mt| (-oracle::penalty_by_run_counting(mt, &gp)).exp())
            .sum();
        let via_dp = (-gapmodel::log_normalizer(m, n, &gp)).exp();
        prop_assert!(((via_dp - direct) / direct).abs() < 1e-12);
    }

    #[test]
    fn penalty_breakdown_is_consistent(
        mt in monotone_matching(11, 13),
        g in 0.0..6.0f64,
        h in 0.0..2.0f64,
    ) {
        let gp = GapParams { g, h };
        let pb = gapmodel::total_penalty(&mt, &gp);
        prop_assert_eq!(pb.u, g * pb.s as f64 + h * pb.ext as f64);
        let direct = oracle::penalty_by_run_counting(&mt, &gp);
        prop_assert!((pb.u - direct).abs() < 1e-12);
    }
}
