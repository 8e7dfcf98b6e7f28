mod common;

use common::{arb_frame, oracles};
use fuzzy_nms::fuzzy::Category;
use fuzzy_nms::geometry::{iou, Box3D, IouMode};
use fuzzy_nms::nms::{diou_nms, fuzzy_nms_boxes, soft_nms, traditional_nms, CategoryThresholds, SoftNmsParams, SoftPenalty};
use fuzzy_nms::NmsConfig;
use proptest::prelude::*;

fn scores(b: &[Box3D]) -> Vec<f64> {
    b.iter().map(|x| x.score).collect()
}

fn arb_mode() -> impl Strategy<Value = IouMode> {
    prop_oneof![Just(IouMode::Bev), Just(IouMode::ThreeD)]
}

fn arb_categories(n: usize) -> impl Strategy<Value = Vec<Category>> {
    prop::collection::vec(prop::sample::select(Category::ALL.to_vec()), n)
}

fn frame_with_categories(max: usize) -> impl Strategy<Value = (Vec<Box3D>, Vec<Category>)> {
    arb_frame(max).prop_flat_map(|b| {
        let n = b.len();
        (Just(b), arb_categories(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn traditional_matches_oracle(boxes in arb_frame(60), t in 0.0..1.0f64, mode in arb_mode()) {
        let r = traditional_nms(&boxes, &scores(&boxes), t, mode);
        prop_assert_eq!(r.kept_indices(), oracles::traditional(&boxes, t, mode));
        prop_assert_eq!(r.len_total(), boxes.len());
    }

    #[test]
    fn diou_matches_oracle(boxes in arb_frame(60), t in -0.5..1.0f64, mode in arb_mode()) {
        let r = diou_nms(&boxes, &scores(&boxes), t, mode);
        prop_assert_eq!(r.kept_indices(), oracles::diou(&boxes, t, mode));
    }

    #[test]
    fn soft_matches_oracle(boxes in arb_frame(60), sigma in 0.05..2.0f64, fin in 0.0..0.5f64, mode in arb_mode()) {
        let params = SoftNmsParams { penalty: SoftPenalty::Gaussian { sigma }, final_threshold: fin, iou_mode: mode };
        let r = soft_nms(&boxes, &scores(&boxes), &params).unwrap();
        let mut want = oracles::soft(&boxes, sigma, fin, mode);
        want.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let got: Vec<(usize, f64)> = r.kept.iter().map(|k| (k.index, k.score)).collect();
        prop_assert_eq!(got, want);
        prop_assert_eq!(r.len_total(), boxes.len());
    }

    #[test]
    fn fuzzy_matches_oracle((boxes, cats) in frame_with_categories(60), mode in arb_mode()) {
        let cfg = NmsConfig { iou_mode: mode, ..NmsConfig::default() };
        let r = fuzzy_nms_boxes(&boxes, &cats, &cfg).unwrap();
        prop_assert_eq!(r.kept_indices(), oracles::in_score_order(oracles::fuzzy(&boxes, &cats, &cfg), &boxes));
        prop_assert_eq!(r.len_total(), boxes.len());
        let counted: usize = r.category_counts.values().map(|c| c.kept + c.suppressed + c.filtered).sum();
        prop_assert_eq!(counted, boxes.len());
    }

    #[test]
    fn unified_thresholds_reduce_to_traditional(
        (boxes, cats) in frame_with_categories(60),
        t in 0.0..1.0f64,
        s in 0.0..1.0f64,
    ) {
        let r = fuzzy_nms_boxes(&boxes, &cats, &NmsConfig::unified(t, s, IouMode::Bev)).unwrap();
        let base = traditional_nms(&boxes, &scores(&boxes), t, IouMode::Bev);
        let want: Vec<usize> = base.kept_indices().into_iter().filter(|&i| boxes[i].score >= s).collect();
        prop_assert_eq!(r.kept_indices(), want);
    }

    #[test]
    fn hard_variants_are_idempotent((boxes, cats) in frame_with_categories(60), t in 0.0..1.0f64) {
        let once = traditional_nms(&boxes, &scores(&boxes), t, IouMode::Bev).kept_indices();
        let sub: Vec<Box3D> = once.iter().map(|&i| boxes[i]).collect();
        prop_assert_eq!(traditional_nms(&sub, &scores(&sub), t, IouMode::Bev).kept.len(), sub.len());

        let once = diou_nms(&boxes, &scores(&boxes), t, IouMode::Bev).kept_indices();
        let sub: Vec<Box3D> = once.iter().map(|&i| boxes[i]).collect();
        prop_assert_eq!(diou_nms(&sub, &scores(&sub), t, IouMode::Bev).kept.len(), sub.len());

        let cfg = NmsConfig::default();
        let once = fuzzy_nms_boxes(&boxes, &cats, &cfg).unwrap().kept_indices();
        let sub: Vec<Box3D> = once.iter().map(|&i| boxes[i]).collect();
        let sub_cats: Vec<Category> = once.iter().map(|&i| cats[i]).collect();
        prop_assert_eq!(fuzzy_nms_boxes(&sub, &sub_cats, &cfg).unwrap().kept.len(), sub.len());
    }

    #[test]
    fn kept_boxes_never_overlap_past_threshold(boxes in arb_frame(60), t in 0.0..1.0f64) {
        let kept = traditional_nms(&boxes, &scores(&boxes), t, IouMode::Bev).kept_indices();
        for (p, &a) in kept.iter().enumerate() {
            for &b in &kept[p + 1..] {
                let o = iou(&boxes[a], &boxes[b], IouMode::Bev);
                prop_assert!(!(o > 0.0 && o >= t));
            }
        }
    }

    #[test]
    fn output_is_score_ordered(boxes in arb_frame(60), t in 0.0..1.0f64) {
        let r = traditional_nms(&boxes, &scores(&boxes), t, IouMode::Bev);
        for w in r.kept.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].index < w[1].index));
        }
    }

    #[test]
    fn permutation_determinism(boxes in arb_frame(40), t in 0.0..1.0f64, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        // Make scores distinct so the selection order does not depend on indices.
        let boxes: Vec<Box3D> = boxes.iter().enumerate().map(|(i, b)| b.with_score((i as f64 + 1.0) / 64.0)).collect();
        let mut perm: Vec<usize> = (0..boxes.len()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<Box3D> = perm.iter().map(|&i| boxes[i]).collect();
        let mut a = traditional_nms(&boxes, &scores(&boxes), t, IouMode::Bev).kept_indices();
        let mut b: Vec<usize> = traditional_nms(&shuffled, &scores(&shuffled), t, IouMode::Bev)
            .kept_indices()
            .into_iter()
            .map(|i| perm[i])
            .collect();
        a.sort_unstable();
        b.sort_unstable();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn raising_threshold_is_monotone_on_pairs(boxes in prop::collection::vec(common::arb_crowded_box(), 2..=2), t1 in 0.0..1.0f64, t2 in 0.0..1.0f64) {
        // With at most two overlapping boxes a larger threshold can only keep more.
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = traditional_nms(&boxes, &scores(&boxes), lo, IouMode::Bev).kept.len();
        let b = traditional_nms(&boxes, &scores(&boxes), hi, IouMode::Bev).kept.len();
        prop_assert!(a <= b);
    }

    #[test]
    fn per_category_thresholds_monotone_in_score(
        (boxes, cats) in frame_with_categories(60),
        s1 in 0.0..1.0f64,
        s2 in 0.0..1.0f64,
    ) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        let with = |s: f64| NmsConfig { score_threshold: CategoryThresholds { ld: s, lvhd: s, svhd: s }, ..NmsConfig::default() };
        let a = fuzzy_nms_boxes(&boxes, &cats, &with(lo)).unwrap().kept_indices();
        let b = fuzzy_nms_boxes(&boxes, &cats, &with(hi)).unwrap().kept_indices();
        prop_assert!(b.iter().all(|i| a.contains(i)));
    }
}
