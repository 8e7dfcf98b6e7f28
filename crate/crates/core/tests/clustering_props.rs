use std::collections::BTreeSet;

mod common;

use common::oracles::{dbscan as oracle, within};
use fuzzy_nms::clustering::{cluster_density, dbscan, DbscanParams};
use proptest::prelude::*;

fn arb_points() -> impl Strategy<Value = Vec<[f64; 3]>> {
    let coord = prop_oneof![
        (0..14i32).prop_map(|k| k as f64 * 0.15),
        0.0..2.0f64,
    ];
    let z = (0..3i32).prop_map(|k| k as f64 * 0.1);
    prop::collection::vec((coord.clone(), coord, z).prop_map(|(x, y, z)| [x, y, z]), 0..120)
}

fn core_partition(ids: &[u32], core: &[bool], order: &[usize]) -> BTreeSet<Vec<usize>> {
    let k = ids.iter().copied().max().unwrap_or(0);
    (1..=k)
        .map(|c| {
            let mut v: Vec<usize> = (0..ids.len()).filter(|&i| ids[i] == c && core[i]).map(|i| order[i]).collect();
            v.sort_unstable();
            v
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_brute_force(points in arb_points(), min_pts in 1usize..7) {
        let params = DbscanParams::new(0.3, min_pts).unwrap();
        prop_assert_eq!(dbscan(&points, &params), oracle(&points, 0.3, min_pts));
    }

    #[test]
    fn core_partition_survives_permutation(points in arb_points(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let params = DbscanParams::default();
        let mut perm: Vec<usize> = (0..points.len()).collect();
        perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled: Vec<[f64; 3]> = perm.iter().map(|&i| points[i]).collect();
        let core = |pts: &[[f64; 3]]| -> Vec<bool> {
            pts.iter().map(|p| pts.iter().filter(|q| within(p, q, 0.3)).count() >= 4).collect()
        };
        let identity: Vec<usize> = (0..points.len()).collect();
        let a = core_partition(&dbscan(&points, &params), &core(&points), &identity);
        let b = core_partition(&dbscan(&shuffled, &params), &core(&shuffled), &perm);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn density_bounds_and_ordering(points in arb_points()) {
        let ids = dbscan(&points, &DbscanParams::default());
        let d = cluster_density(&ids);
        if !ids.is_empty() {
            prop_assert!(d.iter().all(|&v| v > 0.0 && v <= 1.0));
            prop_assert!(d.contains(&1.0));
        }
        let count = |c: u32| ids.iter().filter(|&&x| x == c).count();
        for i in 0..ids.len() {
            for j in 0..ids.len() {
                if count(ids[i]) > count(ids[j]) {
                    prop_assert!(d[i] > d[j]);
                }
            }
        }
    }
}
