use itertools::Itertools;
use rtpool::oracle::{cells_intersect, cells_touch, compare_slice, delaunay_edges_brute_force, separable};
use rtpool::geometry::SubsetKey;
use rtpool::synthetic::random_cloud;
use rtpool::tiling::build_tiling;

#[test]
fn touching_cells_are_exactly_co_members_of_a_rhomboid() {
    for seed in 0..6u64 {
        let d = 2 + (seed % 2) as usize;
        let cloud = random_cloud(d, 7, 300 + seed);
        let t = build_tiling(&cloud, 3).unwrap();
        for k in 1..=3 {
            for (a, b) in t.vertices(k).unwrap().iter().tuple_combinations() {
                let common = t.rhomboids().iter().any(|r| r.contains(a) && r.contains(b));
                assert_eq!(cells_touch(&cloud, a, b).unwrap(), common, "seed {seed} k {k}: {a} {b}");
            }
        }
    }
}

#[test]
fn slices_match_oracle_on_small_clouds() {
    for seed in 0..6u64 {
        let d = 2 + (seed % 2) as usize;
        let cloud = random_cloud(d, 7, 700 + seed);
        let t = build_tiling(&cloud, 4).unwrap();
        for k in 1..=4 {
            let c = compare_slice(&t, k).unwrap();
            assert!(c.is_match(), "seed {seed} k {k}: {c:?}");
        }
    }
}

#[test]
fn order_one_slice_is_the_delaunay_triangulation() {
    for seed in 0..10u64 {
        let cloud = random_cloud(2 + (seed % 2) as usize, 9, 900 + seed);
        let s = build_tiling(&cloud, 1).unwrap().slice(1).unwrap();
        let edges: std::collections::BTreeSet<(usize, usize)> =
            s.edge_subsets().into_iter().map(|(a, b)| (a.indices()[0], b.indices()[0])).collect();
        assert_eq!(edges, delaunay_edges_brute_force(&cloud));
    }
}

#[test]
fn complements_and_unequal_sizes() {
    let cloud = random_cloud(2, 6, 5);
    // The whole cloud and every singleton are separable.
    assert!(separable(&cloud, &SubsetKey::from_sorted((0..6).collect())).unwrap());
    for i in 0..6 {
        assert!(separable(&cloud, &SubsetKey::new(vec![i])).unwrap());
    }
    let a = SubsetKey::new(vec![0]);
    let b = SubsetKey::new(vec![0, 1]);
    assert!(cells_intersect(&cloud, &a, &b).is_err());
}
