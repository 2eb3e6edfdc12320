//! Seeded synthetic inputs: random clouds and a two-shape classification set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::DatasetRecord;
use crate::geometry::PointCloud;

/// `n` points drawn uniformly from the unit cube `[0,1]^d`.
pub fn random_cloud(d: usize, n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
    PointCloud::new(d, points).expect("dimension is 2 or 3")
}

/// Symmetrized `k`-nearest-neighbour edges, sorted, `i < j`.
pub fn knn_edges(cloud: &PointCloud, k: usize) -> Vec<(usize, usize)> {
    let n = cloud.len();
    let mut edges = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (dist2(cloud.point(i), cloud.point(j)), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j) in others.iter().take(k) {
            edges.insert((i.min(j), i.max(j)));
        }
    }
    edges.into_iter().collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller; `1 - u` keeps the logarithm finite.
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    (-2.0 * (1.0 - u).ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Two-class 3D point-cloud graphs: class 0 is one isotropic Gaussian blob,
/// class 1 is a pair of tighter blobs pulled apart along a random axis.
/// Labels alternate. Edges are the 3-nearest-neighbour graph; node features
/// are `[1, distance to centroid]`.
pub fn two_blob_dataset(graphs: usize, points: usize, seed: u64) -> Vec<DatasetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..graphs)
        .map(|g| {
            let label = g % 2;
            let axis: Vec<f64> = {
                let v: Vec<f64> = (0..3).map(|_| gaussian(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
                v.into_iter().map(|x| x / norm).collect()
            };
            let coords: Vec<Vec<f64>> = (0..points)
                .map(|i| {
                    let (center, sigma) = match label {
                        0 => (0.0, 1.0),
                        _ => (if i % 2 == 0 { 2.5 } else { -2.5 }, 0.4),
                    };
                    (0..3).map(|a| center * axis[a] + sigma * gaussian(&mut rng)).collect()
                })
                .collect();
            let cloud = PointCloud::new(3, coords.clone()).expect("finite 3D coordinates");
            let centroid: Vec<f64> = (0..3)
                .map(|a| coords.iter().map(|p| p[a]).sum::<f64>() / points as f64)
                .collect();
            let features = coords
                .iter()
                .map(|p| vec![1.0, dist2(p, &centroid).sqrt()])
                .collect();
            DatasetRecord {
                edges: knn_edges(&cloud, 3),
                coords: Some(coords),
                features,
                label,
            }
        })
        .collect()
}

/// Seeded clouds for exhaustive checks: cloud `s` uses seed `base_seed + s`,
/// dimension `2 + s mod 2` and `6 + (s/2) mod 5` points.
pub fn validation_clouds(count: usize, base_seed: u64) -> Vec<(u64, PointCloud)> {
    (0..count)
        .map(|s| {
            let seed = base_seed + s as u64;
            (seed, random_cloud(2 + s % 2, 6 + (s / 2) % 5, seed))
        })
        .collect()
}

/// Planar formaldehyde: C, O, H, H with the three bonds at carbon. Features
/// are one-hot element types `[C, O, H]`. The carbon lies inside the O–H–H
/// triangle.
pub fn formaldehyde() -> DatasetRecord {
    DatasetRecord {
        coords: Some(vec![vec![0.0, 0.0], vec![0.0, 1.2], vec![0.95, -0.55], vec![-0.93, -0.53]]),
        edges: vec![(0, 1), (0, 2), (0, 3)],
        features: vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]],
        label: 0,
    }
}
