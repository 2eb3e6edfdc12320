//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtpool::clustering::{build_hierarchy, GraphKind, HierarchySchedule, LevelGraph};
use rtpool::model::{loss_and_grad, Mode, ModelConfig, RtPoolParams, Sample};
use rtpool::synthetic::random_cloud;

/// A random 5-point 3D cloud with a random connected input graph, random
/// features and a two-layer, step-one hierarchy.
pub fn toy_sample(seed: u64, features: usize, classes: usize) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 5;
    let cloud = random_cloud(3, n, seed.wrapping_add(10_000));
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.gen_range(0..i), i)).collect();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.3) && !edges.contains(&(i, j)) {
                edges.push((i, j));
            }
        }
    }
    let input = LevelGraph::from_edges(n, &edges).unwrap();
    let kind = if seed % 2 == 0 { GraphKind::Generated } else { GraphKind::Delaunay };
    let hierarchy = build_hierarchy(&cloud, &input, HierarchySchedule::new(1, 2).unwrap(), kind).unwrap();
    Sample {
        hierarchy,
        features: Array2::from_shape_fn((n, features), |_| rng.gen_range(-1.0..1.0)),
        label: rng.gen_range(0..classes),
    }
}

/// Largest per-tensor relative error between the analytic gradient and
/// central differences with step `h`, as `(tensor name, error)`.
pub fn gradient_check(seed: u64, h: f64) -> Vec<(String, f64)> {
    let classes = 2 + (seed % 2) as usize;
    let samples: Vec<Sample> = (0..2).map(|i| toy_sample(seed * 7 + i, 3, classes)).collect();
    let batch: Vec<&Sample> = samples.iter().collect();
    let config = ModelConfig {
        hidden: 4,
        num_classes: classes,
        final_dropout: 0.3,
        weight_decay: 1e-3,
        seed,
        ..Default::default()
    };
    let mut params = RtPoolParams::init(3, &config);
    // Move ε off zero so its gradient path is exercised non-trivially.
    params.input_layer.epsilon = 0.1;
    for (i, l) in params.layers.iter_mut().enumerate() {
        l.epsilon = -0.05 * (i as f64 + 1.0);
    }
    let mode = |i: usize| Mode::Train { seed, step: 3, sample: i as u64 };
    let loss_at = |p: &RtPoolParams| loss_and_grad(&batch, p, &config, mode).unwrap().0;
    let (_, grad) = loss_and_grad(&batch, &params, &config, mode).unwrap();

    let flat = params.to_flat();
    let analytic = grad.to_flat();
    let mut numeric = vec![0.0; flat.len()];
    for i in 0..flat.len() {
        let mut p = params.clone();
        let mut v = flat.clone();
        v[i] = flat[i] + h;
        p.set_flat(&v);
        let up = loss_at(&p);
        v[i] = flat[i] - h;
        p.set_flat(&v);
        let down = loss_at(&p);
        numeric[i] = (up - down) / (2.0 * h);
    }
    let mut out = Vec::new();
    let mut offset = 0;
    for (name, values) in params.tensors() {
        let err = (offset..offset + values.len())
            .map(|i| (analytic[i] - numeric[i]).abs() / analytic[i].abs().max(numeric[i].abs()).max(1e-6))
            .fold(0.0, f64::max);
        out.push((name, err));
        offset += values.len();
    }
    out
}
