//! GIN layers over a fixed pooling hierarchy, bilinear readout, softmax
//! classifier, and the reverse pass through all of it.
//!
//! Pooling matrices and adjacencies are constants of the computation; only
//! the layer weights, GIN `ε`, readout vector and classifier are trained.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::PoolingHierarchy;
use crate::error::{Error, Result};

/// Training hyperparameters. Defaults follow the reference settings
/// (batch 16, 500 epochs, lr 0.001, 2 pooling layers, step 1, final
/// dropout 0.5, weight decay 1e-4).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub pooling_layers: usize,
    pub step: usize,
    pub final_dropout: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub seed: u64,
    pub num_classes: usize,
    pub optimizer: Optimizer,
}

/// Update rule. Weight decay is added to the gradient (L2 penalty) for both.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            batch_size: 16,
            epochs: 500,
            learning_rate: 0.001,
            pooling_layers: 2,
            step: 1,
            final_dropout: 0.5,
            weight_decay: 0.0001,
            hidden: 32,
            seed: 0,
            num_classes: 2,
            optimizer: Optimizer::adam(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.batch_size == 0 || self.pooling_layers == 0 || self.step == 0 || self.hidden == 0 {
            return bad("batch size, pooling layers, step and hidden width must be positive");
        }
        if self.num_classes < 2 {
            return bad("need at least two classes");
        }
        if !(0.0..1.0).contains(&self.final_dropout) {
            return bad("final dropout must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) || !(self.weight_decay >= 0.0) {
            return bad("learning rate must be positive and weight decay non-negative");
        }
        Ok(())
    }
}

/// Affine map `x ↦ x W + b` applied to rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Dense {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Dense {
            weight: Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound)),
            bias: Array1::from_shape_fn(fan_out, |_| rng.gen_range(-bound..bound)),
        }
    }

    fn zeros_like(&self) -> Dense {
        Dense {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.len()),
        }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GinLayerParams {
    pub epsilon: f64,
    pub lin1: Dense,
    pub lin2: Dense,
}

impl GinLayerParams {
    pub fn init(rng: &mut ChaCha8Rng, input: usize, hidden: usize, output: usize) -> Self {
        GinLayerParams {
            epsilon: 0.0,
            lin1: Dense::init(rng, input, hidden),
            lin2: Dense::init(rng, hidden, output),
        }
    }

    fn zeros_like(&self) -> Self {
        GinLayerParams {
            epsilon: 0.0,
            lin1: self.lin1.zeros_like(),
            lin2: self.lin2.zeros_like(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutParams {
    /// Column weight `W` of the bilinear readout.
    pub w: Array1<f64>,
    pub classifier: Dense,
}

/// All trainable tensors of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RtPoolParams {
    /// Update on the input graph before the first pooling step.
    pub input_layer: GinLayerParams,
    /// One update per pooling layer.
    pub layers: Vec<GinLayerParams>,
    pub readout: ReadoutParams,
}

impl RtPoolParams {
    pub fn init(input_width: usize, config: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let h = config.hidden;
        let input_layer = GinLayerParams::init(&mut rng, input_width, h, h);
        let layers = (0..config.pooling_layers)
            .map(|_| GinLayerParams::init(&mut rng, h, h, h))
            .collect();
        let bound = 1.0 / (h as f64).sqrt();
        let w = Array1::from_shape_fn(h, |_| rng.gen_range(-bound..bound));
        let classifier = Dense::init(&mut rng, h, config.num_classes);
        RtPoolParams {
            input_layer,
            layers,
            readout: ReadoutParams { w, classifier },
        }
    }

    pub fn zeros_like(&self) -> Self {
        RtPoolParams {
            input_layer: self.input_layer.zeros_like(),
            layers: self.layers.iter().map(GinLayerParams::zeros_like).collect(),
            readout: ReadoutParams {
                w: Array1::zeros(self.readout.w.len()),
                classifier: self.readout.classifier.zeros_like(),
            },
        }
    }

    pub fn feature_width(&self) -> usize {
        self.readout.w.len()
    }

    pub fn num_classes(&self) -> usize {
        self.readout.classifier.bias.len()
    }

    /// Visits every tensor as `(name, values)` in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = Vec::new();
        let gin = |out: &mut Vec<(String, Vec<f64>)>, name: &str, g: &GinLayerParams| {
            out.push((format!("{name}.epsilon"), vec![g.epsilon]));
            out.push((format!("{name}.lin1.weight"), g.lin1.weight.iter().copied().collect()));
            out.push((format!("{name}.lin1.bias"), g.lin1.bias.to_vec()));
            out.push((format!("{name}.lin2.weight"), g.lin2.weight.iter().copied().collect()));
            out.push((format!("{name}.lin2.bias"), g.lin2.bias.to_vec()));
        };
        gin(&mut out, "input", &self.input_layer);
        for (i, g) in self.layers.iter().enumerate() {
            gin(&mut out, &format!("layer{i}"), g);
        }
        out.push(("readout.w".into(), self.readout.w.to_vec()));
        out.push(("classifier.weight".into(), self.readout.classifier.weight.iter().copied().collect()));
        out.push(("classifier.bias".into(), self.readout.classifier.bias.to_vec()));
        out
    }

    fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        let mut gin = |g: &mut GinLayerParams| {
            f(&mut g.epsilon);
            g.lin1.weight.iter_mut().for_each(&mut f);
            g.lin1.bias.iter_mut().for_each(&mut f);
            g.lin2.weight.iter_mut().for_each(&mut f);
            g.lin2.bias.iter_mut().for_each(&mut f);
        };
        gin(&mut self.input_layer);
        self.layers.iter_mut().for_each(&mut gin);
        self.readout.w.iter_mut().for_each(&mut f);
        self.readout.classifier.weight.iter_mut().for_each(&mut f);
        self.readout.classifier.bias.iter_mut().for_each(&mut f);
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.clone().for_each_mut(|x| v.push(*x));
        v
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let mut it = values.iter();
        self.for_each_mut(|x| *x = *it.next().expect("flat parameter vector too short"));
    }

    fn axpy(&mut self, alpha: f64, other: &RtPoolParams) {
        let src = other.to_flat();
        let mut i = 0;
        self.for_each_mut(|x| {
            *x += alpha * src[i];
            i += 1;
        });
    }

    fn squared_norm(&self) -> f64 {
        self.to_flat().iter().map(|x| x * x).sum()
    }
}

/// Intermediate values of one GIN update kept for the reverse pass.
#[derive(Clone, Debug)]
pub struct GinCache {
    z: Array2<f64>,
    u: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
}

fn check_adjacency(a: &Array2<f64>, z: &Array2<f64>) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() != z.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "adjacency {}x{} vs {} feature rows",
            a.nrows(),
            a.ncols(),
            z.nrows()
        )));
    }
    Ok(())
}

fn gin_forward_cached(a: &Array2<f64>, z: &Array2<f64>, p: &GinLayerParams) -> Result<(Array2<f64>, GinCache)> {
    check_adjacency(a, z)?;
    if z.ncols() != p.lin1.weight.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "features have width {} but the layer expects {}",
            z.ncols(),
            p.lin1.weight.nrows()
        )));
    }
    let u = z * (1.0 + p.epsilon) + a.dot(z);
    let pre = p.lin1.apply(&u);
    let act = pre.mapv(|x| x.max(0.0));
    let h = p.lin2.apply(&act);
    Ok((
        h,
        GinCache {
            z: z.clone(),
            u,
            pre,
            act,
        },
    ))
}

/// `MLP((1+ε)·Z + A·Z)`.
pub fn gin_forward(a: &Array2<f64>, z: &Array2<f64>, params: &GinLayerParams) -> Result<Array2<f64>> {
    gin_forward_cached(a, z, params).map(|(h, _)| h)
}

/// Returns the gradient with respect to `Z`, accumulating parameter
/// gradients into `grad`.
fn gin_backward(
    a: &Array2<f64>,
    p: &GinLayerParams,
    cache: &GinCache,
    dh: &Array2<f64>,
    grad: &mut GinLayerParams,
) -> Array2<f64> {
    grad.lin2.weight += &cache.act.t().dot(dh);
    grad.lin2.bias += &dh.sum_axis(Axis(0));
    let mut dpre = dh.dot(&p.lin2.weight.t());
    dpre.zip_mut_with(&cache.pre, |g, &x| {
        if x <= 0.0 {
            *g = 0.0
        }
    });
    grad.lin1.weight += &cache.u.t().dot(&dpre);
    grad.lin1.bias += &dpre.sum_axis(Axis(0));
    let du = dpre.dot(&p.lin1.weight.t());
    grad.epsilon += (&du * &cache.z).sum();
    &du * (1.0 + p.epsilon) + a.t().dot(&du)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    /// Dropout mask is derived from `(seed, step, sample)`.
    Train { seed: u64, step: u64, sample: u64 },
}

fn dropout_mask(rate: f64, width: usize, seed: u64, step: u64, sample: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ sample);
    let keep = 1.0 / (1.0 - rate);
    Array1::from_shape_fn(width, |_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
}

/// Everything the reverse pass needs.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    gins: Vec<GinCache>,
    last: Array2<f64>,
    scores: Array1<f64>,
    mask: Array1<f64>,
    embedding: Array1<f64>,
    dropped: Array1<f64>,
}

impl ForwardCache {
    /// `H_final = Hᵀ (H W)` before dropout.
    pub fn embedding(&self) -> &Array1<f64> {
        &self.embedding
    }
}

fn ensure_finite(x: &Array2<f64>, what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteActivation(what.to_string()))
    }
}

/// Full forward pass: GIN on the input graph, then pool and update for every
/// layer, bilinear readout, dropout (train mode only), classifier.
pub fn rtpool_forward(
    hierarchy: &PoolingHierarchy,
    features: &Array2<f64>,
    params: &RtPoolParams,
    dropout: f64,
    mode: Mode,
) -> Result<(Array1<f64>, ForwardCache)> {
    if features.nrows() != hierarchy.point_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature rows for {} points",
            features.nrows(),
            hierarchy.point_count()
        )));
    }
    if params.layers.len() != hierarchy.layers.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} GIN layers for {} pooling layers",
            params.layers.len(),
            hierarchy.layers.len()
        )));
    }
    let mut gins = Vec::with_capacity(params.layers.len() + 1);
    let (mut h, c) = gin_forward_cached(&hierarchy.input_graph.adjacency, features, &params.input_layer)?;
    ensure_finite(&h, "input layer")?;
    gins.push(c);
    for (l, (layer, p)) in hierarchy.layers.iter().zip(&params.layers).enumerate() {
        if layer.cluster.entries.ncols() != h.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "layer {l}: cluster matrix has {} columns, features have {} rows",
                layer.cluster.entries.ncols(),
                h.nrows()
            )));
        }
        let z = layer.cluster.entries.dot(&h);
        let (next, c) = gin_forward_cached(&layer.graph.adjacency, &z, p)?;
        ensure_finite(&next, &format!("layer {l}"))?;
        gins.push(c);
        h = next;
    }
    let scores = h.dot(&params.readout.w);
    let embedding = h.t().dot(&scores);
    let mask = match mode {
        Mode::Train { seed, step, sample } if dropout > 0.0 => {
            dropout_mask(dropout, embedding.len(), seed, step, sample)
        }
        _ => Array1::ones(embedding.len()),
    };
    let dropped = &embedding * &mask;
    let logits = dropped.dot(&params.readout.classifier.weight) + &params.readout.classifier.bias;
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteActivation("logits".into()));
    }
    Ok((
        logits,
        ForwardCache {
            gins,
            last: h,
            scores,
            mask,
            embedding,
            dropped,
        },
    ))
}

/// Reverse pass from `dlogits` to every parameter.
pub fn rtpool_backward(
    hierarchy: &PoolingHierarchy,
    params: &RtPoolParams,
    cache: &ForwardCache,
    dlogits: &Array1<f64>,
) -> RtPoolParams {
    let mut grad = params.zeros_like();
    let cls = &params.readout.classifier;
    grad.readout.classifier.weight = outer(&cache.dropped, dlogits);
    grad.readout.classifier.bias = dlogits.clone();
    let dembed = cls.weight.dot(dlogits) * &cache.mask;
    // embedding = Hᵀ s with s = H w.
    let h = &cache.last;
    let hg = h.dot(&dembed);
    grad.readout.w = h.t().dot(&hg);
    let mut dh = outer(&cache.scores, &dembed) + outer(&hg, &params.readout.w);

    for l in (0..params.layers.len()).rev() {
        let layer = &hierarchy.layers[l];
        let dz = gin_backward(&layer.graph.adjacency, &params.layers[l], &cache.gins[l + 1], &dh, &mut grad.layers[l]);
        dh = layer.cluster.entries.t().dot(&dz);
    }
    gin_backward(
        &hierarchy.input_graph.adjacency,
        &params.input_layer,
        &cache.gins[0],
        &dh,
        &mut grad.input_layer,
    );
    grad
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let m = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = m + logits.mapv(|x| (x - m).exp()).sum().ln();
    logits.mapv(|x| x - lse)
}

/// One training or evaluation example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub hierarchy: PoolingHierarchy,
    pub features: Array2<f64>,
    pub label: usize,
}

/// Mean softmax cross-entropy over `batch` plus `λ/2·‖θ‖²`, and its exact
/// gradient.
pub fn loss_and_grad(
    batch: &[&Sample],
    params: &RtPoolParams,
    config: &ModelConfig,
    mode_for: impl Fn(usize) -> Mode + Sync,
) -> Result<(f64, RtPoolParams)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = params.num_classes();
    let per_sample: Vec<(f64, RtPoolParams)> = batch
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            if s.label >= classes {
                return Err(Error::InvalidInput(format!("label {} out of range", s.label)));
            }
            let (logits, cache) = rtpool_forward(&s.hierarchy, &s.features, params, config.final_dropout, mode_for(i))?;
            let logp = log_softmax(&logits);
            let mut dlogits = logp.mapv(f64::exp);
            dlogits[s.label] -= 1.0;
            Ok((-logp[s.label], rtpool_backward(&s.hierarchy, params, &cache, &dlogits)))
        })
        .collect::<Result<_>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut grad = params.zeros_like();
    let mut loss = 0.0;
    // Fixed summation order keeps results independent of thread scheduling.
    for (l, g) in &per_sample {
        loss += l * scale;
        grad.axpy(scale, g);
    }
    loss += 0.5 * config.weight_decay * params.squared_norm();
    grad.axpy(config.weight_decay, params);
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok((loss, grad))
}

pub fn predict(sample: &Sample, params: &RtPoolParams) -> Result<Array1<f64>> {
    rtpool_forward(&sample.hierarchy, &sample.features, params, 0.0, Mode::Eval).map(|(l, _)| l)
}

fn argmax(v: &Array1<f64>) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// Argmax accuracy with dropout disabled.
pub fn evaluate(dataset: &[Sample], params: &RtPoolParams) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let correct: Vec<bool> = dataset
        .par_iter()
        .map(|s| predict(s, params).map(|l| argmax(&l) == s.label))
        .collect::<Result<_>>()?;
    Ok(correct.iter().filter(|&&c| c).count() as f64 / dataset.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

struct OptimizerState {
    rule: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    fn new(rule: Optimizer, lr: f64) -> Self {
        OptimizerState { rule, lr, m: Vec::new(), v: Vec::new(), t: 0 }
    }

    fn step(&mut self, params: &mut RtPoolParams, grad: &RtPoolParams) {
        match self.rule {
            Optimizer::Sgd => params.axpy(-self.lr, grad),
            Optimizer::Adam { beta1, beta2, eps } => {
                let g = grad.to_flat();
                if self.m.is_empty() {
                    self.m = vec![0.0; g.len()];
                    self.v = vec![0.0; g.len()];
                }
                self.t += 1;
                let (c1, c2) = (1.0 - beta1.powi(self.t), 1.0 - beta2.powi(self.t));
                let mut i = 0;
                let (m, v, lr) = (&mut self.m, &mut self.v, self.lr);
                params.for_each_mut(|x| {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    *x -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                    i += 1;
                });
            }
        }
    }
}

/// Minibatch training with weight decay. The shuffle order and dropout masks are
/// functions of `config.seed`, so runs are reproducible bit for bit.
pub fn train(dataset: &[Sample], config: &ModelConfig) -> Result<(RtPoolParams, Vec<EpochMetrics>)> {
    config.validate()?;
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let params = RtPoolParams::init(first.features.ncols(), config);
    train_from(dataset, config, params)
}

pub fn train_from(
    dataset: &[Sample],
    config: &ModelConfig,
    mut params: RtPoolParams,
) -> Result<(RtPoolParams, Vec<EpochMetrics>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5EED);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut step = 0u64;
    let mut opt = OptimizerState::new(config.optimizer, config.learning_rate);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &dataset[i]).collect();
            let (loss, grad) = loss_and_grad(&batch, &params, config, |i| Mode::Train {
                seed: config.seed,
                step,
                sample: i as u64,
            })?;
            opt.step(&mut params, &grad);
            total += loss;
            batches += 1;
            step += 1;
        }
        metrics.push(EpochMetrics {
            epoch,
            loss: total / batches as f64,
            accuracy: evaluate(dataset, &params)?,
        });
    }
    Ok((params, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{GraphKind, LevelGraph, NormalizedClusterMatrix, PoolingLayer, HierarchySchedule};
    use crate::geometry::SubsetKey;

    fn identity_hierarchy(n: usize, layers: usize) -> PoolingHierarchy {
        let g = LevelGraph::from_edges(n, &[]).unwrap();
        PoolingHierarchy {
            schedule: HierarchySchedule::new(1, layers).unwrap(),
            input_graph: g.clone(),
            layers: (0..layers)
                .map(|l| PoolingLayer {
                    cluster: NormalizedClusterMatrix { fine: l + 1, coarse: l + 2, entries: Array2::eye(n) },
                    graph: LevelGraph { kind: GraphKind::Delaunay, ..g.clone() },
                    vertices: (0..n).map(|i| SubsetKey::new(vec![i])).collect(),
                })
                .collect(),
            degenerate: false,
        }
    }

    fn naive_gin(a: &Array2<f64>, z: &Array2<f64>, p: &GinLayerParams) -> Array2<f64> {
        let n = z.nrows();
        let mut out = Array2::zeros((n, p.lin2.weight.ncols()));
        for v in 0..n {
            let mut agg: Vec<f64> = z.row(v).iter().map(|x| x * (1.0 + p.epsilon)).collect();
            for u in 0..n {
                if a[[v, u]] != 0.0 {
                    for (f, x) in agg.iter_mut().enumerate() {
                        *x += a[[v, u]] * z[[u, f]];
                    }
                }
            }
            let mut hid = vec![0.0; p.lin1.weight.ncols()];
            for (j, hv) in hid.iter_mut().enumerate() {
                *hv = p.lin1.bias[j] + agg.iter().enumerate().map(|(f, x)| x * p.lin1.weight[[f, j]]).sum::<f64>();
                *hv = hv.max(0.0);
            }
            for k in 0..p.lin2.weight.ncols() {
                out[[v, k]] = p.lin2.bias[k] + hid.iter().enumerate().map(|(j, x)| x * p.lin2.weight[[j, k]]).sum::<f64>();
            }
        }
        out
    }

    #[test]
    fn gin_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 7;
        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.4) {
                    a[[i, j]] = 1.0;
                    a[[j, i]] = 1.0;
                }
            }
        }
        let z = Array2::from_shape_fn((n, 3), |_| rng.gen_range(-1.0..1.0));
        let mut p = GinLayerParams::init(&mut rng, 3, 5, 4);
        p.epsilon = 0.3;
        let fast = gin_forward(&a, &z, &p).unwrap();
        let slow = naive_gin(&a, &z, &p);
        assert!((&fast - &slow).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn gin_single_vertex_scalar() {
        let p = GinLayerParams {
            epsilon: 0.5,
            lin1: Dense { weight: Array2::from_elem((1, 1), 2.0), bias: Array1::from_elem(1, -1.0) },
            lin2: Dense { weight: Array2::from_elem((1, 1), 3.0), bias: Array1::from_elem(1, 0.25) },
        };
        let h = gin_forward(&Array2::zeros((1, 1)), &Array2::from_elem((1, 1), 2.0), &p).unwrap();
        // relu(2·(1.5·2) − 1)·3 + 0.25 = 15.25
        assert_eq!(h[[0, 0]], 15.25);
        assert!(matches!(
            gin_forward(&Array2::zeros((2, 2)), &Array2::zeros((1, 1)), &p),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn zero_input_gives_zero_embedding() {
        let cfg = ModelConfig { hidden: 4, ..Default::default() };
        let mut p = RtPoolParams::init(2, &cfg);
        let zero_bias = |g: &mut GinLayerParams| {
            g.lin1.bias.fill(0.0);
            g.lin2.bias.fill(0.0);
        };
        zero_bias(&mut p.input_layer);
        p.layers.iter_mut().for_each(zero_bias);
        let hier = identity_hierarchy(5, 2);
        let (_, cache) = rtpool_forward(&hier, &Array2::zeros((5, 2)), &p, 0.0, Mode::Eval).unwrap();
        assert!(cache.embedding().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        let cfg = ModelConfig { hidden: 4, num_classes: 3, weight_decay: 0.0, ..Default::default() };
        let mut p = RtPoolParams::init(2, &cfg);
        p.readout.classifier.weight.fill(0.0);
        p.readout.classifier.bias.fill(0.7);
        let s = Sample { hierarchy: identity_hierarchy(4, 2), features: Array2::ones((4, 2)), label: 1 };
        let (loss, _) = loss_and_grad(&[&s], &p, &cfg, |_| Mode::Eval).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn empty_dataset_errors() {
        let cfg = ModelConfig::default();
        let p = RtPoolParams::init(2, &cfg);
        assert!(matches!(evaluate(&[], &p), Err(Error::EmptyDataset)));
    }

    #[test]
    fn zero_epochs_return_initial_params() {
        let cfg = ModelConfig { epochs: 0, hidden: 4, ..Default::default() };
        let s = Sample { hierarchy: identity_hierarchy(4, 2), features: Array2::ones((4, 2)), label: 1 };
        let (p, m) = train(&[s], &cfg).unwrap();
        assert_eq!(p, RtPoolParams::init(2, &cfg));
        assert!(m.is_empty());
    }

    #[test]
    fn readout_handles_empty_level() {
        let cfg = ModelConfig { hidden: 3, pooling_layers: 1, ..Default::default() };
        let p = RtPoolParams::init(1, &cfg);
        let mut hier = identity_hierarchy(3, 1);
        hier.layers[0].cluster.entries = Array2::zeros((0, 3));
        hier.layers[0].graph.adjacency = Array2::zeros((0, 0));
        hier.layers[0].vertices.clear();
        let (_, cache) = rtpool_forward(&hier, &Array2::ones((3, 1)), &p, 0.0, Mode::Eval).unwrap();
        assert_eq!(cache.embedding().len(), 3);
        assert!(cache.embedding().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::default().validate().is_ok());
        assert!(ModelConfig { final_dropout: 1.0, ..Default::default() }.validate().is_err());
        assert!(ModelConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }
}
