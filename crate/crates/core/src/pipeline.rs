//! Orchestration: records → point clouds → tilings → hierarchies → training,
//! plus the exhaustive validation run.

use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::{build_hierarchy, hierarchy_from_tiling, GraphKind, HierarchySchedule, LevelGraph};
use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::geometry::{jitter, validate_general_position, PointCloud};
use crate::model::{evaluate, train, EpochMetrics, ModelConfig, RtPoolParams, Sample};
use crate::oracle::{
    check_theorem1_levels, check_theorem2, check_theorem3, compare_slice, delaunay_edges_brute_force,
    SliceComparison, SphereCatalog, TheoremReport,
};
use crate::spectral::spectral_embed;
use crate::tiling::{build_tiling, RhomboidTiling};

/// Relative jitter magnitude, as a fraction of the cloud diameter.
pub const JITTER_SCALE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    pub graph_kind: GraphKind,
    /// Perturb clouds that fail the general-position check instead of
    /// rejecting them.
    pub jitter: bool,
    pub repetitions: usize,
    pub test_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            model: ModelConfig::default(),
            graph_kind: GraphKind::Generated,
            jitter: false,
            repetitions: 5,
            test_fraction: 0.1,
        }
    }
}

impl PipelineConfig {
    pub fn schedule(&self) -> Result<HierarchySchedule> {
        HierarchySchedule::new(self.model.step, self.model.pooling_layers)
    }
}

/// Wall-clock seconds spent in each build stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub embed: f64,
    pub validate: f64,
    pub tiling: f64,
    pub hierarchy: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.embed + self.validate + self.tiling + self.hierarchy
    }

    fn add(&mut self, o: &StageTimings) {
        self.embed += o.embed;
        self.validate += o.validate;
        self.tiling += o.tiling;
        self.hierarchy += o.hierarchy;
    }
}

/// One record after geometry and pooling structure have been computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedRecord {
    pub index: usize,
    /// Cloud actually tiled (after spectral embedding and jitter).
    pub cloud: PointCloud,
    pub embedded: bool,
    pub jittered: bool,
    pub sample: Sample,
    pub timings: StageTimings,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// Builds the cloud a record will be tiled on: its coordinates, or a
/// spectral embedding when it has none, jittered into general position if
/// `allow_jitter` is set.
pub fn record_cloud(
    record: &DatasetRecord,
    seed: u64,
    allow_jitter: bool,
    timings: &mut StageTimings,
) -> Result<(PointCloud, bool, bool)> {
    let n = record.node_count();
    if n == 0 {
        return Err(Error::InvalidInput("record has no nodes".into()));
    }
    let (cloud, embedded) = match &record.coords {
        Some(c) => (PointCloud::new(c[0].len(), c.clone())?, false),
        None => {
            let e = timed(&mut timings.embed, || spectral_embed(n, &record.edges))?;
            let pts = e.coords.rows().into_iter().map(|r| r.to_vec()).collect();
            (PointCloud::new(3, pts)?, true)
        }
    };
    let report = timed(&mut timings.validate, || validate_general_position(&cloud));
    if report.is_valid() {
        return Ok((cloud, embedded, false));
    }
    if !allow_jitter {
        return report.into_result().map(|_| unreachable!());
    }
    let magnitude = JITTER_SCALE * if cloud.diameter() > 0.0 { cloud.diameter() } else { 1.0 };
    let mut t = 0.0;
    let jittered = timed(&mut t, || jitter(&cloud, seed, magnitude))?;
    timings.validate += t;
    Ok((jittered, embedded, true))
}

fn feature_matrix(record: &DatasetRecord) -> Result<Array2<f64>> {
    let n = record.node_count();
    let f = record.features.first().map_or(0, Vec::len);
    Array2::from_shape_vec((n, f), record.features.iter().flatten().copied().collect())
        .map_err(|e| Error::ShapeMismatch(e.to_string()))
}

/// Full per-record build: cloud, tiling with `K = Δk·L + 1`, hierarchy.
pub fn prepare_record(record: &DatasetRecord, index: usize, config: &PipelineConfig) -> Result<PreparedRecord> {
    let schedule = config.schedule()?;
    let mut timings = StageTimings::default();
    let seed = config.model.seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let (cloud, embedded, jittered) = record_cloud(record, seed, config.jitter, &mut timings)?;
    let input = LevelGraph::from_edges(cloud.len(), &record.edges)?;
    let hierarchy = if cloud.len() < cloud.dimension() + 2 {
        timed(&mut timings.hierarchy, || build_hierarchy(&cloud, &input, schedule, config.graph_kind))?
    } else {
        let tiling = timed(&mut timings.tiling, || build_tiling(&cloud, schedule.max_order()))?;
        timed(&mut timings.hierarchy, || {
            hierarchy_from_tiling(&tiling, &input, schedule, config.graph_kind)
        })?
    };
    Ok(PreparedRecord {
        index,
        cloud,
        embedded,
        jittered,
        sample: Sample {
            hierarchy,
            features: feature_matrix(record)?,
            label: record.label,
        },
        timings,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFailure {
    pub index: usize,
    pub exit_code: i32,
    pub message: String,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: PipelineConfig,
    /// SHA-256 of the canonical JSON of the input records.
    pub dataset_digest: String,
    pub records: usize,
    pub seeds: Vec<u64>,
    /// Per-record stage timings, index order; `None` for failed records.
    pub record_timings: Vec<Option<StageTimings>>,
    pub total_timings: StageTimings,
    pub failures: Vec<RecordFailure>,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig, records: &[DatasetRecord]) -> Result<Self> {
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            dataset_digest: dataset_digest(records)?,
            records: records.len(),
            seeds: vec![config.model.seed],
            record_timings: Vec::new(),
            total_timings: StageTimings::default(),
            failures: Vec::new(),
            artifacts: Vec::new(),
        })
    }
}

pub fn dataset_digest(records: &[DatasetRecord]) -> Result<String> {
    let mut h = Sha256::new();
    for r in records {
        h.update(serde_json::to_vec(r)?);
        h.update(b"\n");
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug)]
pub struct BuildReport {
    /// Index order; `None` where the record failed.
    pub prepared: Vec<Option<PreparedRecord>>,
    pub manifest: RunManifest,
}

impl BuildReport {
    pub fn samples(&self) -> Vec<Sample> {
        self.prepared.iter().flatten().map(|p| p.sample.clone()).collect()
    }

    pub fn exit_code(&self) -> i32 {
        self.manifest.failures.iter().map(|f| f.exit_code).max().unwrap_or(0)
    }
}

/// Prepares every record in parallel; failures are collected and the run
/// continues. Output order is the input order regardless of scheduling.
pub fn run_build(records: &[DatasetRecord], config: &PipelineConfig) -> Result<BuildReport> {
    config.schedule()?;
    let results: Vec<Result<PreparedRecord>> = records
        .par_iter()
        .enumerate()
        .map(|(i, r)| prepare_record(r, i, config))
        .collect();
    let mut manifest = RunManifest::new("build", config, records)?;
    let mut prepared = Vec::with_capacity(records.len());
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => {
                manifest.total_timings.add(&p.timings);
                manifest.record_timings.push(Some(p.timings));
                prepared.push(Some(p));
            }
            Err(e) => {
                manifest.record_timings.push(None);
                manifest.failures.push(RecordFailure {
                    index,
                    exit_code: e.exit_code(),
                    message: e.to_string(),
                });
                prepared.push(None);
            }
        }
    }
    Ok(BuildReport { prepared, manifest })
}

/// Seeded shuffle, then the first `round(n·test_fraction)` indices (at least
/// one when `n ≥ 2`) are held out. Both halves are returned sorted.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_len = (n as f64 * test_fraction).round() as usize;
    if n >= 2 {
        test_len = test_len.clamp(1, n - 1);
    } else {
        test_len = 0;
    }
    let mut test = idx[..test_len].to_vec();
    let mut train = idx[test_len..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trained parameters together with the configuration that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: PipelineConfig,
    pub params: RtPoolParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Repetition {
    pub seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub metrics: Vec<EpochMetrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub repetitions: Vec<Repetition>,
    pub train_mean: f64,
    pub train_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

/// `config.repetitions` independent 90/10 runs; repetition `r` uses seed
/// `model.seed + r` for its split, initialization, shuffling and dropout.
/// Returns the report and the checkpoint of every repetition.
pub fn run_train(samples: &[Sample], config: &PipelineConfig) -> Result<(TrainReport, Vec<Checkpoint>)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if config.repetitions == 0 {
        return Err(Error::InvalidInput("need at least one repetition".into()));
    }
    let mut reps = Vec::new();
    let mut checkpoints = Vec::new();
    for r in 0..config.repetitions {
        let seed = config.model.seed.wrapping_add(r as u64);
        let (train_idx, test_idx) = split_indices(samples.len(), config.test_fraction, seed);
        let pick = |idx: &[usize]| idx.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
        let (train_set, test_set) = (pick(&train_idx), pick(&test_idx));
        let model = ModelConfig { seed, ..config.model.clone() };
        let (params, metrics) = train(&train_set, &model)?;
        let train_accuracy = evaluate(&train_set, &params)?;
        let test_accuracy = if test_set.is_empty() { f64::NAN } else { evaluate(&test_set, &params)? };
        reps.push(Repetition {
            seed,
            train_indices: train_idx,
            test_indices: test_idx,
            train_accuracy,
            test_accuracy,
            metrics,
        });
        checkpoints.push(Checkpoint {
            config: PipelineConfig { model, ..config.clone() },
            params,
        });
    }
    let (train_mean, train_std) = mean_std(&reps.iter().map(|r| r.train_accuracy).collect::<Vec<_>>());
    let (test_mean, test_std) = mean_std(&reps.iter().map(|r| r.test_accuracy).collect::<Vec<_>>());
    Ok((
        TrainReport {
            repetitions: reps,
            train_mean,
            train_std,
            test_mean,
            test_std,
        },
        checkpoints,
    ))
}

pub fn run_eval(samples: &[Sample], checkpoint: &Checkpoint) -> Result<f64> {
    evaluate(samples, &checkpoint.params)
}

/// One line of the validation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum ValidationEntry {
    Slice {
        cloud: usize,
        seed: Option<u64>,
        matched: bool,
        comparison: SliceComparison,
    },
    Order1Delaunay {
        cloud: usize,
        seed: Option<u64>,
        matched: bool,
        only_in_tiling: Vec<(usize, usize)>,
        only_in_brute_force: Vec<(usize, usize)>,
    },
    Theorem {
        cloud: usize,
        report: TheoremReport,
    },
    InputError {
        cloud: usize,
        seed: Option<u64>,
        exit_code: i32,
        message: String,
    },
}

impl ValidationEntry {
    pub fn is_counterexample(&self) -> bool {
        match self {
            ValidationEntry::Slice { matched, .. } | ValidationEntry::Order1Delaunay { matched, .. } => !matched,
            ValidationEntry::Theorem { report, .. } => report.is_counterexample(),
            ValidationEntry::InputError { .. } => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidateOptions {
    /// Slices are compared for `k ≤ min(n, slice_max_order)`.
    pub slice_max_order: usize,
    /// Run the weight theorems (3D clouds only).
    pub theorems: bool,
    /// Largest order for theorem checks; `None` means `n`.
    pub theorem_max_order: Option<usize>,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions {
            slice_max_order: 5,
            theorems: true,
            theorem_max_order: None,
        }
    }
}

fn validate_one(index: usize, seed: Option<u64>, cloud: &PointCloud, opts: &ValidateOptions) -> Result<Vec<ValidationEntry>> {
    validate_general_position(cloud).into_result()?;
    let n = cloud.len();
    let theorem_order = if opts.theorems && cloud.dimension() == 3 {
        opts.theorem_max_order.unwrap_or(n).min(n)
    } else {
        0
    };
    let k_slices = opts.slice_max_order.min(n);
    let tiling: RhomboidTiling = build_tiling(cloud, k_slices.max(theorem_order).max(1))?;
    let mut out = Vec::new();
    for k in 1..=k_slices {
        let comparison = compare_slice(&tiling, k)?;
        out.push(ValidationEntry::Slice {
            cloud: index,
            seed,
            matched: comparison.is_match(),
            comparison,
        });
    }
    let s1 = tiling.slice(1)?;
    let tiled: std::collections::BTreeSet<(usize, usize)> = s1
        .edge_subsets()
        .into_iter()
        .map(|(a, b)| (a.indices()[0], b.indices()[0]))
        .collect();
    let brute = delaunay_edges_brute_force(cloud);
    out.push(ValidationEntry::Order1Delaunay {
        cloud: index,
        seed,
        matched: tiled == brute,
        only_in_tiling: tiled.difference(&brute).copied().collect(),
        only_in_brute_force: brute.difference(&tiled).copied().collect(),
    });
    if theorem_order >= 2 {
        let catalog = SphereCatalog::new(cloud)?;
        for k1 in 1..theorem_order {
            for k2 in k1 + 1..=theorem_order {
                for report in [
                    check_theorem1_levels(&tiling, &catalog, k1, k2, seed)?,
                    check_theorem2(&tiling, k1, k2, seed)?,
                    check_theorem3(&tiling, k1, k2, seed)?,
                ] {
                    out.push(ValidationEntry::Theorem { cloud: index, report });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub entries: Vec<ValidationEntry>,
    pub counterexamples: usize,
    pub input_errors: usize,
}

impl ValidationSummary {
    /// 1 on any counterexample, else the worst input/numerical error code.
    pub fn exit_code(&self) -> i32 {
        if self.counterexamples > 0 {
            return 1;
        }
        self.entries
            .iter()
            .filter_map(|e| match e {
                ValidationEntry::InputError { exit_code, .. } => Some(*exit_code),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }
}

/// Exhaustive checks on every cloud: slice equivalence against the
/// witness-program oracle, order-1 against brute-force Delaunay, and (in 3D)
/// the cluster-weight theorems. Clouds that are not in general position are
/// reported as input errors, never as counterexamples.
pub fn run_validate(clouds: &[(Option<u64>, PointCloud)], opts: &ValidateOptions) -> ValidationSummary {
    let per_cloud: Vec<Vec<ValidationEntry>> = clouds
        .par_iter()
        .enumerate()
        .map(|(i, (seed, cloud))| {
            validate_one(i, *seed, cloud, opts).unwrap_or_else(|e| {
                vec![ValidationEntry::InputError {
                    cloud: i,
                    seed: *seed,
                    exit_code: e.exit_code(),
                    message: e.to_string(),
                }]
            })
        })
        .collect();
    let entries: Vec<ValidationEntry> = per_cloud.into_iter().flatten().collect();
    ValidationSummary {
        counterexamples: entries.iter().filter(|e| e.is_counterexample()).count(),
        input_errors: entries.iter().filter(|e| matches!(e, ValidationEntry::InputError { .. })).count(),
        entries,
    }
}
