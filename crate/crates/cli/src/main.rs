//! `rtpool`: build tilings and pooling hierarchies, check them against the
//! brute-force oracles, train and evaluate the classifier, export artifacts.
//!
//! Exit status: 0 success, 1 validation counterexample, 2 input error,
//! 3 numerical failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rtpool::clustering::GraphKind;
use rtpool::dataset::{convert_tudataset, load_dataset, write_dataset, DatasetRecord};
use rtpool::export::{load_build, run_export, write_build, ExportKind};
use rtpool::geometry::PointCloud;
use rtpool::model::Sample;
use rtpool::pipeline::{
    dataset_digest, record_cloud, run_build, run_eval, run_train, run_validate, Checkpoint, PipelineConfig,
    RunManifest, StageTimings, ValidateOptions,
};
use rtpool::synthetic::{formaldehyde, two_blob_dataset, validation_clouds};
use rtpool::{Error, Result};

#[derive(Parser)]
#[command(name = "rtpool", version, about = "Rhomboid-tiling graph pooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tile every record and build its pooling hierarchy.
    Build {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check slices and cluster-weight theorems against brute-force oracles.
    Validate(ValidateArgs),
    /// Train with repeated 90/10 splits on a build directory.
    Train {
        #[arg(long)]
        build: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Accuracy of a checkpoint on every record of a build directory.
    Eval {
        #[arg(long)]
        build: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Write one record's tiling, matrices, graphs or coordinates.
    Export {
        #[arg(long)]
        build: PathBuf,
        #[arg(long)]
        artifact: usize,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a generated dataset.
    Synth {
        #[arg(long, value_enum, default_value = "blobs")]
        kind: SynthKind,
        #[arg(long, default_value_t = 60)]
        graphs: usize,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert raw TUDataset text files (`<NAME>_A.txt`, ...) to the dataset format.
    Convert {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Default)]
struct Overrides {
    /// TOML configuration file; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    step: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, value_enum)]
    graph_kind: Option<GraphKindArg>,
    /// Perturb clouds that are not in general position instead of failing.
    #[arg(long)]
    jitter: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Records with coordinates (or spectrally embedded) to check.
    #[arg(long, conflicts_with_all = ["synthetic", "fixture"])]
    dataset: Option<PathBuf>,
    /// Number of seeded random clouds to check.
    #[arg(long)]
    synthetic: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    seed: u64,
    /// Check the built-in planar formaldehyde cloud.
    #[arg(long)]
    fixture: bool,
    #[arg(long, default_value_t = 5)]
    slice_max_order: usize,
    #[arg(long)]
    theorem_max_order: Option<usize>,
    #[arg(long)]
    no_theorems: bool,
    /// Verdict report (one JSON object per line); stdout if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Tiling,
    Matrices,
    Graphs,
    Embedding,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKindArg {
    Delaunay,
    Generated,
    GeneratedWithOverlap,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Blobs,
    Formaldehyde,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

impl Overrides {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg: PipelineConfig = match &self.config {
            Some(p) => toml::from_str(&fs::read_to_string(p)?).map_err(|e| invalid(format!("{}: {e}", p.display())))?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.model.seed = v;
        }
        if let Some(v) = self.layers {
            cfg.model.pooling_layers = v;
        }
        if let Some(v) = self.step {
            cfg.model.step = v;
        }
        if let Some(v) = self.epochs {
            cfg.model.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.model.learning_rate = v;
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(v) = self.graph_kind {
            cfg.graph_kind = match v {
                GraphKindArg::Delaunay => GraphKind::Delaunay,
                GraphKindArg::Generated => GraphKind::Generated,
                GraphKindArg::GeneratedWithOverlap => GraphKind::GeneratedWithOverlap,
            };
        }
        cfg.jitter |= self.jitter;
        cfg.model.validate()?;
        cfg.schedule()?;
        Ok(cfg)
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn build(dataset: &Path, out: &Path, overrides: &Overrides) -> Result<i32> {
    let cfg = overrides.resolve()?;
    let records = load_dataset(dataset)?;
    let report = run_build(&records, &cfg)?;
    let manifest = write_build(out, &report)?;
    let t = manifest.total_timings;
    eprintln!(
        "built {}/{} records (K = {}) in {:.3}s: embed {:.3}s, validate {:.3}s, tiling {:.3}s, hierarchy {:.3}s",
        records.len() - manifest.failures.len(),
        records.len(),
        cfg.schedule()?.max_order(),
        t.total(),
        t.embed,
        t.validate,
        t.tiling,
        t.hierarchy
    );
    for f in &manifest.failures {
        eprintln!("record {}: {}", f.index, f.message);
    }
    Ok(report.exit_code())
}

fn validate(args: &ValidateArgs) -> Result<i32> {
    let clouds: Vec<(Option<u64>, PointCloud)> = if let Some(path) = &args.dataset {
        let records = load_dataset(path)?;
        records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                record_cloud(r, i as u64, false, &mut StageTimings::default()).map(|(c, _, _)| (None, c))
            })
            .collect::<Result<_>>()?
    } else if let Some(count) = args.synthetic {
        validation_clouds(count, args.seed).into_iter().map(|(s, c)| (Some(s), c)).collect()
    } else if args.fixture {
        let f = formaldehyde();
        vec![(None, PointCloud::new(2, f.coords.expect("fixture has coordinates"))?)]
    } else {
        return Err(invalid("one of --dataset, --synthetic or --fixture is required"));
    };
    let opts = ValidateOptions {
        slice_max_order: args.slice_max_order,
        theorems: !args.no_theorems,
        theorem_max_order: args.theorem_max_order,
    };
    let summary = run_validate(&clouds, &opts);
    let mut sink: Box<dyn Write> = match &args.report {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    for e in &summary.entries {
        serde_json::to_writer(&mut sink, e)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    eprintln!(
        "{} clouds, {} checks, {} counterexamples, {} input errors",
        clouds.len(),
        summary.entries.len(),
        summary.counterexamples,
        summary.input_errors
    );
    Ok(summary.exit_code())
}

fn samples_of(build: &Path) -> Result<(RunManifest, Vec<Sample>)> {
    let (manifest, records) = load_build(build)?;
    Ok((manifest, records.into_iter().map(|r| r.sample).collect()))
}

fn train(build: &Path, out: &Path, overrides: &Overrides) -> Result<i32> {
    let (built, samples) = samples_of(build)?;
    let mut cfg = overrides.resolve()?;
    if overrides.config.is_none() && overrides.layers.is_none() && overrides.step.is_none() {
        // The hierarchy shape is fixed at build time.
        cfg.model.pooling_layers = built.config.model.pooling_layers;
        cfg.model.step = built.config.model.step;
        cfg.graph_kind = built.config.graph_kind;
    }
    if cfg.schedule()? != built.config.schedule()? {
        return Err(invalid("pooling schedule differs from the one used at build time"));
    }
    let (report, checkpoints) = run_train(&samples, &cfg)?;
    fs::create_dir_all(out)?;
    write_json(&out.join("metrics.json"), &report)?;
    let mut manifest = RunManifest {
        command: "train".into(),
        config: cfg.clone(),
        seeds: report.repetitions.iter().map(|r| r.seed).collect(),
        ..built
    };
    manifest.artifacts = vec!["metrics.json".into()];
    for (i, c) in checkpoints.iter().enumerate() {
        let name = format!("checkpoint-{i}.json");
        write_json(&out.join(&name), c)?;
        manifest.artifacts.push(name);
    }
    manifest.artifacts.push("manifest.json".into());
    write_json(&out.join("manifest.json"), &manifest)?;
    for r in &report.repetitions {
        println!("seed {}: train {:.4} test {:.4}", r.seed, r.train_accuracy, r.test_accuracy);
    }
    println!(
        "train {:.4} ± {:.4}, test {:.4} ± {:.4} over {} runs",
        report.train_mean,
        report.train_std,
        report.test_mean,
        report.test_std,
        report.repetitions.len()
    );
    Ok(0)
}

fn eval(build: &Path, checkpoint: &Path) -> Result<i32> {
    let (_, samples) = samples_of(build)?;
    let ckpt: Checkpoint = serde_json::from_str(&fs::read_to_string(checkpoint)?)?;
    println!("accuracy {:.4} on {} records", run_eval(&samples, &ckpt)?, samples.len());
    Ok(0)
}

fn synth(kind: SynthKind, graphs: usize, points: usize, seed: u64, out: &Path) -> Result<i32> {
    let records: Vec<DatasetRecord> = match kind {
        SynthKind::Blobs => two_blob_dataset(graphs, points, seed),
        SynthKind::Formaldehyde => vec![formaldehyde()],
    };
    write_dataset(out, &records)?;
    eprintln!("wrote {} records, digest {}", records.len(), dataset_digest(&records)?);
    Ok(0)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Build { dataset, out, overrides } => build(&dataset, &out, &overrides),
        Command::Validate(args) => validate(&args),
        Command::Train { build, out, overrides } => train(&build, &out, &overrides),
        Command::Eval { build, checkpoint } => eval(&build, &checkpoint),
        Command::Export { build, artifact, kind, out } => {
            let kind = match kind {
                KindArg::Tiling => ExportKind::Tiling,
                KindArg::Matrices => ExportKind::Matrices,
                KindArg::Graphs => ExportKind::Graphs,
                KindArg::Embedding => ExportKind::Embedding,
            };
            for f in run_export(&build, artifact, kind, &out)? {
                println!("{}", f.display());
            }
            Ok(0)
        }
        Command::Synth { kind, graphs, points, seed, out } => synth(kind, graphs, points, seed, &out),
        Command::Convert { dir, name, out } => {
            let records = convert_tudataset(&dir, &name)?;
            write_dataset(&out, &records)?;
            eprintln!("converted {} graphs", records.len());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
