//! On-disk formats: tiling records, dense matrices with a sidecar header,
//! level-graph edge lists, and the build directory layout.
//!
//! Tiling files are line-delimited JSON. The first line describes the cloud,
//! then one line per rhomboid (with all of its lifted vertices, the empty
//! set included when `In = ∅`), then one line per registered slice vertex:
//!
//! ```text
//! {"record":"cloud","dimension":2,"max_order":3,"points":[[0.0,0.0],...]}
//! {"record":"rhomboid","id":0,"in_set":[],"on_set":[0,1,2],"center":[...],"radius":0.7,"lifted":[{"subset":[],"coordinates":[0.0,0.0,-0.0]},...]}
//! {"record":"vertex","level":1,"id":0,"subset":[0],"coordinates":[0.0,0.0,-1.0]}
//! ```
//!
//! Matrices are written as `<stem>.tsv` (rows on lines, tab-separated
//! entries in shortest round-trip notation) next to `<stem>.json`, the
//! [`MatrixHeader`]. Graphs use `<stem>.tsv` with one `i<TAB>j` edge per line
//! and a [`GraphHeader`] in `<stem>.json`.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_matrix, GraphKind, LevelGraph};
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Sphere, SubsetKey};
use crate::pipeline::{BuildReport, PreparedRecord, RunManifest};
use crate::tiling::{build_tiling, LiftedVertex, Rhomboid, RhomboidTiling};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedRecord {
    pub subset: SubsetKey,
    pub coordinates: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TilingRecord {
    Cloud {
        dimension: usize,
        max_order: usize,
        points: Vec<Vec<f64>>,
    },
    Rhomboid {
        id: usize,
        in_set: SubsetKey,
        on_set: SubsetKey,
        center: Vec<f64>,
        radius: f64,
        lifted: Vec<LiftedRecord>,
    },
    Vertex {
        level: usize,
        id: usize,
        subset: SubsetKey,
        coordinates: Vec<f64>,
    },
}

pub fn tiling_records(tiling: &RhomboidTiling) -> Result<Vec<TilingRecord>> {
    let cloud = tiling.cloud();
    let mut out = vec![TilingRecord::Cloud {
        dimension: cloud.dimension(),
        max_order: tiling.max_order(),
        points: cloud.points().to_vec(),
    }];
    for r in tiling.rhomboids() {
        out.push(TilingRecord::Rhomboid {
            id: r.id,
            in_set: r.in_set.clone(),
            on_set: r.on_set.clone(),
            center: r.sphere.center.clone(),
            radius: r.sphere.radius,
            lifted: r
                .lifted_vertices(cloud)
                .into_iter()
                .map(|(subset, LiftedVertex { coordinates })| LiftedRecord { subset, coordinates })
                .collect(),
        });
    }
    for k in 1..=tiling.max_order() {
        for (id, q) in tiling.vertices(k)?.iter().enumerate() {
            out.push(TilingRecord::Vertex {
                level: k,
                id,
                subset: q.clone(),
                coordinates: crate::tiling::embed_vertex(cloud, q)?.coordinates,
            });
        }
    }
    Ok(out)
}

pub fn write_tiling(mut w: impl Write, tiling: &RhomboidTiling) -> Result<()> {
    for rec in tiling_records(tiling)? {
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Re-imports a tiling written by [`write_tiling`]. Vertex records are
/// checked against the slices recomputed from the rhomboids.
pub fn read_tiling(r: impl BufRead) -> Result<RhomboidTiling> {
    let mut cloud: Option<(PointCloud, usize)> = None;
    let mut rhomboids = Vec::new();
    let mut vertices = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TilingRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        match rec {
            TilingRecord::Cloud { dimension, max_order, points } => {
                cloud = Some((PointCloud::new(dimension, points)?, max_order));
            }
            TilingRecord::Rhomboid { id, in_set, on_set, center, radius, .. } => rhomboids.push(Rhomboid {
                id,
                in_set,
                on_set,
                sphere: Sphere { center, radius },
            }),
            TilingRecord::Vertex { level, id, subset, .. } => vertices.push((level, id, subset)),
        }
    }
    let (cloud, max_order) = cloud.ok_or_else(|| Error::Parse {
        line: 1,
        msg: "missing cloud record".into(),
    })?;
    let tiling = RhomboidTiling::from_rhomboids(cloud, max_order, rhomboids)?;
    for (level, id, subset) in vertices {
        if tiling.vertices(level)?.get(id) != Some(&subset) {
            return Err(Error::InvalidInput(format!("vertex record {subset} at level {level} does not match")));
        }
    }
    Ok(tiling)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixHeader {
    /// What the matrix is, e.g. `cluster`, `normalized_cluster`,
    /// `incidence` or `embedding`.
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub row_subsets: Vec<SubsetKey>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub col_subsets: Vec<SubsetKey>,
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `<path>` (tab-separated) and its `.json` header.
pub fn write_matrix(path: &Path, header: &MatrixHeader, m: &Array2<f64>) -> Result<()> {
    if m.dim() != (header.rows, header.cols) {
        return Err(Error::ShapeMismatch(format!(
            "header says {}x{}, matrix is {:?}",
            header.rows,
            header.cols,
            m.dim()
        )));
    }
    let mut text = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        text.push_str(&cells.join("\t"));
        text.push('\n');
    }
    fs::write(path, text)?;
    write_json(&sidecar(path), header)
}

pub fn read_matrix(path: &Path) -> Result<(MatrixHeader, Array2<f64>)> {
    let header: MatrixHeader = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
    let text = fs::read_to_string(path)?;
    let mut values = Vec::with_capacity(header.rows * header.cols);
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if header.cols == 0 && line.is_empty() {
            rows += 1;
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != header.cols {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {} entries, found {}", header.cols, cells.len()),
            });
        }
        for c in cells {
            values.push(c.parse::<f64>().map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?);
        }
        rows += 1;
    }
    if rows != header.rows {
        return Err(Error::Parse {
            line: rows + 1,
            msg: format!("expected {} rows, found {rows}", header.rows),
        });
    }
    let m = Array2::from_shape_vec((header.rows, header.cols), values).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    Ok((header, m))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphHeader {
    pub order: usize,
    pub kind: GraphKind,
    pub vertices: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsets: Vec<SubsetKey>,
}

pub fn write_graph(path: &Path, graph: &LevelGraph, subsets: &[SubsetKey]) -> Result<()> {
    let mut text = String::new();
    for (i, j) in graph.edges() {
        text.push_str(&format!("{i}\t{j}\n"));
    }
    fs::write(path, text)?;
    write_json(
        &sidecar(path),
        &GraphHeader {
            order: graph.order,
            kind: graph.kind,
            vertices: graph.vertex_count(),
            subsets: subsets.to_vec(),
        },
    )
}

pub fn read_graph(path: &Path) -> Result<(GraphHeader, LevelGraph)> {
    let header: GraphHeader = serde_json::from_str(&fs::read_to_string(sidecar(path))?)?;
    let mut edges = Vec::new();
    for (i, line) in fs::read_to_string(path)?.lines().enumerate() {
        let parse = |t: Option<&str>| {
            t.and_then(|t| t.trim().parse::<usize>().ok()).ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: "expected two vertex ids".into(),
            })
        };
        let mut it = line.split('\t');
        edges.push((parse(it.next())?, parse(it.next())?));
    }
    let mut g = LevelGraph::from_edges(header.vertices, &edges)?;
    g.order = header.order;
    g.kind = header.kind;
    Ok((header, g))
}

/// Names of the files in a build directory.
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.jsonl";

/// Persists the prepared records (one JSON line each, index order) and the
/// manifest.
pub fn write_build(dir: &Path, report: &BuildReport) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join(RECORDS_FILE))?;
    for p in report.prepared.iter().flatten() {
        serde_json::to_writer(&mut f, p)?;
        f.write_all(b"\n")?;
    }
    let mut manifest = report.manifest.clone();
    manifest.artifacts = vec![RECORDS_FILE.into(), MANIFEST_FILE.into()];
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn load_build(dir: &Path) -> Result<(RunManifest, Vec<PreparedRecord>)> {
    let manifest: RunManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    let file = fs::File::open(dir.join(RECORDS_FILE))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok((manifest, records))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportKind {
    Tiling,
    Matrices,
    Graphs,
    Embedding,
}

/// Writes the requested view of record `artifact` of a build directory into
/// `out`, returning the files created.
pub fn run_export(build_dir: &Path, artifact: usize, kind: ExportKind, out: &Path) -> Result<Vec<PathBuf>> {
    let (manifest, records) = load_build(build_dir)?;
    let rec = records
        .iter()
        .find(|r| r.index == artifact)
        .ok_or_else(|| Error::UnknownArtifact(format!("record {artifact} in {}", build_dir.display())))?;
    fs::create_dir_all(out)?;
    let stem = format!("record-{artifact:05}");
    let mut files = Vec::new();
    let tiling = || -> Result<RhomboidTiling> { build_tiling(&rec.cloud, manifest.config.schedule()?.max_order()) };
    match kind {
        ExportKind::Tiling => {
            let path = out.join(format!("{stem}.tiling.jsonl"));
            write_tiling(fs::File::create(&path)?, &tiling()?)?;
            files.push(path);
        }
        ExportKind::Matrices => {
            let t = if rec.sample.hierarchy.degenerate { None } else { Some(tiling()?) };
            let orders = manifest.config.schedule()?.orders();
            for (l, layer) in rec.sample.hierarchy.layers.iter().enumerate() {
                let fine_subsets = match &t {
                    Some(t) => t.vertices(orders[l])?.to_vec(),
                    None => Vec::new(),
                };
                let m = &layer.cluster.entries;
                let header = |kind: &str| MatrixHeader {
                    kind: kind.into(),
                    rows: m.nrows(),
                    cols: m.ncols(),
                    fine: Some(layer.cluster.fine),
                    coarse: Some(layer.cluster.coarse),
                    row_subsets: layer.vertices.clone(),
                    col_subsets: fine_subsets.clone(),
                };
                let path = out.join(format!("{stem}.layer{l}.normalized_cluster.tsv"));
                write_matrix(&path, &header("normalized_cluster"), m)?;
                files.push(path);
                if let Some(t) = &t {
                    let c = cluster_matrix(t, orders[l], orders[l + 1])?;
                    let path = out.join(format!("{stem}.layer{l}.cluster.tsv"));
                    write_matrix(&path, &header("cluster"), &c.entries.mapv(f64::from))?;
                    files.push(path);
                }
            }
        }
        ExportKind::Graphs => {
            let h = &rec.sample.hierarchy;
            let singletons: Vec<SubsetKey> = (0..h.point_count()).map(|i| SubsetKey::from_sorted(vec![i])).collect();
            let path = out.join(format!("{stem}.input.tsv"));
            write_graph(&path, &h.input_graph, &singletons)?;
            files.push(path);
            if let Ok(t) = tiling() {
                let path = out.join(format!("{stem}.delaunay1.tsv"));
                let s = t.slice(1)?;
                write_graph(&path, &crate::clustering::delaunay_graph(&s), &s.vertices)?;
                files.push(path);
            }
            for (l, layer) in h.layers.iter().enumerate() {
                let path = out.join(format!("{stem}.layer{l}.tsv"));
                write_graph(&path, &layer.graph, &layer.vertices)?;
                files.push(path);
            }
        }
        ExportKind::Embedding => {
            let c = &rec.cloud;
            let m = Array2::from_shape_vec((c.len(), c.dimension()), c.points().iter().flatten().copied().collect())
                .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
            let path = out.join(format!("{stem}.embedding.tsv"));
            let kind = if rec.embedded { "spectral_embedding" } else { "coordinates" };
            write_matrix(
                &path,
                &MatrixHeader {
                    kind: kind.into(),
                    rows: m.nrows(),
                    cols: m.ncols(),
                    fine: None,
                    coarse: None,
                    row_subsets: Vec::new(),
                    col_subsets: Vec::new(),
                },
                &m,
            )?;
            files.push(path);
        }
    }
    Ok(files)
}
