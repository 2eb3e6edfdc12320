//! RT clustering: co-membership matrices between slice levels, row
//! normalization, feature pooling and the per-level underlying graphs.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, SubsetKey};
use crate::tiling::{build_tiling, DelaunaySlice, RhomboidTiling};

/// Integer co-membership counts; rows index coarse vertices (level `coarse`),
/// columns index fine vertices (level `fine`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterMatrix {
    pub fine: usize,
    pub coarse: usize,
    pub entries: Array2<u32>,
}

/// Row-normalized [`ClusterMatrix`]; zero rows stay zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedClusterMatrix {
    pub fine: usize,
    pub coarse: usize,
    pub entries: Array2<f64>,
}

/// `I_{coarse}ᵀ · I_{fine}`.
pub fn cluster_matrix(tiling: &RhomboidTiling, fine: usize, coarse: usize) -> Result<ClusterMatrix> {
    if fine == 0 || fine >= coarse {
        return Err(Error::OrderOutOfRange { k: fine, max: coarse.saturating_sub(1) });
    }
    let fine_inc = tiling.incidence_matrix(fine)?;
    let coarse_inc = tiling.incidence_matrix(coarse)?;
    Ok(ClusterMatrix {
        fine,
        coarse,
        entries: coarse_inc.entries.t().dot(&fine_inc.entries),
    })
}

pub fn normalize_rows(c: &ClusterMatrix) -> NormalizedClusterMatrix {
    let entries = c.entries.mapv(f64::from);
    NormalizedClusterMatrix {
        fine: c.fine,
        coarse: c.coarse,
        entries: normalize_real_rows(entries),
    }
}

pub(crate) fn normalize_real_rows(mut m: Array2<f64>) -> Array2<f64> {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let s: f64 = row.sum();
        if s != 0.0 {
            row.mapv_inplace(|x| x / s);
        }
    }
    m
}

/// `Z = Ĉ · H`.
pub fn pool_features(c: &NormalizedClusterMatrix, h: &Array2<f64>) -> Result<Array2<f64>> {
    if c.entries.ncols() != h.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "cluster matrix has {} columns but features have {} rows",
            c.entries.ncols(),
            h.nrows()
        )));
    }
    Ok(c.entries.dot(h))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Delaunay,
    Generated,
    /// Generated graph that also links clusters sharing a point.
    GeneratedWithOverlap,
    /// The given input graph.
    Input,
}

/// Symmetric 0/1 adjacency with empty diagonal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelGraph {
    pub order: usize,
    pub kind: GraphKind,
    pub adjacency: Array2<f64>,
}

impl LevelGraph {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.nrows()
    }

    /// Builds an input graph over `n` points from an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<LevelGraph> {
        let mut adjacency = Array2::zeros((n, n));
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!("edge ({a},{b}) out of range for {n} vertices")));
            }
            if a != b {
                adjacency[[a, b]] = 1.0;
                adjacency[[b, a]] = 1.0;
            }
        }
        Ok(LevelGraph {
            order: 1,
            kind: GraphKind::Input,
            adjacency,
        })
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.vertex_count();
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| self.adjacency[[a, b]] != 0.0)
            .collect()
    }
}

/// 1-skeleton of the slice.
pub fn delaunay_graph(slice: &DelaunaySlice) -> LevelGraph {
    let n = slice.vertices.len();
    let mut adjacency = Array2::zeros((n, n));
    for &(a, b) in &slice.edges {
        adjacency[[a, b]] = 1.0;
        adjacency[[b, a]] = 1.0;
    }
    LevelGraph {
        order: slice.k,
        kind: GraphKind::Delaunay,
        adjacency,
    }
}

/// Links `Q_i` and `Q_j` iff some `p ∈ Q_i`, `q ∈ Q_j` are adjacent in the
/// input graph.
pub fn generated_graph(slice: &DelaunaySlice, input: &LevelGraph) -> Result<LevelGraph> {
    generated_graph_with(slice, input, false)
}

/// Like [`generated_graph`]; with `link_overlap` set, clusters sharing a point
/// are linked as well.
pub fn generated_graph_with(
    slice: &DelaunaySlice,
    input: &LevelGraph,
    link_overlap: bool,
) -> Result<LevelGraph> {
    let points = input.vertex_count();
    if let Some(bad) = slice.vertices.iter().flat_map(|q| q.indices()).find(|&&i| i >= points) {
        return Err(Error::ShapeMismatch(format!(
            "slice references point {bad} but the input graph has {points} vertices"
        )));
    }
    let n = slice.vertices.len();
    let mut adjacency = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let (qi, qj) = (&slice.vertices[i], &slice.vertices[j]);
            let linked = qi
                .indices()
                .iter()
                .any(|&p| qj.indices().iter().any(|&q| input.adjacency[[p, q]] != 0.0))
                || (link_overlap && qi.intersection_len(qj) > 0);
            if linked {
                adjacency[[i, j]] = 1.0;
                adjacency[[j, i]] = 1.0;
            }
        }
    }
    Ok(LevelGraph {
        order: slice.k,
        kind: if link_overlap {
            GraphKind::GeneratedWithOverlap
        } else {
            GraphKind::Generated
        },
        adjacency,
    })
}

/// Orders `lΔk + 1` for `l = 0..=L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySchedule {
    pub step: usize,
    pub layers: usize,
}

impl HierarchySchedule {
    pub fn new(step: usize, layers: usize) -> Result<Self> {
        if step == 0 || layers == 0 {
            return Err(Error::InvalidInput("step and layer count must be positive".into()));
        }
        Ok(HierarchySchedule { step, layers })
    }

    pub fn orders(&self) -> Vec<usize> {
        (0..=self.layers).map(|l| l * self.step + 1).collect()
    }

    /// `K = Δk·L + 1`.
    pub fn max_order(&self) -> usize {
        self.step * self.layers + 1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolingLayer {
    pub cluster: NormalizedClusterMatrix,
    pub graph: LevelGraph,
    /// Coarse-level subsets, in row order of `cluster`.
    pub vertices: Vec<SubsetKey>,
}

/// Everything the model needs for one point cloud.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolingHierarchy {
    pub schedule: HierarchySchedule,
    pub input_graph: LevelGraph,
    pub layers: Vec<PoolingLayer>,
    /// Set when the cloud was too small for a tiling.
    pub degenerate: bool,
}

impl PoolingHierarchy {
    pub fn point_count(&self) -> usize {
        self.input_graph.vertex_count()
    }
}

/// Builds `Ĉ_l` and `G_{l+1}` for every layer of `schedule`.
///
/// Clouds with fewer than `d+2` points get one uniform cluster; the remaining
/// layers are 1×1 identities so every hierarchy has `L` layers.
pub fn build_hierarchy(
    cloud: &PointCloud,
    input: &LevelGraph,
    schedule: HierarchySchedule,
    kind: GraphKind,
) -> Result<PoolingHierarchy> {
    if input.vertex_count() != cloud.len() {
        return Err(Error::ShapeMismatch(format!(
            "input graph has {} vertices, cloud has {} points",
            input.vertex_count(),
            cloud.len()
        )));
    }
    if cloud.len() < cloud.dimension() + 2 {
        return Ok(degenerate_hierarchy(cloud.len(), input, schedule));
    }
    let tiling = build_tiling(cloud, schedule.max_order())?;
    hierarchy_from_tiling(&tiling, input, schedule, kind)
}

pub fn hierarchy_from_tiling(
    tiling: &RhomboidTiling,
    input: &LevelGraph,
    schedule: HierarchySchedule,
    kind: GraphKind,
) -> Result<PoolingHierarchy> {
    let orders = schedule.orders();
    let layers = orders
        .windows(2)
        .map(|w| {
            let cluster = normalize_rows(&cluster_matrix(tiling, w[0], w[1])?);
            let slice = tiling.slice(w[1])?;
            let graph = match kind {
                GraphKind::Delaunay => delaunay_graph(&slice),
                GraphKind::Generated | GraphKind::Input => generated_graph(&slice, input)?,
                GraphKind::GeneratedWithOverlap => generated_graph_with(&slice, input, true)?,
            };
            Ok(PoolingLayer {
                cluster,
                graph,
                vertices: slice.vertices,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PoolingHierarchy {
        schedule,
        input_graph: input.clone(),
        layers,
        degenerate: false,
    })
}

fn degenerate_hierarchy(n: usize, input: &LevelGraph, schedule: HierarchySchedule) -> PoolingHierarchy {
    let orders = schedule.orders();
    let single = |order| LevelGraph {
        order,
        kind: GraphKind::Generated,
        adjacency: Array2::zeros((1, 1)),
    };
    let all = SubsetKey::from_sorted((0..n).collect());
    let layers = (0..schedule.layers)
        .map(|l| {
            let entries = if l == 0 {
                Array2::from_elem((1, n), 1.0 / n.max(1) as f64)
            } else {
                Array2::ones((1, 1))
            };
            PoolingLayer {
                cluster: NormalizedClusterMatrix {
                    fine: orders[l],
                    coarse: orders[l + 1],
                    entries,
                },
                graph: single(orders[l + 1]),
                vertices: vec![all.clone()],
            }
        })
        .collect();
    PoolingHierarchy {
        schedule,
        input_graph: input.clone(),
        layers,
        degenerate: true,
    }
}
