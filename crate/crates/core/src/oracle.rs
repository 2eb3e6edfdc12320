//! Brute-force ground truth for the tiling.
//!
//! Vertexhood of a subset `Q` is decided by a maximum-margin program over a
//! witness point `p`: every member of `Q` must be strictly closer to `p` than
//! every non-member. Adjacency of two order-k cells is decided by the joint
//! program over a single `p`. Neither path touches circumspheres, so the
//! comparison against [`RhomboidTiling`] is independent of the enumeration.
//!
//! Coordinates are centred and divided by the cloud diameter before any
//! program is built, so `EPS_LP` is relative to the squared diameter.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster_matrix, ClusterMatrix};
use crate::error::{Error, Result};
use crate::geometry::{circumsphere, classify, determinant, PointCloud, Sphere, SpherePartition, SubsetKey};
use crate::lp::{lp_maximize_margin, WitnessLp};
use crate::tiling::RhomboidTiling;

/// Margin threshold, relative to the squared diameter.
pub const EPS_LP: f64 = 1e-9;

fn normalized_points(cloud: &PointCloud) -> Vec<Vec<f64>> {
    let d = cloud.dimension();
    let n = cloud.len().max(1) as f64;
    let centroid: Vec<f64> = (0..d)
        .map(|a| cloud.points().iter().map(|p| p[a]).sum::<f64>() / n)
        .collect();
    let s = cloud.scale();
    cloud
        .points()
        .iter()
        .map(|p| p.iter().zip(&centroid).map(|(x, c)| (x - c) / s).collect())
        .collect()
}

fn push_rows(lp: &mut WitnessLp, pts: &[Vec<f64>], q: &SubsetKey) {
    for &x in q.indices() {
        for y in (0..pts.len()).filter(|&y| !q.contains(y)) {
            let a = pts[y].iter().zip(&pts[x]).map(|(yy, xx)| 2.0 * (yy - xx)).collect();
            let b = pts[y].iter().map(|v| v * v).sum::<f64>() - pts[x].iter().map(|v| v * v).sum::<f64>();
            lp.push(a, b);
        }
    }
}

fn check_subset(cloud: &PointCloud, q: &SubsetKey) -> Result<()> {
    if q.is_empty() || q.indices().iter().any(|&i| i >= cloud.len()) {
        return Err(Error::InvalidInput(format!("subset {q} is not a non-empty subset of the cloud")));
    }
    Ok(())
}

/// Witness program whose optimum is positive iff `Q` is sphere-separable.
pub fn witness_lp(cloud: &PointCloud, q: &SubsetKey) -> WitnessLp {
    let pts = normalized_points(cloud);
    let mut lp = WitnessLp::new(cloud.dimension());
    push_rows(&mut lp, &pts, q);
    lp
}

/// True iff some sphere has exactly `Q` strictly inside and everything else
/// strictly outside.
pub fn separable(cloud: &PointCloud, q: &SubsetKey) -> Result<bool> {
    check_subset(cloud, q)?;
    let opt = lp_maximize_margin(&witness_lp(cloud, q))?;
    Ok(opt.value > EPS_LP)
}

/// True iff the closed order-k cells of `Q₁` and `Q₂` share a point.
pub fn cells_touch(cloud: &PointCloud, q1: &SubsetKey, q2: &SubsetKey) -> Result<bool> {
    check_subset(cloud, q1)?;
    check_subset(cloud, q2)?;
    let pts = normalized_points(cloud);
    let mut lp = WitnessLp::new(cloud.dimension());
    push_rows(&mut lp, &pts, q1);
    push_rows(&mut lp, &pts, q2);
    Ok(lp_maximize_margin(&lp)?.value > -EPS_LP)
}

/// True iff the order-k cells of `Q₁` and `Q₂` are adjacent across a shared
/// `(d−1)`-dimensional face (or `Q₁ = Q₂` is itself a cell).
///
/// Two cells can only share a facet when the subsets differ by one swap,
/// since the facet lies on the bisector of the swapped pair; for such pairs
/// touching closures imply a common facet in general position.
pub fn cells_intersect(cloud: &PointCloud, q1: &SubsetKey, q2: &SubsetKey) -> Result<bool> {
    if q1.len() != q2.len() {
        return Err(Error::InvalidInput(format!("subsets {q1} and {q2} differ in size")));
    }
    if q1 == q2 {
        return separable(cloud, q1);
    }
    if q1.intersection_len(q2) + 1 != q1.len() {
        check_subset(cloud, q1)?;
        check_subset(cloud, q2)?;
        return Ok(false);
    }
    cells_touch(cloud, q1, q2)
}

/// All sphere-separable subsets of size `k`, in lexicographic order.
pub fn separable_subsets(cloud: &PointCloud, k: usize) -> Result<Vec<SubsetKey>> {
    let mut out = Vec::new();
    for c in (0..cloud.len()).combinations(k) {
        let q = SubsetKey::from_sorted(c);
        if separable(cloud, &q)? {
            out.push(q);
        }
    }
    Ok(out)
}

/// Classical Delaunay edges by exhaustive empty-circumsphere testing, using
/// the lifted insphere determinant rather than explicit centres.
pub fn delaunay_edges_brute_force(cloud: &PointCloud) -> BTreeSet<(usize, usize)> {
    let d = cloud.dimension();
    let pts = normalized_points(cloud);
    let n = pts.len();
    let insphere = |simplex: &[usize], y: &[f64]| {
        determinant(
            simplex
                .iter()
                .map(|&i| {
                    let mut row: Vec<f64> = pts[i].iter().zip(y).map(|(a, b)| a - b).collect();
                    row.push(row.iter().map(|v| v * v).sum());
                    row
                })
                .collect(),
        )
    };
    let mut edges = BTreeSet::new();
    for simplex in (0..n).combinations(d + 1) {
        let centroid: Vec<f64> = (0..d)
            .map(|a| simplex.iter().map(|&i| pts[i][a]).sum::<f64>() / (d + 1) as f64)
            .collect();
        let inside_sign = insphere(&simplex, &centroid).signum();
        if inside_sign == 0.0 {
            continue;
        }
        let empty = (0..n)
            .filter(|i| !simplex.contains(i))
            .all(|y| insphere(&simplex, &pts[y]) * inside_sign < 0.0);
        if empty {
            for (a, b) in simplex.iter().copied().tuple_combinations() {
                edges.insert((a, b));
            }
        }
    }
    edges
}

/// Differences between one tiling slice and the witness-program oracle.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceComparison {
    pub k: usize,
    pub vertices_only_in_tiling: Vec<SubsetKey>,
    pub vertices_only_in_oracle: Vec<SubsetKey>,
    pub edges_only_in_tiling: Vec<(SubsetKey, SubsetKey)>,
    pub edges_only_in_oracle: Vec<(SubsetKey, SubsetKey)>,
    pub oracle_vertex_count: usize,
    pub oracle_edge_count: usize,
}

impl SliceComparison {
    pub fn is_match(&self) -> bool {
        self.vertices_only_in_tiling.is_empty()
            && self.vertices_only_in_oracle.is_empty()
            && self.edges_only_in_tiling.is_empty()
            && self.edges_only_in_oracle.is_empty()
    }
}

/// Compares `tiling.slice(k)` against separability and cell-adjacency
/// programs evaluated on every `k`-subset and every pair of oracle vertices.
pub fn compare_slice(tiling: &RhomboidTiling, k: usize) -> Result<SliceComparison> {
    let cloud = tiling.cloud();
    let slice = tiling.slice(k)?;
    let oracle_vertices = separable_subsets(cloud, k)?;
    let mut oracle_edges = BTreeSet::new();
    for (a, b) in oracle_vertices.iter().tuple_combinations() {
        if cells_intersect(cloud, a, b)? {
            oracle_edges.insert((a.clone(), b.clone()));
        }
    }
    let tiling_vertices: BTreeSet<_> = slice.vertices.iter().cloned().collect();
    let oracle_vertex_set: BTreeSet<_> = oracle_vertices.iter().cloned().collect();
    let tiling_edges = slice.edge_subsets();
    Ok(SliceComparison {
        k,
        vertices_only_in_tiling: tiling_vertices.difference(&oracle_vertex_set).cloned().collect(),
        vertices_only_in_oracle: oracle_vertex_set.difference(&tiling_vertices).cloned().collect(),
        edges_only_in_tiling: tiling_edges.difference(&oracle_edges).cloned().collect(),
        edges_only_in_oracle: oracle_edges.difference(&tiling_edges).cloned().collect(),
        oracle_vertex_count: oracle_vertices.len(),
        oracle_edge_count: oracle_edges.len(),
    })
}

/// Every circumsphere of `d+1` points with its partition, without any order
/// cutoff.
#[derive(Clone, Debug)]
pub struct SphereCatalog {
    pub entries: Vec<(Sphere, SpherePartition)>,
}

impl SphereCatalog {
    pub fn new(cloud: &PointCloud) -> Result<Self> {
        let entries = (0..cloud.len())
            .combinations(cloud.dimension() + 1)
            .map(|s| {
                let sphere = circumsphere(cloud, &SubsetKey::from_sorted(s))?;
                let part = classify(cloud, &sphere);
                Ok((sphere, part))
            })
            .collect::<Result<_>>()?;
        Ok(SphereCatalog { entries })
    }

    /// A sphere with `In ⊆ Q ∩ Q′` and `Q ∪ Q′ ⊆ In ∪ On`, if any.
    pub fn witness(&self, q: &SubsetKey, q2: &SubsetKey) -> Option<&Sphere> {
        let common = q.intersection(q2);
        let all = q.union(q2);
        self.entries
            .iter()
            .find(|(_, p)| p.inside.is_subset_of(&common) && all.is_subset_of(&p.inside.union(&p.on)))
            .map(|(s, _)| s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub seed: Option<u64>,
    pub points: usize,
    pub dimension: usize,
    pub k1: usize,
    pub k2: usize,
}

/// One offending (or noteworthy) configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: String,
    pub subsets: Vec<SubsetKey>,
    pub weights: Vec<u32>,
    pub sphere: Option<Sphere>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "findings", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    /// Observations that do not amount to a violation.
    Informational(Vec<Finding>),
    Counterexample(Vec<Finding>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem: u8,
    pub instance: InstanceDescriptor,
    pub verdict: Verdict,
}

impl TheoremReport {
    pub fn is_counterexample(&self) -> bool {
        matches!(self.verdict, Verdict::Counterexample(_))
    }

    fn from_findings(theorem: u8, instance: InstanceDescriptor, bad: Vec<Finding>, info: Vec<Finding>) -> Self {
        let verdict = if !bad.is_empty() {
            Verdict::Counterexample(bad)
        } else if !info.is_empty() {
            Verdict::Informational(info)
        } else {
            Verdict::Pass
        };
        TheoremReport { theorem, instance, verdict }
    }
}

fn descriptor(tiling: &RhomboidTiling, k1: usize, k2: usize, seed: Option<u64>) -> InstanceDescriptor {
    InstanceDescriptor {
        seed,
        points: tiling.cloud().len(),
        dimension: tiling.cloud().dimension(),
        k1,
        k2,
    }
}

fn require_3d(tiling: &RhomboidTiling) -> Result<()> {
    if tiling.cloud().dimension() != 3 {
        return Err(Error::InvalidInput("weight theorems are stated for d = 3".into()));
    }
    Ok(())
}

/// Co-membership in a maximal rhomboid holds iff some circumsphere has
/// `In ⊆ Q ∩ Q′` and `Q ∪ Q′ ⊆ In ∪ On`.
pub fn check_theorem1(cloud: &PointCloud, q: &SubsetKey, q2: &SubsetKey) -> Result<TheoremReport> {
    if q.len() >= q2.len() {
        return Err(Error::InvalidInput("need |Q| < |Q′|".into()));
    }
    let tiling = crate::tiling::build_tiling(cloud, q2.len())?;
    let catalog = SphereCatalog::new(cloud)?;
    let mut bad = Vec::new();
    theorem1_pair(&tiling, &catalog, q, q2, &mut bad)?;
    Ok(TheoremReport::from_findings(1, descriptor(&tiling, q.len(), q2.len(), None), bad, vec![]))
}

fn theorem1_pair(
    tiling: &RhomboidTiling,
    catalog: &SphereCatalog,
    q: &SubsetKey,
    q2: &SubsetKey,
    bad: &mut Vec<Finding>,
) -> Result<()> {
    let weight = match (tiling.vertex_id(q), tiling.vertex_id(q2)) {
        (Some(_), Some(_)) => tiling.co_membership_weight(q, q2)?,
        _ => 0,
    };
    let sphere = catalog.witness(q, q2);
    if (weight > 0) != sphere.is_some() {
        bad.push(Finding {
            rule: "co-membership iff witness sphere".into(),
            subsets: vec![q.clone(), q2.clone()],
            weights: vec![weight],
            sphere: sphere.cloned(),
        });
    }
    Ok(())
}

/// Exhaustive sphere-witness check over all registered pairs at levels `(k1, k2)`.
pub fn check_theorem1_levels(
    tiling: &RhomboidTiling,
    catalog: &SphereCatalog,
    k1: usize,
    k2: usize,
    seed: Option<u64>,
) -> Result<TheoremReport> {
    if k1 >= k2 {
        return Err(Error::InvalidInput("need k1 < k2".into()));
    }
    let mut bad = Vec::new();
    for q in tiling.vertices(k1)? {
        for q2 in tiling.vertices(k2)? {
            theorem1_pair(tiling, catalog, q, q2, &mut bad)?;
        }
    }
    Ok(TheoremReport::from_findings(1, descriptor(tiling, k1, k2, seed), bad, vec![]))
}

fn column_positive(c: &ClusterMatrix, j: usize) -> bool {
    c.entries.column(j).iter().any(|&x| x > 0)
}

/// Step-size cases in R³: Δ > 4 clusters nothing, Δ ≤ 2 clusters every fine
/// vertex, Δ = 1 clusters every `Q` into every registered superset `Q′`.
/// For Δ ∈ {3, 4} unclustered vertices are reported as informational.
pub fn check_theorem2(tiling: &RhomboidTiling, k1: usize, k2: usize, seed: Option<u64>) -> Result<TheoremReport> {
    require_3d(tiling)?;
    let c = cluster_matrix(tiling, k1, k2)?;
    let fine = tiling.vertices(k1)?;
    let coarse = tiling.vertices(k2)?;
    let step = k2 - k1;
    let mut bad = Vec::new();
    let mut info = Vec::new();
    if step > 4 {
        for ((i, j), &w) in c.entries.indexed_iter() {
            if w > 0 {
                bad.push(Finding {
                    rule: "step > 4 must cluster nothing".into(),
                    subsets: vec![fine[j].clone(), coarse[i].clone()],
                    weights: vec![w],
                    sphere: None,
                });
            }
        }
    } else {
        let n = tiling.cloud().len();
        for (j, q) in fine.iter().enumerate() {
            if !column_positive(&c, j) && k2 <= n {
                let f = Finding {
                    rule: "fine vertex lies in no cluster".into(),
                    subsets: vec![q.clone()],
                    weights: vec![],
                    sphere: None,
                };
                if step <= 2 {
                    bad.push(f);
                } else {
                    info.push(f);
                }
            }
        }
        if step == 1 {
            for (i, q2) in coarse.iter().enumerate() {
                for (j, q) in fine.iter().enumerate() {
                    if q.is_subset_of(q2) && c.entries[[i, j]] == 0 {
                        bad.push(Finding {
                            rule: "Q ⊂ Q′ must be clustered for step 1".into(),
                            subsets: vec![q.clone(), q2.clone()],
                            weights: vec![0],
                            sphere: None,
                        });
                    }
                }
            }
        }
    }
    Ok(TheoremReport::from_findings(2, descriptor(tiling, k1, k2, seed), bad, info))
}

/// Weight bounds in R³ for positive entries of the cluster matrix.
pub fn check_theorem3(tiling: &RhomboidTiling, k1: usize, k2: usize, seed: Option<u64>) -> Result<TheoremReport> {
    require_3d(tiling)?;
    let c = cluster_matrix(tiling, k1, k2)?;
    let fine = tiling.vertices(k1)?;
    let coarse = tiling.vertices(k2)?;
    let step = (k2 - k1) as i64;
    let mut bad = Vec::new();
    for (i, q2) in coarse.iter().enumerate() {
        let members: Vec<(usize, u32)> = (0..fine.len())
            .map(|j| (j, c.entries[[i, j]]))
            .filter(|&(_, w)| w > 0)
            .collect();
        for &(j, w) in &members {
            let q = &fine[j];
            let subset = q.is_subset_of(q2);
            if (3..=4).contains(&step) && (!subset || w as i64 > 5 - step) {
                bad.push(Finding {
                    rule: "step 3..4 needs Q ⊂ Q′ and N ≤ 5 − step".into(),
                    subsets: vec![q.clone(), q2.clone()],
                    weights: vec![w],
                    sphere: None,
                });
            }
            if !subset && w as i64 > 3 - step {
                bad.push(Finding {
                    rule: "Q ⊄ Q′ needs N ≤ 3 − step".into(),
                    subsets: vec![q.clone(), q2.clone()],
                    weights: vec![w],
                    sphere: None,
                });
            }
        }
        for &(j1, w1) in &members {
            let a = fine[j1].intersection(q2);
            for &(j2, w2) in &members {
                let b = fine[j2].intersection(q2);
                if a.len() < b.len() && a.is_subset_of(&b) && w1 > w2 {
                    bad.push(Finding {
                        rule: "Q₁ ∩ Q′ ⊊ Q₂ ∩ Q′ needs N(Q₁,Q′) ≤ N(Q₂,Q′)".into(),
                        subsets: vec![fine[j1].clone(), fine[j2].clone(), q2.clone()],
                        weights: vec![w1, w2],
                        sphere: None,
                    });
                }
            }
        }
    }
    Ok(TheoremReport::from_findings(3, descriptor(tiling, k1, k2, seed), bad, vec![]))
}
