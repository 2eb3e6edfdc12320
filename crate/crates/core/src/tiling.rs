//! Maximal rhomboids of the rhomboid tiling, integer-level slices and
//! incidence matrices.
//!
//! A maximal rhomboid is determined by a sphere through `d+1` points: with
//! `In` the points strictly inside and `On` the `d+1` points on the sphere,
//! its vertices are the lifted subsets `Q` with `In ⊆ Q ⊆ In ∪ On`. The
//! slice at level `k` keeps the vertices with `|Q| = k`; within one rhomboid
//! these form a hypersimplex whose edges join subsets differing by a single
//! swap.

use std::collections::{BTreeSet, HashMap};

use itertools::Itertools;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    circumsphere, classify, validate_general_position, PointCloud, Sphere, SubsetKey,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rhomboid {
    pub id: usize,
    pub in_set: SubsetKey,
    pub on_set: SubsetKey,
    pub sphere: Sphere,
}

impl Rhomboid {
    /// Lowest level touched by this rhomboid.
    pub fn min_level(&self) -> usize {
        self.in_set.len()
    }

    pub fn max_level(&self) -> usize {
        self.in_set.len() + self.on_set.len()
    }

    /// `In ⊆ q ⊆ In ∪ On`.
    pub fn contains(&self, q: &SubsetKey) -> bool {
        self.in_set.is_subset_of(q)
            && q.indices()
                .iter()
                .all(|&i| self.in_set.contains(i) || self.on_set.contains(i))
    }

    /// Vertices of this rhomboid at level `k`, in lexicographic order.
    pub fn level_family(&self, k: usize) -> Vec<SubsetKey> {
        if k < self.min_level() || k > self.max_level() {
            return Vec::new();
        }
        let j = k - self.in_set.len();
        let mut out: Vec<SubsetKey> = self
            .on_set
            .indices()
            .iter()
            .copied()
            .combinations(j)
            .map(|extra| self.in_set.union(&SubsetKey::from_sorted(extra)))
            .collect();
        out.sort();
        out
    }

    /// All `2^(d+1)` lifted vertices, ordered by level then subset.
    pub fn lifted_vertices(&self, cloud: &PointCloud) -> Vec<(SubsetKey, LiftedVertex)> {
        (self.min_level()..=self.max_level())
            .flat_map(|k| self.level_family(k))
            .map(|q| {
                let y = lift(cloud, &q);
                (q, y)
            })
            .collect()
    }
}

/// Point of the lifted space `R^{d+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedVertex {
    pub coordinates: Vec<f64>,
}

/// `(Σ_{x∈Q} x, −|Q|)`; defined for the empty set as the origin.
pub(crate) fn lift(cloud: &PointCloud, q: &SubsetKey) -> LiftedVertex {
    let d = cloud.dimension();
    let mut coordinates = vec![0.0; d + 1];
    for &i in q.indices() {
        for (c, x) in coordinates.iter_mut().zip(cloud.point(i)) {
            *c += x;
        }
    }
    coordinates[d] = -(q.len() as f64);
    LiftedVertex { coordinates }
}

/// Lifts a non-empty subset to the rhomboid-tiling ambient space.
pub fn embed_vertex(cloud: &PointCloud, q: &SubsetKey) -> Result<LiftedVertex> {
    if q.is_empty() {
        return Err(Error::InvalidInput("cannot embed the empty subset".into()));
    }
    if let Some(&i) = q.indices().iter().find(|&&i| i >= cloud.len()) {
        return Err(Error::InvalidInput(format!("index {i} out of range")));
    }
    Ok(lift(cloud, q))
}

/// Vertex and edge sets of one level of the tiling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelaunaySlice {
    pub k: usize,
    pub vertices: Vec<SubsetKey>,
    /// Pairs `(a, b)` of vertex ids with `a < b`.
    pub edges: BTreeSet<(usize, usize)>,
}

impl DelaunaySlice {
    pub fn index_of(&self, q: &SubsetKey) -> Option<usize> {
        self.vertices.binary_search(q).ok()
    }

    /// Edges as pairs of subsets.
    pub fn edge_subsets(&self) -> BTreeSet<(SubsetKey, SubsetKey)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.vertices[a].clone(), self.vertices[b].clone()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhomboidTiling {
    cloud: PointCloud,
    max_order: usize,
    rhomboids: Vec<Rhomboid>,
    /// `levels[k-1]` is the slice at order `k`.
    levels: Vec<DelaunaySlice>,
}

/// Enumerates all maximal rhomboids with `|In| ≤ max_order` and registers the
/// slices at levels `1..=max_order`.
pub fn build_tiling(cloud: &PointCloud, max_order: usize) -> Result<RhomboidTiling> {
    let d = cloud.dimension();
    let n = cloud.len();
    if max_order == 0 {
        return Err(Error::OrderOutOfRange { k: 0, max: usize::MAX });
    }
    if n < d + 2 {
        return Err(Error::TooFewPoints { needed: d + 2, got: n });
    }
    validate_general_position(cloud).into_result()?;

    let simplices: Vec<Vec<usize>> = (0..n).combinations(d + 1).collect();
    let found: Vec<Option<(SubsetKey, SubsetKey, Sphere)>> = simplices
        .into_par_iter()
        .map(|s| {
            let on_set = SubsetKey::from_sorted(s);
            let sphere = circumsphere(cloud, &on_set)?;
            let part = classify(cloud, &sphere);
            if part.on != on_set {
                return Err(Error::GeneralPositionViolation {
                    count: 1,
                    first: part.on.indices().to_vec(),
                });
            }
            Ok((part.inside.len() <= max_order).then_some((part.inside, on_set, sphere)))
        })
        .collect::<Result<_>>()?;

    // combinations() is lexicographic, so ids follow on_set order.
    let rhomboids: Vec<Rhomboid> = found
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(id, (in_set, on_set, sphere))| Rhomboid {
            id,
            in_set,
            on_set,
            sphere,
        })
        .collect();

    let levels = (1..=max_order).map(|k| slice_from(&rhomboids, k)).collect();
    Ok(RhomboidTiling {
        cloud: cloud.clone(),
        max_order,
        rhomboids,
        levels,
    })
}

fn slice_from(rhomboids: &[Rhomboid], k: usize) -> DelaunaySlice {
    let families: Vec<Vec<SubsetKey>> = rhomboids.iter().map(|r| r.level_family(k)).collect();
    let vertices: Vec<SubsetKey> = families
        .iter()
        .flatten()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<&SubsetKey, usize> = vertices.iter().enumerate().map(|(i, q)| (q, i)).collect();
    let mut edges = BTreeSet::new();
    for fam in &families {
        for (a, b) in fam.iter().tuple_combinations() {
            if a.intersection_len(b) + 1 == k {
                let (ia, ib) = (index[a], index[b]);
                edges.insert((ia.min(ib), ia.max(ib)));
            }
        }
    }
    DelaunaySlice { k, vertices, edges }
}

impl RhomboidTiling {
    /// Reassembles a tiling from its rhomboid list, e.g. after re-import.
    /// Ids must be `0..len` in order; slices are recomputed.
    pub fn from_rhomboids(cloud: PointCloud, max_order: usize, rhomboids: Vec<Rhomboid>) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::OrderOutOfRange { k: 0, max: usize::MAX });
        }
        let d = cloud.dimension();
        for (i, r) in rhomboids.iter().enumerate() {
            let in_range = r.in_set.indices().iter().chain(r.on_set.indices()).all(|&p| p < cloud.len());
            if r.id != i || r.on_set.len() != d + 1 || r.in_set.len() > max_order || !in_range {
                return Err(Error::InvalidInput(format!("rhomboid record {i} is inconsistent")));
            }
        }
        let levels = (1..=max_order).map(|k| slice_from(&rhomboids, k)).collect();
        Ok(RhomboidTiling {
            cloud,
            max_order,
            rhomboids,
            levels,
        })
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn rhomboids(&self) -> &[Rhomboid] {
        &self.rhomboids
    }

    fn check_order(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.max_order {
            return Err(Error::OrderOutOfRange { k, max: self.max_order });
        }
        Ok(())
    }

    /// Registered vertices at level `k`, in id order.
    pub fn vertices(&self, k: usize) -> Result<&[SubsetKey]> {
        self.check_order(k)?;
        Ok(&self.levels[k - 1].vertices)
    }

    pub fn vertex_id(&self, q: &SubsetKey) -> Option<usize> {
        let k = q.len();
        if k == 0 || k > self.max_order {
            return None;
        }
        self.levels[k - 1].index_of(q)
    }

    /// Order-`k` Delaunay slice.
    pub fn slice(&self, k: usize) -> Result<DelaunaySlice> {
        self.check_order(k)?;
        Ok(self.levels[k - 1].clone())
    }

    pub(crate) fn slice_ref(&self, k: usize) -> Result<&DelaunaySlice> {
        self.check_order(k)?;
        Ok(&self.levels[k - 1])
    }

    pub fn incidence_matrix(&self, k: usize) -> Result<IncidenceMatrix> {
        let slice = self.slice_ref(k)?;
        let mut entries = Array2::<u32>::zeros((self.rhomboids.len(), slice.vertices.len()));
        for r in &self.rhomboids {
            for q in r.level_family(k) {
                let j = slice.index_of(&q).expect("family vertices are registered");
                entries[[r.id, j]] = 1;
            }
        }
        Ok(IncidenceMatrix { level: k, entries })
    }

    /// Number of maximal rhomboids containing both `q` and `q2`.
    pub fn co_membership_weight(&self, q: &SubsetKey, q2: &SubsetKey) -> Result<u32> {
        for s in [q, q2] {
            if self.vertex_id(s).is_none() {
                return Err(Error::UnknownVertex(s.indices().to_vec()));
            }
        }
        Ok(self
            .rhomboids
            .iter()
            .filter(|r| r.contains(q) && r.contains(q2))
            .count() as u32)
    }
}

/// Free-function form of [`RhomboidTiling::slice`].
pub fn slice(tiling: &RhomboidTiling, k: usize) -> Result<DelaunaySlice> {
    tiling.slice(k)
}

/// Binary rhomboid-by-vertex membership at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncidenceMatrix {
    pub level: usize,
    pub entries: Array2<u32>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::random_cloud;

    #[test]
    fn too_few_points() {
        let c = PointCloud::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(build_tiling(&c, 3), Err(Error::TooFewPoints { needed: 4, got: 3 })));
    }

    #[test]
    fn rejects_cocircular() {
        let c = PointCloud::new(
            2,
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.6, -0.8], vec![0.1, 0.2]],
        )
        .unwrap();
        assert!(matches!(
            build_tiling(&c, 2),
            Err(Error::GeneralPositionViolation { .. })
        ));
    }

    #[test]
    fn lifted_coordinates() {
        let c = PointCloud::new(2, vec![vec![1.0, 2.0], vec![3.5, -1.0], vec![0.0, 0.0]]).unwrap();
        let y = embed_vertex(&c, &SubsetKey::new(vec![0, 1])).unwrap();
        assert_eq!(y.coordinates, vec![4.5, 1.0, -2.0]);
        let y = embed_vertex(&c, &SubsetKey::new(vec![2])).unwrap();
        assert_eq!(y.coordinates, vec![0.0, 0.0, -1.0]);
        assert!(embed_vertex(&c, &SubsetKey::empty()).is_err());
    }

    #[test]
    fn level_counts_are_binomial() {
        let c = random_cloud(3, 9, 5);
        let t = build_tiling(&c, 4).unwrap();
        for r in t.rhomboids() {
            let counts: Vec<usize> = (r.min_level()..=r.max_level())
                .map(|k| r.level_family(k).len())
                .collect();
            assert_eq!(counts, vec![1, 4, 6, 4, 1]);
        }
    }

    #[test]
    fn order_one_vertices_are_singletons() {
        let c = random_cloud(2, 8, 2);
        let t = build_tiling(&c, 2).unwrap();
        let expected: Vec<SubsetKey> = (0..8).map(|i| SubsetKey::new(vec![i])).collect();
        assert_eq!(t.vertices(1).unwrap(), expected.as_slice());
    }

    #[test]
    fn order_out_of_range() {
        let c = random_cloud(2, 6, 1);
        let t = build_tiling(&c, 2).unwrap();
        assert!(matches!(t.slice(0), Err(Error::OrderOutOfRange { .. })));
        assert!(matches!(t.slice(3), Err(Error::OrderOutOfRange { .. })));
        assert!(t.incidence_matrix(3).is_err());
    }

    #[test]
    fn empty_level_gives_zero_columns() {
        let c = random_cloud(2, 5, 4);
        let t = build_tiling(&c, 9).unwrap();
        let inc = t.incidence_matrix(9).unwrap();
        assert_eq!(inc.entries.ncols(), 0);
        assert_eq!(inc.entries.nrows(), t.rhomboids().len());
    }

    #[test]
    fn weight_diagonal_is_column_sum() {
        let c = random_cloud(3, 8, 5);
        let t = build_tiling(&c, 3).unwrap();
        let inc = t.incidence_matrix(2).unwrap();
        for (j, q) in t.vertices(2).unwrap().iter().enumerate() {
            let col: u32 = inc.entries.column(j).sum();
            assert_eq!(t.co_membership_weight(q, q).unwrap(), col);
        }
        assert!(matches!(
            t.co_membership_weight(&SubsetKey::new(vec![0, 1, 2, 3, 4, 5]), &SubsetKey::new(vec![0])),
            Err(Error::UnknownVertex(_))
        ));
    }

    #[test]
    fn cutoff_is_monotone() {
        let c = random_cloud(3, 8, 12);
        for k in 1..4 {
            let a = build_tiling(&c, k).unwrap();
            let b = build_tiling(&c, k + 1).unwrap();
            let bs: BTreeSet<_> = b.rhomboids().iter().map(|r| r.on_set.clone()).collect();
            assert!(a.rhomboids().iter().all(|r| bs.contains(&r.on_set)));
        }
    }

    #[test]
    fn deterministic_ids() {
        let c = random_cloud(3, 8, 3);
        assert_eq!(build_tiling(&c, 3).unwrap(), build_tiling(&c, 3).unwrap());
    }
}
