//! Point clouds, circumspheres and sphere classification.
//!
//! All predicates run in `f64`. Tolerances are relative to the bounding-box
//! diagonal of the cloud ([`PointCloud::diameter`]).

use std::fmt;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for "on the sphere".
pub const TAU_ON: f64 = 1e-9;
/// Relative tolerance for the general-position determinant tests.
pub const TAU_GP: f64 = 1e-9;
/// Maximum number of magnitude-doubling rounds attempted by [`jitter`].
pub const JITTER_ROUNDS: usize = 8;

/// Sorted, duplicate-free list of point indices.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct SubsetKey(Vec<usize>);

impl SubsetKey {
    /// Builds a key from arbitrary indices, sorting and removing duplicates.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        SubsetKey(indices)
    }

    /// Wraps indices that are already strictly increasing.
    pub fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SubsetKey(indices)
    }

    pub fn empty() -> Self {
        SubsetKey(Vec::new())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset_of(&self, other: &SubsetKey) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn union(&self, other: &SubsetKey) -> SubsetKey {
        let mut v: Vec<usize> = self.0.iter().merge(other.0.iter()).copied().collect();
        v.dedup();
        SubsetKey(v)
    }

    pub fn intersection(&self, other: &SubsetKey) -> SubsetKey {
        SubsetKey(self.0.iter().copied().filter(|&i| other.contains(i)).collect())
    }

    pub fn intersection_len(&self, other: &SubsetKey) -> usize {
        self.0.iter().filter(|&&i| other.contains(i)).count()
    }
}

impl fmt::Display for SubsetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.0.iter().join(","))
    }
}

impl From<Vec<usize>> for SubsetKey {
    fn from(v: Vec<usize>) -> Self {
        SubsetKey::new(v)
    }
}

/// Indexed points in R^2 or R^3.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dimension: usize,
    points: Vec<Vec<f64>>,
    diameter: f64,
}

impl PointCloud {
    pub fn new(dimension: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if !(2..=3).contains(&dimension) {
            return Err(Error::InvalidInput(format!(
                "dimension must be 2 or 3, got {dimension}"
            )));
        }
        if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dimension) {
            return Err(Error::InvalidInput(format!(
                "point {i} has {} coordinates, expected {dimension}",
                p.len()
            )));
        }
        if points.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        let diameter = bounding_diagonal(dimension, &points);
        Ok(PointCloud {
            dimension,
            points,
            diameter,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Bounding-box diagonal length.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Length scale used by relative tolerances; never zero.
    pub(crate) fn scale(&self) -> f64 {
        if self.diameter > 0.0 {
            self.diameter
        } else {
            1.0
        }
    }

    /// Returns the cloud with point `perm[i]` moved to position `i`.
    pub fn permuted(&self, perm: &[usize]) -> Result<PointCloud> {
        PointCloud::new(
            self.dimension,
            perm.iter().map(|&i| self.points[i].clone()).collect(),
        )
    }
}

fn bounding_diagonal(dimension: usize, points: &[Vec<f64>]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    (0..dimension)
        .map(|a| {
            let (lo, hi) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p[a]), hi.max(p[a]))
            });
            (hi - lo).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// Inside / on / outside split of all point indices with respect to a sphere.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpherePartition {
    pub inside: SubsetKey,
    pub on: SubsetKey,
    pub outside: SubsetKey,
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Solves `m x = rhs` in place by Gaussian elimination with partial pivoting.
/// Returns `None` when a pivot falls below `tol`.
pub(crate) fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() <= tol {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Some(x)
}

/// Determinant by Gaussian elimination with partial pivoting.
pub(crate) fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[piv][col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            m.swap(col, piv);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    det
}

/// Circumsphere of `d+1` points given by coordinates. `scale` sets the
/// singularity threshold.
pub(crate) fn circumsphere_of(points: &[&[f64]], scale: f64) -> Option<Sphere> {
    let base = points[0];
    let d = base.len();
    let rows: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|p| p.iter().zip(base).map(|(a, b)| 2.0 * (a - b)).collect())
        .collect();
    let rhs: Vec<f64> = points[1..]
        .iter()
        .map(|p| p.iter().zip(base).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    // Orientation volume test before solving, so that the singular case is
    // judged on a scale-free quantity.
    let vol = determinant(rows.clone()).abs() / 2f64.powi(d as i32);
    if vol <= TAU_GP * scale.powi(d as i32) {
        return None;
    }
    let offset = solve_dense(rows, rhs, 0.0)?;
    let center: Vec<f64> = base.iter().zip(&offset).map(|(b, o)| b + o).collect();
    let radius = offset.iter().map(|o| o * o).sum::<f64>().sqrt();
    if !radius.is_finite() {
        return None;
    }
    Some(Sphere { center, radius })
}

/// Sphere through the `d+1` points of `simplex`.
pub fn circumsphere(cloud: &PointCloud, simplex: &SubsetKey) -> Result<Sphere> {
    if simplex.len() != cloud.dimension() + 1 || simplex.indices().iter().any(|&i| i >= cloud.len()) {
        return Err(Error::InvalidInput(format!(
            "circumsphere needs {} valid indices, got {simplex}",
            cloud.dimension() + 1
        )));
    }
    let pts: Vec<&[f64]> = simplex.indices().iter().map(|&i| cloud.point(i)).collect();
    circumsphere_of(&pts, cloud.scale())
        .ok_or_else(|| Error::DegenerateSimplex(simplex.indices().to_vec()))
}

/// Splits the cloud into points inside, on and outside `sphere`.
pub fn classify(cloud: &PointCloud, sphere: &Sphere) -> SpherePartition {
    let tol = TAU_ON * cloud.scale();
    let (mut inside, mut on, mut outside) = (Vec::new(), Vec::new(), Vec::new());
    for (i, p) in cloud.points().iter().enumerate() {
        let r = dist(p, &sphere.center);
        if (r - sphere.radius).abs() <= tol {
            on.push(i);
        } else if r < sphere.radius - tol {
            inside.push(i);
        } else {
            outside.push(i);
        }
    }
    SpherePartition {
        inside: SubsetKey::from_sorted(inside),
        on: SubsetKey::from_sorted(on),
        outside: SubsetKey::from_sorted(outside),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Duplicate,
    AffinelyDependent,
    Cospherical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subset: SubsetKey,
}

/// Outcome of [`validate_general_position`]; empty means valid.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralPositionReport {
    pub violations: Vec<Violation>,
}

impl GeneralPositionReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::GeneralPositionViolation {
                count: self.violations.len(),
                first: v.subset.indices().to_vec(),
            }),
        }
    }
}

/// Coordinates shifted to the bounding-box minimum and divided by the diameter.
fn normalized(cloud: &PointCloud) -> Vec<Vec<f64>> {
    let d = cloud.dimension();
    let scale = cloud.scale();
    let lo: Vec<f64> = (0..d)
        .map(|a| cloud.points().iter().map(|p| p[a]).fold(f64::INFINITY, f64::min))
        .collect();
    cloud
        .points()
        .iter()
        .map(|p| p.iter().zip(&lo).map(|(x, l)| (x - l) / scale).collect())
        .collect()
}

/// Checks that no `d+1` points are affinely dependent and no `d+2` points are
/// co-spherical. Duplicate points are reported separately.
pub fn validate_general_position(cloud: &PointCloud) -> GeneralPositionReport {
    let d = cloud.dimension();
    let n = cloud.len();
    let pts = normalized(cloud);
    let mut violations = Vec::new();

    for (i, j) in (0..n).tuple_combinations() {
        if dist(&pts[i], &pts[j]) <= TAU_GP {
            violations.push(Violation {
                kind: ViolationKind::Duplicate,
                subset: SubsetKey::from_sorted(vec![i, j]),
            });
        }
    }
    for simplex in (0..n).combinations(d + 1) {
        let rows: Vec<Vec<f64>> = simplex[1..]
            .iter()
            .map(|&i| (0..d).map(|a| pts[i][a] - pts[simplex[0]][a]).collect())
            .collect();
        if determinant(rows).abs() <= TAU_GP {
            violations.push(Violation {
                kind: ViolationKind::AffinelyDependent,
                subset: SubsetKey::from_sorted(simplex),
            });
        }
    }
    for subset in (0..n).combinations(d + 2) {
        let rows: Vec<Vec<f64>> = subset[1..]
            .iter()
            .map(|&i| {
                let mut row: Vec<f64> = (0..d).map(|a| pts[i][a] - pts[subset[0]][a]).collect();
                row.push(row.iter().map(|x| x * x).sum());
                row
            })
            .collect();
        if determinant(rows).abs() <= TAU_GP {
            violations.push(Violation {
                kind: ViolationKind::Cospherical,
                subset: SubsetKey::from_sorted(subset),
            });
        }
    }
    GeneralPositionReport { violations }
}

fn perturbed(cloud: &PointCloud, seed: u64, round: u64, magnitude: f64) -> Result<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    let points = cloud
        .points()
        .iter()
        .map(|p| p.iter().map(|&x| x + rng.gen_range(-magnitude..=magnitude)).collect())
        .collect();
    PointCloud::new(cloud.dimension(), points)
}

/// Deterministically perturbs every coordinate until the cloud is in general
/// position, doubling the magnitude on each failed round.
///
/// The offset of coordinate `(i, axis)` in round `r` is the `(i*d + axis)`-th
/// draw of a ChaCha stream keyed by `(seed, r)`, so the output depends only on
/// the arguments.
pub fn jitter(cloud: &PointCloud, seed: u64, magnitude: f64) -> Result<PointCloud> {
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "jitter magnitude must be positive, got {magnitude}"
        )));
    }
    let mut mag = magnitude;
    for round in 0..JITTER_ROUNDS {
        let candidate = perturbed(cloud, seed, round as u64, mag)?;
        if validate_general_position(&candidate).is_valid() {
            return Ok(candidate);
        }
        mag *= 2.0;
    }
    Err(Error::JitterFailed {
        rounds: JITTER_ROUNDS,
    })
}
