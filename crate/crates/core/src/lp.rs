//! Dense primal simplex for the witness-point programs of the oracle.
//!
//! Every program has the form
//!
//! ```text
//! maximize t  subject to  a_i · p + t ≤ b_i,   p ∈ R^d, t ∈ R free
//! ```
//!
//! It is always feasible (`p = 0`, `t = min b_i`), so a single phase with
//! Bland's rule suffices after shifting `t` by `min b_i` and splitting `p`
//! into non-negative parts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;

/// One witness-point program: rows `a · p + t ≤ b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessLp {
    pub dim: usize,
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl WitnessLp {
    pub fn new(dim: usize) -> Self {
        WitnessLp { dim, rows: Vec::new() }
    }

    pub fn push(&mut self, a: Vec<f64>, b: f64) {
        debug_assert_eq!(a.len(), self.dim);
        self.rows.push((a, b));
    }

    /// `min_i (b_i − a_i · p)`: the best margin achievable at `p`.
    pub fn margin_at(&self, p: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|(a, b)| b - a.iter().zip(p).map(|(x, y)| x * y).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpOptimum {
    /// Optimal margin; `+∞` when unbounded.
    pub value: f64,
    /// Witness point attaining `value` (for unbounded programs, the last
    /// vertex visited).
    pub witness: Vec<f64>,
}

impl LpOptimum {
    pub fn is_unbounded(&self) -> bool {
        self.value == f64::INFINITY
    }
}

/// Maximizes the margin `t` of a [`WitnessLp`].
pub fn lp_maximize_margin(lp: &WitnessLp) -> Result<LpOptimum> {
    let d = lp.dim;
    let m = lp.rows.len();
    if m == 0 {
        return Ok(LpOptimum {
            value: f64::INFINITY,
            witness: vec![0.0; d],
        });
    }
    if lp.rows.iter().any(|(a, b)| !b.is_finite() || a.iter().any(|x| !x.is_finite())) {
        return Err(Error::LpNumericalFailure("non-finite program data".into()));
    }

    let shift = lp.rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    // Columns: u (d), v (d), s, slacks (m); last column is the rhs.
    let n_struct = 2 * d + 1;
    let cols = n_struct + m;
    let mut tab = vec![vec![0.0; cols + 1]; m];
    for (i, (a, b)) in lp.rows.iter().enumerate() {
        for j in 0..d {
            tab[i][j] = a[j];
            tab[i][d + j] = -a[j];
        }
        tab[i][2 * d] = 1.0;
        tab[i][n_struct + i] = 1.0;
        tab[i][cols] = b - shift;
    }
    let mut obj = vec![0.0; cols + 1];
    obj[2 * d] = -1.0;
    let mut basis: Vec<usize> = (n_struct..cols).collect();

    let cap = 10 * (m + d + 1);
    let mut unbounded = false;
    let mut pivots = 0;
    loop {
        let Some(enter) = (0..cols).find(|&j| obj[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        for i in 0..m {
            let c = tab[i][enter];
            if c <= PIVOT_EPS {
                continue;
            }
            let ratio = tab[i][cols] / c;
            leave = match leave {
                None => Some(i),
                Some(l) => {
                    let best = tab[l][cols] / tab[l][enter];
                    if ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[l]) {
                        Some(i)
                    } else {
                        Some(l)
                    }
                }
            };
        }
        let Some(row) = leave else {
            unbounded = true;
            break;
        };
        if pivots == cap {
            return Err(Error::IterationCapExceeded(cap));
        }
        pivots += 1;
        pivot(&mut tab, &mut obj, row, enter);
        basis[row] = enter;
    }

    let mut x = vec![0.0; cols];
    for (i, &bv) in basis.iter().enumerate() {
        x[bv] = tab[i][cols];
    }
    let witness: Vec<f64> = (0..d).map(|j| x[j] - x[d + j]).collect();
    let value = if unbounded {
        f64::INFINITY
    } else {
        shift + x[2 * d]
    };
    if value.is_nan() {
        return Err(Error::LpNumericalFailure("NaN optimum".into()));
    }
    Ok(LpOptimum { value, witness })
}

fn pivot(tab: &mut [Vec<f64>], obj: &mut [f64], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
        }
    }
    let f = obj[col];
    if f != 0.0 {
        for (v, pv) in obj.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn witness_lp(points: &[[f64; 2]], inside: &[usize]) -> WitnessLp {
        let mut lp = WitnessLp::new(2);
        for &x in inside {
            for y in (0..points.len()).filter(|y| !inside.contains(y)) {
                let (px, py) = (points[x], points[y]);
                lp.push(
                    vec![2.0 * (py[0] - px[0]), 2.0 * (py[1] - px[1])],
                    py[0] * py[0] + py[1] * py[1] - px[0] * px[0] - px[1] * px[1],
                );
            }
        }
        lp
    }

    fn grid_best(lp: &WitnessLp, half: f64, steps: usize) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let p = [
                    -half + 2.0 * half * i as f64 / steps as f64,
                    -half + 2.0 * half * j as f64 / steps as f64,
                ];
                best = best.max(lp.margin_at(&p));
            }
        }
        best
    }

    #[test]
    fn no_constraints_is_unbounded() {
        let r = lp_maximize_margin(&WitnessLp::new(3)).unwrap();
        assert!(r.is_unbounded());
    }

    #[test]
    fn end_of_jittered_segment_is_unbounded() {
        let pts = [[0.0, 0.0], [1.0, 1e-3], [2.0, -1e-3]];
        let lp = witness_lp(&pts, &[0]);
        let r = lp_maximize_margin(&lp).unwrap();
        assert!(r.value > 0.0);
        assert!(grid_best(&lp, 5.0, 200) > 0.0);
    }

    #[test]
    fn pair_straddling_thin_gap_is_not_separable() {
        // A disk holding both end points must cover one of the two points
        // just off the chord midpoint.
        let pts = [[0.0, 0.0], [1.0, 1e-3], [2.0, 0.0], [1.0, -1e-3]];
        let lp = witness_lp(&pts, &[0, 2]);
        let r = lp_maximize_margin(&lp).unwrap();
        assert!(r.value <= 0.0);
        assert!((lp.margin_at(&r.witness) - r.value).abs() < 1e-10);
        assert!(grid_best(&lp, 50.0, 400) <= r.value + 1e-9);
    }

    #[test]
    fn optimum_matches_random_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let pts: Vec<[f64; 2]> = (0..7).map(|_| [rng.gen(), rng.gen()]).collect();
            let lp = witness_lp(&pts, &[0, 1, 2]);
            let r = lp_maximize_margin(&lp).unwrap();
            if r.is_unbounded() {
                continue;
            }
            // Witness attains the reported value.
            assert!((lp.margin_at(&r.witness) - r.value).abs() < 1e-10);
            // No sampled point does better.
            for _ in 0..2000 {
                let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                assert!(lp.margin_at(&p) <= r.value + 1e-10);
            }
        }
    }
}
