//! Spectral coordinates for graphs that come without geometry.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Zero-eigenvalue threshold.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-8;
const SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with the eigenvectors as the
/// matching columns.
pub fn symmetric_eigen(a: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeMismatch(format!("{}x{} matrix is not square", n, a.ncols())));
    }
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let scale = m.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[[p, q]] * m[[p, q]])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].total_cmp(&m[[j, j]]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    Ok((values, vectors))
}

/// `I − D^{-1/2} A D^{-1/2}` for an undirected edge list over `n` vertices.
pub fn normalized_laplacian(n: usize, edges: &[(usize, usize)]) -> Result<Array2<f64>> {
    let mut a = Array2::<f64>::zeros((n, n));
    for &(i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::InvalidInput(format!("edge ({i},{j}) out of range for {n} vertices")));
        }
        if i != j {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
    }
    let inv_sqrt: Vec<f64> = a
        .rows()
        .into_iter()
        .map(|r| {
            let deg = r.sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut l = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in 0..n {
            if a[[i, j]] != 0.0 {
                l[[i, j]] -= inv_sqrt[i] * inv_sqrt[j];
            }
        }
    }
    Ok(l)
}

/// Spectral embedding into R³.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEmbedding {
    /// `n × 3`; missing eigenvectors of graphs with fewer than four vertices
    /// are zero columns.
    pub coords: Array2<f64>,
    /// Eigenvalues of the emitted columns (zero for padded columns).
    pub eigenvalues: Vec<f64>,
    /// Number of columns backed by real eigenvectors.
    pub used: usize,
}

/// Coordinates from the eigenvectors of the three smallest non-zero
/// eigenvalues of the normalized Laplacian. The first entry of each
/// eigenvector with magnitude above `1e-12` is made positive.
pub fn spectral_embed(n: usize, edges: &[(usize, usize)]) -> Result<SpectralEmbedding> {
    const DIMS: usize = 3;
    if n == 0 {
        return Err(Error::InvalidInput("graph has no vertices".into()));
    }
    let l = normalized_laplacian(n, edges)?;
    let (values, vectors) = symmetric_eigen(&l)?;
    let zeros = values.iter().filter(|v| v.abs() <= ZERO_EIGENVALUE_TOL).count();
    // An isolated vertex has a zero row, so its eigenvalue is 1; treat it as
    // a separate component too.
    let isolated = (0..n).filter(|&i| l.row(i).iter().filter(|x| **x != 0.0).count() <= 1 && n > 1).count();
    if zeros > 1 || isolated > 0 {
        return Err(Error::DisconnectedGraph(zeros + isolated));
    }
    let nonzero: Vec<usize> = (0..n).filter(|&i| values[i].abs() > ZERO_EIGENVALUE_TOL).collect();
    if n >= DIMS + 1 && nonzero.len() < DIMS {
        return Err(Error::TooFewEigenvectors { found: nonzero.len(), needed: DIMS });
    }
    let used = nonzero.len().min(DIMS);
    let mut coords = Array2::zeros((n, DIMS));
    let mut eigenvalues = vec![0.0; DIMS];
    for (col, &idx) in nonzero.iter().take(used).enumerate() {
        let mut v = vectors.column(idx).to_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
            if *first < 0.0 {
                v.mapv_inplace(|x| -x);
            }
        }
        coords.column_mut(col).assign(&v);
        eigenvalues[col] = values[idx];
    }
    Ok(SpectralEmbedding {
        coords,
        eigenvalues,
        used,
    })
}
