use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("matrix is not square ({0}×{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}")]
    NotSymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("empty matrix")]
    Empty,
}

const MAX_SWEEPS: usize = 100;

fn off_norm(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[[i, j]] * a[[i, j]];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns. Sweeps until the off-diagonal Frobenius norm falls below
/// `1e-12 · ‖A‖_F` (or exactly zero for the zero matrix).
pub fn symmetric_eigen(c: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>), EigenError> {
    let (n, m) = c.dim();
    if n != m {
        return Err(EigenError::NotSquare(n, m));
    }
    if n == 0 {
        return Err(EigenError::Empty);
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let scale = c.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    for i in 0..n {
        for j in i + 1..n {
            let gap = (c[[i, j]] - c[[j, i]]).abs();
            if gap > 1e-12 * scale.max(f64::MIN_POSITIVE) {
                return Err(EigenError::NotSymmetric { i, j, gap });
            }
        }
    }
    let mut a = c.clone();
    // Symmetrize exactly so rotations act on a truly symmetric matrix.
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    let mut v = Array2::<f64>::eye(n);
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    for _ in 0..MAX_SWEEPS {
        if off_norm(&a) <= 1e-12 * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = cs * akp - sn * akq;
                    a[[k, q]] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = cs * apk - sn * aqk;
                    a[[q, k]] = sn * apk + cs * aqk;
                }
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = cs * vkp - sn * vkq;
                    v[[k, q]] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].total_cmp(&a[[j, j]]));
    let values = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        vectors.column_mut(col).assign(&v.column(i));
    }
    Ok((values, vectors))
}

/// Smallest eigenpair, sign fixed so the largest-magnitude component is positive.
pub fn smallest_eigvec(c: &Array2<f64>) -> Result<(f64, Array1<f64>), EigenError> {
    let (values, vectors) = symmetric_eigen(c)?;
    let mut w = vectors.column(0).to_owned();
    let big = w.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if big < 0.0 {
        w.mapv_inplace(|x| -x);
    }
    Ok((values[0], w))
}
