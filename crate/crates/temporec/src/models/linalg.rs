//! Dense helpers shared by the factorization models. Matrices are
//! row-major `Vec<f64>` slices; everything stays at desk scale, so
//! clarity wins over blocking tricks.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(a: &mut [f64], s: f64) {
    for v in a.iter_mut() {
        *v *= s;
    }
}

/// Column `j` of a row-major `rows x cols` matrix.
pub fn column(m: &[f64], rows: usize, cols: usize, j: usize) -> Vec<f64> {
    (0..rows).map(|r| m[r * cols + j]).collect()
}

pub fn set_column(m: &mut [f64], cols: usize, j: usize, v: &[f64]) {
    for (r, &x) in v.iter().enumerate() {
        m[r * cols + j] = x;
    }
}

/// In-place modified Gram-Schmidt with one re-orthogonalization pass.
/// Columns that collapse to zero norm are replaced from `fill`, a stream of
/// replacement vectors, and orthogonalized again.
pub fn orthonormalize_columns(
    m: &mut [f64],
    rows: usize,
    cols: usize,
    mut fill: impl FnMut() -> Vec<f64>,
) -> Result<()> {
    for j in 0..cols {
        let mut v = column(m, rows, cols, j);
        loop {
            for _pass in 0..2 {
                for k in 0..j {
                    let q = column(m, rows, cols, k);
                    let r = dot(&q, &v);
                    axpy(-r, &q, &mut v);
                }
            }
            let n = norm2(&v);
            if n > 1e-12 {
                scale(&mut v, 1.0 / n);
                break;
            }
            v = fill();
            if v.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    got: v.len(),
                });
            }
        }
        set_column(m, cols, j, &v);
    }
    Ok(())
}

/// Eigen-decomposition of a symmetric matrix by the cyclic Jacobi method.
/// Returns eigenvalues (descending) and matching eigenvectors as rows of
/// the second value.
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: a.len(),
        });
    }
    let mut m = a.to_vec();
    // eigenvector accumulator, starts as identity
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    s += m[p * n + q] * m[p * n + q];
                }
            }
        }
        s
    };

    for _sweep in 0..100 {
        if off(&m) < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a_, &b_| {
        m[b_ * n + b_]
            .partial_cmp(&m[a_ * n + a_])
            .expect("eigenvalues finite")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&j| m[j * n + j]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (row, &j) in order.iter().enumerate() {
        for k in 0..n {
            eigenvectors[row * n + k] = v[k * n + j];
        }
    }
    Ok((eigenvalues, eigenvectors))
}
