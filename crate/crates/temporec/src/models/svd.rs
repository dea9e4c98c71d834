//! Truncated SVD of the binary interaction matrix via randomized subspace
//! iteration. Scores are projections onto the top right-singular
//! directions: score(x) = (x V_d) V_dᵀ.

use rand_chacha::ChaCha8Rng;

use crate::corpus::SparseUserItemMatrix;
use crate::error::{Error, Result};
use crate::metrics::ScoreProvider;
use crate::models::linalg::{column, orthonormalize_columns, set_column, symmetric_eigen};
use crate::seeds;

#[derive(Debug, Clone, PartialEq)]
pub struct SvdModel {
    /// Item factors, `n_items x d` row-major; columns orthonormal.
    v: Vec<f64>,
    /// Singular values, non-increasing, >= 0.
    sigma: Vec<f64>,
    n_items: usize,
    d: usize,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    (0..rows * cols).map(|_| seeds::gaussian(rng)).collect()
}

/// `X * M` for the binary CSR matrix and a dense `cols(X) x w` matrix.
fn sparse_times_dense(x: &SparseUserItemMatrix, m: &[f64], w: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.rows() * w];
    for u in 0..x.rows() {
        let row = &mut out[u * w..(u + 1) * w];
        for &i in x.row(u) {
            let src = &m[i * w..(i + 1) * w];
            for (o, s) in row.iter_mut().zip(src) {
                *o += s;
            }
        }
    }
    out
}

/// `Xᵀ * M` for the binary CSR matrix and a dense `rows(X) x w` matrix.
fn sparse_t_times_dense(x: &SparseUserItemMatrix, m: &[f64], w: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.cols() * w];
    for u in 0..x.rows() {
        let src = &m[u * w..(u + 1) * w];
        for &i in x.row(u) {
            let dst = &mut out[i * w..(i + 1) * w];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += s;
            }
        }
    }
    out
}

/// Rank-`d` factorization by randomized range finding plus `iters` rounds
/// of subspace iteration.
pub fn fit_truncated_svd(
    train: &SparseUserItemMatrix,
    d: usize,
    iters: usize,
    seed: u64,
) -> Result<SvdModel> {
    let (n_users, n_items) = (train.rows(), train.cols());
    if n_users == 0 || n_items == 0 {
        return Err(Error::EmptyCorpus);
    }
    let max_rank = n_users.min(n_items);
    if d == 0 || d > max_rank {
        return Err(Error::InvalidConfig(format!(
            "factor count {d} outside [1, min(U, I)] = [1, {max_rank}]"
        )));
    }
    let l = (d + 10).min(max_rank);

    let mut rng = seeds::rng(seed, "svd-omega", 0);
    let mut fill_rng = seeds::rng(seed, "svd-fill", 0);

    // Range finding: Y = X * Omega, orthonormalized.
    let omega = gaussian_matrix(&mut rng, n_items, l);
    let mut y = sparse_times_dense(train, &omega, l);
    orthonormalize_columns(&mut y, n_users, l, || {
        gaussian_matrix(&mut fill_rng, n_users, 1)
    })?;
    for _ in 0..iters {
        let mut z = sparse_t_times_dense(train, &y, l);
        orthonormalize_columns(&mut z, n_items, l, || {
            gaussian_matrix(&mut fill_rng, n_items, 1)
        })?;
        y = sparse_times_dense(train, &z, l);
        orthonormalize_columns(&mut y, n_users, l, || {
            gaussian_matrix(&mut fill_rng, n_users, 1)
        })?;
    }

    // Project: B = Qᵀ X (l x n_items), then eigen-decompose B Bᵀ.
    let mut b = vec![0.0; l * n_items];
    for u in 0..n_users {
        for &i in train.row(u) {
            for r in 0..l {
                b[r * n_items + i] += y[u * l + r];
            }
        }
    }
    let mut gram = vec![0.0; l * l];
    for r in 0..l {
        for s in r..l {
            let mut acc = 0.0;
            for i in 0..n_items {
                acc += b[r * n_items + i] * b[s * n_items + i];
            }
            gram[r * l + s] = acc;
            gram[s * l + r] = acc;
        }
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(&gram, l)?;

    let sigma_max = eigenvalues[0].max(0.0).sqrt();
    let mut v = vec![0.0; n_items * d];
    let mut sigma = Vec::with_capacity(d);
    for j in 0..d {
        let s = eigenvalues[j].max(0.0).sqrt();
        if s > 1e-12 * sigma_max.max(1.0) {
            let u_j = &eigenvectors[j * l..(j + 1) * l];
            let mut col = vec![0.0; n_items];
            for i in 0..n_items {
                let mut acc = 0.0;
                for r in 0..l {
                    acc += b[r * n_items + i] * u_j[r];
                }
                col[i] = acc / s;
            }
            set_column(&mut v, d, j, &col);
            sigma.push(s);
        } else {
            // Rank-deficient tail: complete the basis so V stays orthonormal.
            set_column(&mut v, d, j, &gaussian_matrix(&mut fill_rng, n_items, 1));
            sigma.push(0.0);
        }
    }
    orthonormalize_columns(&mut v, n_items, d, || {
        gaussian_matrix(&mut fill_rng, n_items, 1)
    })?;

    Ok(SvdModel {
        v,
        sigma,
        n_items,
        d,
    })
}

impl SvdModel {
    pub fn singular_values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn factors(&self) -> usize {
        self.d
    }

    /// Max deviation of VᵀV from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.d {
            let ca = column(&self.v, self.n_items, self.d, a);
            for b in a..self.d {
                let cb = column(&self.v, self.n_items, self.d, b);
                let g = crate::models::linalg::dot(&ca, &cb);
                let expected = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - expected).abs());
            }
        }
        worst
    }
}

impl ScoreProvider for SvdModel {
    fn n_items(&self) -> usize {
        self.n_items
    }

    fn score(&self, input_items: &[usize]) -> Result<Vec<f64>> {
        if let Some(&bad) = input_items.iter().find(|&&i| i >= self.n_items) {
            return Err(Error::DimensionMismatch {
                expected: self.n_items,
                got: bad,
            });
        }
        let mut p = vec![0.0; self.d];
        for &i in input_items {
            for (pj, vij) in p.iter_mut().zip(&self.v[i * self.d..(i + 1) * self.d]) {
                *pj += vij;
            }
        }
        let mut scores = vec![0.0; self.n_items];
        for (i, s) in scores.iter_mut().enumerate() {
            *s = crate::models::linalg::dot(&p, &self.v[i * self.d..(i + 1) * self.d]);
        }
        Ok(scores)
    }
}
