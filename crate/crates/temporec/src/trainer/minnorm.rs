//! Min-norm point in the convex hull of n gradients: the quadratic
//! simplex-constrained problem whose solution supplies the objective
//! weights. Two gradients admit a closed form; larger sets use Frank-Wolfe
//! with away steps and exact line search on the Gram matrix. Away steps
//! keep the convergence linear when the solution sits on a simplex face,
//! so the duality-gap stop is reachable within the iteration cap.

use crate::error::{Error, Result};
use crate::models::linalg::{dot, symmetric_eigen};

const FW_MAX_ITERS: usize = 100;
const FW_DUALITY_GAP: f64 = 1e-9;

fn gram(gradients: &[&[f64]]) -> Result<Vec<f64>> {
    let n = gradients.len();
    let dim = gradients[0].len();
    for g in gradients {
        if g.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: g.len(),
            });
        }
    }
    let mut m = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let d = dot(gradients[a], gradients[b]);
            m[a * n + b] = d;
            m[b * n + a] = d;
        }
    }
    Ok(m)
}

/// Simplex weights minimizing the combined-gradient norm. Dispatches to the
/// closed form for one or two gradients and to Frank-Wolfe otherwise.
pub fn min_norm_weights(gradients: &[&[f64]]) -> Result<Vec<f64>> {
    match gradients.len() {
        0 => Err(Error::ContractViolation("no gradients to combine".into())),
        1 => Ok(vec![1.0]),
        2 => {
            let m = gram(gradients)?;
            Ok(analytic_pair(m[0], m[1], m[3]))
        }
        _ => frank_wolfe_weights(gradients),
    }
}

/// Closed form for two gradients: alpha on g1 minimizes
/// ‖alpha g1 + (1 - alpha) g2‖², clamped to [0, 1]; identical gradients
/// get the symmetric 0.5.
fn analytic_pair(g11: f64, g12: f64, g22: f64) -> Vec<f64> {
    let denom = g11 - 2.0 * g12 + g22; // ‖g1 - g2‖²
    let alpha = if denom <= 0.0 {
        0.5
    } else {
        ((g22 - g12) / denom).clamp(0.0, 1.0)
    };
    vec![alpha, 1.0 - alpha]
}

/// Affine minimizer of the Gram quadratic restricted to `support` with
/// weights summing to one, ignoring nonnegativity. Solves the symmetric
/// KKT system [2M 1; 1' 0][x; nu] = [0; 1] through the eigendecomposition
/// pseudoinverse, which also covers rank-deficient Gram blocks (gradients
/// spanning fewer dimensions than their count, or a hull containing the
/// origin, where the multiplier vanishes). `None` when the solve is
/// numerically inconsistent, which sends the caller down the line-search
/// path.
fn affine_minimizer(m: &[f64], n: usize, support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let dim = k + 1;
    let mut kkt = vec![0.0; dim * dim];
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            kkt[r * dim + c] = 2.0 * m[i * n + j];
        }
        kkt[r * dim + k] = 1.0;
        kkt[k * dim + r] = 1.0;
    }
    let (eigenvalues, eigenvectors) = symmetric_eigen(&kkt, dim).ok()?;
    let magnitude = eigenvalues
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    // rhs is the last basis vector, so u . rhs is u's last entry
    let mut y = vec![0.0; dim];
    for (idx, &lambda) in eigenvalues.iter().enumerate() {
        if lambda.abs() > 1e-12 * magnitude {
            let u = &eigenvectors[idx * dim..(idx + 1) * dim];
            let coefficient = u[k] / lambda;
            for (yj, &uj) in y.iter_mut().zip(u) {
                *yj += coefficient * uj;
            }
        }
    }
    for r in 0..dim {
        let rhs = if r == k { 1.0 } else { 0.0 };
        let residual = (0..dim).map(|c| kkt[r * dim + c] * y[c]).sum::<f64>() - rhs;
        if residual.abs() > 1e-8 {
            return None;
        }
    }
    let total: f64 = y[..k].iter().sum();
    if total <= 0.5 {
        return None;
    }
    let mut beta = vec![0.0; n];
    for (r, &i) in support.iter().enumerate() {
        beta[i] = y[r] / total;
    }
    Some(beta)
}

fn simplex_cleanup(alpha: &mut [f64]) {
    let mut sum = 0.0;
    for a in alpha.iter_mut() {
        if *a < 1e-14 {
            *a = 0.0;
        }
        sum += *a;
    }
    for a in alpha.iter_mut() {
        *a /= sum;
    }
}

/// Frank-Wolfe on the simplex, exposed separately so the analytic
/// two-gradient solution can be cross-checked against it. Each major
/// iteration adds the best vertex and runs the fully corrective minor
/// cycle: solve the affine minimizer on the active set exactly, and while
/// it leaves the simplex, step to the boundary and drop the blocking
/// vertex. The corrective move lands exactly on face and interior optima,
/// so the duality-gap stop is reachable well inside the iteration cap. A
/// plain line-search step backstops the rare numerically degenerate solve.
pub fn frank_wolfe_weights(gradients: &[&[f64]]) -> Result<Vec<f64>> {
    let n = gradients.len();
    if n == 0 {
        return Err(Error::ContractViolation("no gradients to combine".into()));
    }
    let mut m = gram(gradients)?;
    // normalize to unit magnitude so the corrective solves see O(1) numbers
    // regardless of gradient scale; the stop threshold stays absolute in
    // the original units
    let unit = (0..n)
        .map(|j| m[j * n + j])
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    for v in m.iter_mut() {
        *v /= unit;
    }
    let stop = FW_DUALITY_GAP / unit;
    let mut alpha = vec![1.0 / n as f64; n];
    for _ in 0..FW_MAX_ITERS {
        // gradient of the quadratic at alpha, up to the factor 2
        let mut ma = vec![0.0; n];
        for (r, v) in ma.iter_mut().enumerate() {
            *v = (0..n).map(|c| m[r * n + c] * alpha[c]).sum();
        }
        let objective: f64 = alpha.iter().zip(&ma).map(|(a, v)| a * v).sum();
        let toward = (0..n)
            .min_by(|&a, &b| ma[a].partial_cmp(&ma[b]).expect("finite"))
            .expect("nonempty");
        let gap_toward = objective - ma[toward];
        if gap_toward <= stop {
            break;
        }

        let snapshot = alpha.clone();
        let mut support: Vec<usize> = (0..n).filter(|&j| alpha[j] > 0.0 || j == toward).collect();
        for _ in 0..=n {
            let Some(z) = affine_minimizer(&m, n, &support) else {
                break;
            };
            if z.iter().all(|&v| v >= 0.0) {
                alpha = z;
                break;
            }
            // step to the simplex boundary, then drop the blocking vertices
            let mut theta = f64::INFINITY;
            for &j in &support {
                if z[j] < 0.0 {
                    theta = theta.min(alpha[j] / (alpha[j] - z[j]));
                }
            }
            let theta = theta.clamp(0.0, 1.0);
            for j in 0..n {
                alpha[j] += theta * (z[j] - alpha[j]);
                if alpha[j] < 1e-14 {
                    alpha[j] = 0.0;
                }
            }
            support = (0..n).filter(|&j| alpha[j] > 0.0).collect();
        }
        if alpha != snapshot {
            simplex_cleanup(&mut alpha);
            continue;
        }

        let away = (0..n)
            .filter(|&j| alpha[j] > 0.0)
            .max_by(|&a, &b| ma[a].partial_cmp(&ma[b]).expect("finite"))
            .expect("simplex point has support");
        let gap_away = ma[away] - objective;

        // exact line search along d: gamma* = -(d'Ma) / (d'Md)
        let (d_m_a, d_m_d, gamma_max) = if gap_toward >= gap_away {
            // d = e_toward - alpha
            (
                ma[toward] - objective,
                m[toward * n + toward] - 2.0 * ma[toward] + objective,
                1.0,
            )
        } else {
            // d = alpha - e_away; the cap keeps alpha[away] nonnegative
            (
                objective - ma[away],
                objective - 2.0 * ma[away] + m[away * n + away],
                alpha[away] / (1.0 - alpha[away]),
            )
        };
        let gamma = if d_m_d <= 0.0 {
            gamma_max
        } else {
            (-d_m_a / d_m_d).min(gamma_max)
        };
        if gap_toward >= gap_away {
            for (k, a) in alpha.iter_mut().enumerate() {
                let e = if k == toward { 1.0 } else { 0.0 };
                *a += gamma * (e - *a);
            }
        } else {
            for (k, a) in alpha.iter_mut().enumerate() {
                let e = if k == away { 1.0 } else { 0.0 };
                *a += gamma * (*a - e);
            }
        }
        simplex_cleanup(&mut alpha);
    }
    Ok(alpha)
}

/// `sum_i alpha_i g_i`
pub fn combine(gradients: &[&[f64]], alpha: &[f64]) -> Result<Vec<f64>> {
    if gradients.len() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: gradients.len(),
            got: alpha.len(),
        });
    }
    let dim = gradients[0].len();
    let mut out = vec![0.0; dim];
    for (g, &a) in gradients.iter().zip(alpha) {
        for (o, &v) in out.iter_mut().zip(*g) {
            *o += a * v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::linalg::norm2;
    use rand::Rng;

    #[test]
    fn orthogonal_unit_gradients_split_evenly() {
        let g1 = [1.0, 0.0];
        let g2 = [0.0, 1.0];
        let alpha = min_norm_weights(&[&g1, &g2]).unwrap();
        assert!((alpha[0] - 0.5).abs() < 1e-12);
        let v = combine(&[&g1, &g2], &alpha).unwrap();
        assert_eq!(v, vec![0.5, 0.5]);
    }

    #[test]
    fn longer_gradient_gets_less_weight() {
        // minimize 4a² + (1-a)² -> a = 0.2
        let g1 = [2.0, 0.0];
        let g2 = [0.0, 1.0];
        let alpha = min_norm_weights(&[&g1, &g2]).unwrap();
        assert!((alpha[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identical_gradients_split_symmetrically() {
        let g = [0.3, -0.4, 1.0];
        let alpha = min_norm_weights(&[&g, &g]).unwrap();
        assert_eq!(alpha, vec![0.5, 0.5]);
        let v = combine(&[&g, &g], &alpha).unwrap();
        assert_eq!(v, g.to_vec());
    }

    #[test]
    fn opposing_gradients_cancel() {
        let g1 = [1.0, 0.0];
        let g2 = [-1.0, 0.0];
        let alpha = min_norm_weights(&[&g1, &g2]).unwrap();
        let v = combine(&[&g1, &g2], &alpha).unwrap();
        assert!(norm2(&v) < 1e-12);
    }

    #[test]
    fn single_gradient_passes_through() {
        let g = [1.0, 2.0];
        assert_eq!(min_norm_weights(&[&g]).unwrap(), vec![1.0]);
    }

    #[test]
    fn frank_wolfe_agrees_with_the_closed_form() {
        let mut rng = crate::seeds::rng(5, "minnorm-test", 0);
        for _ in 0..200 {
            let dim = rng.gen_range(2..6);
            let g1: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g2: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let analytic = min_norm_weights(&[&g1, &g2]).unwrap();
            let fw = frank_wolfe_weights(&[&g1, &g2]).unwrap();
            assert!(
                (analytic[0] - fw[0]).abs() < 1e-6,
                "analytic {} vs frank-wolfe {}",
                analytic[0],
                fw[0]
            );
        }
    }

    #[test]
    fn min_norm_properties_hold_for_triples() {
        let mut rng = crate::seeds::rng(6, "minnorm-test3", 0);
        for _ in 0..200 {
            let dim = rng.gen_range(2..8);
            let gs: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let refs: Vec<&[f64]> = gs.iter().map(|g| g.as_slice()).collect();
            let alpha = min_norm_weights(&refs).unwrap();
            assert!((alpha.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(alpha.iter().all(|&a| (-1e-12..=1.0 + 1e-12).contains(&a)));
            let v = combine(&refs, &alpha).unwrap();
            let vn = norm2(&v);
            for g in &refs {
                assert!(vn <= norm2(g) + 1e-9);
                // v · g_j >= ‖v‖² for every j at the optimum
                assert!(dot(&v, g) >= vn * vn - 1e-9);
            }
        }
    }
}
