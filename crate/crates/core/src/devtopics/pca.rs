//! Principal component analysis via eigendecomposition of the covariance
//! (or Gram matrix, whichever is smaller), with a deterministic sign
//! convention.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// r x d, rows are orthonormal principal axes.
    pub components: Vec<Vec<f64>>,
    /// Non-negative, non-increasing.
    pub explained_variance: Vec<f64>,
}

const ZERO_EIGENVALUE: f64 = 1e-12;

/// Fits PCA on an N x d matrix. Requires N >= 2 and r <= min(N-1, d).
pub fn pca_fit(x: &[Vec<f64>], r: usize) -> Result<PcaModel> {
    let n = x.len();
    if n < 2 {
        return Err(Error::argument("pca needs at least 2 samples"));
    }
    let d = x[0].len();
    if x.iter().any(|row| row.len() != d) {
        return Err(Error::argument("pca input rows have inconsistent widths"));
    }
    let max_r = d.min(n - 1);
    if r == 0 || r > max_r {
        return Err(Error::argument(format!(
            "pca rank {r} out of range, must be in 1..={max_r}"
        )));
    }

    let mut mean = vec![0.0; d];
    for row in x {
        for (j, v) in row.iter().enumerate() {
            mean[j] += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let centered = DMatrix::from_fn(n, d, |i, j| x[i][j] - mean[j]);
    let denom = (n - 1) as f64;

    let (eigvals, axes) = if d <= n {
        // Covariance route: d x d.
        let cov = centered.transpose() * &centered / denom;
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let vals: Vec<f64> = order
            .iter()
            .take(r)
            .map(|&i| eig.eigenvalues[i].max(0.0))
            .collect();
        let axes: Vec<DVector<f64>> = order
            .iter()
            .take(r)
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        (vals, axes)
    } else {
        // Gram route: N x N, components recovered from the data.
        let gram = &centered * centered.transpose() / denom;
        let eig = gram.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
        let mut vals = Vec::with_capacity(r);
        let mut axes = Vec::with_capacity(r);
        for &i in order.iter().take(r) {
            let lambda = eig.eigenvalues[i].max(0.0);
            vals.push(lambda);
            let u = eig.eigenvectors.column(i);
            let mut v = centered.transpose() * u;
            let norm = v.norm();
            if norm > ZERO_EIGENVALUE {
                v /= norm;
            } else {
                v = DVector::zeros(d); // completed below
            }
            axes.push(v);
        }
        (vals, axes)
    };

    let mut components = axes;
    complete_degenerate_axes(&mut components, d);
    for v in &mut components {
        fix_sign(v);
    }

    Ok(PcaModel {
        mean,
        components: components.iter().map(|v| v.iter().copied().collect()).collect(),
        explained_variance: eigvals,
    })
}

/// Replaces zero axes (from zero-variance directions) with unit vectors
/// orthogonal to all previous components, keeping the basis orthonormal.
fn complete_degenerate_axes(components: &mut [DVector<f64>], d: usize) {
    for idx in 0..components.len() {
        if components[idx].norm() > 0.5 {
            continue;
        }
        for basis in 0..d {
            let mut candidate = DVector::zeros(d);
            candidate[basis] = 1.0;
            for prev in components[..idx].iter() {
                let proj = prev.dot(&candidate);
                candidate -= prev * proj;
            }
            let norm = candidate.norm();
            if norm > 1e-6 {
                components[idx] = candidate / norm;
                break;
            }
        }
    }
}

/// Deterministic orientation: the entry with the largest magnitude is
/// positive.
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        *v = -&*v;
    }
}

/// Projects rows onto the principal axes: (x - mean) * components^T.
pub fn pca_transform(model: &PcaModel, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.iter()
        .map(|row| {
            model
                .components
                .iter()
                .map(|axis| {
                    axis.iter()
                        .zip(row.iter().zip(&model.mean))
                        .map(|(a, (v, m))| a * (v - m))
                        .sum()
                })
                .collect()
        })
        .collect()
}

/// Maps reduced rows back to the original space: y * components + mean.
pub fn pca_inverse_transform(model: &PcaModel, y: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = model.mean.len();
    y.iter()
        .map(|row| {
            let mut out = model.mean.clone();
            for (axis, &coef) in model.components.iter().zip(row.iter()) {
                for j in 0..d {
                    out[j] += coef * axis[j];
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn line_fixture_first_component() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let m = pca_fit(&x, 2).unwrap();
        let s5 = 5.0f64.sqrt();
        assert!((m.components[0][0] - 1.0 / s5).abs() < 1e-8);
        assert!((m.components[0][1] - 2.0 / s5).abs() < 1e-8);
        assert!(m.explained_variance[1].abs() < 1e-9);
    }

    #[test]
    fn full_rank_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let m = pca_fit(&x, 4).unwrap();
        let y = pca_transform(&m, &x);
        let back = pca_inverse_transform(&m, &y);
        for (orig, rec) in x.iter().zip(&back) {
            for (a, b) in orig.iter().zip(rec) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn explained_variance_non_increasing_and_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.gen_range(5..30);
            let d = rng.gen_range(2..8);
            let r = d.min(n - 1);
            let x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let m = pca_fit(&x, r).unwrap();
            for pair in m.explained_variance.windows(2) {
                assert!(pair[0] >= pair[1] - 1e-12);
            }
            for i in 0..r {
                for j in 0..r {
                    let dot: f64 = m.components[i]
                        .iter()
                        .zip(&m.components[j])
                        .map(|(a, b)| a * b)
                        .sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn rank_out_of_range_is_error() {
        let x = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]];
        assert!(pca_fit(&x, 3).is_err());
        assert!(pca_fit(&x, 0).is_err());
    }

    #[test]
    fn identical_points_keep_orthonormal_components() {
        let x = vec![vec![1.0, 2.0, 3.0]; 5];
        let m = pca_fit(&x, 2).unwrap();
        for v in &m.explained_variance {
            assert!(v.abs() < 1e-9);
        }
        for i in 0..2 {
            for j in 0..2 {
                let dot: f64 = m.components[i]
                    .iter()
                    .zip(&m.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-8);
            }
        }
    }
}
