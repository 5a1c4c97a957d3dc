//! Lloyd's algorithm with k-means++ seeding from a seeded generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{ClusterAssignment, ClusterParams};

pub const DEFAULT_MAX_ITER: usize = 300;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist2(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = d2.iter().sum();
        let chosen = if total > 0.0 {
            let u = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if u <= acc {
                    idx = i;
                    break;
                }
            }
            idx
        } else {
            // all remaining points coincide with a centroid
            rng.gen_range(0..n)
        };
        centroids.push(points[chosen].clone());
    }
    centroids
}

/// K-means clustering. Every point gets a cluster (no outliers); ties on
/// equidistant centroids go to the lowest centroid index. Runs until the
/// assignment reaches a fixpoint or `max_iter`.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterAssignment> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(Error::argument(format!(
            "k={k} out of range for {n} points"
        )));
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);

    let mut labels = vec![0usize; n];
    let mut inertia_history = Vec::new();
    for _ in 0..max_iter {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            inertia += d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        inertia_history.push(inertia);
        if !changed && inertia_history.len() > 1 {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in points.iter().enumerate() {
            counts[labels[i]] += 1;
            for (j, v) in p.iter().enumerate() {
                sums[labels[i]][j] += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..dim {
                    centroids[c][j] = sums[c][j] / counts[c] as f64;
                }
            }
            // empty cluster keeps its previous centroid
        }
    }

    let inertia = *inertia_history.last().unwrap();
    Ok(ClusterAssignment {
        labels: labels.iter().map(|&l| l as i64).collect(),
        num_clusters: k,
        centroids,
        params: ClusterParams::KMeans { k, seed, max_iter },
        inertia: Some(inertia),
        inertia_history,
    })
}
