//! Lloyd's k-means with k-means++ seeding, deterministic given a seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ManifoldError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// cluster id per point, in [0, k)
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// sum of squared distances to assigned centroids
    pub inertia: f64,
    /// inertia after each Lloyd iteration; non-increasing
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid index; ties broken by lowest index.
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = sq_dist(point, &centroids[0]);
    for (c, centroid) in centroids.iter().enumerate().skip(1) {
        let d = sq_dist(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    (best, best_d)
}

fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining mass at existing centroids: pick uniformly
            rng.gen_range(0..n)
        } else {
            let target = rng.gen_range(0.0..total);
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if target < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, centroids.last().unwrap()));
        }
    }
    centroids
}

/// Independent k-means++ initializations per call; the best final inertia
/// wins. One Lloyd pass from a single init lands in a poor local optimum
/// often enough to matter even on 8-point instances.
const RESTARTS: usize = 25;

/// Best of [`RESTARTS`] restarts of k-means++ seeding followed by Lloyd
/// iterations; deterministic given `seed`.
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterAssignment, ManifoldError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(ManifoldError::Parameter(format!("k={k} must satisfy 1 <= k <= n={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<ClusterAssignment> = None;
    for _ in 0..RESTARTS {
        let run = kmeans_single(points, k, &mut rng, max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

/// k-means++ seeding then Lloyd iterations to an assignment fixpoint or
/// `max_iter`. An emptied cluster is reseeded to the point farthest from
/// its assigned centroid.
fn kmeans_single(
    points: &[Vec<f64>],
    k: usize,
    rng: &mut ChaCha8Rng,
    max_iter: usize,
) -> ClusterAssignment {
    let n = points.len();
    let dim = points[0].len();
    let mut centroids = kmeans_pp_init(points, k, rng);
    let mut labels = vec![0usize; n];
    let mut inertia_history = Vec::new();
    let mut inertia = f64::INFINITY;

    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        let mut new_inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
            new_inertia += d;
        }

        // reseed empty clusters to the worst-fit point
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            sizes[l] += 1;
        }
        let mut reseeded = false;
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let farthest = (0..n)
                .max_by(|&a, &b| {
                    let da = sq_dist(&points[a], &centroids[labels[a]]);
                    let db = sq_dist(&points[b], &centroids[labels[b]]);
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
            sizes[labels[farthest]] -= 1;
            labels[farthest] = c;
            sizes[c] = 1;
            centroids[c] = points[farthest].clone();
            reseeded = true;
            changed = true;
        }
        if reseeded {
            new_inertia = points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| sq_dist(p, &centroids[l]))
                .sum();
        }

        // update step
        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &l) in points.iter().zip(&labels) {
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                for s in sums[c].iter_mut() {
                    *s /= sizes[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
        }

        inertia = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| sq_dist(p, &centroids[l]))
            .sum();
        inertia_history.push(inertia);
        if !changed {
            break;
        }
        let _ = new_inertia;
    }

    ClusterAssignment { labels, centroids, inertia, inertia_history }
}

/// Mean silhouette coefficient over all points; 0 for degenerate inputs.
pub fn silhouette(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = points.len();
    if n < 2 || k < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut counted = 0usize;
    for i in 0..n {
        let own = labels[i];
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            sums[labels[j]] += sq_dist(&points[i], &points[j]).sqrt();
            counts[labels[j]] += 1;
        }
        if counts[own] == 0 {
            continue; // singleton cluster: silhouette undefined
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b);
            counted += 1;
        }
    }
    if counted == 0 {
        0.0
    } else {
        total / counted as f64
    }
}
