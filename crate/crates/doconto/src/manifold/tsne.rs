//! Exact (O(n^2)) t-SNE with per-point bandwidths found by binary search.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::EmbeddingMatrix;

use super::{LowDimEmbedding, ManifoldError};

const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERS: usize = 250;
const PERPLEXITY_TOL: f64 = 1e-5;
const BISECTION_STEPS: usize = 50;
const P_MIN: f64 = 1e-12;
const INIT_SIGMA: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig { perplexity: 30.0, iterations: 1000, learning_rate: 200.0, seed: 0 }
    }
}

/// Symmetrized joint affinities plus per-row diagnostics.
#[derive(Debug, Clone)]
pub struct PAffinities {
    pub n: usize,
    /// row-major n x n joint probabilities, zero diagonal, sums to 1
    pub p: Vec<f64>,
    /// perplexity actually achieved by each conditional row
    pub achieved_perplexity: Vec<f64>,
}

fn pairwise_sq_dists(data: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let mut s = 0.0;
            for k in 0..dim {
                let diff = data[i * dim + k] - data[j * dim + k];
                s += diff * diff;
            }
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Shannon entropy (nats) and conditional row for a given precision beta.
fn row_entropy(dists: &[f64], i: usize, n: usize, beta: f64, row: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for j in 0..n {
        row[j] = if j == i { 0.0 } else { (-beta * dists[i * n + j]).exp() };
        sum += row[j];
    }
    if sum <= 0.0 {
        // beta so large every exponent underflowed: all mass to the nearest
        // neighbor, entropy 0
        let nearest = (0..n)
            .filter(|&j| j != i)
            .min_by(|&a, &b| dists[i * n + a].partial_cmp(&dists[i * n + b]).unwrap())
            .unwrap();
        row[nearest] = 1.0;
        return 0.0;
    }
    let mut h = 0.0;
    for r in row.iter_mut().take(n) {
        *r /= sum;
        if *r > 0.0 {
            h -= *r * r.ln();
        }
    }
    h
}

/// Binary-search per-point bandwidths so each conditional distribution's
/// perplexity matches the target, then symmetrize.
pub fn joint_probabilities(em: &EmbeddingMatrix, perplexity: f64) -> Result<PAffinities, ManifoldError> {
    let n = em.len();
    validate(n, perplexity)?;
    let dists = pairwise_sq_dists(&em.data, n, em.dim);
    let target_h = perplexity.ln();
    let mut cond = vec![0.0; n * n];
    let mut achieved = vec![0.0; n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let mut beta = 1.0;
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut h = row_entropy(&dists, i, n, beta, &mut row);
        for _ in 0..BISECTION_STEPS {
            if (h - target_h).abs() < PERPLEXITY_TOL {
                break;
            }
            if h > target_h {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = if lo.is_finite() { (beta + lo) / 2.0 } else { beta / 2.0 };
            }
            h = row_entropy(&dists, i, n, beta, &mut row);
        }
        achieved[i] = h.exp();
        cond[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    // symmetrize: p_ij = (p_{j|i} + p_{i|j}) / 2n
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(if i == j { 0.0 } else { P_MIN });
        }
    }
    Ok(PAffinities { n, p, achieved_perplexity: achieved })
}

fn validate(n: usize, perplexity: f64) -> Result<(), ManifoldError> {
    if n < 4 {
        return Err(ManifoldError::Parameter(format!("t-SNE needs n >= 4, got {n}")));
    }
    if perplexity.is_nan() || perplexity < 1.0 || perplexity >= (n as f64 - 1.0) / 3.0 {
        return Err(ManifoldError::Parameter(format!(
            "perplexity {perplexity} must be in [1, (n-1)/3) for n={n}"
        )));
    }
    Ok(())
}

/// Student-t joint probabilities of the current layout; returns (q, weights).
fn q_distribution(y: &[[f64; 2]]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut w = vec![0.0; n * n];
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            w[i * n + j] = v;
            w[j * n + i] = v;
            sum += 2.0 * v;
        }
    }
    let q = w.iter().map(|&v| (v / sum).max(P_MIN)).collect();
    (q, w)
}

/// KL(P || Q) for a layout.
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let (q, _) = q_distribution(y);
    let n = y.len();
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p[i * n + j];
            if pij > 0.0 {
                kl += pij * (pij / q[i * n + j]).ln();
            }
        }
    }
    kl
}

#[derive(Debug, Clone)]
pub struct TsneResult {
    pub embedding: LowDimEmbedding,
    /// KL(P||Q) right after early exaggeration ends (plain P)
    pub kl_after_exaggeration: f64,
    pub kl_final: f64,
}

/// Gradient-descent t-SNE from a seeded Gaussian init, with early
/// exaggeration and standard momentum switching.
pub fn tsne(em: &EmbeddingMatrix, cfg: &TsneConfig) -> Result<TsneResult, ManifoldError> {
    let n = em.len();
    let aff = joint_probabilities(em, cfg.perplexity)?;
    if cfg.iterations == 0 {
        return Err(ManifoldError::Parameter("iterations must be positive".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [INIT_SIGMA * normal(&mut rng), INIT_SIGMA * normal(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0f64; 2]; n];
    let exag_end = EXAGGERATION_ITERS.min(cfg.iterations);
    let mut kl_after_exaggeration = f64::NAN;

    for iter in 0..cfg.iterations {
        let exaggerating = iter < exag_end;
        let (q, w) = q_distribution(&y);
        let mut grad = vec![[0.0f64; 2]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let pij = if exaggerating {
                    EXAGGERATION * aff.p[i * n + j]
                } else {
                    aff.p[i * n + j]
                };
                let mult = 4.0 * (pij - q[i * n + j]) * w[i * n + j];
                grad[i][0] += mult * (y[i][0] - y[j][0]);
                grad[i][1] += mult * (y[i][1] - y[j][1]);
            }
        }
        if grad.iter().any(|g| !g[0].is_finite() || !g[1].is_finite()) {
            return Err(ManifoldError::NonFinite { iteration: iter });
        }
        let momentum = if iter < EXAGGERATION_ITERS { 0.5 } else { 0.8 };
        for i in 0..n {
            for d in 0..2 {
                velocity[i][d] = momentum * velocity[i][d] - cfg.learning_rate * grad[i][d];
                y[i][d] += velocity[i][d];
            }
        }
        if iter + 1 == exag_end {
            kl_after_exaggeration = kl_divergence(&aff.p, &y);
        }
    }
    let kl_final = kl_divergence(&aff.p, &y);
    Ok(TsneResult {
        embedding: LowDimEmbedding { labels: em.labels.clone(), points: y },
        kl_after_exaggeration,
        kl_final,
    })
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_far_clusters() -> EmbeddingMatrix {
        // two tight 4-point clusters (intra <= 0.15) separated by ~100
        let mut data = Vec::new();
        for offset in [0.0, 100.0] {
            for (dx, dy) in [(0.0, 0.0), (0.1, 0.0), (0.0, 0.1), (0.1, 0.1)] {
                data.push(offset + dx);
                data.push(dy);
            }
        }
        EmbeddingMatrix::new((0..8).map(|i| format!("p{i}")).collect(), 2, data)
    }

    #[test]
    fn p_rows_are_distributions() {
        let em = two_far_clusters();
        let aff = joint_probabilities(&em, 2.0).unwrap();
        let n = aff.n;
        let total: f64 = aff.p.iter().sum();
        assert!((total - 1.0).abs() < 1e-6, "P sums to {total}");
        assert!(aff.p.iter().all(|&v| v >= 0.0));
        for i in 0..n {
            assert_eq!(aff.p[i * n + i], 0.0);
        }
    }

    #[test]
    fn achieved_perplexity_close_to_target() {
        let mut data = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            data.push(normal(&mut rng));
            data.push(normal(&mut rng));
            data.push(normal(&mut rng));
        }
        let em = EmbeddingMatrix::new((0..30).map(|i| format!("p{i}")).collect(), 3, data);
        let aff = joint_probabilities(&em, 5.0).unwrap();
        for (i, &ap) in aff.achieved_perplexity.iter().enumerate() {
            assert!((ap - 5.0).abs() < 1e-3, "row {i} achieved {ap}");
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let em = two_far_clusters();
        let cfg = TsneConfig { perplexity: 2.0, iterations: 300, ..TsneConfig::default() };
        let a = tsne(&em, &cfg).unwrap();
        let b = tsne(&em, &cfg).unwrap();
        assert_eq!(a.embedding, b.embedding);
    }

    #[test]
    fn perplexity_precondition() {
        let em = EmbeddingMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            1,
            vec![0.0, 1.0, 2.0],
        );
        assert!(matches!(
            tsne(&em, &TsneConfig { perplexity: 1.0, ..TsneConfig::default() }),
            Err(ManifoldError::Parameter(_))
        ));
        let em8 = two_far_clusters();
        assert!(matches!(
            tsne(&em8, &TsneConfig { perplexity: 0.5, ..TsneConfig::default() }),
            Err(ManifoldError::Parameter(_))
        ));
    }

    #[test]
    fn far_clusters_stay_separated() {
        let em = two_far_clusters();
        let cfg = TsneConfig { perplexity: 2.0, iterations: 500, learning_rate: 100.0, seed: 3 };
        let r = tsne(&em, &cfg).unwrap();
        let y = &r.embedding.points;
        let d = |i: usize, j: usize| {
            ((y[i][0] - y[j][0]).powi(2) + (y[i][1] - y[j][1]).powi(2)).sqrt()
        };
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for i in 0..8 {
            for j in (i + 1)..8 {
                if (i < 4) == (j < 4) {
                    intra.push(d(i, j));
                } else {
                    inter.push(d(i, j));
                }
            }
        }
        for &a in &intra {
            for &b in &inter {
                assert!(a < b, "intra {a} >= inter {b}");
            }
        }
        assert!(r.kl_final <= r.kl_after_exaggeration + 1e-9);
    }
}
