//! Variational autoencoder over encoded headers.
//!
//! Encoder: token embedding with ReLU, one dense hidden layer, then two
//! linear heads producing the latent mean and log-sigma. A latent point is
//! sampled as `z = mean + exp(log_sigma) * eps`. The decoder maps z through
//! a dense layer back to per-position token probabilities via a sigmoid.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NonFiniteError, Tape, Tensor, VarId, BCE_CLAMP};

use super::{EncodedHeader, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaeParameters {
    pub vocab_size: usize,
    pub seq_len: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub eps_std: f64,
    pub token_embedding: Tensor,
    pub enc_w: Tensor,
    pub enc_b: Tensor,
    pub mu_w: Tensor,
    pub mu_b: Tensor,
    pub logsig_w: Tensor,
    pub logsig_b: Tensor,
    pub dec_w: Tensor,
    pub dec_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

pub(super) fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub(super) fn init_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>, std: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| std * sample_normal(rng)).collect();
    Tensor::new(shape, data)
}

impl VaeParameters {
    pub fn init(cfg: &TrainConfig, vocab_size: usize, rng: &mut ChaCha8Rng) -> Self {
        let (l, e, h, d) = (cfg.seq_len, cfg.embed_dim, cfg.hidden_dim, cfg.latent_dim);
        let v = vocab_size;
        let xavier = |fan_in: usize| (1.0 / fan_in as f64).sqrt();
        VaeParameters {
            vocab_size: v,
            seq_len: l,
            embed_dim: e,
            hidden_dim: h,
            latent_dim: d,
            eps_std: cfg.eps_std,
            token_embedding: init_tensor(rng, vec![v, e], 0.1),
            enc_w: init_tensor(rng, vec![l * e, h], xavier(l * e)),
            enc_b: Tensor::zeros(vec![h]),
            mu_w: init_tensor(rng, vec![h, d], xavier(h)),
            mu_b: Tensor::zeros(vec![d]),
            logsig_w: init_tensor(rng, vec![h, d], xavier(h)),
            logsig_b: Tensor::zeros(vec![d]),
            dec_w: init_tensor(rng, vec![d, h], xavier(d)),
            dec_b: Tensor::zeros(vec![h]),
            out_w: init_tensor(rng, vec![h, l * v], xavier(h)),
            out_b: Tensor::zeros(vec![l * v]),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.token_embedding,
            &self.enc_w,
            &self.enc_b,
            &self.mu_w,
            &self.mu_b,
            &self.logsig_w,
            &self.logsig_b,
            &self.dec_w,
            &self.dec_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.token_embedding,
            &mut self.enc_w,
            &mut self.enc_b,
            &mut self.mu_w,
            &mut self.mu_b,
            &mut self.logsig_w,
            &mut self.logsig_b,
            &mut self.dec_w,
            &mut self.dec_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    /// Build the full loss graph for one example. Returns graph handles for
    /// the latent/reconstruction nodes, the three loss scalars, and the
    /// parameter leaves in `tensors()` order.
    pub(super) fn loss_graph(
        &self,
        tape: &mut Tape,
        input: &EncodedHeader,
        eps: &[f64],
    ) -> VaeGraph {
        assert_eq!(input.indices.len(), self.seq_len);
        assert_eq!(eps.len(), self.latent_dim);
        let (l, v) = (self.seq_len, self.vocab_size);

        let params: Vec<VarId> = self.tensors().into_iter().map(|t| tape.leaf(t.clone())).collect();
        let [emb_id, enc_w, enc_b, mu_w, mu_b, ls_w, ls_b, dec_w, dec_b, out_w, out_b] =
            params[..] else { unreachable!() };

        let emb = tape.gather(emb_id, &input.indices);
        let emb = tape.relu(emb);
        let flat = tape.reshape(emb, vec![1, l * self.embed_dim]);
        let h = tape.matmul(flat, enc_w);
        let h = tape.add_row_bias(h, enc_b);
        let h = tape.relu(h);
        let mu = tape.matmul(h, mu_w);
        let mu = tape.add_row_bias(mu, mu_b);
        let ls = tape.matmul(h, ls_w);
        let ls = tape.add_row_bias(ls, ls_b);
        let eps_leaf = tape.leaf(Tensor::new(vec![1, self.latent_dim], eps.to_vec()));
        let sig = tape.exp(ls);
        let noise = tape.mul(sig, eps_leaf);
        let z = tape.add(mu, noise);
        let dh = tape.matmul(z, dec_w);
        let dh = tape.add_row_bias(dh, dec_b);
        let dh = tape.relu(dh);
        let logits = tape.matmul(dh, out_w);
        let logits = tape.add_row_bias(logits, out_b);
        let logits = tape.reshape(logits, vec![l, v]);
        let recon = tape.sigmoid(logits);

        let target = one_hot(input, v);
        let recon_loss = tape.bce_sum(recon, &target);
        // KL(N(mu, sigma) || N(0,1)) = -1/2 sum(1 + 2*ls - mu^2 - exp(2*ls))
        let two_ls = tape.scale(ls, 2.0);
        let e2 = tape.exp(two_ls);
        let mu2 = tape.mul(mu, mu);
        let inner = tape.sub(two_ls, mu2);
        let inner = tape.sub(inner, e2);
        let inner = tape.add_scalar(inner, 1.0);
        let kl_sum = tape.sum(inner);
        let kl = tape.scale(kl_sum, -0.5);
        let total = tape.add(recon_loss, kl);

        VaeGraph { params, mu, log_sigma: ls, z, recon, recon_loss, kl, total }
    }
}

#[cfg_attr(not(test), allow(dead_code))] // loss components are test telemetry
pub(super) struct VaeGraph {
    pub params: Vec<VarId>,
    pub mu: VarId,
    pub log_sigma: VarId,
    pub z: VarId,
    pub recon: VarId,
    pub recon_loss: VarId,
    pub kl: VarId,
    pub total: VarId,
}

/// L x V one-hot expansion of a target header.
pub(super) fn one_hot(input: &EncodedHeader, vocab_size: usize) -> Vec<f64> {
    let mut t = vec![0.0; input.indices.len() * vocab_size];
    for (pos, &idx) in input.indices.iter().enumerate() {
        t[pos * vocab_size + idx] = 1.0;
    }
    t
}

/// One forward pass worth of latent and reconstruction values.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeForwardOutput {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
    pub z: Vec<f64>,
    /// L x V row-major reconstruction probabilities in (0,1).
    pub reconstruction: Vec<f64>,
}

/// Noise source for the reparameterized latent sample.
#[derive(Debug, Clone)]
pub enum Noise {
    Zero,
    /// one epsilon vector per batch row
    Explicit(Vec<Vec<f64>>),
    Seeded(u64),
}

/// Forward pass over a batch. `z = mu + exp(log_sigma) * eps` per row.
pub fn vae_forward(
    p: &VaeParameters,
    batch: &[EncodedHeader],
    noise: &Noise,
) -> Result<Vec<VaeForwardOutput>, NonFiniteError> {
    let mut seeded = match noise {
        Noise::Seeded(s) => Some(ChaCha8Rng::seed_from_u64(*s)),
        _ => None,
    };
    let mut out = Vec::with_capacity(batch.len());
    for (row, input) in batch.iter().enumerate() {
        let eps: Vec<f64> = match noise {
            Noise::Zero => vec![0.0; p.latent_dim],
            Noise::Explicit(rows) => rows[row].clone(),
            Noise::Seeded(_) => {
                let rng = seeded.as_mut().unwrap();
                (0..p.latent_dim).map(|_| p.eps_std * sample_normal(rng)).collect()
            }
        };
        let mut tape = Tape::new();
        let g = p.loss_graph(&mut tape, input, &eps);
        tape.check_finite()?;
        out.push(VaeForwardOutput {
            mu: tape.value(g.mu).data.clone(),
            log_sigma: tape.value(g.log_sigma).data.clone(),
            z: tape.value(g.z).data.clone(),
            reconstruction: tape.value(g.recon).data.clone(),
        });
    }
    Ok(out)
}

/// (reconstruction, kl, total) loss for one forward output against its
/// target. Reconstruction is summed binary cross-entropy over the L x V
/// one-hot expansion, with probabilities clamped away from {0,1}.
pub fn vae_loss(out: &VaeForwardOutput, target: &EncodedHeader, vocab_size: usize) -> (f64, f64, f64) {
    let expanded = one_hot(target, vocab_size);
    assert_eq!(out.reconstruction.len(), expanded.len());
    let mut recon = 0.0;
    for (&p, &t) in out.reconstruction.iter().zip(&expanded) {
        let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        recon -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
    }
    let mut kl = 0.0;
    for (&m, &ls) in out.mu.iter().zip(&out.log_sigma) {
        kl += -0.5 * (1.0 + 2.0 * ls - m * m - (2.0 * ls).exp());
    }
    (recon, kl, recon + kl)
}

/// Total loss and analytic per-tensor gradients for one example at an
/// explicit noise vector, in `tensors()` order.
pub fn vae_loss_and_grads(
    p: &VaeParameters,
    input: &EncodedHeader,
    eps: &[f64],
) -> Result<(f64, Vec<Vec<f64>>), NonFiniteError> {
    let mut tape = Tape::new();
    let g = p.loss_graph(&mut tape, input, eps);
    tape.check_finite()?;
    tape.backward(g.total);
    let grads = g.params.iter().map(|&id| tape.grad(id).to_vec()).collect();
    Ok((tape.value(g.total).data[0], grads))
}

impl VaeParameters {
    /// Noise-free latent mean for one header (the embedding row).
    pub fn encode_mean(&self, input: &EncodedHeader) -> Vec<f64> {
        let mut tape = Tape::new();
        let g = self.loss_graph(&mut tape, input, &vec![0.0; self.latent_dim]);
        tape.value(g.mu).data.clone()
    }
}
