//! Convolutional autoencoder over encoded headers.
//!
//! Encoder: token embedding with ReLU, a same-padded Conv1D + ReLU, then
//! max pooling; the flattened pooled activations are the bottleneck.
//! Decoder mirrors with upsampling, a second Conv1D + ReLU and a
//! per-position projection back to token probabilities via a sigmoid.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NonFiniteError, Tape, Tensor, VarId};

use super::vae::{init_tensor, one_hot};
use super::{EncodedHeader, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaeParameters {
    pub vocab_size: usize,
    pub seq_len: usize,
    pub embed_dim: usize,
    pub conv_width: usize,
    pub conv_channels: usize,
    pub pool_factor: usize,
    pub token_embedding: Tensor,
    pub conv_w: Tensor,
    pub conv_b: Tensor,
    pub deconv_w: Tensor,
    pub deconv_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl CaeParameters {
    pub fn init(cfg: &TrainConfig, vocab_size: usize, rng: &mut ChaCha8Rng) -> Self {
        let (l, e, k, c) = (cfg.seq_len, cfg.embed_dim, cfg.conv_width, cfg.conv_channels);
        let _ = l;
        let v = vocab_size;
        let xavier = |fan_in: usize| (1.0 / fan_in as f64).sqrt();
        CaeParameters {
            vocab_size: v,
            seq_len: cfg.seq_len,
            embed_dim: e,
            conv_width: k,
            conv_channels: c,
            pool_factor: cfg.pool_factor,
            token_embedding: init_tensor(rng, vec![v, e], 0.1),
            conv_w: init_tensor(rng, vec![k, e, c], xavier(k * e)),
            conv_b: Tensor::zeros(vec![c]),
            deconv_w: init_tensor(rng, vec![k, c, c], xavier(k * c)),
            deconv_b: Tensor::zeros(vec![c]),
            out_w: init_tensor(rng, vec![c, v], xavier(c)),
            out_b: Tensor::zeros(vec![v]),
        }
    }

    pub fn pooled_len(&self) -> usize {
        self.seq_len.div_ceil(self.pool_factor)
    }

    pub fn bottleneck_dim(&self) -> usize {
        self.pooled_len() * self.conv_channels
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.token_embedding,
            &self.conv_w,
            &self.conv_b,
            &self.deconv_w,
            &self.deconv_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.token_embedding,
            &mut self.conv_w,
            &mut self.conv_b,
            &mut self.deconv_w,
            &mut self.deconv_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub(super) fn loss_graph(&self, tape: &mut Tape, input: &EncodedHeader) -> CaeGraph {
        assert_eq!(input.indices.len(), self.seq_len);
        let params: Vec<VarId> = self.tensors().into_iter().map(|t| tape.leaf(t.clone())).collect();
        let [emb_id, conv_w, conv_b, deconv_w, deconv_b, out_w, out_b] = params[..] else {
            unreachable!()
        };

        let emb = tape.gather(emb_id, &input.indices);
        let emb = tape.relu(emb);
        let c = tape.conv1d_same(emb, conv_w, conv_b);
        let c = tape.relu(c);
        let bottleneck = tape.max_pool1d(c, self.pool_factor);
        let u = tape.upsample1d(bottleneck, self.pool_factor, self.seq_len);
        let d = tape.conv1d_same(u, deconv_w, deconv_b);
        let d = tape.relu(d);
        let logits = tape.matmul(d, out_w);
        let logits = tape.add_row_bias(logits, out_b);
        let recon = tape.sigmoid(logits);
        let target = one_hot(input, self.vocab_size);
        let recon_loss = tape.bce_sum(recon, &target);

        CaeGraph { params, bottleneck, recon, total: recon_loss }
    }

    /// Flattened pooled activations for one header (the embedding row).
    pub fn encode_bottleneck(&self, input: &EncodedHeader) -> Vec<f64> {
        let mut tape = Tape::new();
        let g = self.loss_graph(&mut tape, input);
        tape.value(g.bottleneck).data.clone()
    }

    /// Per-position argmax decode of the reconstruction.
    pub fn reconstruct_indices(&self, input: &EncodedHeader) -> Vec<usize> {
        let mut tape = Tape::new();
        let g = self.loss_graph(&mut tape, input);
        let recon = &tape.value(g.recon).data;
        let v = self.vocab_size;
        (0..self.seq_len)
            .map(|pos| {
                let row = &recon[pos * v..(pos + 1) * v];
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .unwrap()
            })
            .collect()
    }
}

pub(super) struct CaeGraph {
    pub params: Vec<VarId>,
    pub bottleneck: VarId,
    pub recon: VarId,
    pub total: VarId,
}

/// Summed BCE reconstruction loss for one example.
pub fn cae_loss(p: &CaeParameters, input: &EncodedHeader) -> Result<f64, NonFiniteError> {
    let mut tape = Tape::new();
    let g = p.loss_graph(&mut tape, input);
    tape.check_finite()?;
    Ok(tape.value(g.total).data[0])
}

/// Loss and analytic per-tensor gradients for one example, in `tensors()`
/// order.
pub fn cae_loss_and_grads(
    p: &CaeParameters,
    input: &EncodedHeader,
) -> Result<(f64, Vec<Vec<f64>>), NonFiniteError> {
    let mut tape = Tape::new();
    let g = p.loss_graph(&mut tape, input);
    tape.check_finite()?;
    tape.backward(g.total);
    let grads = g.params.iter().map(|&id| tape.grad(id).to_vec()).collect();
    Ok((tape.value(g.total).data[0], grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn cfg() -> TrainConfig {
        TrainConfig {
            seq_len: 4,
            embed_dim: 3,
            conv_width: 3,
            conv_channels: 2,
            pool_factor: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn pool_factor_one_preserves_length() {
        let mut c = cfg();
        c.pool_factor = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = CaeParameters::init(&c, 5, &mut rng);
        let h = EncodedHeader { indices: vec![2, 3, 4, 0] };
        let mut tape = Tape::new();
        let g = p.loss_graph(&mut tape, &h);
        assert_eq!(tape.value(g.bottleneck).shape, vec![4, 2]);
        assert_eq!(tape.value(g.recon).shape, vec![4, 5]);
    }

    #[test]
    fn bottleneck_shape_and_determinism() {
        let c = cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = CaeParameters::init(&c, 5, &mut rng);
        let h = EncodedHeader { indices: vec![2, 3, 4, 0] };
        let b1 = p.encode_bottleneck(&h);
        let b2 = p.encode_bottleneck(&h);
        assert_eq!(b1, b2);
        assert_eq!(b1.len(), p.bottleneck_dim());
    }
}
