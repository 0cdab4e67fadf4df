//! Unsupervised header embeddings from a variational autoencoder and a
//! convolutional autoencoder. Headers are encoded as fixed-length index
//! sequences over a frequency-ranked vocabulary; the bottleneck activations
//! of a trained model become the embedding rows used for clustering.

mod cae;
mod io;
mod train;
mod vae;

pub use cae::{cae_loss, cae_loss_and_grads, CaeParameters};
pub use io::{read_checkpoint, read_embedding_tsv, write_checkpoint, write_embedding_tsv, write_loss_history_csv, Checkpoint};
pub use train::{train_cae, train_vae, EpochLoss, Optimizer, OptimizerKind, TrainError};
pub use vae::{vae_forward, vae_loss, vae_loss_and_grads, Noise, VaeForwardOutput, VaeParameters};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::HeaderRecord;

pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token vocabulary with reserved PAD=0 and UNK=1 slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    index_to_token: Vec<String>,
    #[serde(skip)]
    token_to_index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_tokens(index_to_token: Vec<String>) -> Self {
        assert!(index_to_token.len() >= 2);
        assert_eq!(index_to_token[PAD_INDEX], PAD_TOKEN);
        assert_eq!(index_to_token[UNK_INDEX], UNK_TOKEN);
        let token_to_index = index_to_token
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary { index_to_token, token_to_index }
    }

    pub fn size(&self) -> usize {
        self.index_to_token.len()
    }

    pub fn index(&self, token: &str) -> usize {
        self.token_to_index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.index_to_token[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.index_to_token
    }
}

/// Header as a fixed-length sequence of vocabulary indices, PAD-filled.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedHeader {
    pub indices: Vec<usize>,
}

/// Rank tokens by (count desc, token asc), keep the top `max_size - 2`,
/// inject PAD and UNK.
pub fn build_vocabulary(
    headers: &[HeaderRecord],
    max_size: usize,
    min_token_count: usize,
) -> Vocabulary {
    assert!(max_size >= 3, "max_size must leave room beyond PAD/UNK");
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for h in headers {
        for t in &h.tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_token_count)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - 2);
    let mut index_to_token = Vec::with_capacity(ranked.len() + 2);
    index_to_token.push(PAD_TOKEN.to_string());
    index_to_token.push(UNK_TOKEN.to_string());
    index_to_token.extend(ranked.into_iter().map(|(t, _)| t.to_string()));
    Vocabulary::from_tokens(index_to_token)
}

/// First min(|tokens|, L) positions are token indices (UNK for OOV),
/// the remainder PAD; over-length headers truncate at L.
pub fn encode_header(h: &HeaderRecord, v: &Vocabulary, seq_len: usize) -> EncodedHeader {
    assert!(seq_len >= 1);
    let mut indices = vec![PAD_INDEX; seq_len];
    for (slot, tok) in indices.iter_mut().zip(&h.tokens) {
        *slot = v.index(tok);
    }
    EncodedHeader { indices }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Vae,
    Cae,
}

/// Autoencoder training configuration. `conv_*`/`pool_factor` apply to the
/// CAE only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seq_len: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub validation_fraction: f64,
    pub eps_std: f64,
    pub conv_width: usize,
    pub conv_channels: usize,
    pub pool_factor: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seq_len: 15,
            embed_dim: 100,
            hidden_dim: 100,
            latent_dim: 32,
            batch_size: 64,
            epochs: 1000,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::RmsProp,
            seed: 0,
            validation_fraction: 0.1,
            eps_std: 1.0,
            conv_width: 3,
            conv_channels: 64,
            pool_factor: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.seq_len == 0 || self.embed_dim == 0 || self.hidden_dim == 0 || self.latent_dim == 0 {
            return bad("dimensions must be positive");
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return bad("batch_size and epochs must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction <= 0.5) {
            return bad("validation_fraction must be in (0, 0.5]");
        }
        if self.conv_width == 0 || self.conv_channels == 0 || self.pool_factor == 0 {
            return bad("conv parameters must be positive");
        }
        Ok(())
    }
}

/// n x d bottleneck embeddings, row-aligned with header labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub labels: Vec<String>,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(labels: Vec<String>, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(labels.len() * dim, data.len());
        assert!(data.iter().all(|v| v.is_finite()), "embedding contains NaN/Inf");
        EmbeddingMatrix { labels, dim, data }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// A trained autoencoder of either architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Autoencoder {
    Vae(VaeParameters),
    Cae(CaeParameters),
}

impl Autoencoder {
    /// Noise-free bottleneck embedding per header: the VAE mean vector, or
    /// the flattened pooled activations of the CAE. Duplicate inputs yield
    /// identical rows.
    pub fn embed_headers(&self, encoded: &[EncodedHeader], labels: &[String]) -> EmbeddingMatrix {
        assert_eq!(encoded.len(), labels.len(), "labels must align with headers");
        match self {
            Autoencoder::Vae(p) => {
                let mut data = Vec::with_capacity(encoded.len() * p.latent_dim);
                for h in encoded {
                    data.extend_from_slice(&p.encode_mean(h));
                }
                EmbeddingMatrix::new(labels.to_vec(), p.latent_dim, data)
            }
            Autoencoder::Cae(p) => {
                let dim = p.bottleneck_dim();
                let mut data = Vec::with_capacity(encoded.len() * dim);
                for h in encoded {
                    data.extend_from_slice(&p.encode_bottleneck(h));
                }
                EmbeddingMatrix::new(labels.to_vec(), dim, data)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, HeaderLevel};

    fn rec(text: &str) -> HeaderRecord {
        HeaderRecord {
            doc_id: "d".into(),
            level: HeaderLevel::Top,
            normalized: text.into(),
            tokens: tokenize(text),
        }
    }

    #[test]
    fn vocabulary_rank_rule() {
        let headers: Vec<HeaderRecord> = std::iter::repeat_n(rec("intro of"), 3)
            .chain(std::iter::repeat_n(rec("intro"), 2))
            .chain(std::iter::once(rec("x")))
            .collect();
        // counts: intro 5, of 3, x 1
        let v = build_vocabulary(&headers, 4, 1);
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "intro", "of"]);
        assert_eq!(v.index("intro"), 2);
        assert_eq!(v.index("zzz"), UNK_INDEX);
    }

    #[test]
    fn vocabulary_empty_corpus() {
        let v = build_vocabulary(&[], 10, 1);
        assert_eq!(v.tokens(), &["<pad>", "<unk>"]);
    }

    #[test]
    fn vocabulary_tie_break() {
        let headers = vec![rec("a b"), rec("a b")];
        let v = build_vocabulary(&headers, 3, 1);
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a"]);
    }

    #[test]
    fn vocabulary_min_count_filter() {
        let headers = vec![rec("a a b")]; // a:2, b:1
        let v = build_vocabulary(&headers, 10, 2);
        assert_eq!(v.tokens(), &["<pad>", "<unk>", "a"]);
    }

    #[test]
    fn encode_pads_and_truncates() {
        let v = Vocabulary::from_tokens(vec![
            "<pad>".into(), "<unk>".into(), "intro".into(), "of".into(),
        ]);
        let e = encode_header(&rec("intro of"), &v, 4);
        assert_eq!(e.indices, [2, 3, 0, 0]);
        let e = encode_header(&rec("zzz"), &v, 2);
        assert_eq!(e.indices, [1, 0]);
        let e = encode_header(&rec("intro of intro of intro of"), &v, 4);
        assert_eq!(e.indices, [2, 3, 2, 3]);
    }
}
