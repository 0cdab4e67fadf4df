//! Checkpoint and telemetry file formats.
//!
//! Checkpoints are JSON: hyperparameters, seed, vocabulary and row-major
//! tensor payloads. Loss history is CSV `epoch,train_total,val_total`.
//! Embedding matrices are TSV `label\tx1\t...\txd` using shortest
//! round-trip float text.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Autoencoder, EmbeddingMatrix, EpochLoss, TrainConfig, Vocabulary};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vec<String>,
    pub model: Autoencoder,
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("model i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file malformed: {0}")]
    Format(String),
}

pub fn write_checkpoint<W: Write>(w: &mut W, ckpt: &Checkpoint) -> Result<(), ModelIoError> {
    serde_json::to_writer(&mut *w, ckpt).map_err(|e| ModelIoError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<(Checkpoint, Vocabulary), ModelIoError> {
    let ckpt: Checkpoint =
        serde_json::from_reader(r).map_err(|e| ModelIoError::Format(e.to_string()))?;
    let vocab = Vocabulary::from_tokens(ckpt.vocab.clone());
    Ok((ckpt, vocab))
}

pub fn write_loss_history_csv<W: Write>(w: &mut W, history: &[EpochLoss]) -> std::io::Result<()> {
    writeln!(w, "epoch,train_total,val_total")?;
    for e in history {
        writeln!(w, "{},{},{}", e.epoch, e.train_total, e.val_total)?;
    }
    Ok(())
}

pub fn write_embedding_tsv<W: Write>(w: &mut W, em: &EmbeddingMatrix) -> std::io::Result<()> {
    for (i, label) in em.labels.iter().enumerate() {
        write!(w, "{label}")?;
        for v in em.row(i) {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_embedding_tsv<R: BufRead>(r: R) -> Result<EmbeddingMatrix, ModelIoError> {
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut dim = None;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let label = parts
            .next()
            .ok_or_else(|| ModelIoError::Format(format!("line {}: empty", lineno + 1)))?;
        let row: Result<Vec<f64>, _> = parts.map(|p| p.parse::<f64>()).collect();
        let row = row.map_err(|e| ModelIoError::Format(format!("line {}: {e}", lineno + 1)))?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(ModelIoError::Format(format!(
                    "line {}: expected {d} values, got {}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        labels.push(label.to_string());
        data.extend(row);
    }
    let dim = dim.unwrap_or(0);
    Ok(EmbeddingMatrix::new(labels, dim, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{train_vae, OptimizerKind};
    use crate::encoder::EncodedHeader;

    #[test]
    fn embedding_tsv_round_trip_lossless() {
        let em = EmbeddingMatrix::new(
            vec!["introduction".into(), "related work".into()],
            3,
            vec![0.1, -2.5e-7, 1.0 / 3.0, 4.0, 5.5, -0.0],
        );
        let mut buf = Vec::new();
        write_embedding_tsv(&mut buf, &em).unwrap();
        let back = read_embedding_tsv(&buf[..]).unwrap();
        assert_eq!(back, em);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = TrainConfig {
            seq_len: 3,
            embed_dim: 4,
            hidden_dim: 4,
            latent_dim: 2,
            batch_size: 4,
            epochs: 2,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 1,
            validation_fraction: 0.25,
            ..TrainConfig::default()
        };
        let corpus: Vec<EncodedHeader> = (0..8)
            .map(|i| EncodedHeader { indices: vec![2 + (i % 3), 0, 0] })
            .collect();
        let (model, _) = train_vae(&corpus, 5, &cfg).unwrap();
        let ckpt = Checkpoint {
            config: cfg,
            vocab: vec!["<pad>".into(), "<unk>".into(), "a".into(), "b".into(), "c".into()],
            model: Autoencoder::Vae(model),
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ckpt).unwrap();
        let (back, vocab) = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.model, ckpt.model);
        assert_eq!(vocab.size(), 5);
    }

    #[test]
    fn loss_csv_format() {
        let mut buf = Vec::new();
        write_loss_history_csv(
            &mut buf,
            &[EpochLoss { epoch: 1, train_total: 2.5, val_total: 3.0 }],
        )
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "epoch,train_total,val_total\n1,2.5,3\n");
    }
}
